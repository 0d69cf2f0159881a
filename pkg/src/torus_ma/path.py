"""Continuation in t from t1 down to t_min with warm starts and step halving."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import InsufficientData, TorusMAError
from .grid import min_eigenvalue, trace_S
from .solver import ContinuityState, ProblemData, SolverConfig, solve_at_t

logger = logging.getLogger(__name__)

PATH_COLUMNS = ("t", "max_u", "min_u", "volume", "max_S", "min_eig", "newton_iters", "status")


def choose_t1(p: ProblemData, margin: float = 1.1, tol: float = 1e-6) -> float:
    """``margin * max(1, t*)`` with ``t* = inf{t : t omega + ddc ricci > 0}`` found by bisection."""
    if not margin > 1:
        raise ValueError("margin must exceed 1")

    def positive(t):
        return min_eigenvalue(p.form(t)) > 0

    lo, hi = 0.0, 1.0
    if positive(0.0):
        t_star = 0.0
    else:
        while not positive(hi):
            lo, hi = hi, 2 * hi
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if positive(mid):
                hi = mid
            else:
                lo = mid
        t_star = hi
    return margin * max(1.0, t_star)


@dataclass
class PathSchedule:
    t1: float
    t_min: float
    initial_step_ratio: float = 0.7
    min_step_ratio: float = 1e-3
    geometric: bool = True

    def __post_init__(self):
        if not 0 < self.t_min < self.t1:
            raise ValueError(f"need 0 < t_min < t1, got t_min={self.t_min}, t1={self.t1}")
        for name in ("initial_step_ratio", "min_step_ratio"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")

    def next_t(self, t: float) -> float:
        if self.geometric:
            nxt = t * self.initial_step_ratio
        else:
            nxt = t - (1 - self.initial_step_ratio) * self.t1
        return max(nxt, self.t_min)


@dataclass
class PathEntry:
    t: float
    max_u: float
    min_u: float
    volume: float
    max_S: float
    min_eig: float
    newton_iters: int
    residual_sup: float
    quadratic_constant: float | None
    residual_floor: float | None
    cold_iters: int | None = None
    report: object = None

    @classmethod
    def from_state(cls, s: ContinuityState) -> "PathEntry":
        return cls(
            t=s.t,
            max_u=float(s.u.max()),
            min_u=float(s.u.min()),
            volume=s.volume,
            max_S=float(trace_S(s.omega_t, s.problem.omega).max()),
            min_eig=min_eigenvalue(s.omega_t),
            newton_iters=s.newton_iters,
            residual_sup=s.residual_sup,
            quadratic_constant=s.quadratic_constant(),
            residual_floor=s.residual_floor,
        )

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "report"}
        return d


@dataclass
class PathTrace:
    entries: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    status: str = "running"
    last_good_t: float | None = None
    events: list = field(default_factory=list)

    @property
    def ts(self):
        return np.array([e.t for e in self.entries])

    @property
    def volumes(self):
        return np.array([e.volume for e in self.entries])

    def to_csv(self) -> str:
        """Accepted entries and failed attempts in the order they occurred."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PATH_COLUMNS)
        for kind, item in self.events:
            if kind == "ok":
                e = item
                w.writerow([_fmt(e.t), _fmt(e.max_u), _fmt(e.min_u), _fmt(e.volume),
                            _fmt(e.max_S), _fmt(e.min_eig), e.newton_iters, "ok"])
            else:
                w.writerow([_fmt(item["t"]), "", "", "", "", "", "", item["error"]])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "last_good_t": self.last_good_t,
            "entries": [e.to_dict() for e in self.entries],
            "failures": self.failures,
        }


def _fmt(x) -> str:
    return "%.17g" % x


def run_path(p: ProblemData, sched: PathSchedule, cfg: SolverConfig | None = None,
             callback=None, compare_cold: bool = False) -> PathTrace:
    """Follow ``(MA)_t`` from ``sched.t1`` down to ``sched.t_min``.

    Each solve is warm-started from the previous ``u`` (the first one from
    zero).  When a solve fails the target is moved to the geometric mean of the
    last good ``t`` and the failed one; once the step shrinks below
    ``min_step_ratio * t`` the run stops with status ``StepUnderflow``.

    ``callback(state)`` runs on each accepted state; its return value is kept
    on the entry as ``report``.
    """
    cfg = cfg or SolverConfig()
    trace = PathTrace()
    u_prev = None
    t_prev = None
    t = sched.t1
    while True:
        try:
            state = solve_at_t(p, t, u_prev, cfg)
        except TorusMAError as exc:
            trace.failures.append({"t": t, "error": type(exc).__name__, "message": str(exc)})
            trace.events.append(("fail", trace.failures[-1]))
            logger.info("solve failed at t=%g: %s", t, exc)
            if t_prev is None:
                trace.status = "StepUnderflow"
                return trace
            t_try = math.sqrt(t_prev * t)
            if t_prev - t_try < sched.min_step_ratio * t_prev:
                trace.status = "StepUnderflow"
                return trace
            t = t_try
            continue
        entry = PathEntry.from_state(state)
        if compare_cold:
            try:
                entry.cold_iters = solve_at_t(p, t, None, cfg).newton_iters
            except TorusMAError:
                entry.cold_iters = None
        if callback is not None:
            entry.report = callback(state)
        trace.entries.append(entry)
        trace.events.append(("ok", entry))
        trace.last_good_t = t
        u_prev, t_prev = state.u, t
        if t <= sched.t_min:
            trace.status = "complete"
            return trace
        t = sched.next_t(t)


@dataclass
class VolumeFit:
    coefficients: np.ndarray
    intercept: float
    residual_norm: float
    degree: int

    def to_dict(self) -> dict:
        return {
            "coefficients": [float(c) for c in self.coefficients],
            "intercept": self.intercept,
            "residual_norm": self.residual_norm,
            "degree": self.degree,
        }


def extrapolate_volume(trace: PathTrace, degree: int) -> VolumeFit:
    """Least-squares polynomial fit of ``int omega_t^n`` against ``t``.

    The constant coefficient estimates the volume of the canonical class; on
    the flat torus it must vanish.  Coefficients are in ascending order.
    """
    t, v = trace.ts, trace.volumes
    if len(t) < degree + 2:
        raise InsufficientData(f"need at least {degree + 2} path entries, have {len(t)}")
    coef = P.polyfit(t, v, degree)
    res = float(np.linalg.norm(P.polyval(t, coef) - v))
    return VolumeFit(coef, float(coef[0]), res, degree)


def proxy_growth(trace: PathTrace) -> dict:
    """Least-squares growth of the closedness proxies in ``log t``.

    ``min_eig`` and ``max_S`` are fitted as powers (slope of ``log value``
    against ``log t``); ``max |u|`` linearly against ``log t``.  Flat paths give
    exponents ``1`` and ``-1`` and slope ``-n``.
    """
    if len(trace.entries) < 2:
        raise InsufficientData("need at least 2 path entries")
    lt = np.log(trace.ts)
    out = {}
    for key, vals, logy in (
            ("min_eig", [e.min_eig for e in trace.entries], True),
            ("max_S", [e.max_S for e in trace.entries], True),
            ("max_abs_u", [max(abs(e.max_u), abs(e.min_u)) for e in trace.entries], False)):
        y = np.asarray(vals, dtype=float)
        if logy:
            if np.any(y <= 0):
                out[key] = None
                continue
            y = np.log(y)
        intercept, slope = P.polyfit(lt, y, 1)
        out[key] = {"slope": float(slope), "intercept": float(intercept),
                    "kind": "power" if logy else "linear"}
    return out


def w_cauchy(members) -> dict:
    """L^2 distances between consecutive ``w_t = log(1 + max u_t - u_t)`` along a path.

    ``members`` is a list of ``(t, u)``; the flat torus measure is used.
    Diagnostic only: a shrinking sequence indicates ``w_t`` settling as
    ``t`` decreases.
    """
    members = sorted(members, key=lambda m: -m[0])
    ts = [float(t) for t, _ in members]
    ws = [np.log1p(u.max() - u) for _, u in members]
    dist = [float(np.sqrt(np.mean((b - a) ** 2))) for a, b in zip(ws, ws[1:])]
    return {"t": ts, "l2_norm": [float(np.sqrt(np.mean(w ** 2))) for w in ws], "l2_step": dist}
