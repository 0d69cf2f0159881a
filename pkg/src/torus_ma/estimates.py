"""Pointwise and integral estimate checkers for solver states and synthetic fields.

Every checker returns an :class:`EstimateRecord`.  ``worst_margin`` is the
most violating value of ``LHS - RHS`` written so that the estimate reads
``margin >= 0``.  A record is

* ``skip`` when its hypothesis is false or a denominator vanishes (the
  margin is still computed and stored whenever it is defined),
* ``pass`` when ``worst_margin >= -tolerance``,
* ``fail`` otherwise.

Hypothesis-gated checkers accept ``assume_hypothesis=True``.  The conclusion is
then evaluated even on inputs that break the hypothesis, which is how the
detector tests produce genuine failures.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .curvature import KappaSummary
from .grid import (TorusGrid, ddc, det, grad_norm_sq, integrate, inverse, laplacian,
                   log_ratio_det, min_eigenvalue, min_eigenvalue_field,
                   relative_eigenvalues, trace, trace_S)
from .solver import ContinuityState, ProblemData, make_state
from .testbeds import random_potential, safe_metric_potential

CHECKS = (
    "schwarz",
    "S_upper_negative",
    "S_upper_nonpositive",
    "max_u",
    "sandwich_and_inf_u",
    "newton_maclaurin",
    "integral_ratio",
    "hormander",
    "cheng_yau",
    "log_compactness",
    "holder_lower_bound",
    "liminf_max_u",
)

CSV_COLUMNS = ("t", "check", "hypothesis_held", "worst_margin", "status")

HYPOTHESIS_TOL = 1e-10


@dataclass(frozen=True)
class Tolerance:
    """Magnitude-scaled tolerance ``max(abs, rel * scale)``."""

    rel: float = 1e-8
    abs: float = 1e-10

    def __call__(self, scale) -> float:
        return max(self.abs, self.rel * float(scale))


DEFAULT_TOL = Tolerance()


@dataclass
class EstimateRecord:
    name: str
    t: float | None
    hypothesis_held: bool
    worst_margin: float | None
    location: tuple | None
    tolerance: float
    status: str
    data: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "t": self.t,
            "hypothesis_held": bool(self.hypothesis_held),
            "worst_margin": self.worst_margin,
            "location": list(self.location) if self.location is not None else None,
            "tolerance": self.tolerance,
            "status": self.status,
            "data": _jsonable(self.data),
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _status(hypothesis_held, margin, tol, degenerate=False):
    if degenerate or not hypothesis_held:
        return "skip"
    if margin is None or not np.isfinite(margin):
        return "fail"
    return "pass" if margin >= -tol else "fail"


def _worst(field_margin):
    """Minimum of a margin field with its grid index."""
    k = int(np.argmin(field_margin))
    loc = tuple(int(i) for i in np.unravel_index(k, np.shape(field_margin)))
    return float(np.ravel(field_margin)[k]), loc


def _record(name, t, held, margin_field_or_value, scale, tol, degenerate=False, data=None):
    if np.ndim(margin_field_or_value) > 0:
        margin, loc = _worst(margin_field_or_value)
    else:
        margin = None if margin_field_or_value is None else float(margin_field_or_value)
        loc = None
    tau = tol(scale)
    return EstimateRecord(name, t, bool(held), margin, loc, tau,
                          _status(held, margin, tau, degenerate), data or {})


def _summary(state: ContinuityState, summary: KappaSummary | None) -> KappaSummary:
    return summary if summary is not None else state.problem.kappa()


def synthetic_state(p: ProblemData, t: float, u, omega_t=None) -> ContinuityState:
    """State built from given fields without solving.

    ``omega_t`` defaults to the form determined by ``u``; passing a different
    field decouples them, which is how hand-violated inputs are built.
    """
    s = make_state(p, t, np.asarray(u, dtype=float))
    if omega_t is not None:
        s.omega_t = omega_t
    return s


# --- curvature-gated pointwise checks ----------------------------------------

def check_schwarz(state: ContinuityState, kappa_const: float | None = None,
                  summary: KappaSummary | None = None, tol: Tolerance = DEFAULT_TOL,
                  assume_hypothesis: bool = False) -> EstimateRecord:
    """``Delta' log S >= [t/n + (n+1) kappa / (2n)] S - 1`` pointwise.

    ``Delta'`` is the Laplacian of ``omega_t`` and ``S = tr_{omega_t} omega``.
    The hypothesis ``H(omega) <= -kappa`` is read from ``summary`` (default:
    the problem's own curvature summary); ``kappa`` defaults to ``-sup H``.
    """
    ks = _summary(state, summary)
    kappa = ks.kappa_const if kappa_const is None else float(kappa_const)
    n, t = state.n, state.t
    S = trace_S(state.omega_t, state.problem.omega)
    data = {"kappa": kappa, "sup_H": ks.sup_H}
    if np.any(S <= 0):
        return _record("schwarz", t, False, None, 1.0, tol, degenerate=True, data=data)
    held = assume_hypothesis or kappa <= -ks.sup_H + HYPOTHESIS_TOL * max(1.0, abs(ks.sup_H))
    lhs = laplacian(state.grid, state.omega_t, np.log(S))
    coef = t / n + (n + 1) * kappa / (2 * n)
    rhs = coef * S - 1
    scale = max(np.max(np.abs(lhs)), np.max(np.abs(coef * S)), 1.0)
    data.update(max_S=float(S.max()), coefficient=coef)
    return _record("schwarz", t, held, lhs - rhs, scale, tol, data=data)


def check_S_upper_negative(state: ContinuityState, kappa_const: float | None = None,
                           summary: KappaSummary | None = None, tol: Tolerance = DEFAULT_TOL,
                           assume_hypothesis: bool = False) -> EstimateRecord:
    """``max S <= 2n / (kappa (n+1))`` under ``H <= -kappa`` with ``kappa > 0``."""
    ks = _summary(state, summary)
    kappa = ks.kappa_const if kappa_const is None else float(kappa_const)
    n, t = state.n, state.t
    S = trace_S(state.omega_t, state.problem.omega)
    data = {"kappa": kappa, "sup_H": ks.sup_H, "max_S": float(S.max())}
    if not kappa > 0:
        return _record("S_upper_negative", t, False, None, 1.0, tol, degenerate=True, data=data)
    held = assume_hypothesis or kappa <= -ks.sup_H + HYPOTHESIS_TOL * max(1.0, abs(ks.sup_H))
    bound = 2 * n / (kappa * (n + 1))
    data["bound"] = bound
    return _record("S_upper_negative", t, held, bound - S, max(bound, S.max()), tol, data=data)


def check_S_upper_nonpositive(state: ContinuityState, summary: KappaSummary | None = None,
                              tol: Tolerance = DEFAULT_TOL,
                              assume_hypothesis: bool = False) -> EstimateRecord:
    """``max S <= n / t`` under ``H <= 0``."""
    ks = _summary(state, summary)
    n, t = state.n, state.t
    S = trace_S(state.omega_t, state.problem.omega)
    held = assume_hypothesis or ks.sup_H <= HYPOTHESIS_TOL
    bound = n / t
    data = {"sup_H": ks.sup_H, "classification": ks.classification,
            "max_S": float(S.max()), "bound": bound}
    return _record("S_upper_nonpositive", t, held, bound - S, max(bound, S.max()), tol, data=data)


# --- maximum principle, sandwich, Newton-Maclaurin ---------------------------

def max_u_bound(p: ProblemData, t: float) -> float:
    """``max log det(t omega + ddc log omega^n) / det omega`` over points where the form is positive.

    At a maximum of ``u`` the form ``omega_t`` is dominated by this one, so
    only positive points can host the maximum.
    """
    form = p.form(t)
    pos = min_eigenvalue_field(form) > 0
    if not np.any(pos):
        return -np.inf
    d = det(form)
    ratio = np.full(d.shape, -np.inf)
    ratio[pos] = np.log(d[pos]) - p.log_det_omega[pos]
    return float(ratio.max())


def check_max_u(state: ContinuityState, tol: Tolerance = DEFAULT_TOL) -> EstimateRecord:
    """``max u <= C`` with ``C`` from :func:`max_u_bound`."""
    C = max_u_bound(state.problem, state.t)
    mu = float(state.u.max())
    margin = C - mu
    data = {"C": C, "max_u": mu}
    return _record("max_u", state.t, True, margin, max(abs(C), abs(mu)), tol,
                   degenerate=not np.isfinite(C), data=data)


def check_sandwich_and_inf_u(state: ContinuityState, t2: float,
                             tol: Tolerance = DEFAULT_TOL) -> EstimateRecord:
    """Measured constants of ``c t2 omega <= omega_t <= c t2^{1-n} omega`` and ``inf u >= c log t2``.

    Diagnostics only: the record passes when the constants are finite and
    the lower one is positive.  ``worst_margin`` is ``c_low``.
    """
    n, t = state.n, state.t
    lam = relative_eigenvalues(state.omega_t, state.problem.omega)
    lmin, lmax = float(lam.min()), float(lam.max())
    c_low = lmin / t2
    c_high = lmax * t2 ** (n - 1)
    inf_u = float(state.u.min())
    c_inf = inf_u / math.log(t2) if t2 != 1 else None
    data = {"t2": t2, "c_low": c_low, "c_high": c_high, "c_inf": c_inf,
            "min_rel_eig": lmin, "max_rel_eig": lmax, "inf_u": inf_u}
    held = t >= t2
    finite = all(np.isfinite(v) for v in (c_low, c_high) + ((c_inf,) if c_inf is not None else ()))
    margin = c_low if finite and c_high > 0 else -np.inf
    return _record("sandwich_and_inf_u", t, held, margin, 1.0, Tolerance(0.0, 0.0), data=data)


def check_newton_maclaurin(state: ContinuityState, tol: Tolerance = DEFAULT_TOL) -> EstimateRecord:
    """``S >= n exp(-u/n)`` pointwise.

    The pass criterion uses ``u`` (so it leans on the equation).  The purely
    algebraic form ``S >= n sigma_n^{-1/n}`` with ``sigma_n = det omega_t /
    det omega`` is recorded alongside as ``sigma_margin``.
    """
    n, t = state.n, state.t
    S = trace_S(state.omega_t, state.problem.omega)
    rhs_u = n * np.exp(-state.u / n)
    sigma_n = np.exp(log_ratio_det(state.omega_t, state.problem.omega))
    rhs_sigma = n * sigma_n ** (-1.0 / n)
    sig_margin, sig_loc = _worst(S - rhs_sigma)
    data = {
        "sigma_margin": sig_margin,
        "sigma_location": list(sig_loc),
        "sigma_defect": float(np.max(np.abs(S - rhs_sigma))),
        "u_defect": float(np.max(np.abs(S - rhs_u))),
    }
    return _record("newton_maclaurin", t, True, S - rhs_u, np.max(S), tol, data=data)


# --- integral estimates -------------------------------------------------------

def check_integral_ratio(state: ContinuityState, kappa_field=None,
                         summary: KappaSummary | None = None, tol: Tolerance = DEFAULT_TOL,
                         assume_hypothesis: bool = False) -> EstimateRecord:
    """``exp(-max u / n) <= int omega_t^n / ((n+1)/2 int kappa omega_t^n)``.

    The rewritten ratio with weights ``exp(u - max u - 1) omega^n`` is
    evaluated too; it differs from the first only through the equation
    residual, so agreement is required within ``1e-12 + 4 residual_sup``.
    The hypothesis is ``H <= -kappa`` pointwise with ``kappa >= 0``.
    """
    ks = _summary(state, summary)
    kap = ks.kappa_field if kappa_field is None else np.broadcast_to(kappa_field, state.grid.shape)
    n, t, grid = state.n, state.t, state.grid
    mu = float(state.u.max())
    lhs = math.exp(-mu / n)
    vol_t = integrate(grid, 1.0, state.omega_t)
    den_t = 0.5 * (n + 1) * integrate(grid, kap, state.omega_t)
    w = np.exp(state.u - mu - 1)
    num_w = integrate(grid, w, state.problem.omega)
    den_w = 0.5 * (n + 1) * integrate(grid, kap * w, state.problem.omega)
    data = {"lhs": lhs, "volume": vol_t, "kappa_integral": den_t, "max_u": mu,
            "weighted_numerator": num_w, "weighted_denominator": den_w}
    if not den_t > 0 or not den_w > 0:
        return _record("integral_ratio", t, False, None, 1.0, tol, degenerate=True, data=data)
    held = assume_hypothesis or bool(
        np.all(kap >= 0)
        and np.all(ks.sup_H_field <= -kap + HYPOTHESIS_TOL * max(1.0, np.max(np.abs(kap)))))
    rhs = vol_t / den_t
    rhs_w = num_w / den_w
    forms_tol = 1e-12 + 4 * state.residual_sup
    agree = abs(rhs - rhs_w) <= forms_tol * max(abs(rhs), 1.0)
    data.update(ratio=rhs, ratio_rewritten=rhs_w, forms_agree=bool(agree), forms_tol=forms_tol)
    rec = _record("integral_ratio", t, held, rhs - lhs, max(lhs, rhs), tol, data=data)
    if rec.status == "pass" and not agree:
        rec.status = "fail"
    return rec


def _sup_integrals(grid, us, vol, betas, center=True):
    out = np.empty((len(us), len(betas)))
    for a, u in enumerate(us):
        shifted = u - u.max() if center else u
        for b, beta in enumerate(betas):
            # an overflowing integrand is an unbounded integral; inf is the right value
            with np.errstate(over="ignore"):
                out[a, b] = integrate(grid, np.exp(-beta * shifted), vol)
    return out


def check_hormander(grid: TorusGrid, us, theta, beta_grid, vol=None, bound_factor: float = 10.0,
                    t: float | None = None, assume_hypothesis: bool = False) -> EstimateRecord:
    """Family-uniform bound on ``I(beta) = int exp(-beta (u - max u)) omega^n``.

    ``us`` is one field or a list of fields, each meant to satisfy
    ``theta + ddc u >= 0``.  ``beta0`` is the largest value of ``beta_grid``
    whose family supremum stays below ``bound_factor * Vol``; the record
    passes when such a value exists.  ``worst_margin`` is
    ``bound_factor * Vol - sup I(beta0)`` (or at the smallest beta if none
    qualifies).  ``vol`` defaults to the flat metric.
    """
    us = [np.asarray(us, dtype=float)] if np.ndim(us) == 2 * grid.n else [np.asarray(u, dtype=float) for u in us]
    betas = sorted(float(b) for b in beta_grid)
    if not betas or betas[0] <= 0:
        raise ValueError("beta_grid needs positive values")
    vol = grid.identity() if vol is None else vol
    volume = integrate(grid, 1.0, vol)
    min_eigs = [min_eigenvalue(theta + ddc(grid, u)) for u in us]
    held = assume_hypothesis or min(min_eigs) >= -HYPOTHESIS_TOL
    table = _sup_integrals(grid, us, vol, betas)
    sup = table.max(axis=0)
    cap = bound_factor * volume
    ok = [k for k, s in enumerate(sup) if s < cap]
    k0 = ok[-1] if ok else 0
    beta0 = betas[k0] if ok else None
    uncentered = _sup_integrals(grid, us, vol, [betas[k0]], center=False)[:, 0]
    data = {
        "beta_grid": betas,
        "sup_I": sup,
        "beta0": beta0,
        "C_horm": float(sup[k0]),
        "C_uncentered": float(uncentered.max()),
        "volume": volume,
        "bound_factor": bound_factor,
        "family_size": len(us),
        "min_eigs": min_eigs,
    }
    margin = cap - sup[k0] if ok else -(sup[0] - cap)
    rec = _record("hormander", t, held, margin, cap, Tolerance(0.0, 0.0), data=data)
    return rec


def check_cheng_yau(grid: TorusGrid, v, phi, g=None, tol: Tolerance = DEFAULT_TOL,
                    identity_tol: float = 1e-8, t: float | None = None,
                    assume_hypothesis: bool = False) -> EstimateRecord:
    """``int |grad log(-v)|^2 omega^n <= int phi omega^n / min(-v)`` given ``Delta v >= -phi``.

    Also checks the pointwise identity
    ``Delta log(-v) = Delta v / v - |grad log(-v)|^2`` within ``identity_tol``
    scaled by the field magnitudes.
    """
    g = grid.identity() if g is None else g
    v = np.asarray(v, dtype=float)
    phi = np.broadcast_to(np.asarray(phi, dtype=float), grid.shape)
    if not np.all(v < 0):
        return _record("cheng_yau", t, False, None, 1.0, tol, degenerate=True,
                       data={"max_v": float(v.max())})
    lap_v = laplacian(grid, g, v)
    hyp_defect = float(np.min(lap_v + phi))
    held = assume_hypothesis or (hyp_defect >= -HYPOTHESIS_TOL and np.all(phi >= 0))
    lv = np.log(-v)
    grad = grad_norm_sq(grid, g, lv)
    lap_lv = laplacian(grid, g, lv)
    ident = lap_lv - (lap_v / v - grad)
    ident_scale = max(1.0, np.max(np.abs(lap_lv)), np.max(np.abs(lap_v / v)), np.max(grad))
    ident_err = float(np.max(np.abs(ident)))
    ident_ok = ident_err <= identity_tol * ident_scale
    lhs = integrate(grid, grad, g)
    m = float(np.min(-v))
    rhs = integrate(grid, phi, g) / m
    data = {"lhs": lhs, "rhs": rhs, "min_neg_v": m, "hypothesis_defect": hyp_defect,
            "identity_error": ident_err, "identity_scale": ident_scale, "identity_ok": bool(ident_ok)}
    rec = _record("cheng_yau", t, held, rhs - lhs, max(abs(lhs), abs(rhs)), tol, data=data)
    if rec.status == "pass" and not ident_ok:
        rec.status = "fail"
    return rec


def compactness_N(beta: float) -> int:
    """Smallest integer ``N`` with ``N beta >= 2``."""
    N = max(1, math.ceil(2.0 / beta))
    while N * beta < 2:
        N += 1
    while N > 1 and (N - 1) * beta >= 2:
        N -= 1
    return N


def log_compactness_bound(beta: float, C_horm: float, volume: float, trace_integral: float):
    """``(C1, G)`` with ``C1 = ((N!)^beta e^beta C_horm)^{2/(N beta)} Vol^{1 - 2/(N beta)}``.

    ``C1`` bounds ``int log(-v)^2``: ``(log(-v))^{N beta} <= (N!)^beta e^{beta(-v)}``
    and ``int e^{beta(-v)} = e^beta int e^{-beta(u - max u)} <= e^beta C_horm``,
    followed by Hölder with exponent ``N beta / 2``.  ``G = int tr_omega theta``
    bounds the gradient integral.
    """
    N = compactness_N(beta)
    p = N * beta
    log_base = beta * math.lgamma(N + 1) + beta + math.log(C_horm)
    C1 = math.exp(2.0 / p * log_base) * volume ** (1 - 2.0 / p)
    return C1, trace_integral, N


def check_log_compactness(grid: TorusGrid, u, theta, beta: float, C_horm: float | None = None,
                          g=None, tol: Tolerance = DEFAULT_TOL, t: float | None = None,
                          assume_hypothesis: bool = False) -> EstimateRecord:
    """``int log(-v)^2 + int |grad log(-v)|^2 <= C1 + G`` with ``v = u - max u - 1``.

    ``C_horm`` bounds ``int exp(-beta (u - max u)) omega^n``; by default it
    is that integral for ``u`` itself.  The record also requires the two
    partial bounds (``L^2`` part within ``C1``, gradient part within ``G``).
    """
    g = grid.identity() if g is None else g
    u = np.asarray(u, dtype=float)
    v = u - u.max() - 1
    lv = np.log(-v)
    own = integrate(grid, np.exp(-beta * (u - u.max())), g)
    C_horm = own if C_horm is None else float(C_horm)
    theta_eig = min_eigenvalue(theta + ddc(grid, u))
    held = assume_hypothesis or (theta_eig >= -HYPOTHESIS_TOL and own <= C_horm * (1 + 1e-12))
    volume = integrate(grid, 1.0, g)
    G_int = integrate(grid, trace(inverse(g) @ theta), g)
    C1, G, N = log_compactness_bound(beta, C_horm, volume, G_int)
    A = integrate(grid, lv ** 2, g)
    B = integrate(grid, grad_norm_sq(grid, g, lv), g)
    total = C1 + G
    tau = tol(max(total, A + B))
    parts_ok = A <= C1 + tau and B <= G + tau
    data = {"L2_integral": A, "gradient_integral": B, "C1": C1, "G": G, "C": total,
            "N": N, "beta": beta, "C_horm": C_horm, "own_integral": own,
            "min_eig_theta_u": theta_eig, "parts_ok": bool(parts_ok)}
    rec = _record("log_compactness", t, held, total - (A + B), max(total, A + B), tol, data=data)
    if rec.status == "pass" and not parts_ok:
        rec.status = "fail"
    return rec


def check_holder_lower_bound(state: ContinuityState, beta: float, C_horm: float | None = None,
                             tol: Tolerance = DEFAULT_TOL, holder_rel: float = 1e-12,
                             assume_hypothesis: bool = False) -> EstimateRecord:
    """Hölder step ``Vol <= (int e^{-beta u})^{1/(beta+1)} (int e^u)^{beta/(beta+1)}``
    and the lower bound ``int omega_t^n >= C^{-1/beta} Vol^{(beta+1)/beta}``.

    Integrals are against ``omega^n``.  ``C_horm`` must dominate
    ``int e^{-beta u} omega^n``; by default it is that integral.
    ``worst_margin`` is the relative margin of the lower bound; the Hölder
    step margin is stored as ``holder_margin`` and must be ``>= -holder_rel``.
    """
    grid, omega, u = state.grid, state.problem.omega, state.u
    vol = integrate(grid, 1.0, omega)
    i_beta = integrate(grid, np.exp(-beta * u), omega)
    i_exp = integrate(grid, np.exp(u), omega)
    C = i_beta if C_horm is None else float(C_horm)
    held = assume_hypothesis or i_beta <= C * (1 + 1e-12)
    holder_rhs = i_beta ** (1 / (beta + 1)) * i_exp ** (beta / (beta + 1))
    holder_margin = (holder_rhs - vol) / vol
    vol_t = integrate(grid, 1.0, state.omega_t)
    lower = C ** (-1 / beta) * vol ** ((beta + 1) / beta)
    rel_margin = (vol_t - lower) / max(vol_t, lower)
    holder_ok = holder_margin >= -holder_rel
    data = {"volume": vol, "int_exp_minus_beta_u": i_beta, "int_exp_u": i_exp,
            "holder_rhs": holder_rhs, "holder_margin": holder_margin, "holder_ok": bool(holder_ok),
            "volume_t": vol_t, "lower_bound": lower, "beta": beta, "C_horm": C}
    # relative margin, so the tolerance is the bare relative one
    rec = _record("holder_lower_bound", state.t, held, rel_margin, 1.0, tol, data=data)
    if rec.status == "pass" and not holder_ok:
        rec.status = "fail"
    return rec


def check_liminf_max_u(n: int, records, tol: Tolerance = DEFAULT_TOL) -> EstimateRecord:
    """Lower bound ``max u_t >= -C`` assembled from integral-ratio records along a path.

    Each record gives ``max u_t >= -n log(ratio_t)`` with the weighted
    (rewritten) ratio.  The implied constant is ``C = n log(max_t ratio_t)``
    and every entry's ``max u`` is compared against ``-C``.
    """
    recs = sorted((r for r in records if r.name == "integral_ratio"), key=lambda r: -r.t)
    t_min = min((r.t for r in recs), default=None)
    if not recs or any(r.status == "skip" and "ratio_rewritten" not in r.data for r in recs):
        return _record("liminf_max_u", t_min, False, None, 1.0, tol, degenerate=True,
                       data={"entries": len(recs)})
    held = all(r.hypothesis_held for r in recs)
    ratios = np.array([r.data["ratio_rewritten"] for r in recs])
    max_us = np.array([r.data["max_u"] for r in recs])
    bounds = -n * np.log(ratios)
    C = float(n * np.log(ratios.max()))
    margins = max_us + C
    data = {"C": C, "t": [r.t for r in recs], "per_entry_bound": bounds,
            "max_u": max_us, "margins": margins}
    k = int(np.argmin(margins))
    rec = _record("liminf_max_u", t_min, held, float(margins[k]),
                  max(1.0, abs(C), np.max(np.abs(max_us))), tol, data=data)
    rec.location = (k,)
    return rec


# --- reports ------------------------------------------------------------------

@dataclass
class EstimateReport:
    records: list = field(default_factory=list)

    def add(self, rec: EstimateRecord):
        self.records.append(rec)
        return rec

    def extend(self, recs):
        for r in recs:
            self.add(r)

    def sorted(self) -> list:
        return sorted(self.records, key=lambda r: (-math.inf if r.t is None else r.t, r.name))

    def failures(self, strict: bool = False) -> list:
        out = [r for r in self.records if r.status == "fail"]
        if strict:
            out += [r for r in self.records if r.status == "skip" and r.hypothesis_held]
        return out

    def counts(self) -> dict:
        out = {}
        for r in self.records:
            c = out.setdefault(r.name, {"pass": 0, "fail": 0, "skip": 0})
            c[r.status] += 1
        return out

    def worst(self) -> dict:
        """Most violating margin per check over non-skipped records."""
        out = {}
        for r in self.records:
            if r.status == "skip" or r.worst_margin is None:
                continue
            cur = out.get(r.name)
            if cur is None or r.worst_margin < cur["worst_margin"]:
                out[r.name] = {"worst_margin": r.worst_margin, "t": r.t}
        return out

    def to_dict(self) -> dict:
        return {"counts": self.counts(), "worst": self.worst(),
                "records": [r.to_dict() for r in self.sorted()]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.sorted():
            w.writerow(["" if r.t is None else "%.17g" % r.t, r.name,
                        "true" if r.hypothesis_held else "false",
                        "" if r.worst_margin is None else "%.17g" % r.worst_margin, r.status])
        return buf.getvalue()


# --- suites -------------------------------------------------------------------

STATE_CHECKS = ("schwarz", "S_upper_negative", "S_upper_nonpositive", "max_u",
                "sandwich_and_inf_u", "newton_maclaurin", "integral_ratio")


@dataclass
class SuiteConfig:
    checks: tuple = CHECKS
    tol: Tolerance = DEFAULT_TOL
    beta_grid: tuple = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0)
    bound_factor: float = 10.0
    kappa_samples: int = 64

    def wants(self, name):
        return name in self.checks


def state_checks(state: ContinuityState, t2: float, cfg: SuiteConfig,
                 summary: KappaSummary | None = None) -> list:
    """Pointwise and per-state integral checks for one accepted state."""
    ks = summary if summary is not None else state.problem.kappa(cfg.kappa_samples)
    tol = cfg.tol
    runners = {
        "schwarz": lambda: check_schwarz(state, summary=ks, tol=tol),
        "S_upper_negative": lambda: check_S_upper_negative(state, summary=ks, tol=tol),
        "S_upper_nonpositive": lambda: check_S_upper_nonpositive(state, summary=ks, tol=tol),
        "max_u": lambda: check_max_u(state, tol=tol),
        "sandwich_and_inf_u": lambda: check_sandwich_and_inf_u(state, t2, tol=tol),
        "newton_maclaurin": lambda: check_newton_maclaurin(state, tol=tol),
        "integral_ratio": lambda: check_integral_ratio(state, summary=ks, tol=tol),
    }
    return [runners[name]() for name in STATE_CHECKS if cfg.wants(name)]


def path_suite(p: ProblemData, t1: float, states, cfg: SuiteConfig | None = None,
               summary: KappaSummary | None = None) -> EstimateReport:
    """Run every requested check over a list of accepted states.

    See :func:`family_suite` for the checks that need the whole family.
    """
    cfg = cfg or SuiteConfig()
    ks = summary if summary is not None else p.kappa(cfg.kappa_samples)
    states = sorted(states, key=lambda s: -s.t)
    if not states:
        return EstimateReport()
    t2 = states[-1].t
    recs = [r for s in states for r in state_checks(s, t2, cfg, ks)]
    return family_suite(p, t1, [(s.t, s.u) for s in states], cfg, ks, recs)


def family_suite(p: ProblemData, t1: float, members, cfg: SuiteConfig | None = None,
                 summary: KappaSummary | None = None, state_records=()) -> EstimateReport:
    """Checks over the family ``{u_t}`` of a path, merged with per-state records.

    ``members`` is a list of ``(t, u)``.  Family checks use
    ``theta = t1 omega + ddc log omega^n``, for which
    ``theta + ddc u_t = omega_t + (t1 - t) omega >= 0`` along the path.  The
    Hörmander record carries the smallest ``t`` of the family; the
    compactness and Hölder checks run once per member with the family's
    ``beta0`` and constants.  States are rebuilt one at a time from ``u``.
    """
    cfg = cfg or SuiteConfig()
    ks = summary if summary is not None else p.kappa(cfg.kappa_samples)
    members = sorted(members, key=lambda m: -m[0])
    report = EstimateReport()
    report.extend(state_records)
    if not members:
        return report
    t2 = members[-1][0]
    theta = p.form(t1)
    horm = None
    if any(cfg.wants(c) for c in ("hormander", "log_compactness", "holder_lower_bound")):
        horm = check_hormander(p.grid, [u for _, u in members], theta, cfg.beta_grid, vol=p.omega,
                               bound_factor=cfg.bound_factor, t=t2)
        if cfg.wants("hormander"):
            report.add(horm)
    beta0 = horm.data["beta0"] if horm is not None else None
    no_beta = {"reason": "no admissible beta in beta_grid"}
    for t, u in members:
        if cfg.wants("log_compactness"):
            if beta0 is None:
                report.add(_record("log_compactness", t, False, None, 1.0, cfg.tol,
                                   degenerate=True, data=no_beta))
            else:
                report.add(check_log_compactness(p.grid, u, theta, beta0, horm.data["C_horm"],
                                                 g=p.omega, tol=cfg.tol, t=t))
        if cfg.wants("holder_lower_bound"):
            if beta0 is None:
                report.add(_record("holder_lower_bound", t, False, None, 1.0, cfg.tol,
                                   degenerate=True, data=no_beta))
            else:
                report.add(check_holder_lower_bound(make_state(p, t, u), beta0,
                                                    horm.data["C_uncentered"], tol=cfg.tol))
    if cfg.wants("liminf_max_u"):
        ir = [r for r in report.records if r.name == "integral_ratio"]
        if not ir:
            ir = [check_integral_ratio(make_state(p, t, u), summary=ks, tol=cfg.tol) for t, u in members]
        report.add(check_liminf_max_u(p.grid.n, ir, tol=cfg.tol))
    return report


def cheng_yau_suite(grid: TorusGrid, seeds, tol: Tolerance = DEFAULT_TOL, **kw) -> EstimateReport:
    """Randomized ``(v, phi)`` pairs with the hypothesis enforced by construction.

    See :func:`random_cheng_yau_pair`; keyword arguments are passed on.
    """
    report = EstimateReport()
    for seed in seeds:
        v, phi, g = random_cheng_yau_pair(grid, seed, **kw)
        rec = check_cheng_yau(grid, v, phi, g, tol=tol)
        rec.data["seed"] = int(seed)
        report.add(rec)
    return report


def random_cheng_yau_pair(grid: TorusGrid, seed: int, kmax: int = 1, count: int = 4,
                          amplitude: float = 0.2, min_eig: float = 0.5):
    """One hypothesis-satisfying ``(v, phi, g)`` triple from ``seed``.

    Keep ``amplitude`` moderate: ``log(-v)`` is not band-limited, and its
    spectrum decays with the relative oscillation of ``v``.
    """
    rng = np.random.default_rng(seed)
    g = safe_metric_potential(rng, grid.n, 1, 2, min_eig).grid_metric(grid)
    w = random_potential(rng, grid.n, kmax, count, amplitude).sample(grid)
    v = -(w - w.min() + 1.0 + rng.uniform(0, 1))
    lap = laplacian(grid, g, v)
    phi = np.maximum(0.0, -lap) + rng.uniform(0, 0.5)
    return v, phi, g


def compactness_family(grid: TorusGrid, omega, seed: int, steps: int = 11):
    """``(theta, [u_s])`` with ``u_s = s phi`` for ``s`` in ``linspace(0, 1, steps)``.

    ``theta = omega / lambda_min(omega)`` dominates the identity and
    ``phi`` has ``|ddc phi| <= 0.9``, so ``theta + ddc u_s >= 0.1`` for all ``s``.
    """
    rng = np.random.default_rng(seed)
    theta = omega / min_eigenvalue(omega)
    phi = safe_metric_potential(rng, grid.n, 1, 3, 0.1).sample(grid)
    return theta, [s * phi for s in np.linspace(0.0, 1.0, steps)]


def synthetic_suite(grid: TorusGrid, omega, seeds, cfg: SuiteConfig | None = None) -> EstimateReport:
    """Randomized checks that need no solver states.

    ``cheng_yau`` runs once per seed; the ``hormander`` and
    ``log_compactness`` checks run on the family of :func:`compactness_family`
    built from the first seed, with integrals against ``omega``.
    """
    cfg = cfg or SuiteConfig()
    seeds = list(seeds)
    report = EstimateReport()
    if cfg.wants("cheng_yau"):
        report.extend(cheng_yau_suite(grid, seeds, tol=cfg.tol).records)
    if seeds and (cfg.wants("hormander") or cfg.wants("log_compactness")):
        theta, us = compactness_family(grid, omega, seeds[0])
        horm = check_hormander(grid, us, theta, cfg.beta_grid, vol=omega, bound_factor=cfg.bound_factor)
        if cfg.wants("hormander"):
            report.add(horm)
        if cfg.wants("log_compactness"):
            beta0 = horm.data["beta0"]
            for u in us:
                if beta0 is None:
                    report.add(_record("log_compactness", None, False, None, 1.0, cfg.tol,
                                       degenerate=True, data={"reason": "no admissible beta in beta_grid"}))
                else:
                    report.add(check_log_compactness(grid, u, theta, beta0, horm.data["C_horm"],
                                                     g=omega, tol=cfg.tol))
    return report
