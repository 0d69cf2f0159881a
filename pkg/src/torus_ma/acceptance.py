"""Acceptance criteria as callable checks.

Each ``criterion_k`` returns a :class:`CriterionResult`; :func:`run_all`
runs them in order and prints one line per criterion.  Tolerances are the
ones stated with each criterion and are never relaxed here.
"""
from __future__ import annotations

import math
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .estimates import (DEFAULT_TOL, check_cheng_yau, check_hormander, check_holder_lower_bound,
                        check_integral_ratio, check_log_compactness, check_max_u,
                        check_newton_maclaurin, check_S_upper_negative, check_S_upper_nonpositive,
                        check_schwarz, cheng_yau_suite, compactness_family, compactness_N,
                        random_cheng_yau_pair, synthetic_state)
from .grid import TorusGrid, metric_from_potential, threads
from .oracles import dense_newton_n1
from .path import PathSchedule, choose_t1, extrapolate_volume, run_path
from .solver import ProblemData, SolverConfig, make_state, solve_at_t
from .testbeds import CosineMode, CosinePotential, flat_metric, safe_metric_potential


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        return (f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:2d} "
                f"{self.name}: {self.detail} ({self.elapsed:.2f} s)")

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "detail": self.detail, "elapsed": self.elapsed, "metrics": self.metrics}


# --- shared testbeds ------------------------------------------------------------

PERTURBED_MODES = (CosineMode(0.02, (1, 0), 0.0), CosineMode(0.01, (1, 1), 0.3))


def perturbed_problem(N: int = 32) -> ProblemData:
    """The n = 1 potential-perturbed metric used by the path criteria."""
    grid = TorusGrid(1, N)
    return ProblemData.from_metric(grid, CosinePotential(list(PERTURBED_MODES), 1).grid_metric(grid))


def perturbed_problem_n2(N: int = 16, seed: int = 0) -> ProblemData:
    grid = TorusGrid(2, N)
    rng = np.random.default_rng(seed)
    return ProblemData.from_metric(grid, safe_metric_potential(rng, 2, 1, 3, 0.5).grid_metric(grid))


def flat_problem(n: int, N: int) -> ProblemData:
    grid = TorusGrid(n, N)
    return ProblemData.from_metric(grid, flat_metric(grid))


def flat_state(n: int, t: float, N: int = 8):
    """Exact flat solution ``u = n log t`` as a state (no solve)."""
    p = flat_problem(n, N)
    return make_state(p, t, np.full(p.grid.shape, n * math.log(t)))


_PATH_CACHE = {}


def perturbed_path(N: int, t_min: float):
    """Accepted states of the perturbed n = 1 path, cached per ``(N, t_min)``."""
    key = (N, t_min)
    if key not in _PATH_CACHE:
        p = perturbed_problem(N)
        states = []

        def keep(s):
            states.append(s)

        t0 = time.perf_counter()
        trace = run_path(p, PathSchedule(choose_t1(p), t_min), SolverConfig(), callback=keep)
        _PATH_CACHE[key] = (p, trace, states, time.perf_counter() - t0)
    return _PATH_CACHE[key]


def _timed(number, name, fn):
    t0 = time.perf_counter()
    passed, detail, metrics = fn()
    return CriterionResult(number, name, bool(passed), detail, time.perf_counter() - t0, metrics)


# --- criteria ---------------------------------------------------------------------

def criterion_1():
    """Flat closed form ``u = n log t`` at N = 32 within 1e-10, under 5 s in total."""
    def run():
        errs, t0 = {}, time.perf_counter()
        for n in (1, 2):
            p = flat_problem(n, 32)
            for t in (1.0, 0.5, 0.1):
                s = solve_at_t(p, t)
                errs[f"n={n},t={t}"] = float(np.max(np.abs(s.u - n * math.log(t))))
        total = time.perf_counter() - t0
        worst = max(errs.values())
        ok = worst <= 1e-10 and total < 5.0
        return ok, f"max sup-error {worst:.2e} (<= 1e-10), solve time {total:.2f} s (< 5 s)", \
            {"errors": errs, "solve_time": total}
    return _timed(1, "flat closed form", run)


def criterion_2():
    """Spectral Newton against a dense finite-difference Newton, 5 metrics on 8 x 8, n = 1."""
    def run():
        grid = TorusGrid(1, 8)
        diffs, t0 = [], time.perf_counter()
        for seed in range(5):
            rng = np.random.default_rng(seed)
            phi = safe_metric_potential(rng, 1, 1, 3, 0.5).sample(grid)
            p = ProblemData.from_metric(grid, metric_from_potential(grid, 1.0, phi))
            s = solve_at_t(p, 1.0, None, SolverConfig(tol=1e-12))
            u_dense, _ = dense_newton_n1(phi, 1.0)
            diffs.append(float(np.max(np.abs(s.u - u_dense))))
        total = time.perf_counter() - t0
        ok = max(diffs) <= 1e-6 and total < 30.0
        return ok, f"max |u_spec - u_dense| {max(diffs):.2e} (<= 1e-6), {total:.2f} s (< 30 s)", \
            {"differences": diffs, "time": total}
    return _timed(2, "dense oracle equivalence", run)


def criterion_3():
    """``|int omega_t^n - t^n int omega^n| <= 1e-8`` relative on every accepted entry.

    The N = 64 path stops at t_min = 0.1, above the round-off stall; a
    second N = 32 path reaches 0.05.
    """
    def run():
        metrics, worst, ok = {}, 0.0, True
        for N, t_min in ((64, 0.1), (32, 0.05)):
            p, trace, _, elapsed = perturbed_path(N, t_min)
            vol = p.volume
            rel = [abs(e.volume - e.t * vol) / (e.t * vol) for e in trace.entries]
            w = max(rel) if rel else math.inf
            fit = extrapolate_volume(trace, 1)
            metrics[f"N={N}"] = {"status": trace.status, "entries": len(rel), "worst_rel": w,
                                 "time": elapsed, "intercept": fit.intercept}
            worst = max(worst, w)
            ok &= trace.status == "complete" and w <= 1e-8 and (N != 64 or elapsed < 60.0)
        m64 = metrics["N=64"]
        return ok, (f"worst relative error {worst:.2e} (<= 1e-8); N=64 path {m64['status']} to 0.1 "
                    f"in {m64['time']:.2f} s (< 60 s); N=32 path {metrics['N=32']['status']} to 0.05"), metrics
    return _timed(3, "cohomological volume identity", run)


def criterion_4():
    """Filtered quadratic constant ``C_q < 1e3`` on cold perturbed solves (n = 1 and 2)."""
    def run():
        consts, raw = {}, {}
        cases = [(perturbed_problem(32), "n=1")] + [(perturbed_problem_n2(16, s), f"n=2,seed={s}") for s in (0, 1)]
        for p, label in cases:
            for t in (1.0, 0.5, 0.2):
                s = solve_at_t(p, t)
                consts[f"{label},t={t}"] = s.quadratic_constant()
                raw[f"{label},t={t}"] = s.quadratic_constant(floor=0.0)
        vals = [c for c in consts.values() if c is not None]
        ok = len(vals) == len(consts) and max(vals) < 1e3
        return ok, f"max C_q {max(vals):.3g} (< 1e3) over {len(vals)}/{len(consts)} solves", \
            {"C_q": consts, "C_q_raw": raw}
    return _timed(4, "quadratic Newton tail", run)


def criterion_5():
    """Flat Schwarz margin 0 within 1e-10; perturbed records never pass with a false hypothesis."""
    def run():
        flat = []
        for n in (1, 2):
            for t in (1.0, 0.5, 0.1):
                r = check_schwarz(flat_state(n, t))
                flat.append((r.status, abs(r.worst_margin)))
        worst = max(m for _, m in flat)
        flat_ok = worst <= 1e-10 and all(s == "pass" for s, _ in flat)
        _, _, states, _ = perturbed_path(32, 0.05)
        recs = [check_schwarz(s) for s in states]
        # kappa above -sup H: the hypothesis is false and the checker must not pass
        recs += [check_schwarz(s, kappa_const=s.problem.kappa().kappa_const + 1.0) for s in states]
        false_pass = [r for r in recs if not r.hypothesis_held and r.status == "pass"]
        held = [r for r in recs if r.hypothesis_held]
        ok = flat_ok and not false_pass and all(r.status == "pass" for r in held)
        worst_pert = min(r.worst_margin for r in held) if held else None
        return ok, (f"flat |margin| {worst:.1e} (<= 1e-10); {len(held)} perturbed records with "
                    f"hypothesis held pass; {len(false_pass)} false passes"), \
            {"flat_worst": worst, "perturbed_worst": worst_pert, "false_pass": len(false_pass)}
    return _timed(5, "Schwarz equality and gating", run)


def _all_states():
    states = [flat_state(n, t) for n in (1, 2) for t in (1.0, 0.5, 0.1)]
    for N, t_min in ((64, 0.1), (32, 0.05)):
        states += perturbed_path(N, t_min)[2]
    return states


def criterion_6():
    """``check_max_u`` passes on every accepted state; flat margin 0 within 1e-10."""
    def run():
        recs = [check_max_u(s) for s in _all_states()]
        flat = [abs(check_max_u(flat_state(n, t)).worst_margin) for n in (1, 2) for t in (1.0, 0.5, 0.1)]
        ok = all(r.status == "pass" for r in recs) and max(flat) <= 1e-10
        return ok, f"{sum(r.status == 'pass' for r in recs)}/{len(recs)} pass; flat |margin| {max(flat):.1e}", \
            {"flat_worst": max(flat), "min_margin": min(r.worst_margin for r in recs)}
    return _timed(6, "maximum-principle bound", run)


def criterion_7():
    """``S >= n exp(-u/n) - 1e-8`` on every state; n = 1 equality within 1e-12."""
    def run():
        states = _all_states() + [solve_at_t(perturbed_problem_n2(16, 0), t) for t in (1.0, 0.3)]
        recs = [(s, check_newton_maclaurin(s)) for s in states]
        worst = min(r.worst_margin for _, r in recs)
        eq = max(r.data["sigma_defect"] for s, r in recs if s.n == 1)
        ok = worst >= -1e-8 and eq <= 1e-12
        return ok, f"worst margin {worst:.2e} (>= -1e-8); n=1 equality defect {eq:.1e} (<= 1e-12)", \
            {"worst_margin": worst, "n1_defect": eq,
             "n1_u_defect": max(r.data["u_defect"] for s, r in recs if s.n == 1)}
    return _timed(7, "Newton-Maclaurin", run)


def criterion_8():
    """20 randomized ``(v, phi)`` pairs pass ``check_cheng_yau`` with the identity within 1e-8, < 20 s."""
    def run():
        t0 = time.perf_counter()
        rep = cheng_yau_suite(TorusGrid(1, 32), range(20))
        total = time.perf_counter() - t0
        passed = sum(r.status == "pass" for r in rep.records)
        ident = max(r.data["identity_error"] / r.data["identity_scale"] for r in rep.records)
        ok = passed == 20 and ident <= 1e-8 and total < 20.0
        return ok, f"{passed}/20 pass; identity error {ident:.1e} (<= 1e-8); {total:.2f} s (< 20 s)", \
            {"identity_error": ident, "time": total}
    return _timed(8, "gradient-of-log integral suite", run)


def criterion_9():
    """Both integrals of the log-compactness bound stay below the assembled constant for ``u_s = s phi``."""
    def run():
        grid = TorusGrid(1, 32)
        metrics, ok = {}, True
        for label, omega in (("flat", flat_metric(grid)), ("perturbed", perturbed_problem(32).omega)):
            for seed in (0, 1, 2):
                theta, us = compactness_family(grid, omega, seed)
                horm = check_hormander(grid, us, theta, (0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0), vol=omega)
                beta0 = horm.data["beta0"]
                if beta0 is None:
                    ok = False
                    continue
                recs = [check_log_compactness(grid, u, theta, beta0, horm.data["C_horm"], g=omega) for u in us]
                N = recs[0].data["N"]
                ok &= (horm.status == "pass" and N == compactness_N(beta0) and N * beta0 >= 2
                       and (N - 1) * beta0 < 2
                       and all(r.status == "pass" and r.data["parts_ok"] and r.hypothesis_held for r in recs))
                metrics[f"{label},seed={seed}"] = {
                    "beta0": beta0, "N": N,
                    "max_L2_over_C1": max(r.data["L2_integral"] / r.data["C1"] for r in recs),
                    "max_grad_over_G": max(r.data["gradient_integral"] / r.data["G"] for r in recs)}
        worst = max(max(m["max_L2_over_C1"], m["max_grad_over_G"]) for m in metrics.values())
        return ok, f"{len(metrics)} families x 11 members within bounds; worst integral/bound {worst:.3f}", metrics
    return _timed(9, "log compactness family", run)


def criterion_10():
    """Hölder step margin >= -1e-12 on all states; flat states reach equality within 1e-10."""
    def run():
        recs = [check_holder_lower_bound(s, beta) for s in _all_states() for beta in (0.5, 1.0, 2.0)]
        worst = min(r.data["holder_margin"] for r in recs)
        flat = [check_holder_lower_bound(flat_state(n, t), b) for n in (1, 2) for t in (1.0, 0.5, 0.1)
                for b in (0.5, 1.0, 2.0)]
        eq = max(max(abs(r.data["holder_margin"]), abs(r.worst_margin)) for r in flat)
        ok = worst >= -1e-12 and eq <= 1e-10 and all(r.status == "pass" for r in recs)
        return ok, f"worst Hölder margin {worst:.1e} (>= -1e-12); flat equality defect {eq:.1e} (<= 1e-10)", \
            {"worst_holder_margin": worst, "flat_defect": eq}
    return _timed(10, "Hölder chain", run)


# --- detector matrix --------------------------------------------------------------

def _flat(n=1, t=0.5, N=8):
    return flat_state(n, t, N)


def _det_schwarz():
    s = _flat()
    return (check_schwarz(s),
            check_schwarz(s, kappa_const=1.0, assume_hypothesis=True))


def _det_S_upper_negative():
    s = _flat()
    n, t = s.n, s.t
    kappa_eq = 2 * t / (n + 1)  # bound 2n/(kappa (n+1)) equals S = n/t
    return (check_S_upper_negative(s, kappa_const=kappa_eq, assume_hypothesis=True),
            check_S_upper_negative(s, kappa_const=2 * kappa_eq, assume_hypothesis=True))


def _det_S_upper_nonpositive():
    s = _flat()
    bad = synthetic_state(s.problem, s.t, s.u, omega_t=0.5 * s.omega_t)
    return check_S_upper_nonpositive(s), check_S_upper_nonpositive(bad)


def _det_max_u():
    s = _flat()
    return check_max_u(s), check_max_u(synthetic_state(s.problem, s.t, s.u + 1.0, omega_t=s.omega_t))


def _det_newton_maclaurin():
    s = _flat()
    return (check_newton_maclaurin(s),
            check_newton_maclaurin(synthetic_state(s.problem, s.t, s.u - 1.0, omega_t=s.omega_t)))


def _det_integral_ratio():
    s = _flat()
    n, t = s.n, s.t
    kappa_eq = 2 * t / (n + 1)  # ratio 2/((n+1) kappa) equals exp(-max u/n) = 1/t
    return (check_integral_ratio(s, kappa_field=kappa_eq, assume_hypothesis=True),
            check_integral_ratio(s, kappa_field=2 * kappa_eq, assume_hypothesis=True))


def _det_hormander():
    grid = TorusGrid(1, 16)
    theta = grid.identity()
    x = grid.coords[0]
    well = -400.0 * np.exp(-50 * (x - 0.5) ** 2)
    betas = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0)
    return (check_hormander(grid, [np.zeros(grid.shape)], theta, betas),
            check_hormander(grid, [well], theta, betas, assume_hypothesis=True))


def _det_cheng_yau():
    grid = TorusGrid(1, 16)
    v, _, g = random_cheng_yau_pair(grid, 0)
    return (check_cheng_yau(grid, np.full(grid.shape, -2.0), 0.0),
            check_cheng_yau(grid, v, 0.0, g, assume_hypothesis=True))


def _det_log_compactness():
    grid = TorusGrid(1, 32)
    theta = grid.identity()
    steep = 50.0 * np.cos(2 * np.pi * grid.coords[0])
    return (check_log_compactness(grid, np.zeros(grid.shape), theta, 1.0),
            check_log_compactness(grid, steep, theta, 1.0, C_horm=1.0, assume_hypothesis=True))


def _det_holder_lower_bound():
    s = _flat()
    return (check_holder_lower_bound(s, 1.0),
            check_holder_lower_bound(s, 1.0, C_horm=1e-3, assume_hypothesis=True))


DETECTORS = {
    "schwarz": _det_schwarz,
    "S_upper_negative": _det_S_upper_negative,
    "S_upper_nonpositive": _det_S_upper_nonpositive,
    "max_u": _det_max_u,
    "newton_maclaurin": _det_newton_maclaurin,
    "integral_ratio": _det_integral_ratio,
    "hormander": _det_hormander,
    "cheng_yau": _det_cheng_yau,
    "log_compactness": _det_log_compactness,
    "holder_lower_bound": _det_holder_lower_bound,
}


def detector_matrix() -> dict:
    """``{checker: (equality-case record, violated-input record)}`` for the ten estimate checkers."""
    return {name: make() for name, make in DETECTORS.items()}


def criterion_11():
    """Each checker passes its equality (or extremal) case and fails its violated input."""
    def run():
        cells = {}
        for name, (good, bad) in detector_matrix().items():
            cells[name] = {"equality": good.status, "violated": bad.status}
        ok = all(c["equality"] == "pass" and c["violated"] == "fail" for c in cells.values())
        n_ok = sum(c["equality"] == "pass" for c in cells.values()) + \
            sum(c["violated"] == "fail" for c in cells.values())
        return ok, f"{n_ok}/{2 * len(cells)} matrix cells as expected", cells
    return _timed(11, "detector soundness", run)


DETERMINISM_CONFIG = """\
[problem]
n = 1
N = 32
metric = perturbed
modes =
    0.02  1 0  0.0
    0.01  1 1  0.3

[schedule]
t1 = auto
t_min = 0.1

[run]
seed = 3
synthetic_seeds = 5
"""


def criterion_12():
    """Two ``--threads 1`` runs of one config write byte-identical CSV files."""
    def run():
        same = {}
        with tempfile.TemporaryDirectory() as tmp:
            cfg = Path(tmp) / "scenario.ini"
            cfg.write_text(DETERMINISM_CONFIG)
            for command in ("path", "estimates"):
                outs = []
                for k in range(2):
                    out = Path(tmp) / f"{command}{k}"
                    subprocess.run([sys.executable, "-m", "torus_ma", command, "--config", str(cfg),
                                    "--out", str(out), "--threads", "1"],
                                   check=False, capture_output=True)
                    outs.append(out)
                for name in ("path.csv", "estimates.csv"):
                    a, b = (o / name for o in outs)
                    same[f"{command}/{name}"] = a.exists() and b.exists() and a.read_bytes() == b.read_bytes()
        ok = all(same.values())
        return ok, f"{sum(same.values())}/{len(same)} CSV files byte-identical", same
    return _timed(12, "determinism", run)


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12)


def run_all(echo: bool = False) -> list:
    results = []
    with threads(1):
        for crit in CRITERIA:
            r = crit()
            if echo:
                print(r.line(), flush=True)
            results.append(r)
    return results
