import csv
import io
import math

import numpy as np
import pytest

from torus_ma.errors import InsufficientData
from torus_ma.grid import TorusGrid, min_eigenvalue
from torus_ma.path import (PATH_COLUMNS, PathSchedule, PathTrace, choose_t1, extrapolate_volume,
                           proxy_growth, run_path, w_cauchy)
from torus_ma.solver import ProblemData, SolverConfig
from torus_ma.testbeds import flat_metric

from conftest import cos_potential


def flat(n, N):
    grid = TorusGrid(n, N)
    return ProblemData.from_metric(grid, flat_metric(grid))


def collect(p, sched, cfg=None, **kw):
    states = []
    trace = run_path(p, sched, cfg, callback=lambda s: states.append(s) or {"t": s.t}, **kw)
    return trace, states


@pytest.fixture(scope="module")
def perturbed_path():
    grid = TorusGrid(1, 32)
    p = ProblemData.from_metric(grid, cos_potential(1, 0.05, (1, 0)).grid_metric(grid))
    trace, states = collect(p, PathSchedule(choose_t1(p), 0.05), compare_cold=True)
    return p, trace, states


# --- choose_t1 -----------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2])
def test_choose_t1_flat(n):
    assert choose_t1(flat(n, 8), 1.1) == pytest.approx(1.1)


def test_choose_t1_commuting_model():
    grid = TorusGrid(1, 8)
    p = ProblemData(grid, grid.identity(), grid.constant(0.0), grid.identity(-3.0))
    assert choose_t1(p, 1.1) == pytest.approx(3.3, abs=1e-5)


def test_choose_t1_matches_positivity_scan(perturbed_path):
    p, _, _ = perturbed_path
    t_star = choose_t1(p, 1.1) / 1.1
    ts = np.arange(0.0, 10.0, 1e-3)
    scan = next(t for t in ts if min_eigenvalue(p.form(t)) > 0)
    assert abs(t_star - scan) <= 1e-3


def test_choose_t1_rejects_margin():
    with pytest.raises(ValueError):
        choose_t1(flat(1, 8), 1.0)


# --- schedule --------------------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(t1=1.0, t_min=1.0), dict(t1=1.0, t_min=0.0),
                                dict(t1=1.0, t_min=0.1, initial_step_ratio=1.0),
                                dict(t1=1.0, t_min=0.1, min_step_ratio=0.0)])
def test_schedule_validation(kw):
    with pytest.raises(ValueError):
        PathSchedule(**kw)


def test_schedule_geometric_and_clamped():
    s = PathSchedule(1.0, 0.3, 0.5)
    assert s.next_t(1.0) == 0.5
    assert s.next_t(0.5) == 0.3


# --- run_path ---------------------------------------------------------------------------

@pytest.mark.parametrize("n,N", [(1, 16), (2, 8)])
def test_flat_path_closed_form(n, N):
    trace, states = collect(flat(n, N), PathSchedule(1.0, 0.1, 0.5))
    assert trace.status == "complete"
    assert trace.ts[-1] == pytest.approx(0.1)
    for s in states:
        assert np.max(np.abs(s.u - n * math.log(s.t))) <= 1e-9
    assert np.max(np.abs(trace.volumes - trace.ts ** n)) <= 1e-12
    assert [e.report["t"] for e in trace.entries] == list(trace.ts)


def test_perturbed_path_volume_identity(perturbed_path):
    p, trace, _ = perturbed_path
    assert trace.status == "complete"
    assert trace.ts[-1] == pytest.approx(0.05)
    rel = np.abs(trace.volumes - trace.ts * p.volume) / (trace.ts * p.volume)
    assert np.max(rel) <= 1e-8


def test_perturbed_path_invariants(perturbed_path):
    _, trace, states = perturbed_path
    assert np.all(np.diff(trace.ts) < 0)
    cfg = SolverConfig()
    for e, s in zip(trace.entries, states):
        assert e.min_eig > 0 and e.residual_sup <= cfg.tol
        assert e.cold_iters is not None and e.newton_iters <= e.cold_iters


def test_forced_failure_step_underflow():
    # positivity floor 0.3 on the flat torus: forms t I stop qualifying below t = 0.3
    p = flat(1, 16)
    trace, _ = collect(p, PathSchedule(1.0, 0.1, 0.7), SolverConfig(pos_floor=0.3))
    assert trace.status == "StepUnderflow"
    assert trace.entries and trace.failures
    assert trace.last_good_t == trace.entries[-1].t
    assert 0.3 < trace.last_good_t <= 0.3 * (1 + 2e-3)
    assert all(f["error"] == "PositivityLost" for f in trace.failures)


def test_huge_pos_floor_underflows_immediately():
    trace, _ = collect(flat(1, 16), PathSchedule(1.0, 0.1), SolverConfig(pos_floor=1e6))
    assert trace.status == "StepUnderflow" and not trace.entries and trace.failures


def test_trace_csv_layout():
    trace, _ = collect(flat(1, 16), PathSchedule(1.0, 0.1, 0.7), SolverConfig(pos_floor=0.3))
    rows = list(csv.reader(io.StringIO(trace.to_csv())))
    assert tuple(rows[0]) == PATH_COLUMNS
    assert len(rows) - 1 == len(trace.entries) + len(trace.failures)
    assert {r[-1] for r in rows[1:]} == {"ok", "PositivityLost"}
    ok = [r for r in rows[1:] if r[-1] == "ok"]
    assert float(ok[1][0]) == trace.entries[1].t  # 17 significant digits round-trip


# --- extrapolation and diagnostics ----------------------------------------------------

def test_extrapolate_flat_n1():
    trace, _ = collect(flat(1, 16), PathSchedule(1.0, 0.1, 0.5))
    fit = extrapolate_volume(trace, 1)
    assert abs(fit.intercept) <= 1e-8
    assert fit.coefficients[1] == pytest.approx(1.0, abs=1e-8)


def test_extrapolate_flat_n2():
    trace, _ = collect(flat(2, 8), PathSchedule(1.0, 0.1, 0.5))
    fit = extrapolate_volume(trace, 2)
    assert abs(fit.intercept) <= 1e-7 and abs(fit.coefficients[1]) <= 1e-7
    assert fit.coefficients[2] == pytest.approx(1.0, abs=1e-7)


def test_extrapolate_perturbed(perturbed_path):
    p, trace, _ = perturbed_path
    fit = extrapolate_volume(trace, 1)
    assert abs(fit.intercept) <= 1e-6
    assert fit.coefficients[1] == pytest.approx(p.volume, rel=1e-8)
    # intercept vanishes within the fit residual
    assert abs(fit.intercept) <= fit.residual_norm + 1e-12


def test_extrapolate_needs_entries():
    trace = PathTrace()
    with pytest.raises(InsufficientData):
        extrapolate_volume(trace, 1)


def test_proxy_growth_flat():
    n = 2
    trace, _ = collect(flat(n, 8), PathSchedule(1.0, 0.1, 0.5))
    g = proxy_growth(trace)
    assert g["min_eig"]["slope"] == pytest.approx(1.0, abs=1e-10)
    assert g["max_S"]["slope"] == pytest.approx(-1.0, abs=1e-10)
    assert g["max_abs_u"]["slope"] == pytest.approx(-n, abs=1e-10)


def test_w_cauchy(perturbed_path):
    _, trace, states = perturbed_path
    d = w_cauchy([(s.t, s.u) for s in states])
    assert len(d["l2_step"]) == len(states) - 1
    assert all(x >= 0 for x in d["l2_step"])
    flat_d = w_cauchy([(t, np.full((8, 8), math.log(t))) for t in (1.0, 0.5, 0.25)])
    assert flat_d["l2_step"] == [0.0, 0.0]
