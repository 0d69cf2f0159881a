import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torus_ma.acceptance import DETECTORS, flat_state, perturbed_problem
from torus_ma.estimates import (CSV_COLUMNS, STATE_CHECKS, EstimateRecord, EstimateReport, SuiteConfig,
                                Tolerance, check_cheng_yau, check_holder_lower_bound, check_hormander,
                                check_integral_ratio, check_liminf_max_u, check_log_compactness,
                                check_max_u, check_newton_maclaurin, check_S_upper_negative,
                                check_S_upper_nonpositive, check_sandwich_and_inf_u, check_schwarz,
                                compactness_N, log_compactness_bound, path_suite, random_cheng_yau_pair,
                                synthetic_state)
from torus_ma.grid import TorusGrid, laplacian
from torus_ma.path import PathSchedule, choose_t1, run_path

from conftest import random_positive_field


# --- Schwarz and S bounds -----------------------------------------------------------------

@pytest.mark.parametrize("n,t", [(1, 0.5), (2, 0.3), (2, 1.0)])
def test_schwarz_flat_equality(n, t):
    r = check_schwarz(flat_state(n, t))
    assert r.status == "pass" and r.hypothesis_held
    assert abs(r.worst_margin) <= 1e-10


def test_schwarz_positive_kappa_on_flat_is_skipped():
    r = check_schwarz(flat_state(1, 0.5), kappa_const=1.0)
    assert not r.hypothesis_held and r.status == "skip"


def test_S_upper_negative_needs_positive_kappa():
    r = check_S_upper_negative(flat_state(1, 0.5))
    assert r.status == "skip" and r.worst_margin is None


def test_S_upper_negative_locates_inflated_point():
    s = flat_state(2, 0.5)
    kappa_eq = 2 * s.t / (s.n + 1)
    om = s.omega_t.copy()
    idx = (3, 1, 4, 2)
    om[idx] *= 0.5  # S doubles there
    r = check_S_upper_negative(synthetic_state(s.problem, s.t, s.u, om), kappa_const=kappa_eq,
                               assume_hypothesis=True)
    assert r.status == "fail" and r.location == idx
    assert r.worst_margin == pytest.approx(-s.n / s.t)


def test_S_upper_nonpositive_flat_slack():
    s = flat_state(1, 0.5)
    om = np.full_like(s.omega_t, 1.0 / (1.0 / s.t - 0.1))  # S = n/t - 0.1
    r = check_S_upper_nonpositive(synthetic_state(s.problem, s.t, s.u, om))
    assert r.status == "pass" and r.worst_margin == pytest.approx(0.1)


# --- max u, sandwich, Newton-Maclaurin ---------------------------------------------------

@pytest.mark.parametrize("n", [1, 2])
def test_max_u_flat_equality(n):
    r = check_max_u(flat_state(n, 0.4))
    assert r.status == "pass" and abs(r.worst_margin) <= 1e-10
    assert r.data["C"] == pytest.approx(n * math.log(0.4))


@pytest.mark.parametrize("n", [1, 2])
def test_sandwich_flat_constants(n):
    t, t2 = 0.5, 0.2
    r = check_sandwich_and_inf_u(flat_state(n, t), t2)
    assert r.status == "pass"
    assert r.data["c_low"] == pytest.approx(t / t2)
    assert r.data["c_high"] == pytest.approx(t * t2 ** (n - 1))
    assert r.data["c_inf"] == pytest.approx(n * math.log(t) / math.log(t2))


def test_newton_maclaurin_n1_is_equality(perturbed_n1):
    p, _ = perturbed_n1
    rng = np.random.default_rng(1)
    om = random_positive_field(p.grid, rng)
    s = synthetic_state(p, 1.0, np.zeros(p.grid.shape), om)
    r = check_newton_maclaurin(s)
    assert r.data["sigma_defect"] <= 1e-12


def test_newton_maclaurin_n2_strict():
    grid = TorusGrid(2, 8)
    from torus_ma.solver import ProblemData
    p = ProblemData.from_metric(grid, grid.identity())
    om = np.broadcast_to(np.diag([1.0, 2.0]).astype(complex), grid.shape + (2, 2)).copy()
    r = check_newton_maclaurin(synthetic_state(p, 1.0, np.zeros(grid.shape), om))
    assert r.data["sigma_margin"] == pytest.approx(1.5 - math.sqrt(2), abs=1e-14)


# --- integral ratio and liminf -----------------------------------------------------------------

def test_integral_ratio_flat_skips():
    r = check_integral_ratio(flat_state(1, 0.5))
    assert r.status == "skip" and r.worst_margin is None


@pytest.mark.parametrize("n", [1, 2])
def test_integral_ratio_unit_kappa_closed_form(n):
    t = 0.5
    r = check_integral_ratio(flat_state(n, t), kappa_field=1.0)
    assert not r.hypothesis_held and r.status == "skip"
    assert r.data["ratio"] == pytest.approx(2 / (n + 1), rel=1e-13)
    assert r.data["ratio_rewritten"] == pytest.approx(2 / (n + 1), rel=1e-13)
    assert r.data["lhs"] == pytest.approx(1 / t, rel=1e-13)
    assert r.data["forms_agree"]


def test_liminf_flat_skips():
    recs = [check_integral_ratio(flat_state(1, t)) for t in (1.0, 0.5)]
    assert check_liminf_max_u(1, recs).status == "skip"


def test_liminf_unit_kappa_constant():
    n = 2
    recs = [check_integral_ratio(flat_state(n, t), kappa_field=1.0) for t in (1.0, 0.5, 0.25)]
    r = check_liminf_max_u(n, recs)
    assert r.status == "skip"  # hypothesis fails on the flat torus
    assert r.data["C"] == pytest.approx(n * math.log(2 / (n + 1)))
    assert r.t == 0.25


# --- Hormander, Cheng-Yau, compactness, Holder ----------------------------------------------------

def test_hormander_constant_family():
    grid = TorusGrid(1, 16)
    r = check_hormander(grid, [np.full(grid.shape, c) for c in (0.0, 3.0)], grid.identity(), (0.5, 1.0, 2.0))
    assert r.status == "pass"
    assert np.allclose(r.data["sup_I"], 1.0, atol=1e-14)
    assert r.data["beta0"] == 2.0


def test_hormander_indefinite_skips():
    grid = TorusGrid(1, 16)
    r = check_hormander(grid, [np.zeros(grid.shape)], -grid.identity(), (1.0,))
    assert r.status == "skip"


def test_hormander_rejects_bad_grid():
    grid = TorusGrid(1, 8)
    with pytest.raises(ValueError):
        check_hormander(grid, [np.zeros(grid.shape)], grid.identity(), (0.0, 1.0))


def test_cheng_yau_constant():
    grid = TorusGrid(1, 16)
    r = check_cheng_yau(grid, np.full(grid.shape, -1.0), 0.0)
    assert r.status == "pass" and r.worst_margin == 0.0


def cos_pair(scale=1.0):
    grid = TorusGrid(1, 64)
    v = -scale * (2 + np.cos(2 * np.pi * grid.coords[0]))
    phi = np.abs(laplacian(grid, grid.identity(), v))
    return grid, v, phi


def test_cheng_yau_cosine():
    grid, v, phi = cos_pair()
    r = check_cheng_yau(grid, v, phi)
    assert r.hypothesis_held and r.status == "pass" and r.data["identity_ok"]


def test_cheng_yau_scale_invariant():
    a = check_cheng_yau(*cos_pair(1.0))
    b = check_cheng_yau(*cos_pair(7.0))
    assert b.data["lhs"] == pytest.approx(a.data["lhs"], rel=1e-12)
    assert b.data["rhs"] == pytest.approx(a.data["rhs"], rel=1e-12)


def test_cheng_yau_nonnegative_v_skips():
    grid = TorusGrid(1, 8)
    assert check_cheng_yau(grid, np.zeros(grid.shape), 0.0).status == "skip"


@pytest.mark.parametrize("beta,N", [(2.0, 1), (1.0, 2), (0.5, 4), (0.3, 7), (0.05, 40)])
def test_compactness_N_minimal(beta, N):
    assert compactness_N(beta) == N
    assert N * beta >= 2 and (N == 1 or (N - 1) * beta < 2)


@pytest.mark.parametrize("n", [1, 2])
def test_log_compactness_constant_u(n):
    grid = TorusGrid(n, 8)
    beta = 0.5
    r = check_log_compactness(grid, np.full(grid.shape, 2.0), grid.identity(), beta)
    assert r.status == "pass" and r.data["parts_ok"]
    assert r.data["L2_integral"] == 0 and r.data["gradient_integral"] == pytest.approx(0, abs=1e-25)
    N = compactness_N(beta)
    assert r.data["C1"] == pytest.approx((math.factorial(N) ** beta * math.exp(beta)) ** (2 / (N * beta)))
    assert r.data["G"] == pytest.approx(n)


def test_log_compactness_bound_formula():
    C1, G, N = log_compactness_bound(1.0, 3.0, 2.0, 5.0)
    assert N == 2 and G == 5.0
    assert C1 == pytest.approx((2 * math.e * 3.0) ** 1 * 2.0 ** 0)


def test_holder_zero_u():
    grid = TorusGrid(1, 8)
    from torus_ma.solver import ProblemData
    p = ProblemData.from_metric(grid, grid.identity())
    r = check_holder_lower_bound(synthetic_state(p, 1.0, np.zeros(grid.shape)), 1.0)
    assert r.data["holder_margin"] == pytest.approx(0, abs=1e-15)
    assert r.status == "pass"


@pytest.mark.parametrize("n,t,beta", [(1, 0.5, 1.0), (2, 0.3, 0.5)])
def test_holder_flat_equality(n, t, beta):
    r = check_holder_lower_bound(flat_state(n, t), beta)
    assert r.status == "pass"
    assert abs(r.data["holder_margin"]) <= 1e-12
    assert abs(r.worst_margin) <= 1e-10


# --- detector matrix ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(DETECTORS))
@pytest.mark.parametrize("case", ["equality", "violated"])
def test_detector_matrix(name, case):
    good, bad = DETECTORS[name]()
    assert good.name == bad.name == name
    if case == "equality":
        assert good.status == "pass"
    else:
        assert bad.status == "fail"


# --- properties ------------------------------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.05, 5.0))
def test_holder_step_always_holds(seed, beta):
    grid = TorusGrid(1, 16)
    from torus_ma.solver import ProblemData
    p = ProblemData.from_metric(grid, grid.identity())
    u = np.random.default_rng(seed).normal(size=grid.shape)
    r = check_holder_lower_bound(synthetic_state(p, 1.0, u), beta)
    assert r.data["holder_margin"] >= -1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_newton_maclaurin_algebraic_n2(seed):
    grid = TorusGrid(2, 8)
    from torus_ma.solver import ProblemData
    rng = np.random.default_rng(seed)
    p = ProblemData.from_metric(grid, grid.identity())
    a = rng.normal(size=grid.shape + (2, 2)) + 1j * rng.normal(size=grid.shape + (2, 2))
    om = a @ np.conj(np.swapaxes(a, -1, -2)) + 0.1 * np.eye(2)
    r = check_newton_maclaurin(synthetic_state(p, 1.0, np.zeros(grid.shape), om))
    assert r.data["sigma_margin"] >= -1e-12 * np.max(np.abs(om))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_cheng_yau_random_pairs(seed):
    grid = TorusGrid(1, 32)
    v, phi, g = random_cheng_yau_pair(grid, seed)
    r = check_cheng_yau(grid, v, phi, g)
    assert r.hypothesis_held and r.data["identity_ok"] and r.status == "pass"


# --- reports ---------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def flat_report():
    from torus_ma.solver import ProblemData
    grid = TorusGrid(1, 16)
    p = ProblemData.from_metric(grid, grid.identity())
    states = []
    run_path(p, PathSchedule(choose_t1(p), 0.2, 0.5), callback=states.append)
    return states, path_suite(p, choose_t1(p), states)


def test_report_completeness(flat_report):
    states, rep = flat_report
    keys = [(r.name, r.t) for r in rep.records]
    assert len(keys) == len(set(keys))
    for s in states:
        for name in STATE_CHECKS + ("log_compactness", "holder_lower_bound"):
            assert (name, s.t) in keys
    assert {r.name for r in rep.records} >= {"hormander", "liminf_max_u"}
    assert not rep.failures()


def test_report_csv_and_json(flat_report):
    _, rep = flat_report
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == len(rep.records) + 1
    assert all(r[4] in ("pass", "fail", "skip") and r[2] in ("true", "false") for r in rows[1:])
    ts = [float(r[0]) for r in rows[1:]]
    assert ts == sorted(ts)
    d = json.loads(rep.to_json())
    assert set(d) == {"counts", "worst", "records"}
    assert sum(sum(c.values()) for c in d["counts"].values()) == len(rep.records)


def test_strict_counts_held_skips():
    rep = EstimateReport()
    rep.add(EstimateRecord("max_u", 0.5, True, None, None, 1e-10, "skip"))
    rep.add(EstimateRecord("schwarz", 0.5, False, None, None, 1e-10, "skip"))
    rep.add(EstimateRecord("hormander", 0.5, True, 1.0, None, 0.0, "pass"))
    assert rep.failures() == []
    assert [r.name for r in rep.failures(strict=True)] == ["max_u"]


def test_zero_tolerance_exposes_roundoff():
    s = flat_state(2, 0.3)
    loose = check_schwarz(s)
    tight = check_schwarz(s, tol=Tolerance(0.0, 0.0))
    assert loose.status == "pass"
    assert tight.status == ("pass" if tight.worst_margin >= 0 else "fail")


def test_solved_perturbed_state_passes():
    from torus_ma.solver import solve_at_t
    p = perturbed_problem(32)
    s = solve_at_t(p, 0.5)
    recs = [check_max_u(s), check_newton_maclaurin(s), check_sandwich_and_inf_u(s, 0.5),
            check_S_upper_nonpositive(s)]
    assert all(r.status in ("pass", "skip") for r in recs)
    assert recs[0].status == "pass" and recs[1].status == "pass"
