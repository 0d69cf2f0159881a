"""Newton-Krylov solver for ``(t omega + ddc log omega^n + ddc u)^n = e^u omega^n``.

The residual is ``Phi(t, u) = log det(omega_t) - log det(omega) - u`` with
``omega_t = t omega + ddc(ricci) + ddc(u)``.  Its linearization in ``u`` is
``Delta_t - 1``, inverted by preconditioned conjugate gradients on the
volume-weighted (hence symmetric) form of the operator.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse.linalg as sla

from .curvature import KappaSummary, kappa_summary
from .errors import IterationLimit, NewtonDiverged, PositivityLost
from .grid import (TorusGrid, adjugate, ddc, det, integrate, log_ratio_det,
                   min_eigenvalue_field, trace_ddc)

logger = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    tol: float = 1e-10
    max_newton: int = 50
    max_backtracks: int = 30
    linear_tol: float = 1e-3
    pos_floor: float = 1e-8
    max_linear: int = 500
    damp_start: bool = True

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class ProblemData:
    """Background metric and its Ricci potential ``log det omega``."""

    grid: TorusGrid
    omega: np.ndarray
    ricci_potential: np.ndarray
    ddc_ricci: np.ndarray
    _kappa: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_metric(cls, grid: TorusGrid, omega) -> "ProblemData":
        ricci = log_ratio_det(omega, grid.identity())
        return cls(grid, omega, ricci, ddc(grid, ricci))

    @cached_property
    def log_det_omega(self):
        return np.log(det(self.omega))

    @cached_property
    def volume(self) -> float:
        return integrate(self.grid, 1.0, self.omega)

    def kappa(self, samples: int = 64) -> KappaSummary:
        if samples not in self._kappa:
            self._kappa[samples] = kappa_summary(self.grid, self.omega, samples)
        return self._kappa[samples]

    def form(self, t, u=None) -> np.ndarray:
        """``t omega + ddc(ricci) + ddc(u)``; the potentials are summed before differentiating."""
        if u is None:
            return t * self.omega + self.ddc_ricci
        return t * self.omega + ddc(self.grid, self.ricci_potential + u)


@dataclass
class ContinuityState:
    problem: ProblemData
    t: float
    u: np.ndarray
    omega_t: np.ndarray
    residual_sup: float
    newton_iters: int = 0
    trace: list = field(default_factory=list)
    linear_iters: int = 0
    _floor: float | None = field(default=None, repr=False)

    @property
    def grid(self) -> TorusGrid:
        return self.problem.grid

    @property
    def n(self) -> int:
        return self.problem.grid.n

    @cached_property
    def volume(self) -> float:
        return integrate(self.grid, 1.0, self.omega_t)

    @property
    def residual_floor(self) -> float:
        """Round-off floor of the residual at ``u`` (see :func:`residual_floor`); computed on first use."""
        if self._floor is None:
            self._floor = residual_floor(self.problem, self.t, self.u)
        return self._floor

    @cached_property
    def _adj(self):
        return adjugate(self.omega_t)

    @cached_property
    def _weight(self):
        return det(self.omega_t)

    def quadratic_constant(self, floor: float | None = None) -> float | None:
        """``max r_{k+1} / r_k^2`` over the last three Newton residuals above ``floor``.

        Iterates within ``floor`` are round-off limited and carry no rate
        information; pass ``floor=0`` for the raw ratio.
        """
        if floor is None:
            floor = FLOOR_FACTOR * self.residual_floor
        r = [e["residual_sup"] for e in self.trace if e["residual_sup"] > floor]
        if len(r) < 3:
            return None
        tail = r[-3:]
        return max(tail[k + 1] / tail[k] ** 2 for k in range(2))


FLOOR_FACTOR = 10.0


def residual_floor(p: ProblemData, t: float, u) -> float:
    """Change of the residual under a one-ulp grid-scale perturbation of ``u``.

    The Laplacian amplifies representation error in ``u`` by roughly
    ``(pi N)^2 / (4 t)``, so no float64 field gets below this level.
    """
    # fixed random signs: broadband, unlike a checkerboard, which ddc annihilates
    sign = np.random.default_rng(0).choice((-1.0, 1.0), size=p.grid.shape)
    pert = np.spacing(np.abs(u)) * sign
    return float(np.max(np.abs(residual(p, t, u + pert) - residual(p, t, u))))


def _check_t(t):
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")


def _positivity(form, floor):
    lam = min_eigenvalue_field(form)
    k = np.argmin(lam)
    m = lam.flat[k]
    if not m > floor:
        raise PositivityLost(np.unravel_index(k, lam.shape), m)


def residual(p: ProblemData, t: float, u) -> np.ndarray:
    """``log((t omega + ddc log omega^n + ddc u)^n / omega^n) - u``."""
    _check_t(t)
    form = p.form(t, u)
    _positivity(form, 0.0)
    return np.log(det(form)) - p.log_det_omega - u


def make_state(p: ProblemData, t: float, u, **kw) -> ContinuityState:
    """State from ``u`` without solving; ``residual_sup`` is nan where the form is not positive."""
    form = p.form(t, u)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.log(det(form)) - p.log_det_omega - u
    return ContinuityState(p, t, u, form, float(np.max(np.abs(r))), **kw)


def linearized_apply(state: ContinuityState, h) -> np.ndarray:
    """``(Delta_t - 1) h`` with ``Delta_t`` the Laplacian of ``omega_t``."""
    return _weighted_laplacian(state, h) / state._weight - h


def _weighted_laplacian(state, h):
    """``det(omega_t) Delta_t h = tr(adj(omega_t) ddc h)``; symmetric on the grid."""
    return trace_ddc(state.grid, state._adj, h)


def _preconditioner(state):
    grid = state.grid
    gbar = state.omega_t.reshape(-1, grid.n, grid.n).mean(axis=0)
    abar = adjugate(gbar[None])[0]
    wbar = float(np.mean(state._weight))
    # symbol of -tr(abar ddc) + wbar
    sym = wbar
    for i in range(grid.n):
        for j in range(grid.n):
            re, im = grid.hessian_multipliers(i, j)
            # abar[j, i] pairs with the (i, j) entry; its real part sees re, its imaginary part -im
            sym = sym - (abar[j, i].real * re - abar[j, i].imag * im)
    inv_sym = 1.0 / sym

    def apply(r):
        return grid.irfft(grid.rfft(r) * inv_sym)

    return apply


def solve_linear(state: ContinuityState, rhs, tol: float = 1e-3, max_iter: int = 500,
                 stall: int = 40):
    """Solve ``(Delta_t - 1) h = rhs`` to ``sup|residual| <= tol * sup|rhs|``.

    Conjugate gradients on ``W (1 - Delta_t) h = -W rhs`` with ``W = det omega_t``,
    preconditioned by the constant-coefficient operator built from the grid
    mean of ``omega_t`` and inverted in Fourier space.  The collocated
    operator is symmetric only on resolved modes, so when the sup-norm
    residual has not improved for ``stall`` iterations the solve continues
    from the current iterate with preconditioned GMRES.

    Returns
    -------
    h : ndarray
    iterations : int
        CG iterations plus GMRES inner iterations.
    """
    W = state._weight
    rhs = np.asarray(rhs, dtype=float)
    target = tol * np.max(np.abs(rhs))
    h = np.zeros_like(rhs)
    if target == 0:
        return h, 0

    def A(x):
        return W * x - _weighted_laplacian(state, x)

    precond = _preconditioner(state)
    r = -W * rhs
    z = precond(r)
    p = z.copy()
    rz = np.vdot(r, z).real
    best, best_it = np.inf, 0
    for it in range(1, max_iter + 1):
        Ap = A(p)
        alpha = rz / np.vdot(p, Ap).real
        h += alpha * p
        r -= alpha * Ap
        res = np.max(np.abs(r / W))
        if res <= target:
            # confirm against a fresh residual; the recurrence drifts slowly
            true = linearized_apply(state, h) - rhs
            if np.max(np.abs(true)) <= target:
                return h, it
            r = W * true
        if res < 0.9 * best:
            best, best_it = res, it
        elif it - best_it >= stall:
            logger.debug("CG stalled at %.2e after %d iterations; switching to GMRES", best, it)
            h, extra = _gmres(state, rhs, h, target, precond, max_iter - it)
            return h, it + extra
        z = precond(r)
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise IterationLimit(f"linear solve did not reach tol {tol} in {max_iter} iterations")


def _gmres(state, rhs, h0, target, precond, budget, restart=50):
    """Preconditioned restarted GMRES on ``W (1 - Delta_t) h = -W rhs`` from ``h0``."""
    shape, m = rhs.shape, rhs.size
    W = state._weight
    A = sla.LinearOperator((m, m), dtype=float, matvec=lambda x: (
        W * x.reshape(shape) - _weighted_laplacian(state, x.reshape(shape))).ravel())
    M = sla.LinearOperator((m, m), dtype=float, matvec=lambda x: precond(x.reshape(shape)).ravel())
    b = (-W * rhs).ravel()
    x = h0.ravel().copy()
    count = [0]

    def tick(_):
        count[0] += 1

    rtol = 0.1 * target / np.max(np.abs(rhs))
    while count[0] < max(budget, restart):
        x, _ = sla.gmres(A, b, x0=x, M=M, rtol=rtol, atol=0.0, restart=restart,
                         maxiter=max(1, (budget - count[0]) // restart),
                         callback=tick, callback_type="pr_norm")
        h = x.reshape(shape)
        if np.max(np.abs(linearized_apply(state, h) - rhs)) <= target:
            return h, count[0]
        rtol *= 0.01
    raise IterationLimit(f"linear solve did not reach sup residual {target:.3e} "
                         f"within {budget} GMRES iterations")


def _admissible_start(p, t, u, cfg, max_halvings=30):
    """Blend ``u`` toward ``-ricci`` until the starting form clears ``pos_floor``.

    At blend ``s`` the form is ``t omega + (1 - s) ddc(ricci + u)``; ``s = 1``
    gives ``t omega`` itself.
    """
    form = p.form(t, u)
    if np.min(min_eigenvalue_field(form)) > cfg.pos_floor or not cfg.damp_start:
        _positivity(form, cfg.pos_floor)
        return u, form, 0.0
    for k in range(1, max_halvings + 2):
        s = 1.0 - 0.5 ** k if k <= max_halvings else 1.0
        cand = (1 - s) * u - s * p.ricci_potential
        form = p.form(t, cand)
        if np.min(min_eigenvalue_field(form)) > cfg.pos_floor:
            return cand, form, s
    _positivity(form, cfg.pos_floor)


def _finish(state, lin_total):
    state.linear_iters = lin_total
    return state


def solve_at_t(p: ProblemData, t: float, u_init=None, cfg: SolverConfig | None = None) -> ContinuityState:
    """Damped Newton for ``Phi(t, u) = 0`` starting from ``u_init``.

    Each step solves ``(Delta_t - 1) h = -Phi`` to relative accuracy
    ``min(cfg.linear_tol, |Phi|_sup)``, then backtracks ``u + lam h`` until the
    candidate form stays above ``cfg.pos_floor`` and the residual sup-norm
    decreases.
    """
    cfg = cfg or SolverConfig()
    _check_t(t)
    grid = p.grid
    u = grid.constant(0.0) if u_init is None else np.array(u_init, dtype=float)
    u, form, blend = _admissible_start(p, t, u, cfg)
    phi = np.log(det(form)) - p.log_det_omega - u
    r = float(np.max(np.abs(phi)))
    trace_log = [{"iter": 0, "residual_sup": r, "lambda": None, "start_blend": blend}]
    lin_total = 0
    state = ContinuityState(p, t, u, form, r, 0, trace_log)
    for k in range(1, cfg.max_newton + 1):
        if r <= cfg.tol:
            return _finish(state, lin_total)
        eta = min(cfg.linear_tol, r)
        h, its = solve_linear(state, -phi, eta, cfg.max_linear)
        lin_total += its
        lam = 1.0
        reason = None
        for _ in range(cfg.max_backtracks + 1):
            cand = u + lam * h
            cform = p.form(t, cand)
            if np.min(min_eigenvalue_field(cform)) > cfg.pos_floor:
                cphi = np.log(det(cform)) - p.log_det_omega - cand
                cr = float(np.max(np.abs(cphi)))
                if cr < r:
                    break
                reason = "residual"
            else:
                reason = "positivity"
            lam *= 0.5
        else:
            if reason == "positivity":
                raise PositivityLost(message=f"backtracking reached lambda={2 * lam:.3e} at t={t} "
                                             f"without a form above pos_floor={cfg.pos_floor}")
            raise NewtonDiverged(f"residual {r:.3e} did not decrease within "
                                 f"{cfg.max_backtracks} backtracks at t={t} "
                                 f"(round-off floor {residual_floor(p, t, u):.1e})")
        u, phi, r = cand, cphi, cr
        trace_log.append({"iter": k, "residual_sup": r, "lambda": lam})
        logger.debug("t=%g newton %d residual %.3e lambda %g cg %d", t, k, r, lam, its)
        state = ContinuityState(p, t, u, cform, r, k, trace_log)
    if r <= cfg.tol:
        return _finish(state, lin_total)
    raise IterationLimit(f"Newton did not reach tol {cfg.tol} in {cfg.max_newton} steps at t={t} (residual {r:.3e})")
