"""Independent reference computations used to cross-check the spectral code.

None of these go through the FFT differentiation in :mod:`torus_ma.grid`:

* 4th-order centered finite differences of analytic callables,
* dense periodic differentiation matrices (cotangent formula) for a dense
  Newton solve of the Monge-Ampère residual with a finite-difference Jacobian,
* per-point dense linear algebra (``numpy.linalg``) for determinants,
  eigenvalues and traces.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg

# 4th-order centered stencils
_D1 = ((-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12))
_D2 = ((-2, -1 / 12), (-1, 16 / 12), (0, -30 / 12), (1, 16 / 12), (2, -1 / 12))


def _shift(coords, axis, s):
    out = list(coords)
    out[axis] = out[axis] + s
    return out


def fd_first(func, coords, axis, h=1e-3):
    return sum(w * func(_shift(coords, axis, o * h)) for o, w in _D1) / h


def fd_second(func, coords, a, b, h=1e-3):
    if a == b:
        return sum(w * func(_shift(coords, a, o * h)) for o, w in _D2) / h ** 2
    return fd_first(lambda c: fd_first(func, c, b, h), coords, a, h)


def fd_dz(func, coords, i, h=1e-3):
    """Complex ``d/dz_i`` of a (possibly complex) callable."""
    return 0.5 * (fd_first(func, coords, 2 * i, h) - 1j * fd_first(func, coords, 2 * i + 1, h))


def fd_dzbar(func, coords, i, h=1e-3):
    return 0.5 * (fd_first(func, coords, 2 * i, h) + 1j * fd_first(func, coords, 2 * i + 1, h))


def fd_ddc(func, coords, n, h=1e-3):
    """Finite-difference ``d^2 f / dz_i dzbar_j`` of a real callable."""
    out = np.empty(np.shape(coords[0]) + (n, n), dtype=complex)
    for i in range(n):
        xi, yi = 2 * i, 2 * i + 1
        for j in range(n):
            xj, yj = 2 * j, 2 * j + 1
            out[..., i, j] = 0.25 * (
                fd_second(func, coords, xi, xj, h) + fd_second(func, coords, yi, yj, h)
                + 1j * fd_second(func, coords, xi, yj, h) - 1j * fd_second(func, coords, yi, xj, h)
            )
    return out


def fd_grad_norm_sq(func, metric, coords, n, h=1e-3):
    a = np.stack([fd_dz(func, coords, i, h) for i in range(n)], axis=-1)
    G = np.linalg.inv(metric(coords))
    return np.einsum("...j,...ji,...i->...", np.conj(a), G, a).real


def fd_curvature_n1(metric_entry, coords, h=1e-3):
    """``R = -h_{z zbar} + |h_z|^2 / h`` for a conformal factor callable (n = 1)."""
    hv = metric_entry(coords)
    hzz = 0.25 * (fd_second(metric_entry, coords, 0, 0, h) + fd_second(metric_entry, coords, 1, 1, h))
    hz = fd_dz(metric_entry, coords, 0, h)
    return -hzz + np.abs(hz) ** 2 / hv


# --- per-point dense linear algebra ------------------------------------------

def pointwise_det(h):
    return np.linalg.det(h).real


def pointwise_log_ratio(a, b):
    return np.log(np.linalg.det(a).real) - np.log(np.linalg.det(b).real)


def sigma_ratio(omega_t, omega):
    """``sigma_{n-1}/sigma_n`` of the eigenvalues of omega_t relative to omega via eigh."""
    L = np.linalg.cholesky(omega)
    Li = np.linalg.inv(L)
    lam = np.linalg.eigvalsh(Li @ omega_t @ np.conj(np.swapaxes(Li, -1, -2)))
    return np.sum(1.0 / lam, axis=-1)


def relative_eigs(a, b):
    L = np.linalg.cholesky(b)
    Li = np.linalg.inv(L)
    return np.linalg.eigvalsh(Li @ a @ np.conj(np.swapaxes(Li, -1, -2)))


# --- dense spectral matrices and dense Newton --------------------------------

def periodic_diff_matrix(N):
    """Dense first-derivative matrix on ``N`` equispaced points of the unit circle.

    Cotangent formula for even ``N`` (Nyquist mode annihilated), scaled from
    period ``2 pi`` to period 1.
    """
    if N % 2:
        raise ValueError("N must be even")
    h = 2 * np.pi / N
    i = np.arange(N)
    diff = i[:, None] - i[None, :]
    with np.errstate(divide="ignore"):
        D = 0.5 * (-1.0) ** diff / np.tan(diff * h / 2)
    D[np.diag_indices(N)] = 0.0
    return 2 * np.pi * D


def dense_ddc_n1(N):
    """Dense ``d^2/dz dzbar = (D_x^2 + D_y^2)/4`` on an ``N x N`` grid (row-major x, y)."""
    D = periodic_diff_matrix(N)
    I = np.eye(N)
    Dx = np.kron(D, I)
    Dy = np.kron(I, D)
    return 0.25 * (Dx @ Dx + Dy @ Dy)


def dense_newton_n1(phi, t, u0=None, tol=1e-12, max_iter=60, eps=1e-7):
    """Solve ``log((t g + L ricci + L u) / g) - u = 0`` with dense matrices, n = 1.

    ``phi`` is the metric potential sampled on an ``N x N`` grid, so that the
    metric is ``g = 1 + L phi`` with ``L`` the dense complex Laplacian.  The
    Jacobian is assembled column by column with forward differences and
    factored by LU; no analytic linearization is used.  The default start
    ``u0 = -log g`` makes the starting form ``t g``, which is positive.
    """
    N = phi.shape[0]
    L = dense_ddc_n1(N)
    p = phi.ravel()
    g = 1.0 + L @ p
    ricci = np.log(g)
    base = t * g + L @ ricci

    def residual(u):
        return np.log(base + L @ u) - np.log(g) - u

    u = -ricci if u0 is None else np.asarray(u0, dtype=float).ravel().copy()
    r = residual(u)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol:
            break
        U = u[:, None] + eps * np.eye(N * N)
        R = np.log(base[:, None] + L @ U) - np.log(g)[:, None] - U
        J = (R - r[:, None]) / eps
        step = scipy.linalg.lu_solve(scipy.linalg.lu_factor(J), -r)
        lam = 1.0
        while lam > 1e-6:
            cand = u + lam * step
            if np.all(base + L @ cand > 0):
                rc = residual(cand)
                if np.max(np.abs(rc)) < np.max(np.abs(r)):
                    break
            lam *= 0.5
        u, r = cand, rc
    return u.reshape(N, N), float(np.max(np.abs(r)))


def dense_operator(apply, shape):
    """Assemble a linear map on grid fields as a dense matrix by probing unit vectors."""
    m = int(np.prod(shape))
    A = np.empty((m, m))
    e = np.zeros(m)
    for k in range(m):
        e[k] = 1.0
        A[:, k] = np.asarray(apply(e.reshape(shape))).ravel()
        e[k] = 0.0
    return A
