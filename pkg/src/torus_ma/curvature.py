"""Kähler curvature and holomorphic sectional curvature of grid metrics."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grid import TorusGrid, inverse

_ZERO_TOL = 1e-10


@dataclass
class CurvatureField:
    """``R[..., i, j, k, l] = R_{i jbar k lbar}`` of the metric ``g``."""

    R: np.ndarray
    g: np.ndarray

    def symmetry_defect(self) -> float:
        R = self.R
        conj = np.abs(R - np.conj(np.transpose(R, (*range(R.ndim - 4), -3, -4, -1, -2)))).max()
        ik = np.abs(R - np.swapaxes(R, -4, -2)).max()
        jl = np.abs(R - np.swapaxes(R, -3, -1)).max()
        return float(max(conj, ik, jl))


def _metric_derivatives(grid: TorusGrid, g):
    """FFT each metric entry once; return ``(d_k g, dbar_l g, d_k dbar_l g)`` helpers."""
    gh = grid.fft(g)

    def dz(k):
        return grid.ifft(gh * grid.dz_multiplier(k)[..., None, None])

    def dzbar(l):
        return grid.ifft(gh * grid.dzbar_multiplier(l)[..., None, None])

    def ddbar(k, l):
        m = grid.dz_multiplier(k) * grid.dzbar_multiplier(l)
        return grid.ifft(gh * m[..., None, None])

    return gh, dz, dzbar, ddbar


def curvature_tensor(grid: TorusGrid, g) -> CurvatureField:
    """Full curvature tensor
    ``R_{i jbar k lbar} = -d_k d_lbar g_{i jbar} + g^{p qbar} d_k g_{i qbar} d_lbar g_{p jbar}``.

    Memory is ``grid.size * n^4`` complex numbers; use :func:`kappa_summary`
    for large ``n = 2`` grids, which contracts with directions on the fly.
    """
    n = grid.n
    G = inverse(g)
    _, dz, dzbar, ddbar = _metric_derivatives(grid, g)
    dg = [dz(k) for k in range(n)]
    dbg = [dzbar(l) for l in range(n)]
    R = np.empty(grid.shape + (n, n, n, n), dtype=complex)
    for k in range(n):
        for l in range(n):
            R[..., :, :, k, l] = -ddbar(k, l) + dg[k] @ G @ dbg[l]
    return CurvatureField(R, g)


def _check_direction(xi, n):
    xi = np.asarray(xi, dtype=complex).reshape(n)
    if not np.any(xi):
        raise ValueError("zero direction")
    return xi


def sectional_H(curv: CurvatureField, g, xi) -> np.ndarray:
    """``H(xi) = R(xi, xibar, xi, xibar) / |xi|_g^4`` at every grid point."""
    n = g.shape[-1]
    xi = _check_direction(xi, n)
    xc = np.conj(xi)
    num = np.einsum("...ijkl,i,j,k,l->...", curv.R, xi, xc, xi, xc).real
    den = np.einsum("...ij,i,j->...", g, xi, xc).real
    return num / den ** 2


def sectional_H_from_metric(grid: TorusGrid, g, directions) -> np.ndarray:
    """``H`` for each direction without materialising the curvature tensor.

    Returns an array of shape ``grid.shape + (len(directions),)``.
    """
    n = grid.n
    G = inverse(g)
    gh = grid.fft(g)
    out = np.empty(grid.shape + (len(directions),))
    for s, xi in enumerate(directions):
        xi = _check_direction(xi, n)
        xc = np.conj(xi)
        m = sum(xi[k] * grid.dz_multiplier(k) for k in range(n))
        mb = sum(xc[l] * grid.dzbar_multiplier(l) for l in range(n))
        q_hat = np.einsum("...ij,i,j->...", gh, xi, xc)
        first = grid.ifft(q_hat * m * mb)
        # w_q = D_xi (xi^T g)_q,  y_p = Dbar_xi (g xibar)_p
        w = grid.ifft(np.einsum("...iq,i->...q", gh, xi) * m[..., None])
        y = grid.ifft(np.einsum("...pj,j->...p", gh, xc) * mb[..., None])
        second = np.einsum("...q,...qp,...p->...", w, G, y)
        num = (-first + second).real
        den = np.einsum("...ij,i,j->...", g, xi, xc).real
        out[..., s] = num / den ** 2
    return out


def sample_directions(n: int, samples: int) -> list:
    """Deterministic unit directions in C^n.

    For ``n = 2`` the projective line CP^1 is covered by a Fibonacci lattice
    on the Hopf sphere, plus coordinate and diagonal directions.
    """
    if n == 1:
        return [np.array([1.0 + 0j])]
    dirs = [np.array([1, 0], complex), np.array([0, 1], complex)]
    s2 = 1 / np.sqrt(2)
    for ph in (1, -1, 1j, -1j):
        dirs.append(np.array([s2, s2 * ph], complex))
    golden = np.pi * (3 - np.sqrt(5))
    for k in range(samples):
        zc = 1 - 2 * (k + 0.5) / samples  # cos of the polar angle
        alpha = np.arccos(zc)
        psi = (k * golden) % (2 * np.pi)
        dirs.append(np.array([np.cos(alpha / 2), np.exp(1j * psi) * np.sin(alpha / 2)]))
    return dirs


@dataclass
class KappaSummary:
    kappa_const: float
    kappa_field: np.ndarray = field(repr=False)
    sup_H: float
    inf_H: float
    samples: int
    classification: str
    sup_H_field: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "sup_H": self.sup_H,
            "inf_H": self.inf_H,
            "kappa_const": self.kappa_const,
            "classification": self.classification,
            "samples": self.samples,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def classify(sup_H: float, inf_H: float, sup_field, tol=_ZERO_TOL) -> str:
    if sup_H < -tol:
        return "negative"
    if sup_H <= tol:
        return "quasi-negative" if np.any(sup_field < -tol) else "nonpositive"
    return "mixed" if inf_H < -tol else "nonnegative"


def kappa_summary(grid: TorusGrid, g, samples: int = 64) -> KappaSummary:
    """Extremes of the holomorphic sectional curvature over grid points and sampled directions."""
    if grid.n == 2 and samples < 32:
        raise ValueError("n = 2 needs at least 32 direction samples")
    dirs = sample_directions(grid.n, samples)
    H = sectional_H_from_metric(grid, g, dirs)
    sup_field = H.max(axis=-1)
    sup_H = float(sup_field.max())
    inf_H = float(H.min())
    return KappaSummary(
        kappa_const=0.0 - sup_H,
        kappa_field=np.maximum(0.0, -sup_field),
        sup_H=sup_H,
        inf_H=inf_H,
        samples=len(dirs),
        classification=classify(sup_H, inf_H, sup_field),
        sup_H_field=sup_field,
    )


def synthetic_summary(grid: TorusGrid, sup_H: float, sup_H_field=None) -> KappaSummary:
    """Hand-built summary for hypothesis injection in synthetic checks."""
    if sup_H_field is None:
        sup_H_field = np.full(grid.shape, float(sup_H))
    inf_H = float(np.min(sup_H_field))
    return KappaSummary(
        kappa_const=-float(sup_H),
        kappa_field=np.maximum(0.0, -sup_H_field),
        sup_H=float(sup_H),
        inf_H=inf_H,
        samples=0,
        classification=classify(float(sup_H), inf_H, sup_H_field),
        sup_H_field=sup_H_field,
    )
