"""Periodic grids on the flat torus and the spectral Kähler calculus on them.

Fields are plain numpy arrays:

* a scalar field has shape ``grid.shape`` (``2n`` axes of length ``N``),
* a Hermitian field has shape ``grid.shape + (n, n)`` and stores the
  coefficient matrix ``g[..., i, j] = g_{i jbar}``.

Real axes are ordered ``(x_1, y_1, x_2, y_2)`` with ``z_k = x_k + i y_k``.
All derivatives are Fourier multipliers; first-derivative multipliers drop
the Nyquist mode so every differential operator is a polynomial in the same
commuting skew-adjoint matrices.  That keeps summation by parts exact on the
grid, which the volume identities downstream rely on.
"""
from __future__ import annotations

import contextlib
import functools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import NonFiniteField, NonPositiveDeterminant, SingularMetric

_WORKERS = 1


def set_threads(k: int) -> None:
    """Number of FFT worker threads; ``1`` is the bit-reproducible mode."""
    global _WORKERS
    if k < 1:
        raise ValueError("threads must be >= 1")
    _WORKERS = int(k)


def get_threads() -> int:
    return _WORKERS


@contextlib.contextmanager
def threads(k: int):
    old = _WORKERS
    set_threads(k)
    try:
        yield
    finally:
        set_threads(old)


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid on the unit torus ``C^n / Z^{2n}``."""

    n: int
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"complex dimension must be 1 or 2, got {self.n}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        limit = 128 if self.n == 1 else 64
        if self.N > limit:
            raise ValueError(f"N={self.N} exceeds the desk-scale limit {limit} for n={self.n}")

    @property
    def ndim(self) -> int:
        return 2 * self.n

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.ndim

    @property
    def size(self) -> int:
        return self.N ** self.ndim

    @property
    def spacing(self) -> float:
        return 1.0 / self.N

    @property
    def axes(self) -> tuple:
        return tuple(range(self.ndim))

    @cached_property
    def coords(self) -> tuple:
        """Real coordinates ``(x_1, y_1, ...)`` broadcast to the full grid."""
        x = np.arange(self.N) / self.N
        return tuple(np.meshgrid(*([x] * self.ndim), indexing="ij"))

    @cached_property
    def _wavenumbers(self) -> tuple:
        k = 2 * np.pi * sfft.fftfreq(self.N, d=1.0 / self.N)
        k[self.N // 2] = 0.0  # first derivatives discard the Nyquist mode
        out = []
        for a in range(self.ndim):
            s = [1] * self.ndim
            s[a] = self.N
            out.append(k.reshape(s))
        return tuple(out)

    @cached_property
    def _half_wavenumbers(self) -> tuple:
        """Wavenumbers on the ``rfftn`` half grid (last axis truncated)."""
        full = self._wavenumbers
        kr = 2 * np.pi * sfft.rfftfreq(self.N, d=1.0 / self.N)
        kr[-1] = 0.0
        s = [1] * self.ndim
        s[-1] = kr.size
        return full[:-1] + (kr.reshape(s),)

    @functools.lru_cache(maxsize=None)
    def hessian_multipliers(self, i: int, j: int, half: bool = True):
        """Real even multipliers ``(re, im)`` of ``d^2 / dz_i dzbar_j``.

        For real ``f`` the entry is ``irfft(re * fh) + 1j * irfft(im * fh)``.
        """
        k = self._half_wavenumbers if half else self._wavenumbers
        kxi, kyi, kxj, kyj = k[2 * i], k[2 * i + 1], k[2 * j], k[2 * j + 1]
        return -0.25 * (kxi * kxj + kyi * kyj), 0.25 * (kyi * kxj - kxi * kyj)

    def d_multiplier(self, axis: int) -> np.ndarray:
        """Fourier multiplier of ``d/dx_axis``."""
        return 1j * self._wavenumbers[axis]

    def dz_multiplier(self, i: int) -> np.ndarray:
        """Multiplier of ``d/dz_i = (d/dx_i - i d/dy_i) / 2``."""
        kx, ky = self._wavenumbers[2 * i], self._wavenumbers[2 * i + 1]
        return 0.5 * (1j * kx + ky)

    def dzbar_multiplier(self, i: int) -> np.ndarray:
        kx, ky = self._wavenumbers[2 * i], self._wavenumbers[2 * i + 1]
        return 0.5 * (1j * kx - ky)

    @cached_property
    def flat_laplacian_multiplier(self) -> np.ndarray:
        """Multiplier of ``sum_i d^2/dz_i dzbar_i`` (a quarter of the Euclidean Laplacian)."""
        return sum(self.dz_multiplier(i) * self.dzbar_multiplier(i) for i in range(self.n)).real

    # FFT helpers over the grid axes only; trailing matrix axes are left alone.
    def fft(self, f):
        return sfft.fftn(f, axes=self.axes, workers=_WORKERS)

    def ifft(self, fh):
        return sfft.ifftn(fh, axes=self.axes, workers=_WORKERS)

    def rfft(self, f):
        return sfft.rfftn(f, axes=self.axes, workers=_WORKERS)

    def irfft(self, fh):
        return sfft.irfftn(fh, s=self.shape, axes=self.axes, workers=_WORKERS)

    def apply(self, f, multiplier):
        """Apply a Fourier multiplier; real input with a real operator stays real."""
        fh = self.fft(f)
        if fh.ndim > self.ndim:
            multiplier = multiplier.reshape(multiplier.shape + (1,) * (fh.ndim - self.ndim))
        out = self.ifft(fh * multiplier)
        return out

    def diff(self, f, axes):
        """Real-coordinate derivative ``d^k f / dx_{a1} ... dx_{ak}``."""
        m = 1.0
        for a in axes:
            m = m * self.d_multiplier(a)
        out = self.apply(f, m)
        return out.real if np.isrealobj(f) else out

    def dz(self, f, i):
        return self.apply(f, self.dz_multiplier(i))

    def dzbar(self, f, i):
        return self.apply(f, self.dzbar_multiplier(i))

    def identity(self, scale=1.0) -> np.ndarray:
        """Constant Hermitian field ``scale * I``."""
        out = np.zeros(self.shape + (self.n, self.n), dtype=complex)
        for i in range(self.n):
            out[..., i, i] = scale
        return out

    def constant(self, c=0.0) -> np.ndarray:
        return np.full(self.shape, float(c))


def _check_finite(f):
    if not np.all(np.isfinite(f)):
        bad = np.argwhere(~np.isfinite(f))[0]
        raise NonFiniteField(f"non-finite value at grid index {tuple(bad)}")


def ddc(grid: TorusGrid, f) -> np.ndarray:
    """Complex Hessian ``f_{i jbar} = d^2 f / dz_i dzbar_j`` of a real field.

    Each entry is a Fourier multiplier applied to ``f``, so every entry has
    zero grid mean and the pointwise matrices are Hermitian by construction.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape}")
    _check_finite(f)
    fh = grid.rfft(f)
    n = grid.n
    out = np.zeros(grid.shape + (n, n), dtype=complex)
    for i in range(n):
        for j in range(i, n):
            re, im = grid.hessian_multipliers(i, j)
            out[..., i, j].real = grid.irfft(fh * re)
            if i != j:
                out[..., i, j].imag = grid.irfft(fh * im)
                out[..., j, i] = np.conj(out[..., i, j])
    return out


def metric_from_potential(grid: TorusGrid, base, phi) -> np.ndarray:
    """``base + ddc(phi)``; ``base`` may be a constant ``n x n`` matrix or a field."""
    base = np.asarray(base, dtype=complex)
    return base + ddc(grid, phi)


# --- pointwise matrix algebra, closed forms for n = 1, 2 ---------------------

def det(h) -> np.ndarray:
    """Pointwise determinant (real for Hermitian input)."""
    n = h.shape[-1]
    if n == 1:
        return h[..., 0, 0].real.copy()
    if n == 2:
        return (h[..., 0, 0] * h[..., 1, 1] - h[..., 0, 1] * h[..., 1, 0]).real
    return np.linalg.det(h).real


def adjugate(h) -> np.ndarray:
    n = h.shape[-1]
    if n == 1:
        return np.ones_like(h)
    if n == 2:
        out = np.empty_like(h)
        out[..., 0, 0] = h[..., 1, 1]
        out[..., 1, 1] = h[..., 0, 0]
        out[..., 0, 1] = -h[..., 0, 1]
        out[..., 1, 0] = -h[..., 1, 0]
        return out
    return np.linalg.inv(h) * np.linalg.det(h)[..., None, None]


def inverse(h) -> np.ndarray:
    d = det(h)
    if np.any(d == 0) or not np.all(np.isfinite(d)):
        raise SingularMetric("singular matrix field")
    return adjugate(h) / d[..., None, None]


def eigenvalues(h) -> np.ndarray:
    """Pointwise ascending eigenvalues of a Hermitian field, shape ``(..., n)``."""
    n = h.shape[-1]
    if n == 1:
        return h[..., 0, :].real.copy()
    if n == 2:
        a, d = h[..., 0, 0].real, h[..., 1, 1].real
        b = np.abs(h[..., 0, 1])
        m = 0.5 * (a + d)
        r = np.hypot(0.5 * (a - d), b)
        return np.stack([m - r, m + r], axis=-1)
    return np.linalg.eigvalsh(h)


def min_eigenvalue_field(h) -> np.ndarray:
    return eigenvalues(h)[..., 0]


def min_eigenvalue(h) -> float:
    """Infimum over the grid of the smallest eigenvalue (flat reference metric)."""
    return float(np.min(min_eigenvalue_field(h)))


def relative_eigenvalues(a, b) -> np.ndarray:
    """Eigenvalues of ``a`` relative to the positive field ``b`` (roots of det(a - lam b))."""
    n = a.shape[-1]
    if n == 1:
        return (a[..., 0, 0].real / b[..., 0, 0].real)[..., None]
    if n == 2:
        tr = trace(inverse(b) @ a)
        dt = det(a) / det(b)
        m = 0.5 * tr
        r = np.sqrt(np.maximum(m * m - dt, 0.0))
        return np.stack([m - r, m + r], axis=-1)
    L = np.linalg.cholesky(b)
    Li = np.linalg.inv(L)
    return np.linalg.eigvalsh(Li @ a @ np.conj(np.swapaxes(Li, -1, -2)))


def trace(h) -> np.ndarray:
    return np.trace(h, axis1=-2, axis2=-1).real


def log_ratio_det(a, b) -> np.ndarray:
    """Pointwise ``log(det a / det b)``.

    Raises
    ------
    NonPositiveDeterminant
        If ``det a`` (or ``det b``) is not positive somewhere; the first
        offending grid index is attached.
    """
    da, db = det(a), det(b)
    for d in (da, db):
        bad = ~(d > 0)
        if np.any(bad):
            idx = np.argwhere(bad)[0]
            raise NonPositiveDeterminant(idx, d[tuple(idx)])
    return np.log(da) - np.log(db)


def trace_ddc(grid: TorusGrid, A, f) -> np.ndarray:
    """``tr(A ddc f) = sum_ij A[i, j] f_{j ibar}`` for a Hermitian field ``A``.

    Works from the real and imaginary parts of the Hessian entries directly,
    which avoids forming ``ddc f``.
    """
    f = np.asarray(f, dtype=float)
    _check_finite(f)
    fh = grid.rfft(f)
    out = np.zeros(grid.shape)
    for i in range(grid.n):
        for j in range(i, grid.n):
            re, im = grid.hessian_multipliers(i, j)
            a = A[..., j, i]
            if i == j:
                out += a.real * grid.irfft(fh * re)
            else:
                # A[i,j] conj(h_ij) + A[j,i] h_ij = 2 Re(A[j,i] h_ij)
                out += 2 * (a.real * grid.irfft(fh * re) - a.imag * grid.irfft(fh * im))
    return out


def laplacian(grid: TorusGrid, g, f) -> np.ndarray:
    """Kähler Laplacian ``tr(g^{-1} ddc f)``."""
    return trace_ddc(grid, inverse(g), f)


def grad_norm_sq(grid: TorusGrid, g, f) -> np.ndarray:
    """``|grad f|_g^2 = sum g^{i jbar} f_{z_i} f_{zbar_j}`` with ``f_z = (f_x - i f_y)/2``."""
    f = np.asarray(f, dtype=float)
    _check_finite(f)
    fh = grid.fft(f)
    a = np.stack([grid.ifft(fh * grid.dz_multiplier(i)) for i in range(grid.n)], axis=-1)
    G = inverse(g)
    # g^{i jbar} is G[j, i]; the contraction is a^H G a.
    val = np.einsum("...j,...ji,...i->...", np.conj(a), G, a)
    return np.maximum(val.real, 0.0)


def integrate(grid: TorusGrid, f, vol=None) -> float:
    """``int f det(vol) dVol`` over the unit torus (uniform weights, periodic trapezoid)."""
    f = np.broadcast_to(np.asarray(f, dtype=float), grid.shape)
    if vol is not None:
        f = f * det(vol)
    return float(np.mean(f))


def trace_S(omega_t, omega) -> np.ndarray:
    """``S = tr_{omega_t} omega``; equals sigma_{n-1}/sigma_n of the eigenvalues of omega_t relative to omega."""
    return trace(inverse(omega_t) @ omega)
