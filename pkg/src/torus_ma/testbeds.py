"""Band-limited testbed potentials and metrics.

A potential is a finite sum of cosine modes
``a * cos(2 pi <k, x> + p)`` with an integer frequency vector ``k`` over the
real axes ``(x_1, y_1, ...)``.  The complex Hessian of each mode is known in
closed form, which gives the finite-difference oracles an analytic callable to
differentiate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import TorusGrid, metric_from_potential


@dataclass(frozen=True)
class CosineMode:
    amplitude: float
    freq: tuple
    phase: float = 0.0

    def phase_field(self, coords):
        return 2 * np.pi * sum(k * x for k, x in zip(self.freq, coords)) + self.phase

    def value(self, coords):
        return self.amplitude * np.cos(self.phase_field(coords))

    def ddc(self, coords, n):
        """Analytic ``d^2/dz_i dzbar_j`` of this mode, shape ``coords.shape + (n, n)``."""
        theta = self.phase_field(coords)
        kx = [self.freq[2 * i] for i in range(n)]
        ky = [self.freq[2 * i + 1] for i in range(n)]
        out = np.empty(np.shape(theta) + (n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                c = -np.pi ** 2 * (kx[i] - 1j * ky[i]) * (kx[j] + 1j * ky[j])
                out[..., i, j] = c * self.amplitude * np.cos(theta)
        return out


class CosinePotential:
    """Sum of cosine modes; callable on coordinate tuples."""

    def __init__(self, modes, n):
        self.modes = [m if isinstance(m, CosineMode) else CosineMode(*m) for m in modes]
        self.n = n
        for m in self.modes:
            if len(m.freq) != 2 * n:
                raise ValueError(f"frequency vector {m.freq} needs {2 * n} components")

    def __call__(self, coords):
        out = np.zeros(np.shape(coords[0]))
        for m in self.modes:
            out = out + m.value(coords)
        return out

    def ddc(self, coords):
        out = np.zeros(np.shape(coords[0]) + (self.n, self.n), dtype=complex)
        for m in self.modes:
            out = out + m.ddc(coords, self.n)
        return out

    def metric(self, coords, base=1.0):
        """Analytic ``base * I + ddc(phi)``."""
        g = self.ddc(coords)
        for i in range(self.n):
            g[..., i, i] += base
        return g

    def sample(self, grid: TorusGrid):
        return self(grid.coords)

    def grid_metric(self, grid: TorusGrid, base=1.0):
        return metric_from_potential(grid, base * np.eye(grid.n), self.sample(grid))


def flat_metric(grid: TorusGrid, scale=1.0):
    return grid.identity(scale)


def random_modes(rng, n, kmax=2, count=4, amplitude=1.0):
    """Random cosine modes with frequencies in ``[-kmax, kmax]^{2n}`` (never all zero)."""
    modes = []
    while len(modes) < count:
        k = tuple(int(v) for v in rng.integers(-kmax, kmax + 1, size=2 * n))
        if not any(k):
            continue
        modes.append(CosineMode(float(rng.uniform(-1, 1) * amplitude), k,
                                float(rng.uniform(0, 2 * np.pi))))
    return modes


def random_potential(rng, n, kmax=2, count=4, amplitude=1.0):
    return CosinePotential(random_modes(rng, n, kmax, count, amplitude), n)


def safe_metric_potential(rng, n, kmax=1, count=3, min_eig=0.4):
    """Random potential whose metric ``I + ddc phi`` keeps every eigenvalue above ``min_eig``.

    The operator norm of each mode's Hessian is bounded by
    ``pi^2 |a| |k|^2``, so scaling the total below ``1 - min_eig`` suffices.
    """
    pot = random_potential(rng, n, kmax, count)
    bound = sum(np.pi ** 2 * abs(m.amplitude) * sum(k * k for k in m.freq) for m in pot.modes)
    s = (1.0 - min_eig) / bound
    return CosinePotential([CosineMode(m.amplitude * s, m.freq, m.phase) for m in pot.modes], n)
