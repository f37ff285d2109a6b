"""Periodic computational box, gridded fields and per-grid spectral constants.

The box is [-L, L)^2 with n nodes per axis, node (i, j) at
(-L + i*h, -L + j*h), h = 2L/n.  Field values are float64, row-major, axis 0
is x.  All fields are immutable after construction; transforms use numpy's
real FFTs with the fundamental wavenumber pi/L.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


def _readonly(a):
    out = np.array(a, dtype=np.float64, order="C", copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Grid:
    n: int
    box_half_width: float

    def __post_init__(self):
        n = self.n
        if n < 16 or (n & (n - 1)) != 0:
            raise ValueError(f"grid size must be a power of two >= 16, got {n}")
        if not (self.box_half_width > 0):
            raise ValueError("box_half_width must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.box_half_width / self.n

    @property
    def cell_area(self) -> float:
        return self.spacing * self.spacing

    def axis(self):
        return _axis(self.n, self.box_half_width)

    def nodes(self):
        """(X, Y) coordinate arrays, indexing='ij'."""
        return _nodes(self.n, self.box_half_width)

    def radii(self):
        return _radii(self.n, self.box_half_width)


@lru_cache(maxsize=None)
def _axis(n, box_half_width):
    h = 2.0 * box_half_width / n
    return _readonly(-box_half_width + h * np.arange(n))


@lru_cache(maxsize=None)
def _nodes(n, box_half_width):
    x = _axis(n, box_half_width)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return _readonly(X), _readonly(Y)


@lru_cache(maxsize=None)
def _radii(n, box_half_width):
    X, Y = _nodes(n, box_half_width)
    return _readonly(np.hypot(X, Y))


class SpectralPlan:
    """Wavenumber arrays and masks for rfft2-based transforms on one grid.

    Derivative arrays (dkx, dky) have the Nyquist entries zeroed so that
    derivatives of real fields stay real; k2 keeps the full values for the
    Laplacian and heat factors.  Immutable and shared read-only.
    """

    def __init__(self, grid: Grid):
        n = grid.n
        k0 = np.pi / grid.box_half_width
        kx = k0 * np.fft.fftfreq(n, d=1.0 / n)  # full axis (x)
        ky = k0 * np.arange(n // 2 + 1)  # rfft axis (y)
        self.grid = grid
        self.kx = _readonly(kx.reshape(n, 1))
        self.ky = _readonly(ky.reshape(1, n // 2 + 1))
        dkx = kx.copy()
        dkx[n // 2] = 0.0
        dky = ky.copy()
        dky[-1] = 0.0
        self.dkx = _readonly(dkx.reshape(n, 1))
        self.dky = _readonly(dky.reshape(1, n // 2 + 1))
        k2 = self.kx**2 + self.ky**2
        self.k2 = _readonly(k2)
        inv = np.zeros_like(k2)
        nz = k2 > 0
        inv[nz] = 1.0 / k2[nz]
        self.inv_k2 = _readonly(inv)
        # 2/3-rule mask for quadratic products
        cut = (2.0 / 3.0) * k0 * (n / 2)
        self.dealias = np.asarray((np.abs(self.kx) < cut) & (np.abs(self.ky) < cut))
        self.dealias.setflags(write=False)

    def fft(self, values):
        return np.fft.rfft2(values)

    def ifft(self, coeffs):
        return np.fft.irfft2(coeffs, s=(self.grid.n, self.grid.n))

    def full_k2(self):
        """|k|^2 on the full (fft2) wavenumber lattice."""
        return _full_k2(self.grid.n, self.grid.box_half_width)


@lru_cache(maxsize=None)
def _full_k2(n, box_half_width):
    k = (np.pi / box_half_width) * np.fft.fftfreq(n, d=1.0 / n)
    return _readonly(k.reshape(n, 1) ** 2 + k.reshape(1, n) ** 2)


@lru_cache(maxsize=None)
def plan_for(grid: Grid) -> SpectralPlan:
    return SpectralPlan(grid)


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"field shape {v.shape} does not match grid n={self.grid.n}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must all be finite")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.n, grid.n)))

    @classmethod
    def from_function(cls, grid, fn):
        X, Y = grid.nodes()
        return cls(grid, fn(X, Y))

    def __add__(self, other):
        self._check(other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return ScalarField(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def _check(self, other):
        if other.grid != self.grid:
            raise ValueError("grid mismatch")


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    u1: ScalarField
    u2: ScalarField

    def __post_init__(self):
        if self.u1.grid != self.grid or self.u2.grid != self.grid:
            raise ValueError("vector components must share the grid")

    @classmethod
    def from_arrays(cls, grid, a1, a2):
        return cls(grid, ScalarField(grid, a1), ScalarField(grid, a2))

    @classmethod
    def zeros(cls, grid):
        return cls.from_arrays(grid, np.zeros((grid.n, grid.n)), np.zeros((grid.n, grid.n)))

    def __add__(self, other):
        return VectorField(self.grid, self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        return VectorField(self.grid, self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, scalar):
        return VectorField(self.grid, self.u1 * scalar, self.u2 * scalar)

    __rmul__ = __mul__
