import numpy as np
import pytest

from eustat import radial
from eustat.grid import Grid, ScalarField


@pytest.fixture(scope="session")
def grid64():
    return Grid(64, np.pi)


@pytest.fixture(scope="session")
def grid128():
    return Grid(128, np.pi)


@pytest.fixture(scope="session")
def sigma64(grid64):
    return radial.build_sigma(np.pi / 4, grid64)


@pytest.fixture(scope="session")
def sigma128(grid128):
    return radial.build_sigma(np.pi / 4, grid128)


def band_limited_field(grid, rng, kmax=None, mean_zero=True):
    """Random real field with spectral support strictly inside the 2/3 ball."""
    n = grid.n
    if kmax is None:
        kmax = n // 4
    coeffs = np.zeros((n, n), dtype=complex)
    for _ in range(12):
        kx = int(rng.integers(-kmax, kmax + 1))
        ky = int(rng.integers(-kmax, kmax + 1))
        if mean_zero and kx == 0 and ky == 0:
            continue
        c = rng.normal() + 1j * rng.normal()
        coeffs[kx % n, ky % n] += c
        coeffs[(-kx) % n, (-ky) % n] += np.conj(c)
    vals = np.real(np.fft.ifft2(coeffs)) * n
    if mean_zero:
        vals = vals - vals.mean()
    return ScalarField(grid, vals)


def super_gaussian(grid, cx, cy, width, amp=1.0):
    X, Y = grid.nodes()
    z = ((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * width**2)
    return amp * np.exp(-(z**3))


def quadrupole(grid, cx, cy, width, amp=1.0):
    X, Y = grid.nodes()
    z = ((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * width**2)
    return amp * np.exp(-(z**3)) * ((X - cx) ** 2 - (Y - cy) ** 2) / width**2
