"""The fixed radially symmetric steady field, and the mass/kinetic split.

Any admissible flow state is stored as (m, omega_kin): a multiple m of the
steady swirl Sigma carrying all the vorticity mass, plus a mean-zero gridded
vorticity whose induced velocity has finite kinetic energy.  Sigma is built
from the scaled standard bump profile, normalized to unit total vorticity
mass, with its closed-form velocity

    Sigma(x) = x_perp / |x|^2 * integral_0^|x| s g(s) ds.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_simpson, quad

from eustat import kernels, spectral
from eustat.errors import SupportTooLargeError
from eustat.grid import Grid, ScalarField, VectorField, _readonly, plan_for

RADIAL_MESH_POINTS = 100_001


def bump(t):
    """Standard bump exp(-1/(1-t^2)) on |t| < 1, vectorized."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


@lru_cache(maxsize=1)
def _bump_first_moment() -> float:
    """integral_0^1 t exp(-1/(1-t^2)) dt."""
    val, err = quad(lambda t: t * math.exp(-1.0 / (1.0 - t * t)), 0.0, 1.0, epsabs=1e-15, epsrel=1e-13)
    return val


@dataclass(frozen=True)
class RadialProfile:
    """g(s) = amplitude * exp(-1/(1-(s/R)^2)) for s < R, else 0."""

    support_radius: float
    amplitude: float

    @classmethod
    def normalized(cls, support_radius: float) -> "RadialProfile":
        """Amplitude solved so that 2*pi*integral_0^R s g(s) ds = 1."""
        amp = 1.0 / (2.0 * math.pi * support_radius**2 * _bump_first_moment())
        return cls(support_radius, amp)

    def g(self, s):
        return self.amplitude * bump(np.asarray(s, dtype=np.float64) / self.support_radius)

    def g_prime(self, s):
        """Analytic radial derivative of the profile."""
        t = np.asarray(s, dtype=np.float64) / self.support_radius
        out = np.zeros_like(t)
        inside = np.abs(t) < 1.0
        ti = t[inside]
        out[inside] = (
            self.amplitude
            * np.exp(-1.0 / (1.0 - ti**2))
            * (-2.0 * ti / (1.0 - ti**2) ** 2)
            / self.support_radius
        )
        return out

    def mass(self) -> float:
        """2*pi*integral_0^R s g(s) ds (exactly 1 for normalized profiles)."""
        return 2.0 * math.pi * self.amplitude * self.support_radius**2 * _bump_first_moment()

    def enclosed(self, r: float) -> float:
        """G(r) = integral_0^r s g(s) ds by adaptive quadrature, cached per radius."""
        R = self.support_radius
        if r >= R:
            return self.amplitude * R**2 * _bump_first_moment()
        if r <= 0.0:
            return 0.0
        return self.amplitude * R**2 * _enclosed_unit(r / R)

    def speed(self, r):
        """|Sigma|(r) = G(r)/r, with the removable singularity at 0."""
        r = np.asarray(r, dtype=np.float64)
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = np.array([self.enclosed(ri) for ri in r[pos]]) / r[pos]
        return out


@lru_cache(maxsize=None)
def _enclosed_unit(t0: float) -> float:
    val, err = quad(lambda t: t * math.exp(-1.0 / (1.0 - t * t)), 0.0, t0, epsabs=1e-15, epsrel=1e-13)
    return val


class StationaryField:
    """Sigma sampled on a grid, with the constants the estimates need.

    velocity: closed-form samples of Sigma; omega_sigma: g(|x|) samples
    renormalized to exact unit discrete mass (the raw quadrature defect is
    kept in mass_defect); grad_sup_norm / sup_norm come from the analytic
    radial formulas maximized on a fine mesh, not from grid differencing.
    Immutable; shared read-only across workers.
    """

    def __init__(self, profile: RadialProfile, grid: Grid, velocity: VectorField,
                 omega_sigma: ScalarField, mass_defect: float,
                 grad_sup_norm: float, sup_norm: float):
        self.profile = profile
        self.grid = grid
        self.velocity = velocity
        self.omega_sigma = omega_sigma
        self.mass_defect = mass_defect
        self.grad_sup_norm = grad_sup_norm
        self.sup_norm = sup_norm
        gx, gy = spectral.gradient(omega_sigma)
        self._omega_grad = (_readonly(gx), _readonly(gy))
        plan = plan_for(grid)
        lap_hat = -plan.k2 * plan.fft(omega_sigma.values)
        lap_hat.setflags(write=False)
        self._omega_lap_hat = lap_hat

    def omega_gradient(self):
        return self._omega_grad

    def omega_laplacian_hat(self):
        return self._omega_lap_hat

    def curl_defect(self) -> float:
        """sup over the interior half-box of |curl(velocity) - omega_sigma|.

        Centered differences, not spectral: the sampled swirl decays like
        1/|x| and is not periodic, so a global spectral curl is polluted by
        the box seam.  The residual is pure O(h^2) discretization error.
        """
        u1, u2 = self.velocity.u1.values, self.velocity.u2.values
        h = self.grid.spacing
        c = (np.roll(u2, -1, axis=0) - np.roll(u2, 1, axis=0)) / (2 * h) - (
            np.roll(u1, -1, axis=1) - np.roll(u1, 1, axis=1)
        ) / (2 * h)
        X, Y = self.grid.nodes()
        interior = np.maximum(np.abs(X), np.abs(Y)) <= self.grid.box_half_width / 2
        return float(np.max(np.abs(c - self.omega_sigma.values)[interior]))

    def radial_tangency_defect(self) -> float:
        """sup |Sigma . grad omega_sigma| with the analytic radial gradient.

        Exactly zero in exact arithmetic (the swirl is tangent to the level
        sets of g(|x|)); what remains is pure rounding.
        """
        r = self.grid.radii()
        X, Y = self.grid.nodes()
        gp = self.profile.g_prime(r)
        with np.errstate(invalid="ignore"):
            rx = np.where(r > 0, X / np.where(r > 0, r, 1.0), 0.0)
            ry = np.where(r > 0, Y / np.where(r > 0, r, 1.0), 0.0)
        adv = self.velocity.u1.values * (gp * rx) + self.velocity.u2.values * (gp * ry)
        return float(np.max(np.abs(adv)))


def _radial_extrema(profile: RadialProfile):
    """(sup |Sigma|, sup pointwise 2-norm of grad Sigma) on a fine radial mesh.

    For a pure swirl V(r) e_theta the gradient's singular values are |V'| and
    V/r, with V = G/r, V' = g - G/r^2.  Outside the support V = 1/(2 pi r),
    where both branches decay, so the mesh only needs (0, R].
    """
    R = profile.support_radius
    ts = np.linspace(0.0, 1.0, RADIAL_MESH_POINTS)
    F = cumulative_simpson(ts * bump(ts), x=ts, initial=0.0)
    r = ts[1:] * R
    G = profile.amplitude * R**2 * F[1:]
    g = profile.g(r)
    V = G / r
    Vp = g - G / r**2
    grad_inner = np.maximum(np.abs(Vp), V / r)
    grad_outer = 1.0 / (2.0 * math.pi * R**2)
    sup_v = max(float(V.max()), 1.0 / (2.0 * math.pi * R))
    sup_grad = max(float(grad_inner.max()), grad_outer)
    return sup_v, sup_grad


def build_sigma(support_radius: float, grid: Grid) -> StationaryField:
    """Normalized stationary field sampled on the grid."""
    if support_radius > grid.box_half_width / 4 * (1.0 + 1e-12):
        raise SupportTooLargeError(
            f"support_radius {support_radius} exceeds box_half_width/4 = {grid.box_half_width / 4}"
        )
    profile = RadialProfile.normalized(support_radius)
    r = grid.radii()
    gvals = profile.g(r)
    raw_mass = grid.cell_area * kernels.tree_sum(gvals)
    mass_defect = abs(raw_mass - 1.0)
    omega_sigma = ScalarField(grid, gvals / raw_mass)

    # closed-form velocity on the node lattice; G cached per unique radius
    X, Y = grid.nodes()
    flat_r = r.ravel()
    uniq, inverse = np.unique(flat_r, return_inverse=True)
    G_uniq = np.array([profile.enclosed(ri) for ri in uniq])
    G = G_uniq[inverse].reshape(r.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(r > 0, G / np.where(r > 0, r**2, 1.0), 0.0)
    velocity = VectorField.from_arrays(grid, -Y * q, X * q)

    sup_v, sup_grad = _radial_extrema(profile)
    return StationaryField(profile, grid, velocity, omega_sigma, mass_defect, sup_grad, sup_v)


@dataclass(frozen=True)
class VorticityState:
    """Flow state: stationary-part mass m plus mean-zero kinetic vorticity."""

    m: float
    omega_kin: ScalarField

    def __post_init__(self):
        scale = float(np.max(np.abs(self.omega_kin.values)))
        mu = spectral.mean(self.omega_kin)
        if abs(mu) > max(1e-12 * scale, spectral.MEAN_FLOOR):
            raise ValueError(
                f"kinetic vorticity must be mean-zero: mean {mu:.3e}, max {scale:.3e}"
            )

    @property
    def grid(self) -> Grid:
        return self.omega_kin.grid

    @classmethod
    def zero(cls, grid, m=0.0):
        return cls(float(m), ScalarField.zeros(grid))


def decompose(omega_total: ScalarField, sigma: StationaryField) -> VorticityState:
    """Split a total vorticity into m * omega_Sigma + mean-zero remainder."""
    m = spectral.integral(omega_total)
    kin = omega_total.values - m * sigma.omega_sigma.values
    return VorticityState(m, ScalarField(omega_total.grid, kin))


def reconstruct(state: VorticityState, sigma: StationaryField) -> ScalarField:
    """Total vorticity m * omega_Sigma + omega_kin."""
    return ScalarField(state.grid, state.m * sigma.omega_sigma.values + state.omega_kin.values)


def kinetic_velocity(state: VorticityState) -> VectorField:
    return spectral.biot_savart(state.omega_kin)


def full_velocity(state: VorticityState, sigma: StationaryField) -> VectorField:
    """m * Sigma + Biot-Savart of the (2/3-filtered) kinetic vorticity."""
    ut = spectral.filtered_biot_savart(state.omega_kin)
    return VectorField.from_arrays(
        state.grid,
        state.m * sigma.velocity.u1.values + ut.u1.values,
        state.m * sigma.velocity.u2.values + ut.u2.values,
    )


def e_norm(state: VorticityState) -> float:
    """|m| + L^2 norm of the kinetic velocity."""
    return abs(state.m) + spectral.l2_norm_vec(kinetic_velocity(state))


def constant_a(horizon_T: float, sigma: StationaryField) -> float:
    """exp(T * sup|grad Sigma|), the growth factor of the kinetic energy bound."""
    if not horizon_T > 0:
        raise ValueError("horizon_T must be positive")
    return math.exp(horizon_T * sigma.grad_sup_norm)


def gamma(state0: VorticityState, sigma: StationaryField, horizon_T: float) -> float:
    """(1 + ||u_kin(0)||_L2) * a^|m|, the local kinetic-energy budget."""
    a = constant_a(horizon_T, sigma)
    return (1.0 + spectral.l2_norm_vec(kinetic_velocity(state0))) * a ** abs(state0.m)
