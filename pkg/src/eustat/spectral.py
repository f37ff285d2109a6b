"""Spectral transforms, Biot-Savart inversion, norms and the mollifier.

Velocity reconstruction from vorticity goes through the streamfunction:
psi solves Lap(psi) = omega (zero-mean gauge), u = (-d_y psi, d_x psi), so
div u = 0 and curl u = omega hold mode by mode.  Quadrature is the
trapezoidal rule on the uniform grid, i.e. cell_area * pairwise-tree sum.
"""

import numpy as np
import scipy.ndimage

from eustat import kernels
from eustat.errors import (
    BallOutsideBoxError,
    InvalidExponentError,
    KernelUnderresolvedError,
    NonZeroMeanError,
)
from eustat.grid import Grid, ScalarField, VectorField, plan_for

MEAN_TOL = 1e-12
MEAN_FLOOR = 1e-15  # absolute slack: dropping a zero mode this small is harmless


def integral(f: ScalarField) -> float:
    return f.grid.cell_area * kernels.tree_sum(f.values)


def mean(f: ScalarField) -> float:
    return kernels.tree_sum(f.values) / f.values.size


def _require_mean_zero(f: ScalarField, op: str):
    m = mean(f)
    scale = float(np.max(np.abs(f.values)))
    if abs(m) > max(MEAN_TOL * scale, MEAN_FLOOR):
        raise NonZeroMeanError(
            f"{op}: field mean {m:.3e} exceeds {MEAN_TOL:g} * max|f| = {MEAN_TOL * scale:.3e}; "
            "use the decomposed mass/kinetic representation"
        )


def laplacian_invert(omega: ScalarField) -> ScalarField:
    """Streamfunction psi with Lap(psi) = omega, mean(psi) = 0."""
    _require_mean_zero(omega, "laplacian_invert")
    plan = plan_for(omega.grid)
    psi_hat = -plan.fft(omega.values) * plan.inv_k2
    return ScalarField(omega.grid, plan.ifft(psi_hat))


def biot_savart(omega: ScalarField) -> VectorField:
    """Divergence-free velocity with curl u = omega (mean-zero omega)."""
    _require_mean_zero(omega, "biot_savart")
    plan = plan_for(omega.grid)
    w_hat = plan.fft(omega.values)
    psi_hat = -w_hat * plan.inv_k2
    u1 = plan.ifft(-1j * plan.dky * psi_hat)
    u2 = plan.ifft(1j * plan.dkx * psi_hat)
    return VectorField.from_arrays(omega.grid, u1, u2)


def curl(u: VectorField) -> ScalarField:
    """Spectral d_x u2 - d_y u1."""
    plan = plan_for(u.grid)
    w = plan.ifft(1j * plan.dkx * plan.fft(u.u2.values) - 1j * plan.dky * plan.fft(u.u1.values))
    return ScalarField(u.grid, w)


def divergence(u: VectorField) -> ScalarField:
    plan = plan_for(u.grid)
    d = plan.ifft(1j * plan.dkx * plan.fft(u.u1.values) + 1j * plan.dky * plan.fft(u.u2.values))
    return ScalarField(u.grid, d)


def lp_norm(f: ScalarField, p) -> float:
    """L^p norm over the box; p = inf gives the node max."""
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(f.values)))
    p = float(p)
    if p < 1.0:
        raise InvalidExponentError(f"p must be >= 1 or inf, got {p}")
    absv = np.abs(f.values)
    if p == 1.0:
        s = kernels.tree_sum(absv)
    elif p == 2.0:
        s = kernels.tree_dot(f.values, f.values)
    else:
        s = kernels.tree_sum(absv**p)
    return float((f.grid.cell_area * s) ** (1.0 / p))


def l2_norm_vec(u: VectorField) -> float:
    s = kernels.tree_dot(u.u1.values, u.u1.values) + kernels.tree_dot(u.u2.values, u.u2.values)
    return float(np.sqrt(u.grid.cell_area * s))


def local_l2_norm(u: VectorField, center, radius: float) -> float:
    """L^2 norm of |u| over the ball B_radius(center); the ball must fit in the box."""
    cx, cy = float(center[0]), float(center[1])
    L = u.grid.box_half_width
    if abs(cx) + radius > L or abs(cy) + radius > L:
        raise BallOutsideBoxError(
            f"ball of radius {radius} at ({cx}, {cy}) leaves the box [-{L}, {L})^2"
        )
    X, Y = u.grid.nodes()
    mask = (X - cx) ** 2 + (Y - cy) ** 2 < radius**2
    sq = u.u1.values[mask] ** 2 + u.u2.values[mask] ** 2
    return float(np.sqrt(u.grid.cell_area * kernels.tree_sum(sq)))


def lp_norm_ball(f: ScalarField, center, radius: float, p: float) -> float:
    """L^p norm of a scalar over a ball (used by the local diagnostics)."""
    cx, cy = float(center[0]), float(center[1])
    L = f.grid.box_half_width
    if abs(cx) + radius > L or abs(cy) + radius > L:
        raise BallOutsideBoxError(f"ball of radius {radius} at ({cx}, {cy}) leaves the box")
    X, Y = f.grid.nodes()
    mask = (X - cx) ** 2 + (Y - cy) ** 2 < radius**2
    vals = np.abs(f.values[mask])
    if p == np.inf:
        return float(vals.max(initial=0.0))
    return float((f.grid.cell_area * kernels.tree_sum(vals ** float(p))) ** (1.0 / p))


def neg_sobolev_proxy_norm(f: ScalarField, order_l: float = 2.0) -> float:
    """Graded negative-order norm: sum over box modes of (1+|k|^2)^-L |f_k|^2.

    Normalized so that order_l = 0 reproduces the L^2 norm (Parseval).
    """
    g = f.grid
    f_hat = np.fft.fft2(f.values)
    w = (1.0 + plan_for(g).full_k2()) ** (-float(order_l))
    s = kernels.tree_sum(w * np.abs(f_hat) ** 2)
    area = (2.0 * g.box_half_width) ** 2
    return float(np.sqrt(s * area / g.n**4))


def neg_sobolev_proxy_norm_vec(u: VectorField, order_l: float = 2.0) -> float:
    a = neg_sobolev_proxy_norm(u.u1, order_l)
    b = neg_sobolev_proxy_norm(u.u2, order_l)
    return float(np.hypot(a, b))


def bump_kernel_weights(grid: Grid, epsilon: float):
    """Discretely normalized samples of the standard bump eta^eps.

    Returns (weights, offsets_radius); sum(weights) == 1 up to rounding, so the
    induced convolution preserves mass and nonnegativity exactly.
    """
    h = grid.spacing
    if epsilon < 2.0 * h:
        raise KernelUnderresolvedError(
            f"mollifier width {epsilon} under-resolved: needs epsilon >= 2*spacing = {2 * h}"
        )
    if epsilon > grid.box_half_width / 2:
        raise KernelUnderresolvedError(
            f"mollifier width {epsilon} too large for box_half_width {grid.box_half_width}"
        )
    r = int(np.floor(epsilon / h))
    off = h * np.arange(-r, r + 1)
    OX, OY = np.meshgrid(off, off, indexing="ij")
    rho2 = (OX**2 + OY**2) / epsilon**2
    w = np.zeros_like(rho2)
    inside = rho2 < 1.0
    w[inside] = np.exp(-1.0 / (1.0 - rho2[inside]))
    w /= kernels.tree_sum(w)
    return w, r


def mollify(f: ScalarField, epsilon: float) -> ScalarField:
    """Smoothing by convolution with the compact unit-mass bump of width epsilon."""
    w, _ = bump_kernel_weights(f.grid, epsilon)
    out = scipy.ndimage.convolve(f.values, w, mode="wrap")
    return ScalarField(f.grid, out)


def _masked_hat(plan, values):
    return plan.fft(values) * plan.dealias


def filtered_biot_savart(omega_kin: ScalarField) -> VectorField:
    """Biot-Savart of the 2/3-filtered kinetic vorticity (diagnostic velocity)."""
    _require_mean_zero(omega_kin, "biot_savart")
    plan = plan_for(omega_kin.grid)
    w_hat = _masked_hat(plan, omega_kin.values)
    psi_hat = -w_hat * plan.inv_k2
    u1 = plan.ifft(-1j * plan.dky * psi_hat)
    u2 = plan.ifft(1j * plan.dkx * psi_hat)
    return VectorField.from_arrays(omega_kin.grid, u1, u2)


def inner(u: VectorField, v: VectorField) -> float:
    """integral of u . v (real-space node products, tree quadrature)."""
    s = kernels.tree_dot(u.u1.values, v.u1.values) + kernels.tree_dot(u.u2.values, v.u2.values)
    return float(u.grid.cell_area * s)


def gradient(f: ScalarField):
    plan = plan_for(f.grid)
    f_hat = plan.fft(f.values)
    return plan.ifft(1j * plan.dkx * f_hat), plan.ifft(1j * plan.dky * f_hat)


def transport_pairing(u: VectorField, v: VectorField) -> float:
    """integral of (u tensor u) : grad v."""
    dv1x, dv1y = gradient(v.u1)
    dv2x, dv2y = gradient(v.u2)
    a1, a2 = u.u1.values, u.u2.values
    s = (
        kernels.tree_sum(a1 * a1 * dv1x)
        + kernels.tree_sum(a1 * a2 * dv1y)
        + kernels.tree_sum(a2 * a1 * dv2x)
        + kernels.tree_sum(a2 * a2 * dv2y)
    )
    return float(u.grid.cell_area * s)


def laplace_inner(u: VectorField, v: VectorField) -> float:
    """integral of u . Lap(v)."""
    plan = plan_for(u.grid)
    lap1 = plan.ifft(-plan.k2 * plan.fft(v.u1.values))
    lap2 = plan.ifft(-plan.k2 * plan.fft(v.u2.values))
    s = kernels.tree_dot(u.u1.values, lap1) + kernels.tree_dot(u.u2.values, lap2)
    return float(u.grid.cell_area * s)


def grad_sup_norm_vec(u: VectorField) -> float:
    """sup over nodes of the spectral matrix 2-norm of grad u."""
    d11, d12 = gradient(u.u1)
    d21, d22 = gradient(u.u2)
    # singular values of [[d11, d12], [d21, d22]] via the closed form
    fro2 = d11**2 + d12**2 + d21**2 + d22**2
    det = d11 * d22 - d12 * d21
    disc = np.sqrt(np.maximum(fro2**2 - 4.0 * det**2, 0.0))
    smax2 = 0.5 * (fro2 + disc)
    return float(np.sqrt(np.max(smax2)))


def grad_l2_norm_vec(u: VectorField) -> float:
    d11, d12 = gradient(u.u1)
    d21, d22 = gradient(u.u2)
    s = (
        kernels.tree_dot(d11, d11)
        + kernels.tree_dot(d12, d12)
        + kernels.tree_dot(d21, d21)
        + kernels.tree_dot(d22, d22)
    )
    return float(np.sqrt(u.grid.cell_area * s))
