"""Deterministic vorticity solvers around the stationary swirl.

The evolved unknown is the mean-zero kinetic vorticity w = omega - m*omega_S
(m is conserved exactly by construction).  Its equation,

    dw/dt + (m Sigma + u_t) . grad w + m u_t . grad omega_S
        = nu Lap w + nu m Lap omega_S,        u_t = BiotSavart(w),

is advanced with an integrating-factor RK4 (heat part exact per mode) or
Strang viscous splitting.  Quadratic products are dealiased with the 2/3
rule; Sigma enters through its closed-form node samples, never through a
spectral derivative of the sampled swirl (it is not periodic).  The
Sigma.grad(omega_S) self-advection is identically zero (radial tangency)
and is omitted, which makes the stationary state exactly steady at nu = 0.

One solver instance owns one trajectory; instances share only the immutable
stationary field.  Given identical inputs the outputs are bitwise identical.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from eustat import kernels, radial, spectral
from eustat.errors import (
    BoundaryLeakError,
    CflViolationError,
    GridMismatchError,
    TimeNotSavedError,
    ViscousTrajectoryError,
)
from eustat.grid import Grid, ScalarField, VectorField, plan_for
from eustat.radial import StationaryField, VorticityState

SCHEMES = ("integrating_factor_rk4", "viscous_splitting")
GUARD_FRACTION = 0.5  # support guard annulus: |x|_inf >= GUARD_FRACTION * L


@dataclass(frozen=True)
class SolverConfig:
    nu: float
    dt: float
    horizon_T: float
    save_times: tuple
    scheme: str = "integrating_factor_rk4"
    boundary_guard_tol: float = 1e-8

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("nu must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon_T > 0:
            raise ValueError("horizon_T must be positive")
        ts = tuple(float(t) for t in self.save_times)
        if ts != tuple(sorted(set(ts))):
            raise ValueError("save_times must be strictly increasing")
        if not ts or ts[0] != 0.0:
            raise ValueError("save_times must start at 0")
        if abs(ts[-1] - self.horizon_T) > 1e-12 * self.horizon_T:
            raise ValueError("save_times must end at horizon_T")
        object.__setattr__(self, "save_times", ts)
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")

    @classmethod
    def make(cls, nu, dt, horizon_T, n_saves=None, save_times=None, **kw):
        if save_times is None:
            n_saves = 9 if n_saves is None else int(n_saves)
            save_times = tuple(horizon_T * i / (n_saves - 1) for i in range(n_saves))
        return cls(nu, dt, horizon_T, tuple(save_times), **kw)


@dataclass(frozen=True, eq=False)
class Trajectory:
    sigma: StationaryField
    config: SolverConfig
    states: tuple  # ((time, VorticityState), ...)

    def __post_init__(self):
        ms = {s.m for _, s in self.states}
        if len(ms) != 1:
            raise ValueError(f"stationary mass must be constant along a trajectory, got {ms}")
        ts = [t for t, _ in self.states]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("snapshot times must be strictly increasing")

    @property
    def times(self):
        return tuple(t for t, _ in self.states)

    @property
    def m(self) -> float:
        return self.states[0][1].m

    @property
    def grid(self) -> Grid:
        return self.states[0][1].grid

    def state_at(self, t: float) -> VorticityState:
        for ti, s in self.states:
            if ti == t or abs(ti - t) <= 1e-12 * max(1.0, abs(t)):
                return s
        raise TimeNotSavedError(f"time {t} is not among the saved times {self.times}")

    def subsample(self, times) -> "Trajectory":
        """View of this trajectory on a subset of its save times."""
        picked = tuple((t, self.state_at(t)) for t in times)
        cfg = SolverConfig(
            self.config.nu,
            self.config.dt,
            self.config.horizon_T,
            tuple(t for t, _ in picked),
            self.config.scheme,
            self.config.boundary_guard_tol,
        )
        return Trajectory(self.sigma, cfg, picked)


@lru_cache(maxsize=None)
def _guard_mask(grid: Grid):
    X, Y = grid.nodes()
    m = np.maximum(np.abs(X), np.abs(Y)) >= GUARD_FRACTION * grid.box_half_width
    m.setflags(write=False)
    return m


def _check_guard(values, grid, tol, where):
    if tol >= 1.0:
        return
    peak = float(np.max(np.abs(values)))
    leak = float(np.max(np.abs(values)[_guard_mask(grid)]))
    if leak > tol * peak:
        raise BoundaryLeakError(
            f"{where}: |w| on the guard annulus is {leak:.3e} > {tol:g} * max|w| = "
            f"{tol * peak:.3e}; box too small or horizon too long"
        )


class _Stepper:
    """Bound arrays and scratch for one (sigma, config) evolution."""

    def __init__(self, sigma: StationaryField, cfg: SolverConfig, m: float):
        self.sigma = sigma
        self.cfg = cfg
        self.m = float(m)
        self.grid = sigma.grid
        self.plan = plan_for(sigma.grid)
        self.sig1 = sigma.velocity.u1.values
        self.sig2 = sigma.velocity.u2.values
        self.gsx, self.gsy = sigma.omega_gradient()
        self.lap_sigma_hat = sigma.omega_laplacian_hat()
        self._heat = {}

    def heat_factors(self, dt):
        key = float(dt)
        if key not in self._heat:
            if self.cfg.nu == 0.0:
                self._heat[key] = (None, None)
            else:
                e_half = np.exp(-self.cfg.nu * self.plan.k2 * (0.5 * dt))
                self._heat[key] = (e_half, e_half * e_half)
        return self._heat[key]

    def nonlinear(self, w_hat, dt, check_cfl):
        plan, m = self.plan, self.m
        wx = plan.ifft(1j * plan.dkx * w_hat)
        wy = plan.ifft(1j * plan.dky * w_hat)
        psi_hat = -w_hat * plan.inv_k2
        ut1 = plan.ifft(-1j * plan.dky * psi_hat)
        ut2 = plan.ifft(1j * plan.dkx * psi_hat)
        if check_cfl:
            if m != 0.0:
                speed = max(
                    float(np.max(np.abs(m * self.sig1 + ut1))),
                    float(np.max(np.abs(m * self.sig2 + ut2))),
                )
            else:
                speed = max(float(np.max(np.abs(ut1))), float(np.max(np.abs(ut2))))
            if speed > 0 and dt > 0.5 * self.grid.spacing / speed * (1 + 1e-9):
                raise CflViolationError(
                    f"dt = {dt:g} violates the advective bound "
                    f"0.5*spacing/max|u| = {0.5 * self.grid.spacing / speed:g}"
                )
        adv = kernels.advection_products(
            self.sig1, self.sig2, ut1, ut2, wx, wy, self.gsx, self.gsy, m
        )
        n_hat = -plan.fft(adv)
        n_hat *= plan.dealias
        n_hat[0, 0] = 0.0  # the advection term integrates to zero exactly
        return n_hat

    def rhs(self, w_hat, dt, check_cfl=False):
        n_hat = self.nonlinear(w_hat, dt, check_cfl)
        if self.cfg.nu != 0.0 and self.m != 0.0:
            n_hat += (self.cfg.nu * self.m) * self.lap_sigma_hat
        return n_hat

    def step_if_rk4(self, w_hat, dt):
        """Integrating-factor RK4: the heat factor is exact per mode."""
        e2, e1 = self.heat_factors(dt)  # e2 = half-step factor, e1 = full
        k1 = self.rhs(w_hat, dt, check_cfl=True)
        if e2 is None:
            u1 = w_hat + (0.5 * dt) * k1
            k2 = self.rhs(u1, dt)
            u2 = w_hat + (0.5 * dt) * k2
            k3 = self.rhs(u2, dt)
            u3 = w_hat + dt * k3
            k4 = self.rhs(u3, dt)
            return w_hat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        u1 = e2 * (w_hat + (0.5 * dt) * k1)
        k2 = self.rhs(u1, dt)
        u2 = e2 * w_hat + (0.5 * dt) * k2
        k3 = self.rhs(u2, dt)
        u3 = e1 * w_hat + dt * (e2 * k3)
        k4 = self.rhs(u3, dt)
        return e1 * w_hat + (dt / 6.0) * (e1 * k1 + 2.0 * (e2 * (k2 + k3)) + k4)

    def _heat_half(self, w_hat, e_half):
        """Exact half heat step including the stationary-part diffusion."""
        if e_half is None:
            return w_hat
        out = e_half * w_hat
        if self.m != 0.0:
            out += self.m * ((e_half - 1.0) * self.plan.fft(self.sigma.omega_sigma.values))
        return out

    def step_strang(self, w_hat, dt):
        """Strang splitting: exact half heat, RK4 advection, exact half heat."""
        e_half, _ = self.heat_factors(dt)
        w_hat = self._heat_half(w_hat, e_half)
        k1 = self.nonlinear(w_hat, dt, check_cfl=True)
        u1 = w_hat + (0.5 * dt) * k1
        k2 = self.nonlinear(u1, dt, False)
        u2 = w_hat + (0.5 * dt) * k2
        k3 = self.nonlinear(u2, dt, False)
        u3 = w_hat + dt * k3
        k4 = self.nonlinear(u3, dt, False)
        w_hat = w_hat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return self._heat_half(w_hat, e_half)

    def advance(self, w_hat, dt):
        if self.cfg.scheme == "viscous_splitting":
            return self.step_strang(w_hat, dt)
        return self.step_if_rk4(w_hat, dt)


def step(state: VorticityState, sigma: StationaryField, cfg: SolverConfig) -> VorticityState:
    """One time step of length cfg.dt."""
    _check_guard(state.omega_kin.values, state.grid, cfg.boundary_guard_tol, "step input")
    st = _Stepper(sigma, cfg, state.m)
    w_hat = st.plan.fft(state.omega_kin.values)
    w_hat = st.advance(w_hat, cfg.dt)
    w = st.plan.ifft(w_hat)
    _check_guard(w, state.grid, cfg.boundary_guard_tol, "step output")
    return VorticityState(state.m, ScalarField(state.grid, w))


def viscous_split_step(
    state: VorticityState, sigma: StationaryField, cfg: SolverConfig
) -> VorticityState:
    """One Strang-splitting step of length cfg.dt (O(dt^2) consistent with step)."""
    st = _Stepper(sigma, cfg, state.m)
    w_hat = st.plan.fft(state.omega_kin.values)
    w_hat = st.step_strang(w_hat, cfg.dt)
    return VorticityState(state.m, ScalarField(state.grid, st.plan.ifft(w_hat)))


def solve(state0: VorticityState, sigma: StationaryField, cfg: SolverConfig) -> Trajectory:
    """Evolve to every save time; dt is shrunk per interval to land exactly.

    The t = 0 snapshot is the input state itself.  Bitwise deterministic.
    """
    if state0.grid != sigma.grid:
        raise GridMismatchError("initial state and stationary field use different grids")
    _check_guard(state0.omega_kin.values, state0.grid, cfg.boundary_guard_tol, "initial state")
    st = _Stepper(sigma, cfg, state0.m)
    plan = st.plan
    w_hat = plan.fft(state0.omega_kin.values)
    snapshots = [(cfg.save_times[0], state0)]
    guard_on = cfg.boundary_guard_tol < 1.0
    for t_prev, t_next in zip(cfg.save_times, cfg.save_times[1:]):
        span = t_next - t_prev
        nsteps = max(1, math.ceil(span / cfg.dt * (1.0 - 1e-9)))
        sub_dt = span / nsteps
        for _ in range(nsteps):
            w_hat = st.advance(w_hat, sub_dt)
        w = plan.ifft(w_hat)
        if guard_on:
            _check_guard(w, state0.grid, cfg.boundary_guard_tol, f"t = {t_next:g}")
        snapshots.append((t_next, VorticityState(state0.m, ScalarField(state0.grid, w))))
    return Trajectory(sigma, cfg, tuple(snapshots))


def _trapezoid(ts, vals) -> float:
    ts = np.asarray(ts, dtype=np.float64)
    vals = np.asarray(vals, dtype=np.float64)
    seg = 0.5 * (ts[1:] - ts[:-1]) * (vals[1:] + vals[:-1])
    return kernels.tree_sum(seg)


def _window(traj: Trajectory, t0: float, t1: float):
    ts = np.asarray(traj.times)
    i0 = int(np.argmin(np.abs(ts - t0)))
    i1 = int(np.argmin(np.abs(ts - t1)))
    if abs(ts[i0] - t0) > 1e-12 * max(1.0, abs(t0)) or abs(ts[i1] - t1) > 1e-12 * max(1.0, abs(t1)):
        raise TimeNotSavedError(f"[{t0}, {t1}] endpoints must be saved times {traj.times}")
    if i0 >= i1:
        raise ValueError("t0 must precede t1")
    return list(range(i0, i1 + 1))


def weak_form_residual(traj: Trajectory, v: VectorField, t0: float, t1: float) -> float:
    """Defect of the weak momentum balance against a divergence-free test field.

    |<v, u(t1)> - <v, u(t0)> - int_{t0}^{t1} ( <grad v, u x u> + nu <Lap v, u> ) dt|
    with trapezoidal time quadrature over the saved snapshots.
    """
    idx = _window(traj, t0, t1)
    nu = traj.config.nu
    us = [radial.full_velocity(traj.states[i][1], traj.sigma) for i in idx]
    ts = [traj.states[i][0] for i in idx]
    pair = [spectral.transport_pairing(u, v) + nu * spectral.laplace_inner(u, v) for u in us]
    lhs = spectral.inner(us[-1], v) - spectral.inner(us[0], v)
    return abs(lhs - _trapezoid(ts, pair))


def renormalized_residual(traj: Trajectory, beta, allow_viscous: bool = False):
    """|int beta(omega(t)) - int beta(omega(0))| per save time.

    Transport conserves these integrals for every admissible beta; at nu > 0
    the law degrades to an inequality, so viscous trajectories are rejected
    unless the caller opts in.
    """
    if traj.config.nu > 0 and not allow_viscous:
        raise ViscousTrajectoryError(
            "renormalized transport conservation holds at nu = 0; pass allow_viscous=True "
            "to report the (inequality-only) drift of a viscous run"
        )
    cell = traj.grid.cell_area
    totals = [
        cell * kernels.tree_sum(beta(radial.reconstruct(s, traj.sigma).values))
        for _, s in traj.states
    ]
    return np.abs(np.asarray(totals) - totals[0])


@dataclass
class DiagnosticsReport:
    """Per-save-time a-priori series of one trajectory."""

    times: np.ndarray
    kinetic_l2: np.ndarray
    kinetic_bound: float
    vorticity_lq: dict  # q -> series of ||omega(t)||_q
    dudt_proxy_times: np.ndarray
    dudt_proxy: np.ndarray
    dudt_ratio: np.ndarray  # proxy / ||omega_0||_L1
    w1p_balls: dict  # (radius, p) -> series
    local_l2_ratio: dict  # radius -> series of ||u||_L2(B_r) / (max(1,r) gamma)
    rearrangement: dict  # radius -> (lhs series, rhs bound)

    def series(self):
        out = {"kinetic_l2": (self.times, self.kinetic_l2)}
        out["kinetic_bound"] = (self.times, np.full_like(self.times, self.kinetic_bound))
        for q, s in self.vorticity_lq.items():
            out[f"vorticity_l{q:g}"] = (self.times, s)
        out["dudt_proxy"] = (self.dudt_proxy_times, self.dudt_proxy)
        out["dudt_ratio"] = (self.dudt_proxy_times, self.dudt_ratio)
        for (r, p), s in self.w1p_balls.items():
            out[f"w1p_r{r:g}_p{p:g}"] = (self.times, s)
        for r, s in self.local_l2_ratio.items():
            out[f"local_l2_ratio_r{r:g}"] = (self.times, s)
        for r, (lhs, rhs) in self.rearrangement.items():
            out[f"rearrangement_r{r:g}"] = (self.times, lhs)
            out[f"rearrangement_bound_r{r:g}"] = (self.times, np.full_like(self.times, rhs))
        return out


def _ball_mask(grid: Grid, radius: float):
    X, Y = grid.nodes()
    return X**2 + Y**2 < radius**2


def apriori_report(
    traj: Trajectory,
    p_extra: float = 4.0,
    ball_radii=(0.5, 1.0, 2.0),
    order_l: float = 2.0,
) -> DiagnosticsReport:
    """All per-trajectory a-priori diagnostics at the saved times."""
    sigma, cfg = traj.sigma, traj.config
    grid = traj.grid
    m = traj.m
    times = np.asarray(traj.times)
    radii = [r for r in ball_radii if r < grid.box_half_width]

    kin_vel = [spectral.biot_savart(s.omega_kin) for _, s in traj.states]
    kin_l2 = np.array([spectral.l2_norm_vec(u) for u in kin_vel])
    a = radial.constant_a(cfg.horizon_T, sigma)
    bound = a ** abs(m) * kin_l2[0]

    totals = [radial.reconstruct(s, sigma) for _, s in traj.states]
    qs = sorted({1.0, 2.0, float(p_extra)}) + [np.inf]
    lq = {q: np.array([spectral.lp_norm(w, q) for w in totals]) for q in qs}

    omega0_l1 = lq[1.0][0]
    proxy_t, proxy = [], []
    for i in range(1, len(traj.states) - 1):
        dt2 = traj.states[i + 1][0] - traj.states[i - 1][0]
        diff = VectorField.from_arrays(
            grid,
            (kin_vel[i + 1].u1.values - kin_vel[i - 1].u1.values) / dt2,
            (kin_vel[i + 1].u2.values - kin_vel[i - 1].u2.values) / dt2,
        )
        proxy_t.append(traj.states[i][0])
        proxy.append(spectral.neg_sobolev_proxy_norm_vec(diff, order_l))
    proxy = np.asarray(proxy)
    ratio = proxy / omega0_l1 if omega0_l1 > 0 else np.zeros_like(proxy)

    full_vel = [radial.full_velocity(s, sigma) for _, s in traj.states]
    w1p = {}
    p = float(p_extra)
    for r in radii:
        series = []
        for u in full_vel:
            g11, g12 = spectral.gradient(u.u1)
            g21, g22 = spectral.gradient(u.u2)
            gr = np.hypot(np.hypot(g11, g12), np.hypot(g21, g22))
            sp = np.hypot(u.u1.values, u.u2.values)
            up = spectral.lp_norm_ball(ScalarField(grid, sp), (0.0, 0.0), r, p)
            gp = spectral.lp_norm_ball(ScalarField(grid, gr), (0.0, 0.0), r, p)
            series.append((up**p + gp**p) ** (1.0 / p))
        w1p[(r, p)] = np.asarray(series)

    gam = radial.gamma(traj.states[0][1], sigma, cfg.horizon_T)
    local_ratio = {
        r: np.array(
            [
                spectral.local_l2_norm(u, (0.0, 0.0), r) / (max(1.0, r) * gam)
                for u in full_vel
            ]
        )
        for r in radii
    }

    rearr = {}
    cell = grid.cell_area
    abs0_sorted = np.sort(np.abs(totals[0].values).ravel())[::-1]
    for r in radii:
        mask = _ball_mask(grid, r)
        k = int(mask.sum())
        rhs = cell * kernels.tree_sum(abs0_sorted[:k])
        lhs = np.array([cell * kernels.tree_sum(np.abs(w.values)[mask]) for w in totals])
        rearr[r] = (lhs, rhs)

    return DiagnosticsReport(
        times, kin_l2, bound, lq, np.asarray(proxy_t), proxy, ratio, w1p, local_ratio, rearr
    )


def relative_energy_gap(traj1: Trajectory, traj2: Trajectory):
    """Measured kinetic-part gap of two runs and its stability envelope.

    envelope(t) = exp( int_0^t ||grad v2||_inf + |m1| ||grad Sigma||_inf )
                  * ( gap(0) + int_0^t |m1-m2| ( ||Sigma||_inf ||grad v2||_L2
                                                + ||grad Sigma||_inf ||v2||_L2 ) )
    with every v2 quantity measured from the second trajectory.
    """
    if traj1.grid != traj2.grid:
        raise GridMismatchError("trajectories use different grids")
    if traj1.times != traj2.times:
        raise GridMismatchError("trajectories use different save times")
    sigma = traj1.sigma
    ts = np.asarray(traj1.times)
    m1, m2 = traj1.m, traj2.m
    dm = abs(m1 - m2)

    gaps, grad_inf, grad_l2, v2_l2 = [], [], [], []
    for (_, s1), (_, s2) in zip(traj1.states, traj2.states):
        diff = ScalarField(traj1.grid, s1.omega_kin.values - s2.omega_kin.values)
        gaps.append(spectral.l2_norm_vec(spectral.biot_savart(diff)))
        v2 = spectral.biot_savart(s2.omega_kin)
        grad_inf.append(spectral.grad_sup_norm_vec(v2))
        grad_l2.append(spectral.grad_l2_norm_vec(v2))
        v2_l2.append(spectral.l2_norm_vec(v2))
    gaps = np.asarray(gaps)

    rate = np.asarray(grad_inf) + abs(m1) * sigma.grad_sup_norm
    src = dm * (sigma.sup_norm * np.asarray(grad_l2) + sigma.grad_sup_norm * np.asarray(v2_l2))
    env = np.empty_like(gaps)
    for i in range(len(ts)):
        expo = _trapezoid(ts[: i + 1], rate[: i + 1]) if i else 0.0
        integ = _trapezoid(ts[: i + 1], src[: i + 1]) if i else 0.0
        env[i] = math.exp(expo) * (gaps[0] + integ)
    return ts, gaps, env
