"""Certification of the statistical laws on pushforward ensembles.

All expectations are finite weighted sums over members, evaluated with the
fixed-order reduction, so every verdict is theta-linear and bitwise
reproducible; tolerances are calibrated against solver resolution, not
sampling noise.
"""

from dataclasses import dataclass, replace

import numpy as np

from eustat import radial, spectral
from eustat.ensemble import (
    CylindricalFunctional,
    DiscreteMeasure,
    EnsembleTrajectory,
    bl_distance_projected,
    cylindrical_pairing,
    eval_cylindrical,
    project_time,
    push_forward,
)
from eustat.errors import KernelUnderresolvedError
from eustat.radial import StationaryField, VorticityState
from eustat.solver import SolverConfig, _trapezoid, _window


@dataclass
class VerdictReport:
    """One law checked along an ensemble: pass iff the margin never dips
    below zero.  For inequality laws margin(t) = rhs(t)*(1+tol) - lhs(t);
    for equality laws margin(t) = tol*scale(t) - |lhs(t)-rhs(t)| with
    scale(t) = max(|rhs(t)|, 1e-300) (relative tolerance)."""

    law_id: str
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    tolerance: float
    equality: bool
    passed: bool
    worst_time: float
    worst_margin: float

    def rows(self):
        for i, t in enumerate(self.times):
            yield (self.law_id, t, self.lhs[i], self.rhs[i], self._margin(i), self._ok(i))

    def _margin(self, i):
        if self.equality:
            scale = max(abs(self.rhs[i]), 1e-300)
            return self.tolerance * scale - abs(self.lhs[i] - self.rhs[i])
        return self.rhs[i] * (1.0 + self.tolerance) - self.lhs[i]

    def _ok(self, i):
        return self._margin(i) >= 0.0


def _finish(law_id, times, lhs, rhs, tol, equality):
    times = np.asarray(times, dtype=np.float64)
    lhs = np.asarray(lhs, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    report = VerdictReport(law_id, times, lhs, rhs, tol, equality, True, times[0], np.inf)
    margins = np.array([report._margin(i) for i in range(len(times))])
    worst = int(np.argmin(margins))
    report.passed = bool(np.all(margins >= 0.0))
    report.worst_time = float(times[worst])
    report.worst_margin = float(margins[worst])
    return report


def verify_energy_inequality(
    rho: EnsembleTrajectory, horizon_T: float | None = None, tolerance: float = 1e-6
) -> VerdictReport:
    """Mean kinetic energy never exceeds the weighted initial budget
    sum_j theta_j a^|m_j| ||u_kin,j(0)||_L2."""
    sigma = rho.sigma
    T = horizon_T if horizon_T is not None else rho.config.horizon_T
    a = radial.constant_a(T, sigma)
    times = np.asarray(rho.times)
    kin = np.array(
        [
            [spectral.l2_norm_vec(spectral.biot_savart(m.state_at(t).omega_kin)) for m in rho.members]
            for t in times
        ]
    )
    budgets = np.array([a ** abs(m.m) for m in rho.members]) * kin[0]
    rhs_val = rho.expect(budgets)
    lhs = np.array([rho.expect(kin[i]) for i in range(len(times))])
    rhs = np.full_like(lhs, rhs_val)
    return _finish("energy_inequality", times, lhs, rhs, tolerance, equality=False)


def verify_vorticity_law(
    rho: EnsembleTrajectory,
    q: float,
    equality_expected: bool | None = None,
    tolerance: float | None = None,
) -> VerdictReport:
    """Mean L^q vorticity norm: conserved at nu = 0 for q > 1, otherwise
    non-increasing."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if equality_expected is None:
        equality_expected = rho.config.nu == 0.0 and q > 1
    if tolerance is None:
        if equality_expected:
            tolerance = 1e-5
        elif rho.config.nu > 0.0:
            tolerance = 1e-9  # genuine decay dominates any noise floor
        else:
            tolerance = 1e-5  # q = 1 at nu = 0: tied to the resolution floor
    sigma = rho.sigma
    times = np.asarray(rho.times)
    norms = np.array(
        [
            [spectral.lp_norm(radial.reconstruct(m.state_at(t), sigma), q) for m in rho.members]
            for t in times
        ]
    )
    lhs = np.array([rho.expect(norms[i]) for i in range(len(times))])
    rhs = np.full_like(lhs, lhs[0])
    law = f"vorticity_l{q:g}_{'equality' if equality_expected else 'inequality'}"
    return _finish(law, times, lhs, rhs, tolerance, equality=equality_expected)


def foias_liouville_residual(
    rho: EnsembleTrajectory,
    Phi: CylindricalFunctional,
    t_prime: float,
    t: float,
    nu: float | None = None,
) -> float:
    """Defect of the cylindrical balance

    E_t[Phi] - E_t'[Phi] - int_{t'}^{t} E_s[ <u x u, grad Phi'(u)>
                                             + nu <u, Lap Phi'(u)> ] ds

    with trapezoidal quadrature over the saved times in [t', t]."""
    if nu is None:
        nu = rho.config.nu
    member0 = rho.members[0]
    idx = _window(member0, t_prime, t)
    times = [member0.times[i] for i in idx]
    sigma = rho.sigma
    e_phi = []
    e_pair = []
    for ti in times:
        phi_vals = [eval_cylindrical(Phi, m.state_at(ti), sigma) for m in rho.members]
        pair_vals = [cylindrical_pairing(Phi, m.state_at(ti), sigma, nu) for m in rho.members]
        e_phi.append(rho.expect(phi_vals))
        e_pair.append(rho.expect(pair_vals))
    lhs = e_phi[-1] - e_phi[0]
    return abs(lhs - _trapezoid(times, e_pair))


@dataclass
class InviscidStudy:
    nus: list
    checkpoints: list
    distances: np.ndarray  # shape (len(nus), len(checkpoints))
    monotone_decreasing: bool
    final_ratio: float  # d(smallest nu) / d(largest nu) at the last checkpoint
    verdict_applies: bool  # pass/fail only claimed for the bounded-vorticity class

    @property
    def passed(self) -> bool:
        return (not self.verdict_applies) or (self.monotone_decreasing and self.final_ratio <= 0.25)

    def rows(self):
        for i, nu in enumerate(self.nus):
            for j, t in enumerate(self.checkpoints):
                yield (nu, t, self.distances[i, j])


def inviscid_limit_study(
    mu0: DiscreteMeasure,
    sigma: StationaryField,
    nu_schedule,
    cfg: SolverConfig,
    test_fields,
    n_slices: int = 16,
    slice_seed: int = 0,
    checkpoints=None,
    jobs: int = 1,
    verdict_applies: bool = True,
) -> InviscidStudy:
    """Projected-W1 distance of viscous pushforwards to the inviscid one.

    Asserts only monotone decrease and a final/initial ratio, never a rate:
    the limit is subsequential.
    """
    nus = [float(v) for v in nu_schedule]
    if any(b >= a for a, b in zip(nus, nus[1:])) or any(v <= 0 for v in nus):
        raise ValueError("nu_schedule must be strictly decreasing and positive")
    base = push_forward(mu0, sigma, replace(cfg, nu=0.0), jobs=jobs)
    if checkpoints is None:
        checkpoints = [base.times[-1]]
    base_proj = {t: project_time(base, t) for t in checkpoints}
    dist = np.zeros((len(nus), len(checkpoints)))
    for i, nu in enumerate(nus):
        rho_nu = push_forward(mu0, sigma, replace(cfg, nu=nu), jobs=jobs)
        for j, t in enumerate(checkpoints):
            dist[i, j] = bl_distance_projected(
                project_time(rho_nu, t), base_proj[t], test_fields, sigma, n_slices, slice_seed
            )
    final = dist[:, -1]
    monotone = bool(np.all(np.diff(final) < 0))
    ratio = float(final[-1] / final[0]) if final[0] > 0 else 0.0
    return InviscidStudy(nus, list(checkpoints), dist, monotone, ratio, verdict_applies)


@dataclass
class UniquenessReport:
    epsilons: list
    gaps: np.ndarray  # gaps[j] = distance(rho^{eps_j}_T, rho^{eps_j+1}_T)
    decreasing: bool

    def rows(self):
        for j in range(len(self.gaps)):
            yield (self.epsilons[j], self.epsilons[j + 1], self.gaps[j])


def _mollified_measure(mu0: DiscreteMeasure, eps: float) -> DiscreteMeasure:
    atoms = tuple(
        VorticityState(a.m, spectral.mollify(a.omega_kin, eps)) for a in mu0.atoms
    )
    return DiscreteMeasure(mu0.weights, atoms)


def uniqueness_probe(
    mu0: DiscreteMeasure,
    sigma: StationaryField,
    epsilon_schedule,
    cfg: SolverConfig,
    test_fields,
    n_slices: int = 16,
    slice_seed: int = 0,
    jobs: int = 1,
) -> UniquenessReport:
    """Cauchy gaps of pushforwards from mollified initial kinetic parts.

    Solutions from smoothed data contract as the smoothing vanishes; the
    probe reports the end-time projected distances of consecutive smoothing
    levels and whether they decrease.
    """
    eps = [float(e) for e in epsilon_schedule]
    h = mu0.grid.spacing
    for e in eps:
        if e < 2.0 * h:
            raise KernelUnderresolvedError(f"mollification width {e} < 2*spacing = {2 * h}")
    T = cfg.save_times[-1]
    finals = []
    for e in eps:
        rho_e = push_forward(_mollified_measure(mu0, e), sigma, cfg, jobs=jobs)
        finals.append(project_time(rho_e, T))
    gaps = np.array(
        [
            bl_distance_projected(finals[j], finals[j + 1], test_fields, sigma, n_slices, slice_seed)
            for j in range(len(eps) - 1)
        ]
    )
    return UniquenessReport(eps, gaps, bool(np.all(np.diff(gaps) < 0)))


def beta_abs_power(power: float = 1.5, lo: float = 0.01, hi: float = 0.2, cap: float = np.inf):
    """|s|^power windowed to vanish near 0 (below lo..hi) and above cap.

    The transition uses the C^infinity blend, so the composition with a
    smooth vorticity stays spectrally benign.
    """
    from eustat.ensemble import smooth_step

    def beta(svals):
        a = np.abs(np.asarray(svals, dtype=np.float64))
        w = smooth_step((a - lo) / (hi - lo))
        if np.isfinite(cap):
            w = w * (1.0 - smooth_step((a - cap) / cap))
        return a**power * w

    return beta
