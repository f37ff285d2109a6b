"""Dirac-mixture measures on flow states and their pushforward in time.

Measures are finite weighted sums of point masses; every statistical
quantity is an exact weighted sum over members (fixed-order pairwise
reduction), so the only error sources are the per-member solver and time
quadrature.  Per-atom randomness comes from a self-contained splitmix64
stream keyed by (master_seed, atom index): results are reproducible and
independent of scheduling.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from eustat import kernels, radial, solver, spectral
from eustat.errors import (
    BadWeightsError,
    ClassViolationError,
    GridMismatchError,
    MemberError,
    TimeNotSavedError,
)
from eustat.grid import Grid, ScalarField, VectorField
from eustat.radial import StationaryField, VorticityState
from eustat.solver import GUARD_FRACTION, SolverConfig, Trajectory

_MASK64 = (1 << 64) - 1
_PHI64 = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def atom_seed(master_seed: int, j: int) -> int:
    """j-th output of the splitmix64 stream seeded with master_seed."""
    return _mix((master_seed + (j + 1) * _PHI64) & _MASK64)


class SplitMix:
    """Minimal splitmix64 generator; platform-independent by construction."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _PHI64) & _MASK64
        return _mix(self._state)

    def uniform(self, lo=0.0, hi=1.0) -> float:
        u = (self.next_u64() >> 11) * 2.0**-53
        return lo + (hi - lo) * u

    def normal(self) -> float:
        u1 = max(self.uniform(), 2.0**-53)
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def direction(self, k: int):
        v = np.array([self.normal() for _ in range(k)])
        n = float(np.linalg.norm(v))
        if n == 0.0:
            v[0] = 1.0
            n = 1.0
        return v / n


def smooth_step(t):
    """C^infinity transition from 0 (t<=0) to 1 (t>=1)."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    b1 = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    b0 = np.where(t < 1, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return b1 / (b1 + b0)


def smooth_step_scalar(t: float) -> float:
    return float(smooth_step(t))


def _smooth_step_prime(t: float) -> float:
    if t <= 0.0 or t >= 1.0:
        return 0.0
    b1 = math.exp(-1.0 / t)
    b0 = math.exp(-1.0 / (1.0 - t))
    db1 = b1 / t**2
    db0 = -b0 / (1.0 - t) ** 2
    s = b1 + b0
    return (db1 * s - b1 * (db1 + db0)) / s**2


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    weights: np.ndarray
    atoms: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0 or w.size != len(self.atoms):
            raise BadWeightsError("weights and atoms must be non-empty and match in length")
        if np.any(w <= 0):
            raise BadWeightsError("weights must be positive")
        total = kernels.tree_sum(w)
        if abs(total - 1.0) > 1e-12:
            raise BadWeightsError(f"weights must sum to 1, got {total!r}")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "atoms", tuple(self.atoms))
        grids = {a.grid for a in self.atoms}
        if len(grids) > 1:
            raise GridMismatchError("atoms must share one grid")

    @property
    def grid(self) -> Grid:
        return self.atoms[0].grid

    def expect(self, values) -> float:
        """Weighted mean of one scalar per atom (fixed reduction order)."""
        return kernels.tree_dot(self.weights, np.asarray(values, dtype=np.float64))


def dirac_mixture(weights, atoms) -> DiscreteMeasure:
    return DiscreteMeasure(np.asarray(weights, dtype=np.float64), tuple(atoms))


@dataclass(frozen=True)
class ClassTag:
    """Initial-vorticity class: bounded (A), p-integrable (B), nonnegative
    measure via mollified proxy (C), integrable compact (D)."""

    kind: str  # yudovich_A | lp_B | vortex_sheet_C_mollified | l1_D_mollified
    p: float = 2.0
    epsilon: float = 0.0  # mollification width for C/D; 0 = 2.5 * spacing

    def __post_init__(self):
        kinds = ("yudovich_A", "lp_B", "vortex_sheet_C_mollified", "l1_D_mollified")
        if self.kind not in kinds:
            raise ValueError(f"class kind must be one of {kinds}")

    def mollification(self, grid: Grid) -> float:
        if self.kind in ("vortex_sheet_C_mollified", "l1_D_mollified"):
            return self.epsilon if self.epsilon > 0 else 2.5 * grid.spacing
        return 0.0


@dataclass
class ClassReport:
    passes: bool
    checks: dict
    norms: dict


def class_membership(state: VorticityState, sigma: StationaryField, tag: ClassTag) -> ClassReport:
    """Grid-level class checks: norm finiteness, support, sign condition."""
    total = radial.reconstruct(state, sigma)
    grid = state.grid
    peak = float(np.max(np.abs(total.values)))
    X, Y = grid.nodes()
    outside = np.maximum(np.abs(X), np.abs(Y)) >= GUARD_FRACTION * grid.box_half_width
    leak = float(np.max(np.abs(total.values)[outside])) if outside.any() else 0.0
    checks = {
        "finite": bool(np.all(np.isfinite(total.values))),
        "support_inside_guard": leak <= 1e-9 * peak + 1e-300,
    }
    norms = {
        "l1": spectral.lp_norm(total, 1.0),
        "linf": spectral.lp_norm(total, np.inf),
    }
    if tag.kind == "lp_B":
        norms[f"l{tag.p:g}"] = spectral.lp_norm(total, tag.p)
    if tag.kind == "vortex_sheet_C_mollified":
        min_val = float(np.min(total.values))
        checks["nonnegative"] = min_val >= -1e-14 * max(peak, 1.0)
        norms["min"] = min_val
    return ClassReport(all(checks.values()), checks, norms)


@dataclass(frozen=True)
class InitialFamily:
    """Seeded generator of initial states on a fixed grid.

    Patterns: 'quadrupole' (zero-mass single structure, smooth), 'blob'
    (one-signed single structure, nonzero mass), 'dipole' (two opposite
    blobs), 'shear' (sin(k y), not compactly supported: validation only).
    """

    family_kind: str  # fixed_atoms | random_amplitude_blobs | random_placement_blobs
    class_tag: ClassTag
    grid: Grid
    pattern: str = "quadrupole"
    width: float = 0.0  # 0 = 0.18 * box_half_width
    center: tuple = (0.0, 0.0)
    amp_lo: float = 0.5
    amp_hi: float = 1.5
    place_radius: float = 0.0  # 0 = box_half_width / 16
    m_coef: float = 0.0  # fixed stationary-part mass added to every atom
    fixed_states: tuple = ()

    def __post_init__(self):
        kinds = ("fixed_atoms", "random_amplitude_blobs", "random_placement_blobs")
        if self.family_kind not in kinds:
            raise ValueError(f"family kind must be one of {kinds}")

    def _width(self) -> float:
        return self.width if self.width > 0 else 0.18 * self.grid.box_half_width

    def pattern_values(self, center, amplitude):
        X, Y = self.grid.nodes()
        s = self._width()
        cx, cy = center
        if self.pattern == "shear":
            return amplitude * np.sin(Y)
        z = ((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * s * s)
        env = np.exp(-(z**3))
        if self.pattern == "quadrupole":
            return amplitude * env * ((X - cx) ** 2 - (Y - cy) ** 2) / (s * s)
        if self.pattern == "blob":
            return amplitude * env
        if self.pattern == "dipole":
            zl = ((X - cx + 2 * s) ** 2 + (Y - cy) ** 2) / (2.0 * s * s)
            zr = ((X - cx - 2 * s) ** 2 + (Y - cy) ** 2) / (2.0 * s * s)
            return amplitude * (np.exp(-(zl**3)) - np.exp(-(zr**3)))
        raise ValueError(f"unknown pattern {self.pattern!r}")

    def make_atom(self, sigma: StationaryField, rng: SplitMix) -> VorticityState:
        if self.family_kind == "fixed_atoms":
            amp = 0.5 * (self.amp_lo + self.amp_hi)
            center = self.center
        elif self.family_kind == "random_amplitude_blobs":
            amp = rng.uniform(self.amp_lo, self.amp_hi)
            center = self.center
        else:
            amp = 0.5 * (self.amp_lo + self.amp_hi)
            rad = self.place_radius if self.place_radius > 0 else self.grid.box_half_width / 16.0
            r = rad * math.sqrt(rng.uniform())
            th = rng.uniform(0.0, 2.0 * math.pi)
            center = (self.center[0] + r * math.cos(th), self.center[1] + r * math.sin(th))
        vals = self.pattern_values(center, amp)
        eps = self.class_tag.mollification(self.grid)
        f = ScalarField(self.grid, vals)
        if eps > 0:
            f = spectral.mollify(f, eps)
        state = radial.decompose(f, sigma)
        if self.m_coef != 0.0:
            state = VorticityState(state.m + self.m_coef, state.omega_kin)
        return state


def sample_family(
    family: InitialFamily, sigma: StationaryField, n: int, master_seed: int
) -> DiscreteMeasure:
    """Empirical measure of n seeded atoms with uniform weights 1/n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if family.family_kind == "fixed_atoms" and family.fixed_states:
        states = list(family.fixed_states)
        if n != len(states):
            raise ValueError(f"fixed_atoms family has {len(states)} atoms, asked for {n}")
    elif family.family_kind == "fixed_atoms":
        states = [family.make_atom(sigma, SplitMix(0)) for _ in range(n)]
    else:
        states = [
            family.make_atom(sigma, SplitMix(atom_seed(master_seed, j))) for j in range(n)
        ]
    if family.pattern != "shear":  # shear is a validation pattern outside the compact classes
        for j, s in enumerate(states):
            report = class_membership(s, sigma, family.class_tag)
            if not report.passes:
                raise ClassViolationError(
                    f"atom {j} fails class {family.class_tag.kind}: {report.checks}"
                )
    return dirac_mixture(np.full(len(states), 1.0 / len(states)), states)


@dataclass(frozen=True, eq=False)
class EnsembleTrajectory:
    weights: np.ndarray
    members: tuple  # of Trajectory
    config: SolverConfig

    def __post_init__(self):
        if len(self.members) != len(self.weights):
            raise BadWeightsError("weights/members length mismatch")
        sts = {m.times for m in self.members}
        if len(sts) > 1:
            raise GridMismatchError("members must share save times")

    @property
    def sigma(self) -> StationaryField:
        return self.members[0].sigma

    @property
    def times(self):
        return self.members[0].times

    def expect(self, values) -> float:
        return kernels.tree_dot(self.weights, np.asarray(values, dtype=np.float64))

    def subsample(self, times) -> "EnsembleTrajectory":
        """Member-wise view on a subset of the save times."""
        members = tuple(m.subsample(times) for m in self.members)
        return EnsembleTrajectory(self.weights, members, members[0].config)


def _solve_member(args):
    state, sigma, cfg = args
    return solver.solve(state, sigma, cfg)


def push_forward(
    mu0: DiscreteMeasure, sigma: StationaryField, cfg: SolverConfig, jobs: int = 1
) -> EnsembleTrajectory:
    """Solve every atom; weights carry over unchanged.

    Members are joined in atom order whatever the worker count, so the result
    is schedule-independent.
    """
    tasks = [(a, sigma, cfg) for a in mu0.atoms]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_solve_member, t) for t in tasks]
            members = []
            for j, fut in enumerate(futures):
                try:
                    members.append(fut.result())
                except Exception as exc:
                    raise MemberError(j, exc) from exc
    else:
        members = []
        for j, t in enumerate(tasks):
            try:
                members.append(_solve_member(t))
            except Exception as exc:
                raise MemberError(j, exc) from exc
    return EnsembleTrajectory(mu0.weights, tuple(members), cfg)


def project_time(rho: EnsembleTrajectory, t: float) -> DiscreteMeasure:
    """Same weights, atoms evaluated at one saved time."""
    try:
        atoms = tuple(m.state_at(t) for m in rho.members)
    except TimeNotSavedError:
        raise TimeNotSavedError(f"time {t} not saved; saved times are {rho.times}")
    return DiscreteMeasure(rho.weights, atoms)


@dataclass(frozen=True, eq=False)
class CylindricalFunctional:
    """phi(<u,v_1>, ..., <u,v_k>) with a cutoff polynomial phi.

    phi(y) = (c0 + sum_i lin[i] y_i + sum_i quad[i] y_i^2) * cut(|y|),
    cut = 1 on |y| <= cutoff_radius, 0 on |y| >= 2*cutoff_radius, smooth
    (C^infinity) in between.  Test fields must be divergence-free and
    supported inside the guard region.
    """

    test_fields: tuple  # of VectorField
    c0: float = 0.0
    lin: tuple = ()
    quad: tuple = ()
    cutoff_radius: float = 1e6

    def __post_init__(self):
        k = len(self.test_fields)
        if k < 1:
            raise ValueError("need at least one test field")
        lin = tuple(self.lin) if self.lin else (0.0,) * k
        quad = tuple(self.quad) if self.quad else (0.0,) * k
        if len(lin) != k or len(quad) != k:
            raise ValueError("coefficient lengths must match the number of test fields")
        object.__setattr__(self, "lin", lin)
        object.__setattr__(self, "quad", quad)

    @property
    def k(self) -> int:
        return len(self.test_fields)

    def _cut(self, r):
        return 1.0 - smooth_step_scalar((r - self.cutoff_radius) / self.cutoff_radius)

    def _cut_prime(self, r):
        return -_smooth_step_prime((r - self.cutoff_radius) / self.cutoff_radius) / self.cutoff_radius

    def phi(self, y) -> float:
        y = np.asarray(y, dtype=np.float64)
        poly = self.c0 + float(np.dot(self.lin, y)) + float(np.dot(self.quad, y**2))
        return poly * self._cut(float(np.linalg.norm(y)))

    def grad_phi(self, y):
        y = np.asarray(y, dtype=np.float64)
        poly = self.c0 + float(np.dot(self.lin, y)) + float(np.dot(self.quad, y**2))
        r = float(np.linalg.norm(y))
        cut = self._cut(r)
        grad = (np.asarray(self.lin) + 2.0 * np.asarray(self.quad) * y) * cut
        if r > 0:
            grad = grad + poly * self._cut_prime(r) * (y / r)
        return grad


def projections(Phi: CylindricalFunctional, state: VorticityState, sigma: StationaryField):
    """y_j = <u, v_j> with u = m Sigma + BiotSavart(omega_kin)."""
    u = radial.full_velocity(state, sigma)
    return np.array([spectral.inner(u, v) for v in Phi.test_fields])


def eval_cylindrical(
    Phi: CylindricalFunctional, state: VorticityState, sigma: StationaryField
) -> float:
    return Phi.phi(projections(Phi, state, sigma))


def cylindrical_pairing(
    Phi: CylindricalFunctional, state: VorticityState, sigma: StationaryField, nu: float = 0.0
) -> float:
    """sum_j d_j phi(y) * ( <u x u, grad v_j> + nu <u, Lap v_j> )."""
    u = radial.full_velocity(state, sigma)
    y = np.array([spectral.inner(u, v) for v in Phi.test_fields])
    g = Phi.grad_phi(y)
    terms = []
    for j, v in enumerate(Phi.test_fields):
        t = spectral.transport_pairing(u, v)
        if nu != 0.0:
            t += nu * spectral.laplace_inner(u, v)
        terms.append(g[j] * t)
    return kernels.tree_sum(np.asarray(terms))


def make_test_field(
    grid: Grid, mode=(1, 0), phase=(0.0, 0.0), width: float = 0.0, center=(0.0, 0.0)
) -> VectorField:
    """Divergence-free compactly supported test field (perp-gradient of a
    windowed trig streamfunction); spectral derivative keeps div u = 0 exact."""
    L = grid.box_half_width
    s = width if width > 0 else L / 4.0
    X, Y = grid.nodes()
    z = ((X - center[0]) ** 2 + (Y - center[1]) ** 2) / (2.0 * s * s)
    k0 = math.pi / L
    chi = np.exp(-(z**3)) * np.cos(k0 * mode[0] * X + phase[0]) * np.cos(
        k0 * mode[1] * Y + phase[1]
    )
    plan_field = ScalarField(grid, chi)
    gx, gy = spectral.gradient(plan_field)
    return VectorField.from_arrays(grid, -gy, gx)


def project_measure(mu: DiscreteMeasure, test_fields, sigma: StationaryField):
    """Atom projections to R^k: row j = <u_j, v_1..k>."""
    rows = []
    for a in mu.atoms:
        u = radial.full_velocity(a, sigma)
        rows.append([spectral.inner(u, v) for v in test_fields])
    return np.asarray(rows, dtype=np.float64)


def w1_weighted_1d(y1, w1, y2, w2) -> float:
    """Exact 1-Wasserstein distance of two weighted point sets on R."""
    o1 = np.argsort(y1, kind="stable")
    o2 = np.argsort(y2, kind="stable")
    y1s, w1s = np.asarray(y1)[o1], np.asarray(w1)[o1]
    y2s, w2s = np.asarray(y2)[o2], np.asarray(w2)[o2]
    c1 = np.cumsum(w1s)
    c2 = np.cumsum(w2s)
    qs = np.union1d(c1, c2)
    qs = qs[(qs > 0) & (qs <= 1.0 + 1e-12)]
    prev = 0.0
    i1 = i2 = 0
    total = 0.0
    parts = []
    for q in qs:
        while i1 < len(c1) - 1 and c1[i1] <= prev + 1e-15:
            i1 += 1
        while i2 < len(c2) - 1 and c2[i2] <= prev + 1e-15:
            i2 += 1
        parts.append((q - prev) * abs(y1s[i1] - y2s[i2]))
        prev = q
    total = kernels.tree_sum(np.asarray(parts)) if parts else 0.0
    return float(total)


def bl_distance_projected(
    mu1: DiscreteMeasure,
    mu2: DiscreteMeasure,
    test_fields,
    sigma: StationaryField,
    n_slices: int = 16,
    slice_seed: int = 0,
) -> float:
    """Sliced 1-Wasserstein distance of the projected measures.

    k = 1 is the exact quantile-matching W1; k > 1 averages exact 1-D
    distances over n_slices seeded uniform directions.  A computable
    surrogate for weak-* closeness of the underlying measures.
    """
    if mu1.grid != mu2.grid:
        raise GridMismatchError("measures live on different grids")
    p1 = project_measure(mu1, test_fields, sigma)
    p2 = project_measure(mu2, test_fields, sigma)
    k = p1.shape[1]
    if k == 1:
        return w1_weighted_1d(p1[:, 0], mu1.weights, p2[:, 0], mu2.weights)
    rng = SplitMix(atom_seed(slice_seed, 0))
    dists = []
    for _ in range(n_slices):
        d = rng.direction(k)
        dists.append(w1_weighted_1d(p1 @ d, mu1.weights, p2 @ d, mu2.weights))
    return kernels.tree_sum(np.asarray(dists)) / n_slices


@dataclass
class SupportCheckReport:
    first_covered_index: list  # per limit atom; -1 if never stably covered
    satisfied: bool


def support_liminf_check(
    measure_sequence,
    limit: DiscreteMeasure,
    radius: float,
    test_fields,
    sigma: StationaryField,
) -> SupportCheckReport:
    """Verify every limit atom is eventually within `radius` of the sequence.

    For each atom x of the limit: the first index n0 such that every later
    measure has an atom within `radius` of x in the projected Euclidean
    metric.  Supports of weak-* limits cannot escape the tail supports.
    """
    if len(measure_sequence) < 2:
        raise ValueError("need a sequence of at least 2 measures")
    pl = project_measure(limit, test_fields, sigma)
    covered = np.zeros((len(measure_sequence), len(limit.atoms)), dtype=bool)
    for n, mu in enumerate(measure_sequence):
        pn = project_measure(mu, test_fields, sigma)
        for i, x in enumerate(pl):
            dmin = float(np.min(np.linalg.norm(pn - x[None, :], axis=1)))
            covered[n, i] = dmin <= radius
    first = []
    for i in range(len(limit.atoms)):
        col = covered[:, i]
        idx = -1
        for n in range(len(measure_sequence)):
            if col[n:].all():
                idx = n
                break
        first.append(idx)
    return SupportCheckReport(first, all(ix >= 0 for ix in first))
