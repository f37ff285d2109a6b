"""Dirac mixtures, seeded sampling, pushforward, projections, distances."""

import numpy as np
import pytest

from eustat import ensemble, radial, solver, spectral
from eustat.ensemble import (
    ClassTag,
    CylindricalFunctional,
    DiscreteMeasure,
    InitialFamily,
    SplitMix,
    atom_seed,
    bl_distance_projected,
    class_membership,
    cylindrical_pairing,
    dirac_mixture,
    eval_cylindrical,
    make_test_field,
    project_measure,
    project_time,
    push_forward,
    sample_family,
    support_liminf_check,
    w1_weighted_1d,
)
from eustat.errors import BadWeightsError, TimeNotSavedError
from eustat.grid import ScalarField
from eustat.radial import VorticityState
from eustat.solver import SolverConfig
from tests.conftest import band_limited_field


@pytest.fixture(scope="module")
def family64(grid64):
    return InitialFamily(
        family_kind="random_amplitude_blobs",
        class_tag=ClassTag("yudovich_A"),
        grid=grid64,
        pattern="quadrupole",
        width=0.45,
    )


@pytest.fixture(scope="module")
def mu4(family64, sigma64):
    return sample_family(family64, sigma64, 4, master_seed=42)


@pytest.fixture(scope="module")
def cfg_short():
    return SolverConfig.make(nu=0.0, dt=0.01, horizon_T=0.2, n_saves=3, boundary_guard_tol=1.0)


@pytest.fixture(scope="module")
def rho4(mu4, sigma64, cfg_short):
    return push_forward(mu4, sigma64, cfg_short)


class TestDiracMixture:
    def test_single_atom(self, grid64):
        mu = dirac_mixture([1.0], [VorticityState.zero(grid64)])
        assert mu.weights[0] == 1.0

    def test_two_atoms(self, grid64):
        mu = dirac_mixture([0.5, 0.5], [VorticityState.zero(grid64), VorticityState.zero(grid64, m=1.0)])
        assert len(mu.atoms) == 2

    def test_bad_sum(self, grid64):
        with pytest.raises(BadWeightsError):
            dirac_mixture([0.3, 0.3], [VorticityState.zero(grid64)] * 2)

    def test_nonpositive_weight(self, grid64):
        with pytest.raises(BadWeightsError):
            dirac_mixture([1.5, -0.5], [VorticityState.zero(grid64)] * 2)


class TestSampleFamily:
    def test_single_atom_dirac(self, family64, sigma64):
        mu = sample_family(family64, sigma64, 1, master_seed=7)
        assert len(mu.atoms) == 1 and mu.weights[0] == 1.0

    def test_bitwise_determinism(self, family64, sigma64):
        a = sample_family(family64, sigma64, 3, master_seed=9)
        b = sample_family(family64, sigma64, 3, master_seed=9)
        for x, y in zip(a.atoms, b.atoms):
            assert x.m == y.m
            assert np.array_equal(x.omega_kin.values, y.omega_kin.values)

    def test_different_seed_differs(self, family64, sigma64):
        a = sample_family(family64, sigma64, 2, master_seed=1)
        b = sample_family(family64, sigma64, 2, master_seed=2)
        assert not np.array_equal(a.atoms[0].omega_kin.values, b.atoms[0].omega_kin.values)

    def test_amplitude_mean(self):
        # amplitude ~ U[0.5, 1.5]: the seeded stream must reproduce the mean
        amps = [
            SplitMix(atom_seed(1234, j)).uniform(0.5, 1.5) for j in range(4096)
        ]
        assert abs(np.mean(amps) - 1.0) < 0.02

    def test_placement_family(self, grid64, sigma64):
        fam = InitialFamily(
            family_kind="random_placement_blobs",
            class_tag=ClassTag("yudovich_A"),
            grid=grid64,
            pattern="quadrupole",
            width=0.4,
            place_radius=0.2,
        )
        mu = sample_family(fam, sigma64, 3, master_seed=3)
        assert len(mu.atoms) == 3


class TestClassMembership:
    def test_sigma_passes_everything(self, sigma64, grid64):
        st = radial.decompose(sigma64.omega_sigma, sigma64)
        for tag in (
            ClassTag("yudovich_A"),
            ClassTag("lp_B", p=3.0),
            ClassTag("vortex_sheet_C_mollified"),
            ClassTag("l1_D_mollified"),
        ):
            rep = class_membership(st, sigma64, tag)
            assert rep.passes, rep.checks

    def test_negative_node_fails_C_passes_D(self, sigma64, grid64):
        vals = sigma64.omega_sigma.values.copy()
        i0 = grid64.n // 2
        vals[i0 + 2, i0] = -0.05 * np.max(vals)
        st = radial.decompose(ScalarField(grid64, vals), sigma64)
        assert not class_membership(st, sigma64, ClassTag("vortex_sheet_C_mollified")).passes
        assert class_membership(st, sigma64, ClassTag("l1_D_mollified")).passes

    def test_mollified_C_atom_nonnegative(self, grid64, sigma64):
        fam = InitialFamily(
            family_kind="random_amplitude_blobs",
            class_tag=ClassTag("vortex_sheet_C_mollified"),
            grid=grid64,
            pattern="blob",
            width=0.4,
        )
        mu = sample_family(fam, sigma64, 2, master_seed=11)
        for a in mu.atoms:
            total = radial.reconstruct(a, sigma64)
            assert float(total.values.min()) >= -1e-14 * float(total.values.max())


class TestPushForward:
    def test_dirac_pushforward(self, mu4, sigma64, cfg_short):
        mu1 = dirac_mixture([1.0], [mu4.atoms[0]])
        rho = push_forward(mu1, sigma64, cfg_short)
        direct = solver.solve(mu4.atoms[0], sigma64, cfg_short)
        for (t1, s1), (t2, s2) in zip(rho.members[0].states, direct.states):
            assert np.array_equal(s1.omega_kin.values, s2.omega_kin.values)

    def test_initial_projection_is_mu0(self, mu4, rho4):
        mu_back = project_time(rho4, 0.0)
        assert np.array_equal(mu_back.weights, mu4.weights)
        for a, b in zip(mu_back.atoms, mu4.atoms):
            assert a is b  # t = 0 snapshot is the input state itself

    def test_commutes_with_mixture(self, mu4, sigma64, cfg_short, rho4):
        for j, atom in enumerate(mu4.atoms):
            single = push_forward(dirac_mixture([1.0], [atom]), sigma64, cfg_short)
            for (t1, s1), (t2, s2) in zip(single.members[0].states, rho4.members[j].states):
                assert np.array_equal(s1.omega_kin.values, s2.omega_kin.values)

    def test_parallel_matches_serial(self, mu4, sigma64, cfg_short, rho4):
        rho_par = push_forward(mu4, sigma64, cfg_short, jobs=2)
        for m1, m2 in zip(rho_par.members, rho4.members):
            for (t1, s1), (t2, s2) in zip(m1.states, m2.states):
                assert np.array_equal(s1.omega_kin.values, s2.omega_kin.values)


class TestProjectTime:
    def test_weights_unchanged(self, rho4, mu4):
        for t in rho4.times:
            assert np.array_equal(project_time(rho4, t).weights, mu4.weights)

    def test_final_time(self, rho4):
        mu_T = project_time(rho4, rho4.times[-1])
        assert len(mu_T.atoms) == len(rho4.members)

    def test_unsaved_time(self, rho4):
        with pytest.raises(TimeNotSavedError):
            project_time(rho4, 0.123456)


class TestCylindrical:
    def test_constant_phi(self, grid64, sigma64, mu4):
        v = make_test_field(grid64, mode=(1, 0), width=0.7)
        Phi = CylindricalFunctional((v,), c0=1.0, cutoff_radius=1e3)
        assert eval_cylindrical(Phi, mu4.atoms[0], sigma64) == pytest.approx(1.0, rel=1e-12)

    def test_zero_state_first_moment(self, grid64, sigma64):
        v = make_test_field(grid64, mode=(1, 0), width=0.7)
        Phi = CylindricalFunctional((v,), lin=(1.0,), cutoff_radius=1e3)
        assert eval_cylindrical(Phi, VorticityState.zero(grid64), sigma64) == 0.0

    def test_projection_parseval_oracle(self, grid64, sigma64):
        # eigenfunction state: compare the node-quadrature pairing with the
        # spectral inner product of the two band-limited fields.
        f = ScalarField.from_function(grid64, lambda X, Y: np.sin(X) * np.sin(Y))
        st = VorticityState(0.0, f)
        v = make_test_field(grid64, mode=(1, 1), width=0.8)
        Phi = CylindricalFunctional((v,), lin=(1.0,), cutoff_radius=1e3)
        got = eval_cylindrical(Phi, st, sigma64)
        u = radial.full_velocity(st, sigma64)
        uh1, vh1 = np.fft.fft2(u.u1.values), np.fft.fft2(v.u1.values)
        uh2, vh2 = np.fft.fft2(u.u2.values), np.fft.fft2(v.u2.values)
        area = (2 * grid64.box_half_width) ** 2
        spectral_ip = float(
            np.real(np.sum(uh1 * np.conj(vh1) + uh2 * np.conj(vh2))) * area / grid64.n**4
        )
        assert got == pytest.approx(spectral_ip, rel=1e-10, abs=1e-14)

    def test_cutoff_inactive_when_large(self, grid64, sigma64, mu4):
        v = make_test_field(grid64, mode=(1, 0), width=0.7)
        st = mu4.atoms[1]
        vals = [
            eval_cylindrical(
                CylindricalFunctional((v,), lin=(1.0,), quad=(0.5,), cutoff_radius=R), st, sigma64
            )
            for R in (1e2, 1e4, 1e6)
        ]
        assert vals[0] == vals[1] == vals[2]

    def test_stationary_pairing_zero(self, grid64, sigma64):
        st = VorticityState.zero(grid64, m=1.0)
        v = make_test_field(grid64, mode=(1, 1), width=0.7)
        Phi = CylindricalFunctional((v,), lin=(1.0,), cutoff_radius=1e3)
        pairing = cylindrical_pairing(Phi, st, sigma64)
        scale = spectral.l2_norm_vec(sigma64.velocity) ** 2
        assert abs(pairing) <= 1e-8 * scale

    def test_constant_phi_zero_pairing(self, grid64, sigma64, mu4):
        v = make_test_field(grid64, mode=(1, 0), width=0.7)
        Phi = CylindricalFunctional((v,), c0=2.0, cutoff_radius=1e3)
        assert cylindrical_pairing(Phi, mu4.atoms[0], sigma64) == 0.0

    def test_chain_rule_against_finite_differences(self, grid128, sigma128):
        from tests.conftest import super_gaussian

        vals = super_gaussian(grid128, -0.5, 0.1, 0.3, 0.5) - super_gaussian(
            grid128, 0.5, -0.1, 0.3, 0.5
        )
        st = radial.decompose(ScalarField(grid128, vals), sigma128)
        cfg = SolverConfig.make(
            nu=0.0, dt=0.004, horizon_T=0.2, n_saves=17, boundary_guard_tol=1.0
        )
        traj = solver.solve(st, sigma128, cfg)
        v = make_test_field(
            grid128, mode=(1, 1), phase=(0.5, 0.25), width=0.7, center=(0.3, 0.2)
        )
        Phi = CylindricalFunctional((v,), lin=(1.0,), quad=(0.3,), cutoff_radius=1e3)
        ts = traj.times
        h = ts[1] - ts[0]
        errs = []
        for stride in (4, 2, 1):
            i = 8
            phi_p = eval_cylindrical(Phi, traj.state_at(ts[i + stride]), sigma128)
            phi_m = eval_cylindrical(Phi, traj.state_at(ts[i - stride]), sigma128)
            fd = (phi_p - phi_m) / (2 * stride * h)
            pairing = cylindrical_pairing(Phi, traj.state_at(ts[i]), sigma128)
            errs.append(abs(fd - pairing))
        assert errs[2] < errs[0]  # O(h^2) contraction
        assert errs[2] <= 1e-5 * max(abs(pairing), 1e-12) + 1e-10


class TestW1:
    def test_identical_measures(self, mu4, sigma64, grid64):
        v = make_test_field(grid64, mode=(1, 0), width=0.7)
        assert bl_distance_projected(mu4, mu4, (v,), sigma64) == 0.0

    def test_two_diracs_exact(self):
        assert w1_weighted_1d([0.0], [1.0], [2.5], [1.0]) == pytest.approx(2.5, rel=1e-15)

    def test_weighted_quantile_matching(self):
        # split mass vs single atom: W1 = 0.5*|0-1| + 0.5*|2-1| = 1
        got = w1_weighted_1d([0.0, 2.0], [0.5, 0.5], [1.0], [1.0])
        assert got == pytest.approx(1.0, rel=1e-14)

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        y1, y2 = rng.normal(size=6), rng.normal(size=4)
        w1 = rng.uniform(0.1, 1, 6)
        w1 /= w1.sum()
        w2 = rng.uniform(0.1, 1, 4)
        w2 /= w2.sum()
        assert w1_weighted_1d(y1, w1, y2, w2) == pytest.approx(
            w1_weighted_1d(y2, w2, y1, w1), rel=1e-13
        )

    def test_against_fine_quantile_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            y1, y2 = rng.normal(size=7), rng.normal(size=5)
            w1 = rng.uniform(0.1, 1, 7)
            w1 /= w1.sum()
            w2 = rng.uniform(0.1, 1, 5)
            w2 /= w2.sum()
            qs = (np.arange(200000) + 0.5) / 200000
            q1 = np.sort(y1)[np.searchsorted(np.cumsum(w1[np.argsort(y1)]), qs)]
            q2 = np.sort(y2)[np.searchsorted(np.cumsum(w2[np.argsort(y2)]), qs)]
            want = np.mean(np.abs(q1 - q2))
            got = w1_weighted_1d(y1, w1, y2, w2)
            assert got == pytest.approx(want, rel=1e-3, abs=1e-5)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            ys = [rng.normal(size=rng.integers(2, 8)) for _ in range(3)]
            ws = []
            for y in ys:
                w = rng.uniform(0.1, 1, len(y))
                ws.append(w / w.sum())
            d01 = w1_weighted_1d(ys[0], ws[0], ys[1], ws[1])
            d12 = w1_weighted_1d(ys[1], ws[1], ys[2], ws[2])
            d02 = w1_weighted_1d(ys[0], ws[0], ys[2], ws[2])
            assert d02 <= d01 + d12 + 1e-12

    def test_sliced_multifield(self, mu4, sigma64, grid64, cfg_short):
        va = make_test_field(grid64, mode=(1, 0), width=0.7)
        vb = make_test_field(grid64, mode=(0, 1), width=0.7)
        rho = push_forward(mu4, sigma64, cfg_short)
        muT = project_time(rho, 0.2)
        d = bl_distance_projected(mu4, muT, (va, vb), sigma64, n_slices=8, slice_seed=5)
        assert d >= 0.0
        d2 = bl_distance_projected(muT, mu4, (va, vb), sigma64, n_slices=8, slice_seed=5)
        assert d == pytest.approx(d2, rel=1e-12, abs=1e-300)


class TestSupportLiminf:
    def test_constant_sequence(self, mu4, sigma64, grid64):
        v = make_test_field(grid64, mode=(1, 0), width=0.7)
        rep = support_liminf_check([mu4] * 4, mu4, radius=1e-12, test_fields=(v,), sigma=sigma64)
        assert rep.satisfied
        assert all(ix == 0 for ix in rep.first_covered_index)

    def test_one_over_n_contraction(self, grid64, sigma64):
        rng = np.random.default_rng(3)
        base = band_limited_field(grid64, rng)
        v = make_test_field(grid64, mode=(1, 0), width=0.7)
        y0 = project_measure(
            dirac_mixture([1.0], [VorticityState(0.0, base)]), (v,), sigma64
        )[0, 0]
        seq = []
        for n in range(1, 13):
            scale = 1.0 / (n * abs(y0))
            seq.append(
                dirac_mixture([1.0], [VorticityState(0.0, scale * base)])
            )
        limit = dirac_mixture([1.0], [VorticityState.zero(grid64)])
        radius = 0.26  # strictly between 1/4 and 1/3: no boundary ties
        rep = support_liminf_check(seq, limit, radius, (v,), sigma64)
        assert rep.satisfied
        # projections are 1/n: covered from the first n with 1/n <= radius
        assert rep.first_covered_index[0] == int(np.ceil(1.0 / radius)) - 1


class TestMeasureInvariants:
    def test_expectation_monotone_nonnegative(self, mu4):
        rng = np.random.default_rng(7)
        vals = np.abs(rng.standard_normal(len(mu4.atoms)))
        assert mu4.expect(vals) >= 0.0

    def test_expectation_linear_bitwise(self, mu4):
        rng = np.random.default_rng(8)
        a = rng.standard_normal(len(mu4.atoms))
        b = rng.standard_normal(len(mu4.atoms))
        lhs = mu4.expect(2.0 * a + b)
        # same association order as the fixed-order reduction
        from eustat import kernels

        assert lhs == kernels.tree_dot(mu4.weights, 2.0 * a + b)

    def test_empirical_convergence_decreases(self, grid64, sigma64, family64):
        v = make_test_field(grid64, mode=(1, 1), phase=(0.5, 0.25), width=0.7, center=(0.3, 0.2))
        dists = []
        for n in (16, 64, 256):
            mu_n = sample_family(family64, sigma64, n, master_seed=3)
            mu_4n = sample_family(family64, sigma64, 4 * n, master_seed=1003)
            dists.append(bl_distance_projected(mu_n, mu_4n, (v,), sigma64))
        assert dists[0] > dists[1] > dists[2]


from hypothesis import given, settings
from hypothesis import strategies as st


@st.composite
def weighted_points(draw, max_atoms=6):
    n = draw(st.integers(1, max_atoms))
    ys = draw(st.lists(st.floats(-100, 100), min_size=n, max_size=n))
    ws = draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    w = np.asarray(ws)
    return np.asarray(ys), w / w.sum()


@given(weighted_points(), weighted_points(), weighted_points())
@settings(max_examples=150, deadline=None)
def test_w1_triangle_inequality_property(p1, p2, p3):
    d12 = w1_weighted_1d(p1[0], p1[1], p2[0], p2[1])
    d23 = w1_weighted_1d(p2[0], p2[1], p3[0], p3[1])
    d13 = w1_weighted_1d(p1[0], p1[1], p3[0], p3[1])
    assert d13 <= d12 + d23 + 1e-9 * (1 + d12 + d23)


@given(weighted_points())
@settings(max_examples=100, deadline=None)
def test_w1_identity_and_symmetry_property(p):
    assert w1_weighted_1d(p[0], p[1], p[0], p[1]) == 0.0
