"""Statistical-law verdicts, their collapse to single trajectories, studies."""

import numpy as np
import pytest

from eustat import kernels, radial, solver, spectral, verify
from eustat.ensemble import (
    ClassTag,
    CylindricalFunctional,
    DiscreteMeasure,
    InitialFamily,
    dirac_mixture,
    make_test_field,
    project_time,
    push_forward,
    sample_family,
)
from eustat.grid import ScalarField
from eustat.radial import VorticityState
from eustat.solver import SolverConfig


@pytest.fixture(scope="module")
def shear_rho(grid64, sigma64):
    st = VorticityState(0.0, ScalarField.from_function(grid64, lambda X, Y: np.sin(Y)))
    cfg = SolverConfig.make(nu=0.05, dt=0.01, horizon_T=0.5, n_saves=5, boundary_guard_tol=1.0)
    return push_forward(dirac_mixture([1.0], [st]), sigma64, cfg)


@pytest.fixture(scope="module")
def yud_rho(grid64, sigma64):
    fam = InitialFamily(
        family_kind="random_amplitude_blobs",
        class_tag=ClassTag("yudovich_A"),
        grid=grid64,
        pattern="quadrupole",
        width=0.45,
    )
    mu0 = sample_family(fam, sigma64, 4, master_seed=21)
    cfg = SolverConfig.make(nu=0.0, dt=0.008, horizon_T=0.25, n_saves=5, boundary_guard_tol=1.0)
    return push_forward(mu0, sigma64, cfg)


class TestEnergyInequality:
    def test_all_stationary(self, grid64, sigma64):
        mu0 = dirac_mixture(
            [0.5, 0.5], [VorticityState.zero(grid64, m=1.0), VorticityState.zero(grid64, m=-2.0)]
        )
        cfg = SolverConfig.make(nu=0.0, dt=0.01, horizon_T=0.2, n_saves=3)
        rho = push_forward(mu0, sigma64, cfg)
        rep = verify.verify_energy_inequality(rho)
        assert rep.passed
        assert np.all(rep.lhs == 0.0) and np.all(rep.rhs == 0.0)

    def test_shear_nse_decay(self, shear_rho):
        rep = verify.verify_energy_inequality(shear_rho)
        assert rep.passed
        nu = shear_rho.config.nu
        for i, t in enumerate(rep.times):
            assert rep.lhs[i] == pytest.approx(np.exp(-nu * t) * rep.lhs[0], rel=1e-10)

    def test_yudovich_ensemble(self, yud_rho):
        rep = verify.verify_energy_inequality(yud_rho)
        assert rep.passed
        assert rep.worst_margin >= 0

    def test_mixture_linearity_bitwise(self, yud_rho, sigma64):
        # lhs(t) of the mixture == fixed-order weighted sum of the member
        # kinetic norms: theta-linearity down to the bit.
        rep = verify.verify_energy_inequality(yud_rho)
        for i, t in enumerate(yud_rho.times):
            per_member = [
                spectral.l2_norm_vec(spectral.biot_savart(m.state_at(t).omega_kin))
                for m in yud_rho.members
            ]
            assert rep.lhs[i] == kernels.tree_dot(yud_rho.weights, per_member)


class TestVorticityLaw:
    def test_dirac_at_sigma(self, grid64, sigma64):
        mu0 = dirac_mixture([1.0], [VorticityState.zero(grid64, m=1.0)])
        cfg = SolverConfig.make(nu=0.0, dt=0.01, horizon_T=0.2, n_saves=3)
        rho = push_forward(mu0, sigma64, cfg)
        rep = verify.verify_vorticity_law(rho, q=2.0)
        assert rep.equality and rep.passed
        assert np.max(np.abs(rep.lhs - rep.lhs[0])) == 0.0

    def test_shear_nse_strictly_below(self, shear_rho):
        ineq = verify.verify_vorticity_law(shear_rho, q=2.0)
        assert not ineq.equality
        assert ineq.passed
        eq = verify.verify_vorticity_law(shear_rho, q=2.0, equality_expected=True, tolerance=1e-5)
        assert not eq.passed  # genuine decay: the equality form must fail

    def test_euler_ensemble_equality(self, yud_rho):
        for q in (2.0, np.inf):
            rep = verify.verify_vorticity_law(yud_rho, q=q, tolerance=1e-3)
            assert rep.equality and rep.passed

    def test_q1_is_inequality_even_at_zero_viscosity(self, yud_rho):
        rep = verify.verify_vorticity_law(yud_rho, q=1.0)
        assert not rep.equality


class TestFoiasLiouville:
    def test_stationary_ensemble(self, grid64, sigma64):
        mu0 = dirac_mixture(
            [0.25, 0.75], [VorticityState.zero(grid64, m=1.0), VorticityState.zero(grid64, m=0.5)]
        )
        cfg = SolverConfig.make(nu=0.0, dt=0.01, horizon_T=0.2, n_saves=5)
        rho = push_forward(mu0, sigma64, cfg)
        v = make_test_field(grid64, mode=(1, 1), width=0.7)
        Phi = CylindricalFunctional((v,), lin=(1.0,), cutoff_radius=1e3)
        res = verify.foias_liouville_residual(rho, Phi, 0.0, 0.2)
        e_phi = rho.expect(
            [
                __import__("eustat.ensemble", fromlist=["eval_cylindrical"]).eval_cylindrical(
                    Phi, m.state_at(0.0), sigma64
                )
                for m in rho.members
            ]
        )
        assert res <= 1e-10 * max(abs(e_phi), 1e-6)

    def test_constant_phi(self, yud_rho, sigma64, grid64):
        v = make_test_field(grid64, mode=(1, 0), width=0.7)
        Phi = CylindricalFunctional((v,), c0=3.0, cutoff_radius=1e3)
        assert verify.foias_liouville_residual(yud_rho, Phi, 0.0, 0.25) == 0.0

    def test_dirac_collapse_to_weak_form(self, grid128, sigma128):
        # statistical residual on a single Dirac == the deterministic
        # construction with the frozen pointwise coefficient field.
        from eustat.ensemble import cylindrical_pairing, eval_cylindrical
        from tests.conftest import super_gaussian

        vals = super_gaussian(grid128, -0.5, 0.1, 0.3, 0.5) - super_gaussian(
            grid128, 0.5, -0.1, 0.3, 0.5
        )
        st = radial.decompose(ScalarField(grid128, vals), sigma128)
        cfg = SolverConfig.make(nu=0.0, dt=0.005, horizon_T=0.2, n_saves=9,
                                boundary_guard_tol=1.0)
        rho = push_forward(dirac_mixture([1.0], [st]), sigma128, cfg)
        v = make_test_field(grid128, mode=(1, 1), phase=(0.5, 0.25), width=0.7,
                            center=(0.3, 0.2))
        Phi = CylindricalFunctional((v,), lin=(1.0,), cutoff_radius=1e3)
        res_stat = verify.foias_liouville_residual(rho, Phi, 0.0, 0.2)

        traj = rho.members[0]
        times = traj.times
        phis, pairs = [], []
        for t in times:
            s = traj.state_at(t)
            phis.append(eval_cylindrical(Phi, s, sigma128))
            pairs.append(cylindrical_pairing(Phi, s, sigma128))
        seg = 0.5 * np.diff(np.asarray(times)) * (np.asarray(pairs[1:]) + np.asarray(pairs[:-1]))
        res_det = abs(phis[-1] - phis[0] - kernels.tree_sum(seg))
        assert abs(res_stat - res_det) <= 1e-9 * max(abs(res_det), 1e-9)


class TestInviscidStudy:
    def test_single_dirac_shear_closed_form(self, grid64, sigma64):
        st = VorticityState(0.0, ScalarField.from_function(grid64, lambda X, Y: np.sin(Y)))
        mu0 = dirac_mixture([1.0], [st])
        cfg = SolverConfig.make(nu=0.0, dt=0.01, horizon_T=0.5, n_saves=3,
                                boundary_guard_tol=1.0)
        v = make_test_field(grid64, mode=(1, 1), phase=(0.3, 0.8), width=0.8, center=(0.2, 0.4))
        nus = (1e-2, 5e-3, 2.5e-3)
        study = verify.inviscid_limit_study(mu0, sigma64, nus, cfg, (v,))
        u0 = radial.full_velocity(st, sigma64)
        y0 = spectral.inner(u0, v)
        for i, nu in enumerate(nus):
            want = (1.0 - np.exp(-nu * 0.5)) * abs(y0)
            assert study.distances[i, -1] == pytest.approx(want, abs=1e-8)
        assert study.monotone_decreasing

    def test_rejects_bad_schedule(self, grid64, sigma64):
        mu0 = dirac_mixture([1.0], [VorticityState.zero(grid64)])
        cfg = SolverConfig.make(nu=0.0, dt=0.01, horizon_T=0.1, n_saves=2)
        v = make_test_field(grid64, mode=(1, 0), width=0.7)
        with pytest.raises(ValueError):
            verify.inviscid_limit_study(mu0, sigma64, (1e-3, 1e-2), cfg, (v,))

    def test_no_verdict_for_unbounded_classes(self, grid64, sigma64):
        mu0 = dirac_mixture([1.0], [VorticityState.zero(grid64)])
        cfg = SolverConfig.make(nu=0.0, dt=0.01, horizon_T=0.1, n_saves=2)
        v = make_test_field(grid64, mode=(1, 0), width=0.7)
        study = verify.inviscid_limit_study(
            mu0, sigma64, (1e-2, 5e-3), cfg, (v,), verdict_applies=False
        )
        assert study.passed  # tabulation only


class TestUniquenessProbe:
    def test_equal_epsilons_zero_gap(self, grid64, sigma64, yud_rho):
        mu0 = project_time(yud_rho, 0.0)
        cfg = SolverConfig.make(nu=0.0, dt=0.01, horizon_T=0.1, n_saves=2,
                                boundary_guard_tol=1.0)
        h = grid64.spacing
        v = make_test_field(grid64, mode=(1, 0), width=0.7)
        rep = verify.uniqueness_probe(mu0, sigma64, (4 * h, 4 * h), cfg, (v,))
        assert rep.gaps[0] == 0.0

    def test_gaps_decrease_for_smooth_atoms(self, grid128, sigma128):
        from tests.conftest import quadrupole

        atoms = [
            radial.decompose(ScalarField(grid128, quadrupole(grid128, 0.0, 0.0, 0.45, a)), sigma128)
            for a in (0.8, 1.2)
        ]
        mu0 = dirac_mixture([0.5, 0.5], atoms)
        cfg = SolverConfig.make(nu=0.0, dt=0.01, horizon_T=0.25, n_saves=3,
                                boundary_guard_tol=1.0)
        h = grid128.spacing
        v = make_test_field(grid128, mode=(1, 1), phase=(0.4, 0.1), width=0.7, center=(0.3, 0.2))
        rep = verify.uniqueness_probe(
            mu0, sigma128, (16 * h, 8 * h, 4 * h), cfg, (v,)
        )
        assert rep.decreasing
        assert rep.gaps[0] / rep.gaps[1] >= 3.0


def test_beta_abs_power_vanishes_near_zero():
    beta = verify.beta_abs_power(1.5, lo=0.1, hi=0.4)
    s = np.linspace(-0.09, 0.09, 21)
    assert np.all(beta(s) == 0.0)
    big = np.array([1.0, -2.0])
    assert np.allclose(beta(big), np.abs(big) ** 1.5)
