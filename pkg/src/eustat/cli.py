"""Command-line entry point.

    eustat <subcommand> --config <path> [--out <dir>] [--jobs <k>] [--seed <u64>]

Subcommands: simulate, ensemble, verify, foias-liouville, inviscid-limit,
uniqueness-probe, info.  Exit status 0 iff every requested verdict passed;
failures emit JSON-lines error records on stderr.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from eustat import io, radial, solver, verify
from eustat.config import ExperimentConfig, parse_config
from eustat.ensemble import (
    ClassTag,
    CylindricalFunctional,
    InitialFamily,
    eval_cylindrical,
    make_test_field,
    push_forward,
    sample_family,
)
from eustat.errors import EustatError
from eustat.grid import Grid

_FIELD_MODES = ((1, 0), (0, 1), (1, 1), (2, 1), (1, 2), (2, 2))
_FIELD_PHASES = ((0.0, 0.0), (0.5, 0.25), (0.25, 0.75), (0.1, 0.6), (0.8, 0.3), (0.4, 0.9))


def _grid(cfg: ExperimentConfig) -> Grid:
    return Grid(cfg.get("grid", "n"), cfg.get("grid", "box_half_width"))


def _sigma(cfg: ExperimentConfig, grid: Grid):
    sr = cfg.get("sigma", "support_radius")
    if sr <= 0:
        sr = grid.box_half_width / 4.0
    return radial.build_sigma(sr, grid)


def _solver_cfg(cfg: ExperimentConfig, nu=None) -> solver.SolverConfig:
    T = cfg.get("sigma", "horizon_T")
    save_times = cfg.get("solver", "save_times") or None
    return solver.SolverConfig.make(
        nu=cfg.get("solver", "nu") if nu is None else nu,
        dt=cfg.get("solver", "dt"),
        horizon_T=T,
        n_saves=cfg.get("solver", "n_saves"),
        save_times=save_times,
        scheme=cfg.get("solver", "scheme"),
        boundary_guard_tol=cfg.get("solver", "boundary_guard_tol"),
    )


def _class_tag(cfg: ExperimentConfig) -> ClassTag:
    return ClassTag(
        cfg.get("measure", "class"),
        p=cfg.get("measure", "p"),
        epsilon=cfg.get("measure", "mollify_eps"),
    )


def _family(cfg: ExperimentConfig, grid: Grid) -> InitialFamily:
    return InitialFamily(
        family_kind=cfg.get("measure", "family"),
        class_tag=_class_tag(cfg),
        grid=grid,
        pattern=cfg.get("measure", "pattern"),
        width=cfg.get("measure", "width"),
        center=(cfg.get("measure", "center_x"), cfg.get("measure", "center_y")),
        amp_lo=cfg.get("measure", "amp_lo"),
        amp_hi=cfg.get("measure", "amp_hi"),
        place_radius=cfg.get("measure", "place_radius"),
        m_coef=cfg.get("measure", "m_coef"),
    )


def _measure(cfg: ExperimentConfig, sigma, seed=None):
    grid = sigma.grid
    family = _family(cfg, grid)
    master_seed = cfg.get("measure", "master_seed") if seed is None else seed
    return sample_family(family, sigma, cfg.get("measure", "n_atoms"), master_seed)


def _test_fields(cfg: ExperimentConfig, grid: Grid):
    k = cfg.get("verify", "k_fields")
    width = cfg.get("verify", "field_width")
    fields = []
    for i in range(k):
        mode = _FIELD_MODES[i % len(_FIELD_MODES)]
        phase = _FIELD_PHASES[i % len(_FIELD_PHASES)]
        fields.append(make_test_field(grid, mode=mode, phase=phase, width=width))
    return tuple(fields)


def _functionals(cfg: ExperimentConfig, grid: Grid):
    fields = _test_fields(cfg, grid)
    k = len(fields)
    cutoff = cfg.get("verify", "cutoff_radius")
    out = []
    for kind in cfg.get("verify", "phi_kinds"):
        if kind == "first_moment":
            out.append(
                (kind, CylindricalFunctional(fields, lin=(1.0,) * k, cutoff_radius=cutoff))
            )
        elif kind == "second_moment":
            out.append(
                (kind, CylindricalFunctional(fields, quad=(1.0,) * k, cutoff_radius=cutoff))
            )
        else:
            raise EustatError(f"unknown phi kind {kind!r}")
    return out


def _retained_indices(retention: str, times):
    if retention == "all":
        return list(range(len(times)))
    if retention == "final":
        return [0, len(times) - 1] if len(times) > 1 else [0]
    return []


def _write_trajectory_snapshots(out, traj, member, retention):
    snap_dir = out / "snapshots"
    paths = []
    if not _retained_indices(retention, traj.times):
        return paths
    snap_dir.mkdir(parents=True, exist_ok=True)
    for i in _retained_indices(retention, traj.times):
        t, state = traj.states[i]
        p = snap_dir / f"member{member:04d}_s{i:03d}.eust"
        io.write_snapshot(p, state, t, traj.config.nu)
        paths.append(p.relative_to(out))
    return paths


def cmd_info(cfg, out, jobs, seed):
    grid = _grid(cfg)
    sigma = _sigma(cfg, grid)
    T = cfg.get("sigma", "horizon_T")
    lines = list(cfg.resolved_lines())
    lines.append("[derived]")
    lines.append(f"spacing={io.fmt(grid.spacing)}")
    lines.append(f"sigma_grad_sup_norm={io.fmt(sigma.grad_sup_norm)}")
    lines.append(f"sigma_sup_norm={io.fmt(sigma.sup_norm)}")
    lines.append(f"sigma_mass_defect={io.fmt(sigma.mass_defect)}")
    lines.append(f"constant_a={io.fmt(radial.constant_a(T, sigma))}")
    mu0 = _measure(cfg, sigma, seed)
    gammas = [radial.gamma(a, sigma, T) for a in mu0.atoms]
    lines.append(f"gamma_min={io.fmt(min(gammas))}")
    lines.append(f"gamma_mean={io.fmt(sum(gammas) / len(gammas))}")
    lines.append(f"gamma_max={io.fmt(max(gammas))}")
    print("\n".join(lines))
    return 0


def cmd_simulate(cfg, out, jobs, seed):
    grid = _grid(cfg)
    sigma = _sigma(cfg, grid)
    mu0 = _measure(cfg, sigma, seed)
    traj = solver.solve(mu0.atoms[0], sigma, _solver_cfg(cfg))
    report = solver.apriori_report(traj)
    out.mkdir(parents=True, exist_ok=True)
    io.emit_plot_data(report.series(), out / "apriori.csv")
    _write_trajectory_snapshots(out, traj, 0, cfg.get("io", "snapshot_retention"))
    print(f"simulate: wrote {out / 'apriori.csv'}")
    return 0


def cmd_ensemble(cfg, out, jobs, seed):
    grid = _grid(cfg)
    sigma = _sigma(cfg, grid)
    mu0 = _measure(cfg, sigma, seed)
    rho = push_forward(mu0, sigma, _solver_cfg(cfg), jobs=jobs)
    out.mkdir(parents=True, exist_ok=True)
    retention = cfg.get("io", "snapshot_retention")
    member_entries = []
    for j, member in enumerate(rho.members):
        paths = _write_trajectory_snapshots(out, member, j, retention)
        member_entries.append((f"member{j:04d}", ",".join(str(p) for p in paths)))
    sections = [
        (
            "ensemble",
            [
                ("family", cfg.get("measure", "family")),
                ("class", cfg.get("measure", "class")),
                ("pattern", cfg.get("measure", "pattern")),
                ("n_atoms", len(mu0.atoms)),
                ("master_seed", cfg.get("measure", "master_seed") if seed is None else seed),
                ("nu", io.fmt(rho.config.nu)),
                ("grid_n", grid.n),
                ("box_half_width", io.fmt(grid.box_half_width)),
                ("save_times", ",".join(io.fmt(t) for t in rho.times)),
            ],
        ),
        ("weights", [(f"w{j:04d}", io.fmt(w)) for j, w in enumerate(rho.weights)]),
        ("members", member_entries),
    ]
    io.write_manifest(out / "manifest.txt", sections)
    print(f"ensemble: wrote {out / 'manifest.txt'} ({len(rho.members)} members)")
    return 0


def cmd_verify(cfg, out, jobs, seed):
    grid = _grid(cfg)
    sigma = _sigma(cfg, grid)
    mu0 = _measure(cfg, sigma, seed)
    rho = push_forward(mu0, sigma, _solver_cfg(cfg), jobs=jobs)
    reports = []
    for law in cfg.get("verify", "laws"):
        if law == "energy":
            reports.append(verify.verify_energy_inequality(rho))
        elif law == "vorticity":
            for q in cfg.get("verify", "q_list"):
                qv = np.inf if q == "inf" else float(q)
                reports.append(verify.verify_vorticity_law(rho, qv))
        else:
            raise EustatError(f"unknown law {law!r} (expected energy or vorticity)")
    out.mkdir(parents=True, exist_ok=True)
    io.emit_verdicts(reports, out / "verdicts.csv")
    ok = all(r.passed for r in reports)
    for r in reports:
        print(
            f"{r.law_id}: {'PASS' if r.passed else 'FAIL'} "
            f"(worst margin {io.fmt(r.worst_margin)} at t={io.fmt(r.worst_time)})"
        )
    return 0 if ok else 1


def cmd_foias_liouville(cfg, out, jobs, seed):
    grid = _grid(cfg)
    sigma = _sigma(cfg, grid)
    mu0 = _measure(cfg, sigma, seed)
    rho = push_forward(mu0, sigma, _solver_cfg(cfg), jobs=jobs)
    t0 = cfg.get("verify", "t_prime")
    t1 = cfg.get("verify", "t_final") or rho.times[-1]
    tol = cfg.get("verify", "fl_tol")
    rows = []
    ok = True
    for kind, Phi in _functionals(cfg, grid):
        res = verify.foias_liouville_residual(rho, Phi, t0, t1)
        e_phi = rho.expect(
            [eval_cylindrical(Phi, m.state_at(t1), sigma) for m in rho.members]
        )
        scale = max(abs(e_phi), 1e-12)
        passed = res <= tol * scale
        ok = ok and passed
        rows.append((kind, res, e_phi, passed))
        print(f"foias-liouville[{kind}]: residual {io.fmt(res)} vs {io.fmt(tol * scale)} "
              f"-> {'PASS' if passed else 'FAIL'}")
    out.mkdir(parents=True, exist_ok=True)
    lines = ["phi_kind,residual,expected_phi,pass"]
    for kind, res, e_phi, passed in rows:
        lines.append(f"{kind},{io.fmt(res)},{io.fmt(e_phi)},{str(passed).lower()}")
    (out / "foias_liouville.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0 if ok else 1


def cmd_inviscid_limit(cfg, out, jobs, seed):
    grid = _grid(cfg)
    sigma = _sigma(cfg, grid)
    mu0 = _measure(cfg, sigma, seed)
    fields = _test_fields(cfg, grid)
    base_cfg = _solver_cfg(cfg, nu=0.0)
    study = verify.inviscid_limit_study(
        mu0,
        sigma,
        cfg.get("verify", "nu_schedule"),
        base_cfg,
        fields,
        n_slices=cfg.get("verify", "n_slices"),
        slice_seed=cfg.get("verify", "slice_seed"),
        jobs=jobs,
        verdict_applies=cfg.get("measure", "class") == "yudovich_A",
    )
    out.mkdir(parents=True, exist_ok=True)
    lines = ["nu,t,distance"]
    for nu, t, d in study.rows():
        lines.append(f"{io.fmt(nu)},{io.fmt(t)},{io.fmt(d)}")
    (out / "inviscid.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if study.verdict_applies:
        status = "PASS" if study.passed else "FAIL"
        print(
            f"inviscid-limit: monotone={study.monotone_decreasing} "
            f"ratio={io.fmt(study.final_ratio)} -> {status}"
        )
        return 0 if study.passed else 1
    print("inviscid-limit: tabulated (no verdict claimed for this class)")
    return 0


def cmd_uniqueness_probe(cfg, out, jobs, seed):
    grid = _grid(cfg)
    sigma = _sigma(cfg, grid)
    mu0 = _measure(cfg, sigma, seed)
    fields = _test_fields(cfg, grid)
    eps = cfg.get("verify", "epsilon_schedule")
    if not eps:
        h = grid.spacing
        eps = (8 * h, 4 * h, 2 * h)
    report = verify.uniqueness_probe(
        mu0,
        sigma,
        eps,
        _solver_cfg(cfg),
        fields,
        n_slices=cfg.get("verify", "n_slices"),
        slice_seed=cfg.get("verify", "slice_seed"),
        jobs=jobs,
    )
    out.mkdir(parents=True, exist_ok=True)
    lines = ["eps_coarse,eps_fine,gap"]
    for e0, e1, gap in report.rows():
        lines.append(f"{io.fmt(e0)},{io.fmt(e1)},{io.fmt(gap)}")
    (out / "uniqueness.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    status = "PASS" if report.decreasing else "FAIL"
    print(f"uniqueness-probe: gaps {[io.fmt(g) for g in report.gaps]} decreasing -> {status}")
    return 0 if report.decreasing else 1


_COMMANDS = {
    "info": cmd_info,
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "verify": cmd_verify,
    "foias-liouville": cmd_foias_liouville,
    "inviscid-limit": cmd_inviscid_limit,
    "uniqueness-probe": cmd_uniqueness_probe,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="eustat", description=__doc__)
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="experiment config path")
    parser.add_argument("--out", default=None, help="output directory (default: io.out_dir)")
    parser.add_argument("--jobs", type=int, default=None, help="worker count (env EUSTAT_JOBS)")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
        out = Path(args.out) if args.out else Path(cfg.get("io", "out_dir"))
        jobs = args.jobs
        if jobs is None:
            jobs = int(os.environ.get("EUSTAT_JOBS", "1"))
        return _COMMANDS[args.subcommand](cfg, out, max(1, jobs), args.seed)
    except EustatError as exc:
        print(json.dumps(exc.record()), file=sys.stderr)
        return 2
    except OSError as exc:
        print(
            json.dumps({"code": "io", "module": "cli", "message": str(exc)}),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
