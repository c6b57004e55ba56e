"""Command-line front end: subcommand dispatch, CSV emission, run manifests.

Conventions: angles in radians, frequencies in MHz, times in nanoseconds at
the interface (seconds internally).  Every run writes its CSV outputs plus a
JSON manifest recording the resolved inputs, seed, package version and wall
time; re-running with the manifest's parameters reproduces the CSV bytes.
Exit codes: 0 success, 2 configuration error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .cascade import (
    exact_distribution,
    gaussian_distribution,
    optimal_threshold,
    readout_fidelity,
)
from .config import (
    ConfigError,
    load_config,
    nv_params_from_config,
    phi_from_config,
    readout_from_config,
    sequence_from_config,
)
from .control import solve_waiting_time
from .hyperfine import exact_dd_evolution, extract_alpha_phi
from .measurement import MeasurementSetting, ReadoutModel, binary_stats
from .nv import (
    PRESETS,
    default_tau_grid,
    default_tr_grid,
    nv_system,
    room_temp_readout,
    scan_2d,
    tolerance_profile,
)
from .rotations import rotor_exp
from .stability import RotationErrorModel, analytic_survival, survival_curve
from .trajectory import NuclearState, run_ensemble


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return f"{value:.12g}"
    return str(value)


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(_fmt(v) for v in row) + "\n")


def _check_outputs(paths: list[str], force: bool) -> None:
    for path in paths:
        if os.path.exists(path) and not force:
            raise ConfigError(f"output {path} exists (use --force to overwrite)")


def _write_manifest(path: str, subcommand: str, params: dict, outputs: list[str], started: float) -> None:
    manifest = {
        "subcommand": subcommand,
        "version": __version__,
        "parameters": params,
        "outputs": outputs,
        "wall_time_s": round(time.time() - started, 3),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _vector(text: str) -> np.ndarray:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return np.array(parts)


def _load_cfg(args) -> dict:
    return load_config(args.config) if args.config else {}


def _readout_from_args(args, cfg) -> ReadoutModel:
    if args.p_plus is not None or args.p_minus is not None:
        if args.p_plus is None or args.p_minus is None:
            raise ConfigError("give both --p-plus and --p-minus")
        return ReadoutModel(args.p_plus, args.p_minus)
    if args.n_plus is not None or args.n_minus is not None:
        if args.n_plus is None or args.n_minus is None:
            raise ConfigError("give both --n-plus and --n-minus")
        return room_temp_readout(args.n_plus, args.n_minus)
    return readout_from_config(cfg)


def _setting_from_args(args, cfg) -> MeasurementSetting:
    alpha = args.alpha if args.alpha is not None else float(cfg.get("alpha", 0.1))
    phi = args.phi if args.phi is not None else phi_from_config(cfg)
    readout = _readout_from_args(args, cfg)
    return MeasurementSetting(alpha * np.array([0.0, 0.0, 1.0]), phi, readout)


# ----------------------------------------------------------------- commands


def _cmd_table1(args) -> int:
    started = time.time()
    names = [args.preset] if args.preset else sorted(PRESETS)
    rows = []
    for name in names:
        params = PRESETS[name]
        rows.append(
            (
                name,
                params.n_dd,
                params.b_gauss,
                params.larmor_period_wait * 1e9,
                params.larmor_period_dd * 1e9,
            )
        )
        print(
            f"{name}: N_DD={params.n_dd} B={params.b_gauss:g} G  "
            f"T_R={params.larmor_period_wait * 1e9:.0f} ns  "
            f"T={params.larmor_period_dd * 1e9:.0f} ns"
        )
    csv_path, manifest_path = args.out + ".csv", args.out + ".manifest.json"
    _check_outputs([csv_path, manifest_path], args.force)
    _write_csv(csv_path, ["preset", "N_DD", "B_gauss", "T_R_ns", "T_ns"], rows)
    _write_manifest(manifest_path, "table1", {"preset": args.preset}, [csv_path], started)
    return 0


def _cmd_binary_stats(args) -> int:
    started = time.time()
    cfg = _load_cfg(args)
    setting = _setting_from_args(args, cfg)
    stats = binary_stats(setting)
    print(
        f"alpha={setting.alpha_mag:g} phi={setting.phi:g}  "
        f"<u>_+ = {stats.mean_plus:.6f}  <u>_- = {stats.mean_minus:.6f}  "
        f"D = {stats.strength_d:.6g}"
    )
    csv_path, manifest_path = args.out + ".csv", args.out + ".manifest.json"
    _check_outputs([csv_path, manifest_path], args.force)
    _write_csv(
        csv_path,
        ["alpha", "phi", "p_plus", "p_minus", "mean_plus", "mean_minus", "sigma_plus", "sigma_minus", "D"],
        [
            (
                setting.alpha_mag,
                setting.phi,
                setting.readout.p_plus,
                setting.readout.p_minus,
                stats.mean_plus,
                stats.mean_minus,
                stats.sigma_plus,
                stats.sigma_minus,
                stats.strength_d,
            )
        ],
    )
    _write_manifest(
        manifest_path,
        "binary-stats",
        {
            "alpha": setting.alpha_mag,
            "phi": setting.phi,
            "p_plus": setting.readout.p_plus,
            "p_minus": setting.readout.p_minus,
        },
        [csv_path],
        started,
    )
    return 0


def _distribution_for(args, setting):
    if args.law == "gaussian":
        return gaussian_distribution(setting, args.n)
    return exact_distribution(setting, args.n)


def _cmd_distribution(args) -> int:
    started = time.time()
    cfg = _load_cfg(args)
    setting = _setting_from_args(args, cfg)
    dist = _distribution_for(args, setting)
    csv_path, manifest_path = args.out + ".csv", args.out + ".manifest.json"
    _check_outputs([csv_path, manifest_path], args.force)
    _write_csv(
        csv_path,
        ["u_bar", "p_plus_alpha", "p_minus_alpha"],
        zip(dist.u_grid, dist.probs_plus, dist.probs_minus),
    )
    _write_manifest(
        manifest_path,
        "distribution",
        {
            "alpha": setting.alpha_mag,
            "phi": setting.phi,
            "p_plus": setting.readout.p_plus,
            "p_minus": setting.readout.p_minus,
            "n": args.n,
            "law": args.law,
        },
        [csv_path],
        started,
    )
    print(f"wrote {csv_path} ({args.n + 1} outcomes, law={args.law})")
    return 0


def _cmd_fidelity(args) -> int:
    started = time.time()
    cfg = _load_cfg(args)
    setting = _setting_from_args(args, cfg)
    dist = exact_distribution(setting, args.n)
    threshold = optimal_threshold(dist, mode=args.threshold_mode)
    report = readout_fidelity(dist, threshold, binary_stats(setting).strength_d)
    print(
        f"n={args.n}  D={binary_stats(setting).strength_d:.6g}  "
        f"u_th={threshold:.6g}  F_bar={report.f_bar:.4f}  (erf: {report.f_erf:.4f})"
    )
    csv_path, manifest_path = args.out + ".csv", args.out + ".manifest.json"
    _check_outputs([csv_path, manifest_path], args.force)
    _write_csv(
        csv_path,
        ["n", "D", "DN", "u_th", "F_plus", "F_minus", "F_bar", "F_erf"],
        [
            (
                report.n,
                binary_stats(setting).strength_d,
                report.strength_dn,
                report.u_threshold,
                report.f_plus,
                report.f_minus,
                report.f_bar,
                report.f_erf,
            )
        ],
    )
    _write_manifest(
        manifest_path,
        "fidelity",
        {
            "alpha": setting.alpha_mag,
            "phi": setting.phi,
            "p_plus": setting.readout.p_plus,
            "p_minus": setting.readout.p_minus,
            "n": args.n,
            "threshold_mode": args.threshold_mode,
        },
        [csv_path],
        started,
    )
    return 0


def _cmd_qnd_solve(args) -> int:
    started = time.time()
    cfg = _load_cfg(args)
    if args.preset:
        cfg = dict(cfg, preset=args.preset)
    params = nv_params_from_config(cfg)
    if args.tau_ns is not None:
        cfg = dict(cfg, tau_ns=args.tau_ns)
    seq = sequence_from_config(cfg, params)
    sys_ = nv_system(params)
    alpha_vec, phi_dd = extract_alpha_phi(*exact_dd_evolution(sys_, seq))
    mag = np.linalg.norm(alpha_vec)
    if mag == 0.0:
        raise RuntimeError("measurement vector vanishes for this sequence")
    window = (0.0, sys_.wait_period)
    roots = solve_waiting_time(sys_, phi_dd, alpha_vec / mag, window)
    csv_path, manifest_path = args.out + ".csv", args.out + ".manifest.json"
    _check_outputs([csv_path, manifest_path], args.force)
    _write_csv(
        csv_path,
        ["t_R_ns", "residual_rad"],
        [(t * 1e9, r) for t, r in roots],
    )
    _write_manifest(
        manifest_path,
        "qnd-solve",
        {
            "B_gauss": params.b_gauss,
            "N_DD": params.n_dd,
            "gamma_n_MHz_per_T": params.gamma_n_mhz_per_t,
            "A_MHz": list(params.a_mhz),
            "tau_ns": seq.duration / params.n_dd * 1e9,
        },
        [csv_path],
        started,
    )
    best = min(roots, key=lambda r: r[1])
    print(
        f"{len(roots)} minima in one period; best residual {best[1]:.3e} rad "
        f"at t_R = {best[0] * 1e9:.3f} ns"
    )
    return 0


def _cmd_stability(args) -> int:
    started = time.time()
    alpha_vec = args.alpha_vec
    if args.error == "systematic":
        error = RotationErrorModel(
            "systematic", delta_phi=args.delta_phi * args.error_axis
        )
    else:
        if args.seed is None:
            raise ConfigError("--seed is required for random errors")
        error = RotationErrorModel(
            "random", std=args.delta_phi, axis=args.error_axis, seed=args.seed
        )
    curve = survival_curve(alpha_vec, error, args.n_max)
    steps = np.arange(args.n_max + 1)
    analytic = analytic_survival(
        args.error, float(np.linalg.norm(alpha_vec)), args.delta_phi, steps
    )
    csv_path, manifest_path = args.out + ".csv", args.out + ".manifest.json"
    _check_outputs([csv_path, manifest_path], args.force)
    _write_csv(csv_path, ["N", "S_sim", "S_analytic"], zip(steps, curve.values, analytic))
    _write_manifest(
        manifest_path,
        "stability",
        {
            "alpha_vec": list(map(float, alpha_vec)),
            "error": args.error,
            "delta_phi": args.delta_phi,
            "error_axis": list(map(float, args.error_axis)),
            "n_max": args.n_max,
            "seed": args.seed,
        },
        [csv_path],
        started,
    )
    print(f"lifetime N_L = {curve.lifetime}")
    return 0


def _cmd_trajectories(args) -> int:
    started = time.time()
    cfg = _load_cfg(args)
    setting = _setting_from_args(args, cfg)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    initial = {
        "plus": NuclearState.eigenstate(setting.alpha_hat, 1),
        "minus": NuclearState.eigenstate(setting.alpha_hat, -1),
        "mixed": NuclearState.mixed(),
    }[args.initial]
    u_bars, finals = run_ensemble(
        setting, rotor_exp(args.cycle_rot), initial, args.n, args.n_traj, seed
    )
    csv_path, manifest_path = args.out + ".csv", args.out + ".manifest.json"
    _check_outputs([csv_path, manifest_path], args.force)
    _write_csv(
        csv_path,
        ["seed", "u_bar", "final_bx", "final_by", "final_bz"],
        (
            (i, u_bars[i], finals[i, 0], finals[i, 1], finals[i, 2])
            for i in range(args.n_traj)
        ),
    )
    _write_manifest(
        manifest_path,
        "trajectories",
        {
            "alpha": setting.alpha_mag,
            "phi": setting.phi,
            "n": args.n,
            "n_traj": args.n_traj,
            "master_seed": seed,
            "initial": args.initial,
            "cycle_rot": list(map(float, args.cycle_rot)),
        },
        [csv_path],
        started,
    )
    print(f"wrote {csv_path} ({args.n_traj} trajectories, <u_bar> = {u_bars.mean():.4f})")
    return 0


def _cmd_nv_scan(args) -> int:
    started = time.time()
    cfg = _load_cfg(args)
    if args.preset:
        cfg = dict(cfg, preset=args.preset)
    params = nv_params_from_config(cfg)
    readout = _readout_from_args(args, cfg)
    if readout.is_ideal:
        readout = room_temp_readout(0.1, 0.07)
    scan_cfg = cfg.get("scan", {})
    n_tdd = args.n_tdd if args.n_tdd else int(scan_cfg.get("n_tdd", 256))
    n_tr = args.n_tr if args.n_tr else int(scan_cfg.get("n_tr", 256))
    rel = (
        float(scan_cfg.get("tau_rel_min", 0.95)),
        float(scan_cfg.get("tau_rel_max", 1.05)),
    )
    n_max = args.n_max if args.n_max else int(scan_cfg.get("n_max", 1_000_000))

    os.makedirs(args.out_dir, exist_ok=True)
    scan_path = os.path.join(args.out_dir, "scan.csv")
    tol_path = os.path.join(args.out_dir, "tolerance.csv")
    manifest_path = os.path.join(args.out_dir, "manifest.json")
    _check_outputs([scan_path, tol_path, manifest_path], args.force)

    scan = scan_2d(
        params,
        default_tau_grid(params, n_tdd, rel),
        default_tr_grid(params, n_tr),
        readout,
        n_max=n_max,
        threads=args.threads,
    )
    _write_csv(
        scan_path,
        ["t_DD_ns", "t_R_ns", "alpha_mag", "qnd_residual", "D", "N_c", "N_L"],
        (
            (t_dd * 1e9, t_r * 1e9, mag, res, d, n_c, n_l)
            for t_dd, t_r, mag, res, d, n_c, n_l in scan.rows()
        ),
    )
    profile = tolerance_profile(scan)
    _write_csv(
        tol_path,
        ["t_DD_ns", "dtR_measured_ns", "dtR_worst_case_ns", "Nc"],
        ((row[0] * 1e9, row[1] * 1e9, row[2] * 1e9, row[3]) for row in profile),
    )
    _write_manifest(
        manifest_path,
        "nv-scan",
        {
            "B_gauss": params.b_gauss,
            "N_DD": params.n_dd,
            "gamma_n_MHz_per_T": params.gamma_n_mhz_per_t,
            "A_MHz": list(params.a_mhz),
            "p_plus": readout.p_plus,
            "p_minus": readout.p_minus,
            "phi": scan.phi,
            "n_tdd": n_tdd,
            "n_tr": n_tr,
            "tau_rel": list(rel),
            "n_max": n_max,
        },
        [scan_path, tol_path],
        started,
    )
    finite = scan.lifetimes[np.isfinite(scan.lifetimes)]
    print(
        f"wrote {scan_path} and {tol_path}; "
        f"max finite N_L = {int(finite.max()) if finite.size else 0}, "
        f"{int(np.isinf(scan.lifetimes).sum())} divergent points"
    )
    return 0


# ----------------------------------------------------------------- parser


def _add_readout_args(parser) -> None:
    parser.add_argument("--p-plus", type=float, help="readout fidelity for |+phi>")
    parser.add_argument("--p-minus", type=float, help="readout fidelity for |-phi>")
    parser.add_argument("--n-plus", type=float, help="mean photon number, bright state")
    parser.add_argument("--n-minus", type=float, help="mean photon number, dark state")


def _add_setting_args(parser) -> None:
    parser.add_argument("--alpha", type=float, help="measurement rotation magnitude (rad)")
    parser.add_argument("--phi", type=float, help="electron readout azimuth (rad)")
    _add_readout_args(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qndspin",
        description="Cascaded electron-mediated weak measurements on a nuclear spin",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_out):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", default=default_out, help="output path prefix")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")

    p = sub.add_parser("table1", help="Larmor periods of the built-in parameter sets")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--out", default="table1")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=_cmd_table1)

    p = sub.add_parser("binary-stats", help="single-measurement moments and strength")
    common(p, "binary_stats")
    _add_setting_args(p)
    p.set_defaults(func=_cmd_binary_stats)

    p = sub.add_parser("distribution", help="conditional laws of the averaged outcome")
    common(p, "distribution")
    _add_setting_args(p)
    p.add_argument("--n", type=int, required=True, help="number of binary measurements")
    p.add_argument("--law", choices=("exact", "gaussian"), default="exact")
    p.set_defaults(func=_cmd_distribution)

    p = sub.add_parser("fidelity", help="threshold readout fidelity of the cascade")
    common(p, "fidelity")
    _add_setting_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--threshold-mode", choices=("exact", "gaussian"), default="exact")
    p.set_defaults(func=_cmd_fidelity)

    p = sub.add_parser("qnd-solve", help="waiting times satisfying the QND condition")
    common(p, "qnd_solve")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--tau-ns", type=float, help="CPMG period (ns)")
    p.set_defaults(func=_cmd_qnd_solve)

    p = sub.add_parser("stability", help="survival curve under rotation errors")
    common(p, "stability")
    p.add_argument("--alpha-vec", type=_vector, required=True, help="x,y,z (rad)")
    p.add_argument("--error", choices=("systematic", "random"), default="systematic")
    p.add_argument("--delta-phi", type=float, required=True, help="error angle or std (rad)")
    p.add_argument("--error-axis", type=_vector, default=np.array([0.0, 0.0, 1.0]))
    p.add_argument("--n-max", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_stability)

    p = sub.add_parser("trajectories", help="stochastic measurement records")
    common(p, "trajectories")
    _add_setting_args(p)
    p.add_argument("--n", type=int, required=True, help="cycles per trajectory")
    p.add_argument("--n-traj", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.add_argument("--initial", choices=("plus", "minus", "mixed"), default="plus")
    p.add_argument(
        "--cycle-rot",
        type=_vector,
        default=np.zeros(3),
        help="per-cycle rotation vector x,y,z (rad)",
    )
    p.set_defaults(func=_cmd_trajectories)

    p = sub.add_parser("nv-scan", help="2D (t_DD, t_R) lifetime and tolerance scan")
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--preset", choices=sorted(PRESETS))
    _add_readout_args(p)
    p.add_argument("--out-dir", default="nv_scan_out")
    p.add_argument("--force", action="store_true")
    p.add_argument("--n-tdd", type=int, help="sequence-duration grid points")
    p.add_argument("--n-tr", type=int, help="waiting-time grid points")
    p.add_argument("--n-max", type=int, help="lifetime iteration cap")
    p.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("QNDSPIN_THREADS", "1")),
        help="worker threads for row preparation",
    )
    p.set_defaults(func=_cmd_nv_scan)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ConfigError, argparse.ArgumentTypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
