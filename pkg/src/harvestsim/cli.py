"""``harvestsim`` command line.

Exit codes: 0 success, 1 computational failure (fit divergence, gear
train failing validation), 2 usage or input error. ``HARVESTSIM_SEED`` is
reserved and currently unused: every computation is deterministic.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import GeneratorBlock, ToolkitConfig, load_config
from .electromech import (
    GeneratorParams,
    FitResult,
    dumps_fit,
    fit_sweep,
    measured_optimal_load,
    parse_sweep_csv,
)
from .errors import ConfigurationError, HarvestError, InputError
from .geartrain import mesh_ratio, overall_ratio, validate_train
from .kinematics import angle_series, angular_velocity, joint_comparison_report, parse_landmark_series
from .simulate import dumps_capacitor, simulate_capacitor, simulate_chain, sweep_load, synth_swing

VERSION_LINE = f"harvestsim {__version__}"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_csv(path: Path, writer) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        writer(fh, comment=VERSION_LINE)


def _dumps(obj: dict) -> str:
    return json.dumps({"harvestsim_version": __version__, **obj}, indent=2, sort_keys=True) + "\n"


def _out_dir(args, cfg: ToolkitConfig | None) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.out_dir is not None:
        return cfg.out_dir
    return Path("out")


def _read_sweep(path: Path):
    if not path.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    with path.open(encoding="utf-8") as fh:
        return parse_sweep_csv(fh, source=path)


# -- subcommands --------------------------------------------------------------

def cmd_analyze(args, cfg: ToolkitConfig) -> int:
    kin = cfg.require("kinematics")
    if not kin.joints:
        raise ConfigurationError(f"{cfg.source}: kinematics.joints: empty joint list")
    if not kin.inputs:
        raise ConfigurationError(f"{cfg.source}: kinematics.inputs: no landmark files listed")
    entries = []
    for item in kin.inputs:
        if not item.file.is_file():
            raise FileNotFoundError(f"file not found: {item.file}")
        with item.file.open(encoding="utf-8") as fh:
            series = parse_landmark_series(fh, source=item.file)
        try:
            angles = angle_series(series, kin.joints[item.joint], kin.visibility_threshold)
            omega = angular_velocity(angles, kin.smoothing_window)
        except InputError as exc:
            raise type(exc)(f"{item.file}: {exc}") from None
        entries.append((item.label, item.speed_kmh, item.gait, omega))
    report = joint_comparison_report(entries)

    out = _out_dir(args, cfg)
    _write_csv(out / "comparison.csv", report.write_csv)
    _write(out / "comparison.json", _dumps(report.to_json()))
    for row in report.rows:
        print(f"{row.joint:>12s} {row.gait:>8s} {row.speed_kmh:6g} km/h  rms {row.rms_rad_s:.4f} rad/s")
    for best in report.best:
        print(f"best at {best.speed_kmh:g} km/h: {best.joint} ({best.gait}, {best.rms_rad_s:.4f} rad/s)")
    return 0


def cmd_geartrain(args, cfg: ToolkitConfig) -> int:
    gt = cfg.require("geartrain")
    report = validate_train(gt.train, gt.expected_center_distances,
                            gt.expected_pitch_diameters, gt.expected_ratio)
    meshes = gt.train.meshes()
    if not meshes:
        print("no meshes (single stage)")
    for (up, down), cd in zip(meshes, report.center_distances_mm):
        cd_text = "module mismatch" if cd is None else f"{cd:g} mm"
        print(f"mesh {up.id}->{down.id}: center distance {cd_text}, ratio {mesh_ratio(up, down):.6g}")
    print(f"overall ratio: {report.ratio:.4f}")
    for check in report.checks:
        print(check.line())
    for warning in report.warnings:
        print(f"WARNING: {warning}")

    summary = {
        "overall_ratio": report.ratio,
        "expected_ratio": gt.expected_ratio,
        "center_distances_mm": report.center_distances_mm,
        "checks": [{"name": c.name, "passed": c.passed,
                    "observed": c.observed if not isinstance(c.observed, list) else list(c.observed),
                    "expected": c.expected} for c in report.checks],
        "warnings": report.warnings,
        "ok": report.ok,
    }
    _write(_out_dir(args, cfg) / "geartrain.json", _dumps(summary))
    if not report.ok:
        print(f"validation failed: {', '.join(c.name for c in report.failed())}", file=sys.stderr)
        return 1
    return 0


def cmd_fit(args, cfg: ToolkitConfig | None) -> int:
    path = Path(args.sweep) if args.sweep else (cfg.sweep_csv if cfg else None)
    if path is None:
        raise ConfigurationError("no sweep table: pass --sweep or set paths.sweep_csv")
    records = _read_sweep(path)
    fit = fit_sweep(records)
    _write(_out_dir(args, cfg) / "fit.json", dumps_fit(fit, harvestsim_version=__version__))
    print(f"emf_rms_v      {fit.emf_rms:.6f}")
    print(f"r_internal_ohm {fit.r_internal_ohm:.6f}")
    print(f"residual_rms_v {fit.residual_rms:.6g}")
    print(f"analytic optimal load {fit.r_internal_ohm:.6f} ohm")
    print(f"measured optimal load {measured_optimal_load(records):g} ohm")
    return 0


def resolve_generator(cfg: ToolkitConfig) -> tuple[GeneratorParams, float]:
    """Generator parameters plus the gear ratio the chain runs at.

    The chain ratio comes from the gear train when one is configured,
    otherwise from ``generator.ratio``. Missing ``r_internal_ohm`` or
    ``k_g`` are taken from a fit of ``paths.sweep_csv``.
    """
    gen = cfg.generator or GeneratorBlock()
    train_ratio = overall_ratio(cfg.geartrain.train) if cfg.geartrain else None
    ratio = gen.ratio if gen.ratio is not None else train_ratio
    if ratio is None:
        raise ConfigurationError(f"{cfg.source}: generator.ratio: required when no geartrain "
                                 "section is given")
    chain_ratio = train_ratio if train_ratio is not None else ratio

    k_g, r_int = gen.k_g, gen.r_internal_ohm
    if k_g is None or r_int is None:
        if cfg.sweep_csv is None:
            raise ConfigurationError(f"{cfg.source}: generator: k_g_v_per_rad_s and "
                                     "r_internal_ohm required unless paths.sweep_csv is set")
        fit: FitResult = fit_sweep(_read_sweep(cfg.sweep_csv))
        if r_int is None:
            r_int = fit.r_internal_ohm
        if k_g is None:
            if gen.omega_arm_rms_rad_s is None:
                raise ConfigurationError(f"{cfg.source}: generator.omega_arm_rms_rad_s: required "
                                         "to recover k_g from a fitted sweep")
            k_g = fit.to_params(ratio, gen.omega_arm_rms_rad_s).k_g
    try:
        return GeneratorParams(k_g, r_int, ratio), chain_ratio
    except InputError as exc:
        raise ConfigurationError(f"{cfg.source}: generator: {exc}") from None


def _run_sweep(args, cfg, angles, chain_ratio, params):
    sw = cfg.require("sweep")
    result = sweep_load(angles, chain_ratio, params, sw.grid_ohm, max_workers=sw.max_workers)
    out = _out_dir(args, cfg)
    _write_csv(out / "sweep.csv", result.write_csv)
    _write(out / "sweep.json", _dumps(result.to_json()))
    best = result.best
    print(f"sweep: {len(result.records)} loads, best {best.r_load_ohm:g} ohm "
          f"-> {best.power_w:.6g} W mean, efficiency {result.efficiencies[result.argmax]:.4f}")
    return result


def cmd_sweep(args, cfg: ToolkitConfig) -> int:
    angles = synth_swing(cfg.require("swing"))
    params, chain_ratio = resolve_generator(cfg)
    _run_sweep(args, cfg, angles, chain_ratio, params)
    return 0


def cmd_simulate(args, cfg: ToolkitConfig) -> int:
    angles = synth_swing(cfg.require("swing"))
    params, chain_ratio = resolve_generator(cfg)
    r_load = cfg.r_load_ohm if cfg.r_load_ohm is not None else params.r_internal_ohm
    if not r_load > 0:
        raise ConfigurationError(f"{cfg.source}: load.r_load_ohm: required when r_internal_ohm is 0")
    trace = simulate_chain(angles, chain_ratio, params, r_load)
    out = _out_dir(args, cfg)
    _write_csv(out / "trace.csv", trace.write_csv)
    print(f"chain: {len(trace)} samples at R_l={r_load:g} ohm, "
          f"energy_out {trace.energy_out_j:.6g} J, energy_total {trace.energy_total_j:.6g} J")

    if cfg.sweep is not None:
        _run_sweep(args, cfg, angles, chain_ratio, params)

    if cfg.capacitor is not None:
        cap = cfg.capacitor
        if cap.charging_power_w is not None:
            power = cap.charging_power_w
        else:
            power = trace.energy_out_j / trace.duration_s if trace.duration_s > 0 else 0.0
        result = simulate_capacitor(power, cap.spec, cap.duration_s)
        _write(out / "capacitor.json",
               dumps_capacitor(result, harvestsim_version=__version__, charging_power_w=power,
                               duration_s=cap.duration_s))
        flag = " (clamped at rating)" if result.clamped else ""
        print(f"capacitor: {power * 1e3:.4g} mW for {cap.duration_s:g} s -> "
              f"{result.final_voltage_v:.4f} V, {result.stored_energy_j:.4g} J{flag}")
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "geartrain": cmd_geartrain,
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harvestsim",
        description="Design and simulation toolkit for a joint-mounted gear-and-generator harvester.",
        epilog="HARVESTSIM_SEED is reserved and unused; all computation is deterministic.")
    parser.add_argument("--version", action="version", version=VERSION_LINE)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "analyze": "rank joints by RMS angular speed from landmark CSVs",
        "geartrain": "validate a gear train and report its ratio",
        "fit": "fit EMF and internal resistance to a load-sweep table",
        "simulate": "run the swing -> gears -> generator chain, sweep and capacitor",
        "sweep": "run only the load sweep of the simulated chain",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=(name != "fit"), help="YAML configuration file")
        p.add_argument("--out", help="output directory (default: paths.out_dir or ./out)")
        if name == "fit":
            p.add_argument("--sweep", help="sweep CSV (overrides paths.sweep_csv)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else None
        return COMMANDS[args.command](args, cfg)
    except FileNotFoundError as exc:
        msg = str(exc) if str(exc).startswith("file not found") else f"file not found: {exc.filename}"
        print(f"harvestsim: error: {msg}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"harvestsim: error: {exc}", file=sys.stderr)
        return 2
    except HarvestError as exc:
        print(f"harvestsim: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
