"""Command-line front end: theory sweeps, virtual campaigns, calibration,
comparison, and the chained pipeline.

All outputs are '#'-commented column text carrying a manifest header that
records every parameter and seed needed to re-run the producing command;
reruns with identical inputs are byte-identical.  Separations are quoted in
nm and force gradients in uN/m at this boundary.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    TheoryErrorConfig,
    calibrate,
    calibration_text,
    combine_gradient_series,
    compare,
    comparison_text,
    extract_gradients,
    gradient_series_text,
    load_gradient_series,
)
from .errors import CasimirLabError, ConfigError
from .force_model import BetaTable, Geometry, pressure_to_gradient_sweep
from .lifshitz import pressure_sweep, pressure_sweep_text
from .vexp import (
    CampaignSpec,
    V0Law,
    load_grid,
    model_for_tag,
    reference_campaign,
    save_grid,
    synthesize_campaign,
)

_MODEL_CHOICES = ("drude", "plasma", "both")


def _read_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            cp.read(p)
        except configparser.Error as exc:
            raise ConfigError(f"{p}: {exc}") from None
    return cp


def _getfloat(cp, section, key, default):
    try:
        return cp.getfloat(section, key, fallback=default)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from None


def _geometry(cp) -> Geometry:
    sec = "geometry"
    return Geometry(
        R=_getfloat(cp, sec, "r_um", 43.466) * 1e-6,
        delta_s=_getfloat(cp, sec, "delta_s_nm", 1.13) * 1e-9,
        delta_p=_getfloat(cp, sec, "delta_p_nm", 1.08) * 1e-9,
        temperature=_getfloat(cp, sec, "temperature_k", 293.15),
        max_aspect=_getfloat(cp, sec, "max_aspect", 0.022),
        a_min=_getfloat(cp, sec, "a_min_nm", 250.0) * 1e-9,
        a_max=_getfloat(cp, sec, "a_max_nm", 2000.0) * 1e-9,
    )


def _campaign(cp, truth_override=None):
    sec = "campaign"
    if cp.has_option(sec, "preset"):
        n = cp.getint(sec, "preset")
        truth = truth_override or cp.get(sec, "truth", fallback="plasma")
        return reference_campaign(n, truth), n
    if not cp.has_section(sec):
        raise ConfigError("synth needs a [campaign] section (preset or explicit fields)")
    try:
        voltages = tuple(float(v) for v in cp.get(sec, "voltages_v").split())
        spec = CampaignSpec(
            voltages=voltages,
            z0_true=cp.getfloat(sec, "z0_nm") * 1e-9,
            c_true=cp.getfloat(sec, "c_s_per_kg"),
            v0_law=V0Law.from_mv(
                cp.getfloat(sec, "v0_slope_mv_per_nm"),
                cp.getfloat(sec, "v0_intercept_mv"),
            ),
            truth_tag=truth_override or cp.get(sec, "truth", fallback="plasma"),
            amplitude=cp.getfloat(sec, "amplitude_nm") * 1e-9,
            freq_systematic=cp.getfloat(sec, "freq_systematic_rad_s"),
            max_z_rel=cp.getfloat(sec, "max_z_rel_nm") * 1e-9,
            repetitions=cp.getint(sec, "repetitions", fallback=1),
        )
    except (configparser.NoOptionError, ValueError) as exc:
        raise ConfigError(f"[campaign]: {exc}") from None
    return (spec, _geometry(cp)), 0


def _theory_grid(cp, args):
    sec = "theory"
    start = _getfloat(cp, sec, "a_start_nm", 250.0)
    stop = _getfloat(cp, sec, "a_stop_nm", 950.0)
    step = _getfloat(cp, sec, "a_step_nm", 1.0)
    n = int(round((stop - start) / step)) + 1
    return (start + step * np.arange(n)) * 1e-9


def _models(selection):
    tags = ("drude", "plasma") if selection == "both" else (selection,)
    return {tag: model_for_tag(tag) for tag in tags}


def _manifest(command: str, params: dict) -> str:
    lines = [f"# casimirlab {__version__}", f"# command = {command}"]
    lines += [f"# {k} = {v}" for k, v in params.items()]
    return "\n".join(lines) + "\n"


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text)
    return path


def _cmd_theory(args, cp):
    out = Path(args.out)
    grid = _theory_grid(cp, args)
    geometry = _geometry(cp)
    tol = args.tol if args.tol is not None else _getfloat(cp, "theory", "tol", 1e-9)
    models = _models(args.model)
    manifest = _manifest("theory", {
        "model": args.model,
        "a_start_nm": f"{grid[0] * 1e9:g}",
        "a_stop_nm": f"{grid[-1] * 1e9:g}",
        "n_points": grid.size,
        "tol": tol,
        "r_um": f"{geometry.R * 1e6:g}",
        "temperature_k": geometry.temperature,
    })

    sweeps = {
        tag: pressure_to_gradient_sweep(model, geometry, BetaTable(), grid, tol)
        for tag, model in models.items()
    }
    lines = [manifest.rstrip("\n")]
    cols = ["a_nm"] + [f"Fgrad_{t}_uN_per_m" for t in sweeps] + [f"trunc_{t}_uN_per_m" for t in sweeps]
    lines.append("# columns: " + "  ".join(cols))
    for i, a in enumerate(grid):
        row = [f"{a * 1e9:.3f}"]
        row += [f"{sweeps[t].values[i] * 1e6:.9e}" for t in sweeps]
        row += [f"{sweeps[t].truncation_estimates[i] * 1e6:.3e}" for t in sweeps]
        lines.append("  ".join(row))
    _write(out, "theory_gradients.txt", "\n".join(lines) + "\n")

    pressures = {tag: pressure_sweep(model, grid, geometry.temperature, tol)
                 for tag, model in models.items()}
    _write(out, "theory_pressures.txt", manifest + pressure_sweep_text(grid, pressures))
    print(f"wrote {out / 'theory_gradients.txt'} and {out / 'theory_pressures.txt'}")
    return 0


def _cmd_synth(args, cp):
    out = Path(args.out)
    (spec, geometry), n = _campaign(cp, truth_override=None)
    seed = args.seed if args.seed is not None else cp.getint("campaign", "seed", fallback=0)
    grid = synthesize_campaign(spec, geometry, seed)
    name = f"grid_set{n}_seed{seed}.txt" if n else f"grid_seed{seed}.txt"
    out.mkdir(parents=True, exist_ok=True)
    save_grid(grid, out / name)
    print(f"wrote {out / name}")
    return 0


def _cmd_calibrate(args, cp):
    out = Path(args.out)
    if not args.grid:
        raise ConfigError("calibrate needs --grid <file>")
    grid = load_grid(args.grid)
    calib = calibrate(grid)
    series = extract_gradients(grid, calib)
    stem = Path(args.grid).stem
    manifest = _manifest("calibrate", {"grid": Path(args.grid).name, "seed": grid.seed})
    _write(out, f"calibration_{stem}.txt", manifest + calibration_text(calib))
    _write(out, f"gradients_{stem}.txt", manifest + gradient_series_text(series))
    print(
        f"C = {calib.c_cal:.6e} +/- {calib.sigma_c:.2e} s/kg, "
        f"z0 = {calib.z0 * 1e9:.3f} +/- {calib.sigma_z0 * 1e9:.3f} nm, "
        f"V0_mean = {calib.line.mean_v0 * 1e3:.3f} mV"
    )
    return 0


def _parse_intervals(cp):
    spec = cp.get("compare", "intervals", fallback="").strip()
    if not spec:
        return None
    out = []
    for part in spec.replace(";", ",").split(","):
        lo, _, hi = part.partition(":")
        out.append((float(lo) * 1e-9, float(hi) * 1e-9))
    return out


def _compare_series(args, cp, series, geometry, tol):
    series_list = series if isinstance(series, list) else [series]
    lo = _getfloat(cp, "compare", "grid_start_nm",
                   max(s.separations[0] for s in series_list) * 1e9)
    hi = _getfloat(cp, "compare", "grid_stop_nm",
                   min(s.separations[-1] for s in series_list) * 1e9)
    common = np.arange(int(np.ceil(lo)), int(np.floor(hi)) + 1) * 1e-9
    combined = combine_gradient_series(series_list, grid=common)
    models = _models(args.model)
    theory = {
        tag: pressure_to_gradient_sweep(model, geometry, BetaTable(), common, tol).values
        for tag, model in models.items()
    }
    cfg = TheoryErrorConfig(
        optical_fraction=_getfloat(cp, "compare", "optical_fraction", 0.005),
        delta_z=_getfloat(cp, "compare", "delta_z_nm", 0.5) * 1e-9,
    )
    intervals = _parse_intervals(cp)
    if intervals is None:
        width = _getfloat(cp, "compare", "window_nm", 100.0) * 1e-9
        from .analysis import default_windows

        intervals = default_windows(float(common[0]), float(common[-1]), width)
    return compare(combined, theory, cfg, windows=intervals), combined


def _cmd_compare(args, cp):
    out = Path(args.out)
    if not args.gradients:
        raise ConfigError("compare needs --gradients <file> [<file> ...]")
    series = [load_gradient_series(p) for p in args.gradients]
    geometry = _geometry(cp)
    tol = args.tol if args.tol is not None else _getfloat(cp, "theory", "tol", 1e-9)
    report, _ = _compare_series(args, cp, series, geometry, tol)
    manifest = _manifest("compare", {
        "gradients": " ".join(Path(p).name for p in args.gradients),
        "model": args.model,
    })
    path = _write(out, "comparison.txt", manifest + comparison_text(report))
    for label, wins in report.windows.items():
        for w in wins:
            print(f"{label} [{w.lo * 1e9:.0f}, {w.hi * 1e9:.0f}] nm: {w.verdict} "
                  f"({w.fraction_outside:.1%} outside)")
    print(f"wrote {path}")
    return 0


def _cmd_pipeline(args, cp):
    out = Path(args.out)
    sets = [int(s) for s in cp.get("pipeline", "sets", fallback="1").split(",")]
    truth = cp.get("pipeline", "truth", fallback="plasma")
    base_seed = args.seed if args.seed is not None else cp.getint("pipeline", "seed", fallback=0)
    tol = args.tol if args.tol is not None else _getfloat(cp, "theory", "tol", 1e-9)

    manifest_steps = []
    series_list = []
    geometry = None
    for n in sets:
        seed = base_seed + n  # per-set seed rule, recorded in the manifest
        spec, geometry = reference_campaign(n, truth)
        grid = synthesize_campaign(spec, geometry, seed)
        gpath = out / f"grid_set{n}_seed{seed}.txt"
        out.mkdir(parents=True, exist_ok=True)
        save_grid(grid, gpath)
        calib = calibrate(grid)
        series = extract_gradients(grid, calib)
        series_list.append(series)
        man = _manifest("pipeline-step", {
            "set": n, "seed": seed, "truth": truth, "tol": tol,
        })
        _write(out, f"calibration_set{n}.txt", man + calibration_text(calib))
        _write(out, f"gradients_set{n}.txt", man + gradient_series_text(series))
        manifest_steps.append(
            f"set {n}: seed = {seed}, C = {calib.c_cal:.6e}, z0_nm = {calib.z0 * 1e9:.4f}"
        )

    report, combined = _compare_series(args, cp, series_list, geometry, tol)
    man = _manifest("pipeline", {
        "sets": ",".join(str(n) for n in sets),
        "truth": truth,
        "base_seed": base_seed,
        "model": args.model,
        "tol": tol,
    })
    _write(out, "comparison.txt", man + comparison_text(report))
    _write(out, "gradients_combined.txt", man + gradient_series_text(combined))
    lines = [man.rstrip("\n")] + [f"# {s}" for s in manifest_steps]
    for label, wins in report.windows.items():
        for w in wins:
            lines.append(
                f"# verdict {label} [{w.lo * 1e9:.0f}, {w.hi * 1e9:.0f}] nm: {w.verdict}"
            )
    _write(out, "manifest.txt", "\n".join(lines) + "\n")
    for label, wins in report.windows.items():
        for w in wins:
            print(f"{label} [{w.lo * 1e9:.0f}, {w.hi * 1e9:.0f}] nm: {w.verdict} "
                  f"({w.fraction_outside:.1%} outside)")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="casimirlab",
        description="Casimir force-gradient theory and virtual-experiment toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("theory", "emit Drude/plasma force-gradient and pressure sweeps"),
        ("synth", "synthesise a virtual measurement campaign"),
        ("calibrate", "run the electrostatic calibration on a grid file"),
        ("compare", "confidence-band comparison of gradients against theory"),
        ("pipeline", "synth + calibrate + compare, chained with a manifest"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--model", choices=_MODEL_CHOICES, default="both")
        p.add_argument("--tol", type=float, default=None)
        if name == "calibrate":
            p.add_argument("--grid", default=None, help="measurement-grid file")
        if name == "compare":
            p.add_argument("--gradients", nargs="+", default=None,
                           help="gradient-series files to combine and compare")
    return parser


_HANDLERS = {
    "theory": _cmd_theory,
    "synth": _cmd_synth,
    "calibrate": _cmd_calibrate,
    "compare": _cmd_compare,
    "pipeline": _cmd_pipeline,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cp = _read_config(args.config)
        return _HANDLERS[args.command](args, cp)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CasimirLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
