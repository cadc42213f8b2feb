"""Command-line entry point: ``seisgrid --case ... --out results/``.

Exit codes: 0 success, 1 input validation failure, 2 runtime I/O failure.
Every failure prints one ``seisgrid: error <CODE>: <context>`` line.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path

from . import __version__
from .curves import CurveConfigError, default_curves, load_curves
from .engine import SimulationConfig, run_monte_carlo
from .grid_model import DAMAGE_ZONE, CaseParseError, CaseValidationError, RegionBox, load_case
from .hazard import RasterError, load_raster
from .powerflow import ServiceState, find_islands, solve_newton_raphson, write_solution_csv
from .report import emit_outputs
from .xbb import ConnectivityMode, GraphConstructionError, build_xbb, dump_xbb

EXIT_OK, EXIT_INPUT, EXIT_IO = 0, 1, 2

# option name -> (default, type); used for both the CLI and --config files
DEFAULTS = {
    "case": (None, str),
    "shakemap_mean": (None, str),
    "shakemap_sigma": (None, str),
    "curves": (None, str),
    "iterations": (2500, int),
    "days": (1000, int),
    "seed": (0, int),
    "threads": (1, int),
    "out": (None, str),
    "region": ([DAMAGE_ZONE.min_lat, DAMAGE_ZONE.max_lat, DAMAGE_ZONE.min_lon, DAMAGE_ZONE.max_lon], list),
    "connectivity_mode": ("degree", str),
    "recovery_threshold": (0.99, float),
    "pf_tol": (1e-6, float),
    "pf_max_iter": (30, int),
    "emit_daylogs": (False, bool),
    "metrics_mode": ("trajectory", str),
    "dump_xbb": (False, bool),
    "dump_pf": (False, bool),
    "progress_every": (0, int),
}


class InputError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seisgrid", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="JSON file with any of the options below (flags override it)")
    p.add_argument("--case", help="case JSON document")
    p.add_argument("--shakemap-mean", help="ESRI ASCII grid of ln(mean PGA in g)")
    p.add_argument("--shakemap-sigma", help="ESRI ASCII grid of ln-standard deviation")
    p.add_argument("--curves", help="curve config JSON (default: shipped placeholder table)")
    p.add_argument("--desk", action="store_true", help="use the shipped 30-bus case and synthetic shakemap")
    p.add_argument("--iterations", type=int)
    p.add_argument("--days", type=int, help="restoration horizon in days")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--threads", type=int, help="worker processes")
    p.add_argument("--out", help="output directory")
    p.add_argument("--region", type=float, nargs=4, metavar=("MIN_LAT", "MAX_LAT", "MIN_LON", "MAX_LON"))
    p.add_argument("--connectivity-mode", choices=[m.value for m in ConnectivityMode])
    p.add_argument("--recovery-threshold", type=float)
    p.add_argument("--pf-tol", type=float)
    p.add_argument("--pf-max-iter", type=int)
    p.add_argument("--metrics-mode", choices=["trajectory", "metric"])
    p.add_argument("--emit-daylogs", action="store_true", default=None)
    p.add_argument("--dump-xbb", action="store_true", default=None, help="write xbb_graphs.json")
    p.add_argument("--dump-pf", action="store_true", default=None, help="write the undamaged solution as pf_base.csv")
    p.add_argument("--progress-every", type=int, help="log a progress line every N iterations")
    p.add_argument("--version", action="version", version=f"seisgrid {__version__}")
    return p


def resolve_options(args: argparse.Namespace) -> dict:
    opts = {k: v for k, (v, _) in DEFAULTS.items()}
    if args.config:
        try:
            file_opts = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_opts, dict):
            raise InputError("config file must hold a JSON object")
        for key, value in file_opts.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise InputError(f"unknown config key {key!r}")
            opts[key] = value
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    if args.desk:
        data = resources.files("seisgrid.data")
        opts["case"] = opts["case"] or str(data / "case30.json")
        opts["shakemap_mean"] = opts["shakemap_mean"] or str(data / "shakemap_mean.asc")
        opts["shakemap_sigma"] = opts["shakemap_sigma"] or str(data / "shakemap_sigma.asc")
    for key in ("case", "shakemap_mean", "shakemap_sigma", "out"):
        if not opts[key]:
            raise InputError(f"--{key.replace('_', '-')} is required")
    if len(opts["region"]) != 4:
        raise InputError("--region takes four numbers")
    return opts


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _fail(code: str, message: str, status: int) -> int:
    print(f"seisgrid: error {code}: {message}", file=sys.stderr)
    return status


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    started = time.perf_counter()
    try:
        opts = resolve_options(args)
        case = load_case(opts["case"])
        raster = load_raster(opts["shakemap_mean"], opts["shakemap_sigma"])
        curves = load_curves(opts["curves"]) if opts["curves"] else default_curves()
        config = SimulationConfig(
            iterations=int(opts["iterations"]),
            horizon_days=int(opts["days"]),
            master_seed=int(opts["seed"]),
            recovery_threshold=float(opts["recovery_threshold"]),
            region=RegionBox(*map(float, opts["region"])),
            connectivity_mode=ConnectivityMode(opts["connectivity_mode"]),
            pf_tolerance=float(opts["pf_tol"]),
            pf_max_iterations=int(opts["pf_max_iter"]),
            threads=int(opts["threads"]),
            progress_every=int(opts["progress_every"]),
        )
        graphs = build_xbb(case)
    except FileNotFoundError as exc:
        return _fail("E_INPUT_MISSING", f"{exc.filename}: no such file", EXIT_INPUT)
    except CaseParseError as exc:
        return _fail("E_CASE_PARSE", str(exc), EXIT_INPUT)
    except CaseValidationError as exc:
        return _fail("E_CASE_INVALID", str(exc), EXIT_INPUT)
    except RasterError as exc:
        return _fail("E_RASTER", str(exc), EXIT_INPUT)
    except CurveConfigError as exc:
        return _fail("E_CURVES", str(exc), EXIT_INPUT)
    except (InputError, GraphConstructionError, ValueError) as exc:
        return _fail("E_INPUT", str(exc), EXIT_INPUT)

    out = Path(opts["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        return _fail("E_IO", f"output directory {out} is not writable: {exc}", EXIT_IO)

    run = run_monte_carlo(config, case, raster, curves, graphs)
    try:
        written = emit_outputs(run, case, out, bool(opts["emit_daylogs"]), opts["metrics_mode"])
        if opts["dump_xbb"]:
            (out / "xbb_graphs.json").write_text(dump_xbb(graphs) + "\n")
        if opts["dump_pf"]:
            main_island = find_islands(case, ServiceState.from_case(case))[0]
            sol = solve_newton_raphson(case, main_island, config.pf_tolerance, config.pf_max_iterations)
            write_solution_csv(sol, out / "pf_base.csv")
        inputs = {"case": opts["case"], "shakemap_mean": opts["shakemap_mean"], "shakemap_sigma": opts["shakemap_sigma"]}
        if opts["curves"]:
            inputs["curves"] = opts["curves"]
        manifest = {
            "tool": "seisgrid",
            "version": __version__,
            "master_seed": config.master_seed,
            "config": config.to_dict(),
            "options": {k: opts[k] for k in sorted(opts)},
            "input_digests": {k: {"path": v, "sha256": file_digest(v)} for k, v in inputs.items()},
            "curves_used": curves.to_list(),
            "outputs": sorted(p.name for p in written),
            "wall_clock_seconds": time.perf_counter() - started,
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        return _fail("E_IO", f"writing outputs under {out} failed: {exc}; partial results in {out}", EXIT_IO)
    print(f"seisgrid: wrote {len(written) + 1} files to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
