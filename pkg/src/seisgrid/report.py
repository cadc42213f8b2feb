"""Write run artifacts: CSV tables for bulk data, JSON for structured summaries."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .engine import DAYLOG_FIELDS, UNRECOVERED, RunResult, nearest_rank
from .grid_model import GridCase
from .metrics import MetricsTable, metrics_table

PERCENTILES = (5, 50, 95)

OUTPUT_FILES = (
    "percentiles.csv",
    "metrics.csv",
    "metrics.json",
    "substation_recovery.csv",
    "islands.csv",
    "pf_convergence.csv",
)

METRIC_COLUMNS = ("p0", "pd", "pe", "t_db", "t_de", "t_rb", "t_re", "phi", "lam", "e", "pi", "r", "t_f", "recovered")


def fmt(value) -> str:
    """Stable text form: ints as ints, floats via repr, absent/nan as empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_daylogs(run: RunResult, path: Path) -> None:
    names = list(DAYLOG_FIELDS)
    n_iter, n_days = run.logs[names[0]].shape

    def rows():
        for i in range(n_iter):
            cols = [run.logs[name][i] for name in names]
            for d in range(n_days):
                yield [i, d] + [col[d].item() for col in cols]

    _write_csv(path, ["iteration", "day"] + names, rows())


def percentile_columns(run: RunResult) -> dict[str, np.ndarray]:
    series = {
        "load_region": "connected_load_region_mw",
        "load_system": "connected_load_mw",
        "generation": "connected_generation_mw",
    }
    cols = {}
    for prefix, name in series.items():
        for q in PERCENTILES:
            cols[f"{prefix}_p{q}"] = nearest_rank(run.logs[name], q, axis=0)
    return cols


def write_percentiles(run: RunResult, path: Path) -> None:
    cols = percentile_columns(run)
    n_days = next(iter(cols.values())).shape[0]
    _write_csv(path, ["day"] + list(cols), ([d] + [c[d].item() for c in cols.values()] for d in range(n_days)))


def metrics_document(table: MetricsTable, mode: str) -> dict:
    return {
        "mode": mode,
        "t_f": table.t_f,
        "t_f_fallback_to_horizon": table.t_f_fallback,
        "rows": {str(q): row.as_row() for q, row in table.rows.items()},
        "notes": {
            "percentile": "row q is the q-th percentile of load lost (95 = pessimistic)",
            "phi": "null: damage is instantaneous so the rate of decrease has a zero denominator",
        },
    }


def write_metrics(table: MetricsTable, mode: str, csv_path: Path, json_path: Path) -> None:
    _write_csv(
        csv_path,
        ["percentile"] + list(METRIC_COLUMNS),
        ([q] + [getattr(row, c) for c in METRIC_COLUMNS] for q, row in table.rows.items()),
    )
    json_path.write_text(json.dumps(metrics_document(table, mode), indent=2, sort_keys=True) + "\n")


def substation_rows(run: RunResult, case: GridCase):
    horizon = run.config.horizon_days
    full = np.where(run.full_service_day == UNRECOVERED, horizon + 1, run.full_service_day)
    func = np.where(run.functional_day == UNRECOVERED, horizon + 1, run.functional_day)
    for j, bus in enumerate(case.buses):
        yield [
            bus.bus_id,
            bus.location_id,
            bus.lat,
            bus.lon,
            float(run.substation_damaged[:, j].mean()),
            int(nearest_rank(full[:, j], 50)),
            int(nearest_rank(full[:, j], 95)),
            int(nearest_rank(func[:, j], 50)),
            int(nearest_rank(func[:, j], 95)),
        ]


def write_substation_recovery(run: RunResult, case: GridCase, path: Path) -> None:
    _write_csv(
        path,
        [
            "bus_id", "location_id", "lat", "lon", "damaged_fraction",
            "median_full_service_day", "p95_full_service_day",
            "median_functional_day", "p95_functional_day",
        ],
        substation_rows(run, case),
    )


def write_islands(run: RunResult, path: Path) -> None:
    count = nearest_rank(run.logs["island_count"], 50, axis=0)
    size = nearest_rank(run.logs["largest_island_bus_count"], 50, axis=0)
    _write_csv(path, ["day", "p50_island_count", "p50_largest_island_bus_count"],
               ([d, count[d], size[d]] for d in range(len(count))))


def convergence_columns(run: RunResult) -> tuple[np.ndarray, np.ndarray]:
    """Daily converged fraction and the fraction converged at least once by each day."""
    conv = run.logs["pf_converged"].astype(bool)
    return conv.mean(axis=0), np.logical_or.accumulate(conv, axis=1).mean(axis=0)


def write_pf_convergence(run: RunResult, path: Path) -> None:
    frac, cum = convergence_columns(run)
    _write_csv(path, ["day", "fraction_converged", "cumulative_fraction"],
               ([d, frac[d], cum[d]] for d in range(len(frac))))


def emit_outputs(
    run: RunResult,
    case: GridCase,
    out_dir: str | Path,
    emit_daylogs: bool = False,
    metrics_mode: str = "trajectory",
) -> list[Path]:
    """Write every artifact under ``out_dir``; returns the written paths (manifest excluded)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if emit_daylogs:
        write_daylogs(run, out / "daylogs.csv")
        written.append(out / "daylogs.csv")
    write_percentiles(run, out / "percentiles.csv")
    write_metrics(metrics_table(run, mode=metrics_mode), metrics_mode, out / "metrics.csv", out / "metrics.json")
    write_substation_recovery(run, case, out / "substation_recovery.csv")
    write_islands(run, out / "islands.csv")
    write_pf_convergence(run, out / "pf_convergence.csv")
    written += [out / name for name in OUTPUT_FILES]
    return written


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
