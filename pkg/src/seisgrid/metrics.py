"""Resilience metrics of a performance trajectory and the per-percentile summary table."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .engine import RunResult, nearest_rank

TABLE_PERCENTILES = (5, 50, 95)


@dataclass(frozen=True)
class ResilienceMetrics:
    """Rate/amplitude/duration quantities of one trajectory.

    ``phi`` is None whenever damage is instantaneous (``t_de == t_db``);
    ``pe``/``pi``/``t_re`` are None when the trajectory never recovers.
    """

    p0: float
    pd: float
    pe: float | None
    t_db: int
    t_de: int
    t_rb: int
    t_re: int | None
    phi: float | None
    lam: float
    e: int
    pi: float | None
    r: float
    t_f: int
    recovered: bool

    def as_row(self) -> dict:
        return asdict(self)


def performance_decrease(p0: float, pd: float) -> float:
    return p0 - pd


def rate_of_decrease(p0: float, pd: float, t_db: float, t_de: float) -> float | None:
    if t_de == t_db:
        return None
    return (pd - p0) / (t_de - t_db)


def rate_of_recovery(pd: float, pe: float, t_rb: float, t_re: float) -> float | None:
    if t_re == t_rb:
        return None
    return (pe - pd) / (t_re - t_rb)


def resilience(p: np.ndarray, p0: float, t_f: int) -> float:
    """Area under P over [0, t_f] relative to P0 * t_f.

    P is a daily step function, so the integral is the left-rectangle sum of
    days 0..t_f-1. For t_f = 0 the limit P(0)/P0 is returned.
    """
    p = np.asarray(p, dtype=float)
    if t_f == 0:
        return float(p[0] / p0)
    if t_f > len(p):
        raise ValueError(f"trajectory covers {len(p)} days, t_f={t_f}")
    return float(p[:t_f].sum() / (p0 * t_f))


def recovery_day(p: np.ndarray, p0: float, threshold: float) -> int | None:
    hits = np.flatnonzero(np.asarray(p) >= threshold * p0 - 1e-9 * p0)
    return int(hits[0]) if hits.size else None


def compute_metrics(p: np.ndarray, p0: float, recovery_threshold: float = 0.99, t_f: int | None = None) -> ResilienceMetrics:
    """Metrics for a daily trajectory ``p`` (day 0 is the post-damage state).

    Damage is instantaneous and assessment takes no time, so t_db = t_de =
    t_rb = 0. ``t_f`` defaults to the recovery day (or the last day when the
    trajectory never recovers).
    """
    if not p0 > 0:
        raise ValueError("P0 must be positive")
    p = np.asarray(p, dtype=float)
    pd = float(p[0])
    t_db = t_de = t_rb = 0
    t_re = recovery_day(p, p0, recovery_threshold)
    recovered = t_re is not None
    pe = float(p[t_re]) if recovered else None
    pi = rate_of_recovery(pd, pe, t_rb, t_re) if recovered else None
    if t_f is None:
        t_f = t_re if recovered else len(p) - 1
    return ResilienceMetrics(
        p0=p0,
        pd=pd,
        pe=pe,
        t_db=t_db,
        t_de=t_de,
        t_rb=t_rb,
        t_re=t_re,
        phi=rate_of_decrease(p0, pd, t_db, t_de),
        lam=performance_decrease(p0, pd),
        e=t_rb - t_de,
        pi=pi,
        r=resilience(p, p0, t_f),
        t_f=t_f,
        recovered=recovered,
    )


def severity_trajectory(loads: np.ndarray, p0: float, q: float) -> np.ndarray:
    """Trajectory of the q-th percentile of load *lost* across iterations.

    The 95 row is therefore the pessimistic one (lowest connected load).
    """
    return p0 - nearest_rank(p0 - np.asarray(loads), q, axis=0)


@dataclass(frozen=True)
class MetricsTable:
    rows: dict[int, ResilienceMetrics]
    t_f: int
    t_f_fallback: bool  # worst row never recovered; t_f is the horizon


def metrics_table(
    run: RunResult,
    percentiles: tuple[int, ...] = TABLE_PERCENTILES,
    mode: str = "trajectory",
    field_name: str = "connected_load_region_mw",
) -> MetricsTable:
    """One metrics row per severity percentile; all R values share t_f = t_re of the 95 row.

    ``mode="trajectory"`` computes metrics on percentile trajectories;
    ``mode="metric"`` computes per-iteration metrics and takes percentiles of each.
    """
    loads = run.logs[field_name]
    p0 = run.baseline.connected_load_region_mw if field_name == "connected_load_region_mw" else float(
        getattr(run.baseline, field_name)
    )
    threshold = run.config.recovery_threshold
    horizon = loads.shape[1] - 1
    worst = compute_metrics(severity_trajectory(loads, p0, 95), p0, threshold)
    fallback = not worst.recovered
    t_f = horizon if fallback else worst.t_re

    if mode == "trajectory":
        rows = {q: compute_metrics(severity_trajectory(loads, p0, q), p0, threshold, t_f) for q in percentiles}
    elif mode == "metric":
        per_iter = [compute_metrics(row, p0, threshold, t_f) for row in loads]
        rows = {q: _metric_percentile_row(per_iter, q, p0, t_f) for q in percentiles}
    else:
        raise ValueError(f"unknown metrics mode {mode!r}")
    return MetricsTable(rows, t_f, fallback)


def _metric_percentile_row(per_iter: list[ResilienceMetrics], q: float, p0: float, t_f: int) -> ResilienceMetrics:
    # severity ordering: high q = worse, i.e. low pd / late t_re / low r
    def pick(values, worse_is_high: bool):
        arr = np.array(values, dtype=float)
        return float(nearest_rank(arr if worse_is_high else -arr, q) * (1 if worse_is_high else -1))

    t_re_vals = [m.t_re if m.recovered else math.inf for m in per_iter]
    t_re = pick(t_re_vals, True)
    recovered = math.isfinite(t_re)
    pis = [m.pi if m.pi is not None else 0.0 for m in per_iter]
    pd = pick([m.pd for m in per_iter], False)
    pes = [m.pe for m in per_iter if m.pe is not None]
    return ResilienceMetrics(
        p0=p0,
        pd=pd,
        pe=float(np.median(pes)) if recovered and pes else None,
        t_db=0,
        t_de=0,
        t_rb=0,
        t_re=int(t_re) if recovered else None,
        phi=None,
        lam=p0 - pd,
        e=0,
        pi=pick(pis, False) if recovered else None,
        r=pick([m.r for m in per_iter], False),
        t_f=t_f,
        recovered=recovered,
    )


def table_arithmetic(p0: float, pd: float, pe: float, t_re: float, t_rb: float = 0) -> tuple[float, float | None]:
    """Amplitude of decrease and rate of recovery from tabulated row values."""
    return performance_decrease(p0, pd), rate_of_recovery(pd, pe, t_rb, t_re)
