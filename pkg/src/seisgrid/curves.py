"""Lognormal fragility and restoration curves keyed by component kind and voltage class."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri


class CurveConfigError(ValueError):
    pass


class ComponentKind(str, Enum):
    TRANSFORMER = "transformer"
    CIRCUIT_BREAKER = "circuit_breaker"
    DISCONNECT_SWITCH = "disconnect_switch"


class VoltageClass(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


KV_MIN, KV_MEDIUM, KV_HIGH, KV_MAX = 13.2, 150.0, 350.0, 765.0


def voltage_class(base_kv: float) -> VoltageClass:
    """Half-open classes [13.2, 150), [150, 350), [350, 765]."""
    if not KV_MIN <= base_kv <= KV_MAX:
        raise ValueError(f"base_kv {base_kv} outside classified range [{KV_MIN}, {KV_MAX}]")
    if base_kv < KV_MEDIUM:
        return VoltageClass.LOW
    if base_kv < KV_HIGH:
        return VoltageClass.MEDIUM
    return VoltageClass.HIGH


def normal_cdf(x):
    return ndtr(x)


def normal_ppf(u):
    return ndtri(u)


@dataclass(frozen=True)
class FragilityCurve:
    """P(failure | pga) = Phi(ln(pga / median) / beta).

    ``median_pga_g = inf`` disables damage; ``beta = 0`` gives a step at the median.
    """

    median_pga_g: float
    beta: float

    def __post_init__(self):
        if not (self.median_pga_g > 0 and self.beta >= 0 and math.isfinite(self.beta)):
            raise CurveConfigError(f"invalid fragility parameters {self}")

    def probability(self, pga_g):
        pga = np.asarray(pga_g, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.beta == 0:
                p = (pga >= self.median_pga_g).astype(float)
            else:
                p = normal_cdf(np.log(pga / self.median_pga_g) / self.beta)
        p = np.where(pga > 0, p, 0.0)
        return float(p) if p.ndim == 0 else p


@dataclass(frozen=True)
class RestorationCurve:
    median_days: float
    beta: float

    def __post_init__(self):
        if not (0 < self.median_days < math.inf and self.beta >= 0 and math.isfinite(self.beta)):
            raise CurveConfigError(f"invalid restoration parameters {self}")

    def day_for_quantile(self, u):
        """Inverse-CDF day, rounded up to a whole day and never earlier than day 1."""
        u = np.asarray(u, dtype=float)
        z = normal_ppf(u) if self.beta > 0 else np.zeros_like(u)
        days = np.ceil(np.exp(math.log(self.median_days) + self.beta * z))
        days = np.maximum(days, 1).astype(np.int64)
        return int(days) if days.ndim == 0 else days


def failure_probability(curve: FragilityCurve, pga_g: float) -> float:
    if pga_g < 0:
        raise ValueError("pga must be non-negative")
    return curve.probability(pga_g)


def sample_failure(curve: FragilityCurve, pga_g: float, rng: np.random.Generator) -> bool:
    return bool(rng.random() < failure_probability(curve, pga_g))


def sample_restoration_day(curve: RestorationCurve, rng: np.random.Generator) -> int:
    return curve.day_for_quantile(rng.random())


def fit_lognormal(samples) -> tuple[float, float]:
    """Method-of-moments lognormal fit on log samples: (median, sample std of logs)."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 samples to fit a lognormal")
    if np.any(~(x > 0)):
        raise ValueError("lognormal fit requires strictly positive samples")
    logs = np.log(x)
    return float(np.exp(logs.mean())), float(logs.std(ddof=1))


@dataclass(frozen=True)
class CurvePair:
    fragility: FragilityCurve
    restoration: RestorationCurve


class CurveSet:
    """Total map (ComponentKind, VoltageClass) -> CurvePair."""

    def __init__(self, table: dict[tuple[ComponentKind, VoltageClass], CurvePair]):
        missing = [(k, v) for k in ComponentKind for v in VoltageClass if (k, v) not in table]
        if missing:
            names = ", ".join(f"({k.value}, {v.value})" for k, v in missing)
            raise CurveConfigError(f"curve set missing entries: {names}")
        self._table = dict(table)

    def __getitem__(self, key: tuple[ComponentKind, VoltageClass]) -> CurvePair:
        return self._table[key]

    def fragility(self, kind: ComponentKind, vclass: VoltageClass) -> FragilityCurve:
        return self._table[kind, vclass].fragility

    def restoration(self, kind: ComponentKind, vclass: VoltageClass) -> RestorationCurve:
        return self._table[kind, vclass].restoration

    def items(self):
        return self._table.items()

    def replace(self, fragility: FragilityCurve | None = None, restoration: RestorationCurve | None = None) -> CurveSet:
        """Copy with every entry's fragility and/or restoration swapped out (test scenarios)."""
        return CurveSet(
            {
                key: CurvePair(fragility or pair.fragility, restoration or pair.restoration)
                for key, pair in self._table.items()
            }
        )

    def to_list(self) -> list[dict]:
        return [
            {
                "component": k.value,
                "voltage": v.value,
                "fragility": {"median_g": p.fragility.median_pga_g, "beta": p.fragility.beta},
                "restoration": {"median_days": p.restoration.median_days, "beta": p.restoration.beta},
            }
            for (k, v), p in sorted(self._table.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value))
        ]


def curves_from_list(entries: list) -> CurveSet:
    if not isinstance(entries, list):
        raise CurveConfigError("curve config must be a JSON array")
    table = {}
    for i, e in enumerate(entries):
        try:
            key = (ComponentKind(e["component"]), VoltageClass(e["voltage"]))
            pair = CurvePair(
                FragilityCurve(float(e["fragility"]["median_g"]), float(e["fragility"]["beta"])),
                RestorationCurve(float(e["restoration"]["median_days"]), float(e["restoration"]["beta"])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CurveConfigError(f"curve entry {i} is malformed: {exc}") from None
        if key in table:
            raise CurveConfigError(f"duplicate curve entry ({key[0].value}, {key[1].value})")
        table[key] = pair
    return CurveSet(table)


def load_curves(path: str | Path) -> CurveSet:
    try:
        entries = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CurveConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return curves_from_list(entries)


def default_curves() -> CurveSet:
    """Shipped calibrated placeholder table."""
    text = resources.files("seisgrid.data").joinpath("curves_default.json").read_text()
    return curves_from_list(json.loads(text))
