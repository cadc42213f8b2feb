"""Bus-branch case model: JSON ingestion, validation, and regional queries."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

MIN_BASE_KV = 13.2


class CaseParseError(ValueError):
    """The case document is malformed (bad JSON, missing or mistyped field)."""


class CaseValidationError(ValueError):
    """The case document parsed but violates an invariant."""

    def __init__(self, message: str, offending: Iterable[Any] = ()):
        super().__init__(message)
        self.offending = list(offending)


class BusKind(str, Enum):
    PQ = "PQ"
    PV = "PV"
    SLACK = "slack"


@dataclass(frozen=True)
class Location:
    location_id: int
    lat: float
    lon: float


@dataclass(frozen=True)
class BusRecord:
    bus_id: int
    location_id: int
    lat: float
    lon: float
    base_kv: float
    bus_kind: BusKind = BusKind.PQ


@dataclass(frozen=True)
class BranchRecord:
    branch_id: int
    from_bus: int
    to_bus: int
    resistance_pu: float
    reactance_pu: float
    total_line_charging_pu: float = 0.0
    is_transformer: bool = False
    in_service: bool = True


@dataclass(frozen=True)
class GenRecord:
    gen_id: int
    bus_id: int
    p_max_mw: float
    p_min_mw: float = 0.0
    q_max_mvar: float = 0.0
    q_min_mvar: float = 0.0
    voltage_setpoint_pu: float = 1.0
    in_service: bool = True


@dataclass(frozen=True)
class LoadRecord:
    load_id: int
    bus_id: int
    p_mw: float
    q_mvar: float = 0.0
    in_service: bool = True


@dataclass(frozen=True)
class RegionBox:
    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self):
        if not (self.min_lat < self.max_lat and self.min_lon < self.max_lon):
            raise ValueError(f"degenerate region box {self}")

    def contains(self, lat: float, lon: float) -> bool:
        return self.min_lat <= lat <= self.max_lat and self.min_lon <= lon <= self.max_lon


# Coast to the 121st meridian, 39th to 49th parallel.
DAMAGE_ZONE = RegionBox(min_lat=39.0, max_lat=49.0, min_lon=-130.0, max_lon=-121.0)
WHOLE_WORLD = RegionBox(min_lat=-90.0, max_lat=90.0, min_lon=-180.0, max_lon=180.0)


@dataclass(frozen=True)
class CaseSummary:
    bus_count: int
    gen_capacity_mw: float
    load_mw: float


@dataclass(frozen=True)
class GridCase:
    """Immutable bus-branch case. Records are kept sorted by id."""

    name: str
    system_base_mva: float
    locations: tuple[Location, ...]
    buses: tuple[BusRecord, ...]
    branches: tuple[BranchRecord, ...]
    generators: tuple[GenRecord, ...]
    loads: tuple[LoadRecord, ...]
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        validate_case(self)
        object.__setattr__(self, "_bus_index", {b.bus_id: i for i, b in enumerate(self.buses)})

    def bus_index(self, bus_id: int) -> int:
        try:
            return self._bus_index[bus_id]
        except KeyError:
            raise KeyError(f"unknown bus {bus_id}") from None

    def bus(self, bus_id: int) -> BusRecord:
        return self.buses[self.bus_index(bus_id)]

    @property
    def bus_ids(self) -> list[int]:
        return [b.bus_id for b in self.buses]

    def counts(self) -> tuple[int, int, int, int]:
        return len(self.buses), len(self.branches), len(self.generators), len(self.loads)


def validate_case(case: GridCase) -> None:
    if not case.system_base_mva > 0:
        raise CaseValidationError(f"base_mva must be positive, got {case.system_base_mva}")
    for kind, records, key in (
        ("location", case.locations, "location_id"),
        ("bus", case.buses, "bus_id"),
        ("branch", case.branches, "branch_id"),
        ("generator", case.generators, "gen_id"),
        ("load", case.loads, "load_id"),
    ):
        ids = [getattr(r, key) for r in records]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise CaseValidationError(f"duplicate {kind} ids: {dupes}", dupes)

    loc_ids = {loc.location_id for loc in case.locations}
    for loc in case.locations:
        if not (-90 <= loc.lat <= 90 and -180 <= loc.lon <= 180):
            raise CaseValidationError(f"location {loc.location_id} has out-of-range coordinates", [loc.location_id])

    bad = [b.bus_id for b in case.buses if b.location_id not in loc_ids]
    if bad:
        raise CaseValidationError(f"buses reference unknown locations: {bad}", bad)
    low = [b.bus_id for b in case.buses if not b.base_kv >= MIN_BASE_KV]
    if low:
        raise CaseValidationError(f"buses below {MIN_BASE_KV} kV: {low}", low)

    bus_ids = {b.bus_id for b in case.buses}
    problems = []
    for br in case.branches:
        for end in (br.from_bus, br.to_bus):
            if end not in bus_ids:
                problems.append(f"branch {br.branch_id} -> bus {end}")
        if br.from_bus == br.to_bus:
            problems.append(f"branch {br.branch_id} is a self-loop on bus {br.from_bus}")
        if br.reactance_pu == 0:
            problems.append(f"branch {br.branch_id} has zero reactance")
    for g in case.generators:
        if g.bus_id not in bus_ids:
            problems.append(f"generator {g.gen_id} -> bus {g.bus_id}")
        if g.p_max_mw < g.p_min_mw:
            problems.append(f"generator {g.gen_id} has pmax < pmin")
        if not g.voltage_setpoint_pu > 0:
            problems.append(f"generator {g.gen_id} has non-positive vset")
    for ld in case.loads:
        if ld.bus_id not in bus_ids:
            problems.append(f"load {ld.load_id} -> bus {ld.bus_id}")
    if problems:
        raise CaseValidationError("invalid case: " + "; ".join(problems), problems)
    if not case.generators:
        raise CaseValidationError("case has no generators")


def _take(obj: dict, key: str, typ, where: str, default: Any = ...):
    if key not in obj:
        if default is ...:
            raise CaseParseError(f"{where}: missing field '{key}'")
        return default
    value = obj[key]
    try:
        if typ is bool:
            if not isinstance(value, bool):
                raise TypeError
            return value
        if typ is int and (isinstance(value, bool) or float(value) != int(value)):
            raise TypeError
        out = typ(value)
    except (TypeError, ValueError):
        raise CaseParseError(f"{where}: field '{key}' has invalid value {value!r}") from None
    if typ is float and not math.isfinite(out):
        raise CaseParseError(f"{where}: field '{key}' is not finite")
    return out


def case_from_dict(doc: dict) -> GridCase:
    if not isinstance(doc, dict):
        raise CaseParseError("case document must be a JSON object")
    for key in ("base_mva", "locations", "buses", "branches", "generators", "loads"):
        if key not in doc:
            raise CaseParseError(f"missing top-level key '{key}'")
        if key != "base_mva" and not isinstance(doc[key], list):
            raise CaseParseError(f"top-level key '{key}' must be an array")

    locations = []
    for i, o in enumerate(doc["locations"]):
        w = f"locations[{i}]"
        locations.append(Location(_take(o, "id", int, w), _take(o, "lat", float, w), _take(o, "lon", float, w)))
    loc_by_id = {loc.location_id: loc for loc in locations}

    buses = []
    for i, o in enumerate(doc["buses"]):
        w = f"buses[{i}]"
        loc_id = _take(o, "location", int, w)
        loc = loc_by_id.get(loc_id)
        kind = _take(o, "kind", str, w, "PQ")
        try:
            bus_kind = BusKind(kind)
        except ValueError:
            raise CaseParseError(f"{w}: unknown bus kind {kind!r}") from None
        buses.append(
            BusRecord(
                bus_id=_take(o, "id", int, w),
                location_id=loc_id,
                lat=loc.lat if loc else math.nan,
                lon=loc.lon if loc else math.nan,
                base_kv=_take(o, "base_kv", float, w),
                bus_kind=bus_kind,
            )
        )

    branches = []
    for i, o in enumerate(doc["branches"]):
        w = f"branches[{i}]"
        branches.append(
            BranchRecord(
                branch_id=_take(o, "id", int, w),
                from_bus=_take(o, "from", int, w),
                to_bus=_take(o, "to", int, w),
                resistance_pu=_take(o, "r", float, w),
                reactance_pu=_take(o, "x", float, w),
                total_line_charging_pu=_take(o, "b", float, w, 0.0),
                is_transformer=_take(o, "transformer", bool, w, False),
                in_service=_take(o, "in_service", bool, w, True),
            )
        )

    generators = []
    for i, o in enumerate(doc["generators"]):
        w = f"generators[{i}]"
        generators.append(
            GenRecord(
                gen_id=_take(o, "id", int, w),
                bus_id=_take(o, "bus", int, w),
                p_max_mw=_take(o, "pmax", float, w),
                p_min_mw=_take(o, "pmin", float, w, 0.0),
                q_max_mvar=_take(o, "qmax", float, w, 0.0),
                q_min_mvar=_take(o, "qmin", float, w, 0.0),
                voltage_setpoint_pu=_take(o, "vset", float, w, 1.0),
                in_service=_take(o, "in_service", bool, w, True),
            )
        )

    loads = []
    for i, o in enumerate(doc["loads"]):
        w = f"loads[{i}]"
        loads.append(
            LoadRecord(
                load_id=_take(o, "id", int, w),
                bus_id=_take(o, "bus", int, w),
                p_mw=_take(o, "p", float, w),
                q_mvar=_take(o, "q", float, w, 0.0),
                in_service=_take(o, "in_service", bool, w, True),
            )
        )

    return GridCase(
        name=str(doc.get("name", "")),
        system_base_mva=_take(doc, "base_mva", float, "case"),
        locations=tuple(sorted(locations, key=lambda r: r.location_id)),
        buses=tuple(sorted(buses, key=lambda r: r.bus_id)),
        branches=tuple(sorted(branches, key=lambda r: r.branch_id)),
        generators=tuple(sorted(generators, key=lambda r: r.gen_id)),
        loads=tuple(sorted(loads, key=lambda r: r.load_id)),
        meta=dict(doc.get("meta", {})),
    )


def parse_case(source: str | bytes) -> GridCase:
    """Parse a JSON case document into a validated :class:`GridCase`.

    Raises:
        CaseParseError: on malformed JSON (with line/column) or bad fields.
        CaseValidationError: on broken references or violated invariants.
    """
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise CaseParseError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return case_from_dict(doc)


def load_case(path: str | Path) -> GridCase:
    return parse_case(Path(path).read_text())


def case_to_dict(case: GridCase) -> dict:
    doc: dict[str, Any] = {
        "name": case.name,
        "base_mva": case.system_base_mva,
        "locations": [{"id": loc.location_id, "lat": loc.lat, "lon": loc.lon} for loc in case.locations],
        "buses": [
            {"id": b.bus_id, "location": b.location_id, "base_kv": b.base_kv, "kind": b.bus_kind.value}
            for b in case.buses
        ],
        "branches": [
            {
                "id": br.branch_id,
                "from": br.from_bus,
                "to": br.to_bus,
                "r": br.resistance_pu,
                "x": br.reactance_pu,
                "b": br.total_line_charging_pu,
                "transformer": br.is_transformer,
                "in_service": br.in_service,
            }
            for br in case.branches
        ],
        "generators": [
            {
                "id": g.gen_id,
                "bus": g.bus_id,
                "pmax": g.p_max_mw,
                "pmin": g.p_min_mw,
                "qmax": g.q_max_mvar,
                "qmin": g.q_min_mvar,
                "vset": g.voltage_setpoint_pu,
                "in_service": g.in_service,
            }
            for g in case.generators
        ],
        "loads": [
            {"id": ld.load_id, "bus": ld.bus_id, "p": ld.p_mw, "q": ld.q_mvar, "in_service": ld.in_service}
            for ld in case.loads
        ],
    }
    if case.meta:
        doc["meta"] = case.meta
    return doc


def serialize_case(case: GridCase) -> str:
    return json.dumps(case_to_dict(case), indent=1)


def buses_in_region(case: GridCase, region: RegionBox) -> set[int]:
    """Bus ids whose location lies in the closed box."""
    return {b.bus_id for b in case.buses if region.contains(b.lat, b.lon)}


def case_summary(case: GridCase, region: RegionBox | None = None) -> CaseSummary:
    """Bus count, in-service generation capacity and load, optionally restricted to a region."""
    if region is None:
        selected = set(case.bus_ids)
    else:
        selected = buses_in_region(case, region)
    capacity = sum(g.p_max_mw for g in case.generators if g.in_service and g.bus_id in selected)
    load = sum(ld.p_mw for ld in case.loads if ld.in_service and ld.bus_id in selected)
    return CaseSummary(bus_count=len(selected), gen_capacity_mw=capacity, load_mw=load)
