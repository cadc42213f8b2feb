"""Quasi-steady-state Monte Carlo loop: damage, schedule restoration, step days, log.

Each iteration ``i`` draws from its own stream seeded by ``(master_seed, i)``;
draw order is fixed (locations ascending, then every component ascending,
then restoration draws for the damaged set ascending), so results do not
depend on how iterations are spread over workers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Iterable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .curves import ComponentKind, CurveSet, VoltageClass
from .grid_model import DAMAGE_ZONE, GridCase, RegionBox, buses_in_region
from .hazard import ShakeRaster, draw_pga, location_parameters
from .powerflow import Island, PfSolution, ServiceState, find_islands, island_accounting, solve_newton_raphson
from .xbb import ConnectivityMode, SubstationGraph, build_xbb

log = logging.getLogger(__name__)

KIND_CODES = {ComponentKind.TRANSFORMER: 0, ComponentKind.CIRCUIT_BREAKER: 1, ComponentKind.DISCONNECT_SWITCH: 2}
UNRECOVERED = -1


@dataclass(frozen=True)
class SimulationConfig:
    iterations: int = 2500
    horizon_days: int = 1000
    master_seed: int = 0
    recovery_threshold: float = 0.99
    region: RegionBox = DAMAGE_ZONE
    connectivity_mode: ConnectivityMode = ConnectivityMode.DEGREE
    pf_tolerance: float = 1e-6
    pf_max_iterations: int = 30
    threads: int = 1
    progress_every: int = 0

    def __post_init__(self):
        if self.iterations < 1 or self.horizon_days < 1:
            raise ValueError("iterations and horizon_days must be positive")
        if not 0 < self.recovery_threshold <= 1:
            raise ValueError("recovery_threshold must lie in (0, 1]")
        if self.master_seed < 0 or self.master_seed >= 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "connectivity_mode", ConnectivityMode(self.connectivity_mode))

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["region"] = [self.region.min_lat, self.region.max_lat, self.region.min_lon, self.region.max_lon]
        out["connectivity_mode"] = self.connectivity_mode.value
        return out


# Per-day logged quantities; float columns use nan for "absent".
DAYLOG_FIELDS: dict[str, type] = {
    "connected_load_region_mw": float,
    "connected_load_mw": float,
    "degree_connected_load_mw": float,
    "connected_generation_mw": float,
    "branches_out": int,
    "generators_out": int,
    "loads_out": int,
    "buses_out": int,
    "transformers_damaged": int,
    "breakers_damaged": int,
    "disconnects_damaged": int,
    "island_count": int,
    "largest_island_bus_count": int,
    "pf_converged": bool,
    "pf_load_served_mw": float,
    "pf_generation_available_mw": float,
}


@dataclass(frozen=True)
class DayLog:
    day: int
    connected_load_region_mw: float
    connected_load_mw: float
    degree_connected_load_mw: float
    connected_generation_mw: float
    branches_out: int
    generators_out: int
    loads_out: int
    buses_out: int
    transformers_damaged: int
    breakers_damaged: int
    disconnects_damaged: int
    island_count: int
    largest_island_bus_count: int
    pf_converged: bool
    pf_load_served_mw: float | None
    pf_generation_available_mw: float | None


@dataclass
class IterationResult:
    """Day-indexed logs (row 0 is the post-damage state) plus per-substation recovery days.

    ``full_service_day``/``functional_day`` are indexed like ``case.buses``:
    0 for undamaged substations, ``UNRECOVERED`` past the horizon.
    """

    index: int
    logs: dict[str, np.ndarray]
    full_service_day: np.ndarray
    functional_day: np.ndarray
    substation_damaged: np.ndarray

    @property
    def n_days(self) -> int:
        return len(self.logs["connected_load_mw"])

    def day_log(self, day: int) -> DayLog:
        values = {}
        for name, typ in DAYLOG_FIELDS.items():
            v = self.logs[name][day]
            if typ is float:
                values[name] = None if np.isnan(v) else float(v)
            else:
                values[name] = typ(v)
        return DayLog(day=day, **values)


@dataclass
class RunResult:
    config: SimulationConfig
    baseline: DayLog
    logs: dict[str, np.ndarray]  # each (iterations, horizon + 1)
    full_service_day: np.ndarray  # (iterations, n_bus)
    functional_day: np.ndarray
    substation_damaged: np.ndarray
    bus_ids: tuple[int, ...] = field(default=())

    @property
    def p0(self) -> float:
        return self.baseline.connected_load_region_mw

    def iteration(self, i: int) -> IterationResult:
        return IterationResult(
            i,
            {k: v[i] for k, v in self.logs.items()},
            self.full_service_day[i],
            self.functional_day[i],
            self.substation_damaged[i],
        )

    def percentile_trajectory(self, q: float, field_name: str = "connected_load_region_mw") -> np.ndarray:
        return nearest_rank(self.logs[field_name], q, axis=0)


def nearest_rank(values: np.ndarray, q: float, axis: int = 0) -> np.ndarray:
    """Nearest-rank percentile: the ceil(q/100 * n)-th smallest value (rank at least 1)."""
    if not 0 <= q <= 100:
        raise ValueError("percentile must lie in [0, 100]")
    values = np.asarray(values)
    n = values.shape[axis]
    rank = max(math.ceil(q / 100 * n - 1e-12), 1)
    return np.take(np.sort(values, axis=axis), rank - 1, axis=axis)


def percentile_trajectory(run: RunResult, q: float, field_name: str = "connected_load_region_mw") -> np.ndarray:
    return run.percentile_trajectory(q, field_name)


def iteration_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, index]))


class Scenario:
    """Flattened, immutable view of case + xBB graphs + hazard + curves for fast iteration."""

    def __init__(
        self,
        case: GridCase,
        raster: ShakeRaster | None,
        curves: CurveSet,
        config: SimulationConfig,
        graphs: dict[int, SubstationGraph] | None = None,
    ):
        self.case = case
        self.curves = curves
        self.config = config
        self.graphs = graphs if graphs is not None else build_xbb(case)
        bus_pos = {b.bus_id: i for i, b in enumerate(case.buses)}
        self.n_bus = len(case.buses)

        locs = case.locations
        loc_pos = {loc.location_id: i for i, loc in enumerate(locs)}
        self.loc_mu, self.loc_sigma, self.loc_inside = location_parameters(
            raster, [loc.lat for loc in locs], [loc.lon for loc in locs]
        )

        # global node numbering, substation by substation in bus order
        node_bus, node_offset = [], {}
        for bus_id in sorted(self.graphs):
            g = self.graphs[bus_id]
            node_offset[bus_id] = len(node_bus)
            node_bus += [bus_pos[bus_id]] * len(g.nodes)
        self.n_nodes = len(node_bus)
        self.node_bus = np.array(node_bus, dtype=np.int64)
        self.node_is_feeder = np.zeros(self.n_nodes, dtype=bool)

        br_pos = {br.branch_id: i for i, br in enumerate(case.branches)}
        gen_pos = {g.gen_id: i for i, g in enumerate(case.generators)}
        load_pos = {ld.load_id: i for i, ld in enumerate(case.loads)}
        self.branch_nodes = np.full((len(case.branches), 2), -1, dtype=np.int64)
        self.gen_node = np.full(len(case.generators), -1, dtype=np.int64)
        self.load_node = np.full(len(case.loads), -1, dtype=np.int64)

        comp_ids = sorted(c for g in self.graphs.values() for c in g.components)
        if comp_ids != list(range(len(comp_ids))):
            raise ValueError("component ids must be contiguous from 0")
        n_comp = len(comp_ids)
        self.comp_loc = np.zeros(n_comp, dtype=np.int64)
        self.comp_bus = np.zeros(n_comp, dtype=np.int64)
        self.comp_kind = np.zeros(n_comp, dtype=np.int64)
        self.comp_key: list[tuple[ComponentKind, VoltageClass]] = [None] * n_comp  # type: ignore[list-item]
        self.branch_transformer = np.full(len(case.branches), -1, dtype=np.int64)
        sg_comps, sg_u, sg_v = [], [], []

        for bus_id in sorted(self.graphs):
            g = self.graphs[bus_id]
            off = node_offset[bus_id]
            bus = case.bus(bus_id)
            for i, ref in enumerate(g.nodes):
                if ref is None:
                    continue
                self.node_is_feeder[off + i] = True
                if ref.kind == "branch":
                    self.branch_nodes[br_pos[ref.asset_id], 0 if ref.end == "from" else 1] = off + i
                elif ref.kind == "gen":
                    self.gen_node[gen_pos[ref.asset_id]] = off + i
                else:
                    self.load_node[load_pos[ref.asset_id]] = off + i
            for sg in g.switch_groups:
                sg_comps.append(sg.components)
                sg_u.append(off + sg.u)
                sg_v.append(off + sg.v)
            for cid, comp in g.components.items():
                self.comp_loc[cid] = loc_pos[bus.location_id]
                self.comp_bus[cid] = bus_pos[bus_id]
                self.comp_kind[cid] = KIND_CODES[comp.kind]
                self.comp_key[cid] = (comp.kind, comp.voltage_class)
            for cid, br_id in g.transformer_components.items():
                self.branch_transformer[br_pos[br_id]] = cid

        self.sg_comps = np.array(sg_comps, dtype=np.int64).reshape(-1, 3)
        self.sg_u = np.array(sg_u, dtype=np.int64)
        self.sg_v = np.array(sg_v, dtype=np.int64)
        self.bus_has_graph = np.zeros(self.n_bus, dtype=bool)
        self.bus_has_graph[self.node_bus] = True

        self.key_masks = {}
        for cid, key in enumerate(self.comp_key):
            self.key_masks.setdefault(key, []).append(cid)
        self.key_masks = {k: np.array(v, dtype=np.int64) for k, v in self.key_masks.items()}

        base = ServiceState.from_case(case)
        self.base_branch, self.base_gen, self.base_load = base.branch, base.gen, base.load
        self.load_p = np.array([ld.p_mw for ld in case.loads], dtype=float)
        self.gen_pmax = np.array([g.p_max_mw for g in case.generators], dtype=float)
        region_buses = buses_in_region(case, config.region)
        self.bus_in_region = np.array([b.bus_id in region_buses for b in case.buses], dtype=bool)
        self.load_bus = np.array([bus_pos[ld.bus_id] for ld in case.loads], dtype=np.int64)
        self.load_in_region = self.bus_in_region[self.load_bus]
        self._pf_cache: dict = {}

    @property
    def n_components(self) -> int:
        return len(self.comp_key)

    # -- damage -------------------------------------------------------------

    def failure_probabilities(self, comp_pga: np.ndarray) -> np.ndarray:
        p = np.zeros(self.n_components)
        for key, idx in self.key_masks.items():
            p[idx] = self.curves.fragility(*key).probability(comp_pga[idx])
        return p

    def draw_damage(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(location PGA, damaged mask, recovery day per component; 0 where undamaged)."""
        pga = draw_pga(self.loc_mu, self.loc_sigma, self.loc_inside, rng)
        p = self.failure_probabilities(pga[self.comp_loc])
        damaged = rng.random(self.n_components) < p
        days = np.zeros(self.n_components, dtype=np.int64)
        idx = np.flatnonzero(damaged)
        if idx.size:
            u = rng.random(idx.size)
            for key, members in self.key_masks.items():
                sel = np.isin(idx, members)
                if sel.any():
                    days[idx[sel]] = self.curves.restoration(*key).day_for_quantile(u[sel])
        return pga, damaged, days

    # -- state evaluation ---------------------------------------------------

    def node_degrees(self, intact: np.ndarray) -> np.ndarray:
        live = intact[self.sg_comps].all(axis=1)
        return np.bincount(self.sg_u[live], minlength=self.n_nodes) + np.bincount(
            self.sg_v[live], minlength=self.n_nodes
        ), live

    def live_nodes(self, intact: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        deg, live_edges = self.node_degrees(intact)
        node_live = (deg > 0) & self.node_is_feeder
        if self.config.connectivity_mode == ConnectivityMode.COMPONENT:
            adj = coo_matrix(
                (np.ones(int(live_edges.sum())), (self.sg_u[live_edges], self.sg_v[live_edges])),
                shape=(self.n_nodes, self.n_nodes),
            )
            labels = connected_components(adj, directed=False)[1]
            keep = np.zeros(self.n_nodes, dtype=bool)
            by_bus: dict[int, dict[int, list[int]]] = {}
            for n in np.flatnonzero(node_live):
                by_bus.setdefault(int(self.node_bus[n]), {}).setdefault(int(labels[n]), []).append(int(n))
            for groups in by_bus.values():
                best = max(groups.values(), key=lambda ns: (len(ns), -min(ns)))
                keep[best] = True
            node_live = keep
        return node_live, deg

    def service_state(self, intact: np.ndarray) -> tuple[ServiceState, np.ndarray]:
        node_live, deg = self.live_nodes(intact)
        tr = self.branch_transformer
        tr_ok = np.where(tr >= 0, intact[np.maximum(tr, 0)], True)
        branch = self.base_branch & node_live[self.branch_nodes[:, 0]] & node_live[self.branch_nodes[:, 1]] & tr_ok
        gen = self.base_gen & node_live[self.gen_node]
        load = self.base_load & node_live[self.load_node]
        bus = ~self.bus_has_graph | (np.bincount(self.node_bus[node_live], minlength=self.n_bus) > 0)
        return ServiceState(bus, branch, gen, load), deg

    def solve(self, island: Island) -> PfSolution:
        key = (island.bus_ids, island.branches, island.gens, island.loads)
        sol = self._pf_cache.get(key)
        if sol is None:
            sol = solve_newton_raphson(
                self.case, island, self.config.pf_tolerance, self.config.pf_max_iterations
            )
            if len(self._pf_cache) > 50_000:
                self._pf_cache.clear()
            self._pf_cache[key] = sol
        return sol

    def evaluate(self, intact: np.ndarray) -> tuple[dict, np.ndarray]:
        """Logged quantities for one component state, plus node degrees."""
        state, deg = self.service_state(intact)
        islands = find_islands(self.case, state)
        row = {
            "branches_out": int((self.base_branch & ~state.branch).sum()),
            "generators_out": int((self.base_gen & ~state.gen).sum()),
            "loads_out": int((self.base_load & ~state.load).sum()),
            "buses_out": int((~state.bus).sum()),
            "degree_connected_load_mw": float(self.load_p[state.load].sum()),
            "island_count": len(islands),
        }
        damaged_kinds = np.bincount(self.comp_kind[~intact], minlength=3)
        row["transformers_damaged"], row["breakers_damaged"], row["disconnects_damaged"] = map(int, damaged_kinds)
        if islands:
            main = islands[0]
            loads = np.array(main.loads, dtype=np.int64)
            row["largest_island_bus_count"] = main.size
            row["connected_load_mw"] = float(self.load_p[loads].sum())
            row["connected_load_region_mw"] = float(self.load_p[loads[self.load_in_region[loads]]].sum())
            sol = self.solve(main)
            acct = island_accounting(self.case, main, sol)
            row["connected_generation_mw"] = acct.generation_available_mw
            row["pf_converged"] = sol.converged
            row["pf_load_served_mw"] = math.nan if acct.load_served_mw is None else acct.load_served_mw
            row["pf_generation_available_mw"] = acct.generation_available_mw
        else:
            row.update(
                largest_island_bus_count=0, connected_load_mw=0.0, connected_load_region_mw=0.0,
                connected_generation_mw=0.0, pf_converged=False, pf_load_served_mw=math.nan,
                pf_generation_available_mw=math.nan,
            )
        return row, deg

    def baseline(self) -> DayLog:
        row, _ = self.evaluate(np.ones(self.n_components, dtype=bool))
        return DayLog(day=0, **{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in row.items()})

    def functional_buses(self, deg: np.ndarray) -> np.ndarray:
        dead = np.bincount(self.node_bus[deg == 0], minlength=self.n_bus) > 0
        return ~dead


def run_schedule(scenario: Scenario, index: int, damaged: np.ndarray, days: np.ndarray) -> IterationResult:
    """Step restoration day by day from a given damage set and recovery schedule."""
    horizon = scenario.config.horizon_days
    n_days = horizon + 1
    logs = {name: np.empty(n_days, dtype=np.float64 if typ is float else typ) for name, typ in DAYLOG_FIELDS.items()}
    intact = ~damaged

    comp_bus = scenario.comp_bus
    sub_damaged = np.bincount(comp_bus[damaged], minlength=scenario.n_bus) > 0
    last_day = np.zeros(scenario.n_bus, dtype=np.int64)
    np.maximum.at(last_day, comp_bus[damaged], days[damaged])
    full_service = np.where(last_day > horizon, UNRECOVERED, last_day)
    functional = np.full(scenario.n_bus, UNRECOVERED, dtype=np.int64)

    event_days = np.unique(days[damaged & (days <= horizon)])
    starts = np.concatenate([[0], event_days])
    ends = np.concatenate([event_days, [n_days]])
    for start, end in zip(starts, ends):
        if start > 0:
            intact[damaged & (days == start)] = True
        row, deg = scenario.evaluate(intact)
        for name, value in row.items():
            logs[name][start:end] = value
        newly = scenario.functional_buses(deg) & (functional == UNRECOVERED)
        functional[newly] = start
    return IterationResult(index, logs, full_service, functional, sub_damaged)


def run_iteration(scenario: Scenario, index: int) -> IterationResult:
    rng = iteration_rng(scenario.config.master_seed, index)
    _, damaged, days = scenario.draw_damage(rng)
    return run_schedule(scenario, index, damaged, days)


_WORKER: Scenario | None = None


def _init_worker(scenario: Scenario) -> None:
    global _WORKER
    _WORKER = scenario


def _run_chunk(indices: list[int]) -> list[IterationResult]:
    assert _WORKER is not None
    return [run_iteration(_WORKER, i) for i in indices]


def _chunks(n: int, size: int) -> Iterable[list[int]]:
    for start in range(0, n, size):
        yield list(range(start, min(start + size, n)))


def run_monte_carlo(
    config: SimulationConfig,
    case: GridCase,
    raster: ShakeRaster | None,
    curves: CurveSet,
    graphs: dict[int, SubstationGraph] | None = None,
) -> RunResult:
    """Run all iterations and stack their logs in iteration order."""
    scenario = Scenario(case, raster, curves, config, graphs)
    baseline = scenario.baseline()
    n_days = config.horizon_days + 1
    logs = {
        name: np.empty((config.iterations, n_days), dtype=np.float64 if typ is float else typ)
        for name, typ in DAYLOG_FIELDS.items()
    }
    full = np.empty((config.iterations, scenario.n_bus), dtype=np.int64)
    functional = np.empty_like(full)
    sub_damaged = np.empty((config.iterations, scenario.n_bus), dtype=bool)

    def store(res: IterationResult) -> None:
        for name in DAYLOG_FIELDS:
            logs[name][res.index] = res.logs[name]
        full[res.index] = res.full_service_day
        functional[res.index] = res.functional_day
        sub_damaged[res.index] = res.substation_damaged
        done = res.index + 1
        if config.progress_every and done % config.progress_every == 0:
            log.info("completed %d/%d iterations", done, config.iterations)

    if config.threads <= 1:
        for i in range(config.iterations):
            store(run_iteration(scenario, i))
    else:
        chunk = max(1, config.iterations // (config.threads * 4))
        with ProcessPoolExecutor(config.threads, initializer=_init_worker, initargs=(scenario,)) as pool:
            for results in pool.map(_run_chunk, _chunks(config.iterations, chunk)):
                for res in results:
                    store(res)
    return RunResult(config, baseline, logs, full, functional, sub_damaged, tuple(case.bus_ids))
