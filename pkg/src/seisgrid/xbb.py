"""Extended bus-branch (xBB) model: each bus becomes a substation graph.

Nodes are feeder assets (branch ends, generators, loads) plus structural
internal bus nodes; edges are switch groups (disconnect - breaker -
disconnect). An asset is in service while its node keeps a live edge.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, NamedTuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .curves import ComponentKind, VoltageClass, voltage_class
from .grid_model import GridCase


class GraphConstructionError(ValueError):
    pass


class Archetype(str, Enum):
    SBSB = "SBSB"
    RB = "RB"
    BAH = "BAH"
    DBDB = "DBDB"


class ServiceStatus(str, Enum):
    FULLY_RESTORED = "FullyRestored"
    FUNCTIONALLY_CONNECTED = "FunctionallyConnected"
    DEGRADED = "Degraded"


class ConnectivityMode(str, Enum):
    DEGREE = "degree"
    COMPONENT = "component"


class AssetRef(NamedTuple):
    """A bus-branch asset attached to a substation. ``end`` is 'from'/'to' for branches."""

    kind: str  # "branch" | "gen" | "load"
    asset_id: int
    end: str = ""


@dataclass
class Component:
    component_id: int
    kind: ComponentKind
    voltage_class: VoltageClass
    damaged: bool = False
    recovery_day: int | None = None

    @property
    def intact(self) -> bool:
        return not self.damaged


@dataclass(frozen=True)
class SwitchGroup:
    sg_id: int
    components: tuple[int, int, int]  # disconnect, breaker, disconnect
    u: int
    v: int


@dataclass
class SubstationGraph:
    bus_id: int
    archetype: Archetype
    nodes: list[AssetRef | None]  # None marks an internal bus node
    switch_groups: list[SwitchGroup]
    components: dict[int, Component]
    transformer_components: dict[int, int] = field(default_factory=dict)  # component id -> branch id

    @property
    def n_feeders(self) -> int:
        return sum(1 for n in self.nodes if n is not None)

    def edge_live(self, sg: SwitchGroup) -> bool:
        return all(self.components[c].intact for c in sg.components)

    def live_edges(self) -> list[SwitchGroup]:
        return [sg for sg in self.switch_groups if self.edge_live(sg)]

    def degrees(self) -> list[int]:
        deg = [0] * len(self.nodes)
        for sg in self.live_edges():
            deg[sg.u] += 1
            deg[sg.v] += 1
        return deg

    def kind_counts(self) -> dict[ComponentKind, int]:
        counts = {k: 0 for k in ComponentKind}
        for c in self.components.values():
            counts[c.kind] += 1
        return counts

    def apply_component_damage(self, damaged_ids: Iterable[int], recovery_days: dict[int, int] | None = None) -> None:
        """Mark components damaged; edges holding any damaged component drop out."""
        damaged_ids = list(damaged_ids)
        foreign = [c for c in damaged_ids if c not in self.components]
        if foreign:
            raise KeyError(f"components {foreign} do not belong to substation {self.bus_id}")
        for cid in damaged_ids:
            comp = self.components[cid]
            comp.damaged = True
            if recovery_days is not None:
                day = int(recovery_days[cid])
                if day < 1:
                    raise ValueError("damaged components recover on day 1 or later")
                comp.recovery_day = day

    def advance_restoration(self, day: int) -> set[int]:
        """Recover components scheduled for ``day``; return ids of switch groups that came back."""
        if day < 1:
            raise ValueError("restoration days start at 1")
        before = {sg.sg_id for sg in self.live_edges()}
        for comp in self.components.values():
            if comp.damaged and comp.recovery_day == day:
                comp.damaged = False
                comp.recovery_day = None
        return {sg.sg_id for sg in self.live_edges()} - before

    def live_feeder_nodes(self, mode: ConnectivityMode = ConnectivityMode.DEGREE) -> set[int]:
        deg = self.degrees()
        live = {i for i, ref in enumerate(self.nodes) if ref is not None and deg[i] > 0}
        if mode == ConnectivityMode.COMPONENT and live:
            labels = _node_labels(len(self.nodes), [(sg.u, sg.v) for sg in self.live_edges()])
            main = _main_label(labels, sorted(live))
            live = {i for i in live if labels[i] == main}
        return live

    def out_of_service_assets(self, mode: ConnectivityMode = ConnectivityMode.DEGREE) -> set[AssetRef]:
        live = self.live_feeder_nodes(mode)
        return {ref for i, ref in enumerate(self.nodes) if ref is not None and i not in live}

    def service_status(self) -> ServiceStatus:
        if all(c.intact for c in self.components.values()):
            return ServiceStatus.FULLY_RESTORED
        if min(self.degrees()) > 0:
            return ServiceStatus.FUNCTIONALLY_CONNECTED
        return ServiceStatus.DEGRADED

    def copy(self) -> SubstationGraph:
        return copy.deepcopy(self)

    def to_dict(self) -> dict:
        return {
            "bus_id": self.bus_id,
            "archetype": self.archetype.value,
            "nodes": [
                {"index": i, "asset": None if ref is None else {"kind": ref.kind, "id": ref.asset_id, "end": ref.end}}
                for i, ref in enumerate(self.nodes)
            ],
            "edges": [{"sg_id": sg.sg_id, "u": sg.u, "v": sg.v, "components": list(sg.components)}
                      for sg in self.switch_groups],
            "components": [
                {"id": c.component_id, "kind": c.kind.value, "voltage": c.voltage_class.value}
                for c in sorted(self.components.values(), key=lambda c: c.component_id)
            ],
        }


def _node_labels(n_nodes: int, edges: list[tuple[int, int]]) -> np.ndarray:
    if edges:
        u, v = zip(*edges)
    else:
        u, v = (), ()
    adj = coo_matrix((np.ones(len(u)), (u, v)), shape=(n_nodes, n_nodes))
    return connected_components(adj, directed=False)[1]


def _main_label(labels, feeder_nodes: list[int]) -> int:
    """Component holding the most live feeders; ties go to the one with the smallest node."""
    counts: dict[int, list[int]] = {}
    for i in feeder_nodes:
        counts.setdefault(int(labels[i]), []).append(i)
    return max(counts, key=lambda lab: (len(counts[lab]), -min(counts[lab])))


def feeders_at_bus(case: GridCase, bus_id: int) -> list[AssetRef]:
    """Feeder assets in a fixed order: generators, branch ends, loads (each by id)."""
    case.bus_index(bus_id)
    refs = [AssetRef("gen", g.gen_id) for g in case.generators if g.bus_id == bus_id]
    for br in case.branches:
        if br.from_bus == bus_id:
            refs.append(AssetRef("branch", br.branch_id, "from"))
        if br.to_bus == bus_id:
            refs.append(AssetRef("branch", br.branch_id, "to"))
    refs += [AssetRef("load", ld.load_id) for ld in case.loads if ld.bus_id == bus_id]
    return refs


def count_feeders(case: GridCase, bus_id: int) -> int:
    return len(feeders_at_bus(case, bus_id))


def assign_archetype(feeder_count: int, has_generator: bool) -> Archetype:
    if feeder_count < 1:
        raise ValueError("a substation needs at least one feeder")
    if has_generator:
        return Archetype.DBDB
    if feeder_count <= 2:
        return Archetype.SBSB
    if feeder_count <= 4:
        return Archetype.RB
    return Archetype.BAH


def archetype_edges(archetype: Archetype, n: int) -> tuple[int, list[tuple[int, int]]]:
    """Node count and (u, v) edge list. Feeders are nodes 0..n-1, internal buses follow."""
    if n < 1:
        raise GraphConstructionError("feeder list is empty")
    if archetype == Archetype.SBSB:
        return n + 1, [(i, n) for i in range(n)]
    if archetype == Archetype.RB:
        if n < 3:
            raise GraphConstructionError(f"ring bus needs at least 3 feeders, got {n}")
        return n, [(i, (i + 1) % n) for i in range(n)]
    if archetype == Archetype.BAH:
        b1, b2 = n, n + 1
        edges = []
        for i in range(0, n - 1, 2):
            edges += [(b1, i), (i, i + 1), (i + 1, b2)]
        if n % 2:
            edges += [(b1, n - 1), (n - 1, b2)]
        return n + 2, edges
    if archetype == Archetype.DBDB:
        b1, b2 = n, n + 1
        edges = []
        for i in range(n):
            edges += [(i, b1), (i, b2)]
        return n + 2, edges
    raise GraphConstructionError(f"unknown archetype {archetype}")


class _IdCounter:
    def __init__(self, start: int = 0):
        self.next = start

    def take(self) -> int:
        value = self.next
        self.next += 1
        return value


def build_substation_graph(
    bus_id: int,
    archetype: Archetype,
    feeders: list[AssetRef],
    vclass: VoltageClass = VoltageClass.LOW,
    component_ids: _IdCounter | None = None,
    sg_ids: _IdCounter | None = None,
) -> SubstationGraph:
    """Build one substation graph; each edge gets a fresh SD-CB-SD switch group."""
    n_nodes, edges = archetype_edges(archetype, len(feeders))
    component_ids = component_ids or _IdCounter()
    sg_ids = sg_ids or _IdCounter()
    components: dict[int, Component] = {}
    groups = []
    for u, v in edges:
        ids = []
        for kind in (ComponentKind.DISCONNECT_SWITCH, ComponentKind.CIRCUIT_BREAKER, ComponentKind.DISCONNECT_SWITCH):
            cid = component_ids.take()
            components[cid] = Component(cid, kind, vclass)
            ids.append(cid)
        groups.append(SwitchGroup(sg_ids.take(), tuple(ids), u, v))
    nodes: list[AssetRef | None] = list(feeders) + [None] * (n_nodes - len(feeders))
    return SubstationGraph(bus_id, archetype, nodes, groups, components)


def build_xbb(case: GridCase) -> dict[int, SubstationGraph]:
    """Substation graphs for every bus with at least one feeder.

    Component ids are assigned bus by bus in ascending bus id; transformer
    components follow, in branch id order, attached to the higher-voltage end.
    """
    comp_ids, sg_ids = _IdCounter(), _IdCounter()
    graphs: dict[int, SubstationGraph] = {}
    gen_buses = {g.bus_id for g in case.generators}
    for bus in case.buses:
        feeders = feeders_at_bus(case, bus.bus_id)
        if not feeders:
            continue
        arch = assign_archetype(len(feeders), bus.bus_id in gen_buses)
        graphs[bus.bus_id] = build_substation_graph(
            bus.bus_id, arch, feeders, voltage_class(bus.base_kv), comp_ids, sg_ids
        )
    for br in case.branches:
        if not br.is_transformer:
            continue
        hi, lo = case.bus(br.from_bus), case.bus(br.to_bus)
        if lo.base_kv > hi.base_kv:
            hi = lo
        cid = comp_ids.take()
        graph = graphs[hi.bus_id]
        graph.components[cid] = Component(cid, ComponentKind.TRANSFORMER, voltage_class(hi.base_kv))
        graph.transformer_components[cid] = br.branch_id
    return graphs


def dump_xbb(graphs: dict[int, SubstationGraph]) -> str:
    return json.dumps([graphs[b].to_dict() for b in sorted(graphs)], indent=1)
