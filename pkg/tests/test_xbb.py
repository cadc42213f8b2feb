
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import two_bus_doc
from seisgrid.curves import ComponentKind, VoltageClass
from seisgrid.grid_model import case_from_dict
from seisgrid.xbb import (
    Archetype,
    AssetRef,
    ConnectivityMode,
    GraphConstructionError,
    ServiceStatus,
    archetype_edges,
    assign_archetype,
    build_substation_graph,
    build_xbb,
    count_feeders,
    dump_xbb,
)

DBDB3_FEEDERS = [AssetRef("gen", 1), AssetRef("branch", 7, "from"), AssetRef("load", 3)]


@pytest.fixture
def dbdb3():
    return build_substation_graph(10, Archetype.DBDB, DBDB3_FEEDERS)


def edges_at(graph, node):
    return [sg for sg in graph.switch_groups if node in (sg.u, sg.v)]


def test_dbdb3_counts(dbdb3):
    counts = dbdb3.kind_counts()
    assert len(dbdb3.nodes) == 5
    assert len(dbdb3.switch_groups) == 6
    assert counts[ComponentKind.CIRCUIT_BREAKER] == 6
    assert counts[ComponentKind.DISCONNECT_SWITCH] == 12


def test_switch_group_shape(dbdb3):
    for sg in dbdb3.switch_groups:
        kinds = [dbdb3.components[c].kind for c in sg.components]
        assert kinds == [ComponentKind.DISCONNECT_SWITCH, ComponentKind.CIRCUIT_BREAKER, ComponentKind.DISCONNECT_SWITCH]


def formula(arch, n):
    if arch == Archetype.SBSB:
        return n + 1, n
    if arch == Archetype.RB:
        return n, n
    if arch == Archetype.BAH:
        return n + 2, 3 * (n // 2) + 2 * (n % 2)
    return n + 2, 2 * n


@pytest.mark.parametrize("arch", list(Archetype))
@pytest.mark.parametrize("n", range(1, 13))
def test_archetype_count_formulas(arch, n):
    feeders = [AssetRef("load", i) for i in range(n)]
    if arch == Archetype.RB and n < 3:
        with pytest.raises(GraphConstructionError):
            build_substation_graph(1, arch, feeders)
        return
    g = build_substation_graph(1, arch, feeders)
    assert (len(g.nodes), len(g.switch_groups)) == formula(arch, n)
    assert len(g.components) == 3 * len(g.switch_groups)
    assert sorted(r for r in g.nodes if r is not None) == sorted(feeders)


def test_bah_bay_structure():
    n_nodes, edges = archetype_edges(Archetype.BAH, 5)
    assert n_nodes == 7
    assert edges == [(5, 0), (0, 1), (1, 6), (5, 2), (2, 3), (3, 6), (5, 4), (4, 6)]


def test_rb_is_single_cycle():
    _, edges = archetype_edges(Archetype.RB, 4)
    assert edges == [(0, 1), (1, 2), (2, 3), (3, 0)]


def test_empty_feeders_rejected():
    with pytest.raises(GraphConstructionError):
        build_substation_graph(1, Archetype.SBSB, [])


def feeder_doc(n_gen, n_load, n_branch):
    doc = two_bus_doc()
    doc["buses"] = [{"id": i, "location": 1, "base_kv": 230.0} for i in range(1, n_branch + 2)]
    doc["branches"] = [
        {"id": k, "from": 1, "to": k + 1, "r": 0.0, "x": 0.1, "b": 0.0, "transformer": False}
        for k in range(1, n_branch + 1)
    ]
    gens = [{"id": k, "bus": 1, "pmax": 10.0} for k in range(1, n_gen + 1)]
    doc["generators"] = gens or [{"id": 1, "bus": 2, "pmax": 10.0}]
    doc["loads"] = [{"id": k, "bus": 1, "p": 1.0} for k in range(1, n_load + 1)]
    return doc


@pytest.mark.parametrize("gens, loads, branches, expected", [(2, 1, 2, 5), (0, 0, 2, 2), (0, 1, 3, 4)])
def test_count_feeders(gens, loads, branches, expected):
    case = case_from_dict(feeder_doc(gens, loads, branches))
    assert count_feeders(case, 1) == expected


def test_count_feeders_unknown_bus(two_bus):
    with pytest.raises(KeyError):
        count_feeders(two_bus, 42)


@pytest.mark.parametrize(
    "n, gen, arch",
    [(5, True, Archetype.DBDB), (2, False, Archetype.SBSB), (4, False, Archetype.RB), (7, False, Archetype.BAH),
     (1, False, Archetype.SBSB), (3, False, Archetype.RB), (5, False, Archetype.BAH), (1, True, Archetype.DBDB)],
)
def test_assign_archetype(n, gen, arch):
    assert assign_archetype(n, gen) == arch


def test_damage_one_breaker(dbdb3):
    sg = dbdb3.switch_groups[0]
    dbdb3.apply_component_damage([sg.components[1]])
    assert len(dbdb3.live_edges()) == 5
    assert sg not in dbdb3.live_edges()


def test_damage_nothing_is_identity(dbdb3):
    dbdb3.apply_component_damage([])
    assert len(dbdb3.live_edges()) == 6
    assert dbdb3.out_of_service_assets() == set()
    assert dbdb3.service_status() == ServiceStatus.FULLY_RESTORED


def test_foreign_component_rejected(dbdb3):
    with pytest.raises(KeyError):
        dbdb3.apply_component_damage([999])


def test_both_feeder_edges_out(dbdb3):
    # feeder index 1 is the branch end
    for sg in edges_at(dbdb3, 1):
        dbdb3.apply_component_damage([sg.components[0]])
    assert dbdb3.degrees()[1] == 0
    assert dbdb3.out_of_service_assets() == {DBDB3_FEEDERS[1]}
    assert dbdb3.service_status() == ServiceStatus.DEGRADED


def test_generator_feeder_out(dbdb3):
    for sg in edges_at(dbdb3, 0):
        dbdb3.apply_component_damage([sg.components[2]])
    assert dbdb3.out_of_service_assets() == {AssetRef("gen", 1)}


def test_all_edges_out(dbdb3):
    dbdb3.apply_component_damage([sg.components[1] for sg in dbdb3.switch_groups])
    assert dbdb3.out_of_service_assets() == set(DBDB3_FEEDERS)


def test_single_edge_removal_keeps_function(dbdb3):
    # exhaustive: every one of the 6 single-edge removals leaves min degree >= 1
    for k in range(6):
        g = dbdb3.copy()
        g.apply_component_damage([g.switch_groups[k].components[1]])
        assert min(g.degrees()) >= 1
        assert g.service_status() == ServiceStatus.FUNCTIONALLY_CONNECTED


def test_restoration_waits_for_all_components(dbdb3):
    sg = dbdb3.switch_groups[2]
    dbdb3.apply_component_damage(sg.components, dict(zip(sg.components, (3, 5, 5))))
    returned = {d: dbdb3.advance_restoration(d) for d in range(1, 6)}
    assert returned[1] == returned[2] == returned[3] == returned[4] == set()
    assert returned[5] == {sg.sg_id}
    assert dbdb3.service_status() == ServiceStatus.FULLY_RESTORED


def test_two_groups_same_day(dbdb3):
    a, b = dbdb3.switch_groups[0], dbdb3.switch_groups[4]
    dbdb3.apply_component_damage([a.components[0], b.components[1]], {a.components[0]: 4, b.components[1]: 4})
    assert dbdb3.advance_restoration(3) == set()
    assert dbdb3.advance_restoration(4) == {a.sg_id, b.sg_id}


def test_restoration_day_must_be_positive(dbdb3):
    with pytest.raises(ValueError):
        dbdb3.apply_component_damage([0], {0: 0})
    with pytest.raises(ValueError):
        dbdb3.advance_restoration(0)


def test_component_mode_is_stricter():
    # DBDB with 2 feeders: f0 only on bus A, f1 only on bus B -> degree rule says both live,
    # yet they share no path.
    g = build_substation_graph(1, Archetype.DBDB, [AssetRef("gen", 1), AssetRef("load", 1)])
    by_edge = {(sg.u, sg.v): sg for sg in g.switch_groups}
    g.apply_component_damage([by_edge[(0, 3)].components[1], by_edge[(1, 2)].components[1]])
    assert g.out_of_service_assets(ConnectivityMode.DEGREE) == set()
    assert g.out_of_service_assets(ConnectivityMode.COMPONENT) == {AssetRef("load", 1)}


@settings(max_examples=100, deadline=None)
@given(
    arch=st.sampled_from(list(Archetype)),
    n=st.integers(3, 9),
    data=st.data(),
)
def test_out_of_service_antitone(arch, n, data):
    g = build_substation_graph(1, arch, [AssetRef("load", i) for i in range(n)])
    n_sg = len(g.switch_groups)
    removed = data.draw(st.sets(st.integers(0, n_sg - 1)))
    fewer = data.draw(st.sets(st.sampled_from(sorted(removed)))) if removed else set()
    big, small = g.copy(), g.copy()
    big.apply_component_damage([big.switch_groups[k].components[1] for k in removed])
    small.apply_component_damage([small.switch_groups[k].components[1] for k in fewer])
    # small has a superset of live edges
    assert small.out_of_service_assets() <= big.out_of_service_assets()
    # liveness is exactly the conjunction of component states
    for sg in big.switch_groups:
        assert big.edge_live(sg) == all(big.components[c].intact for c in sg.components)


@settings(max_examples=50, deadline=None)
@given(arch=st.sampled_from(list(Archetype)), n=st.integers(3, 8), data=st.data())
def test_restoration_visits_each_damaged_component_once(arch, n, data):
    g = build_substation_graph(1, arch, [AssetRef("load", i) for i in range(n)])
    ids = sorted(g.components)
    damaged = data.draw(st.sets(st.sampled_from(ids), min_size=1))
    days = {c: data.draw(st.integers(1, 20)) for c in damaged}
    g.apply_component_damage(damaged, days)
    recovered = []
    for day in range(1, max(days.values()) + 1):
        before = {c for c, comp in g.components.items() if comp.damaged}
        g.advance_restoration(day)
        after = {c for c, comp in g.components.items() if comp.damaged}
        recovered += sorted(before - after)
        assert all(days[c] == day for c in before - after)
    assert sorted(recovered) == sorted(damaged)
    assert g.service_status() == ServiceStatus.FULLY_RESTORED


def test_build_xbb_desk(desk_case):
    graphs = build_xbb(desk_case)
    assert set(graphs) == set(desk_case.bus_ids)
    ids = sorted(c for g in graphs.values() for c in g.components)
    assert ids == list(range(len(ids)))
    for bus_id, g in graphs.items():
        assert g.n_feeders == count_feeders(desk_case, bus_id)
        has_gen = any(gen.bus_id == bus_id for gen in desk_case.generators)
        assert g.archetype == assign_archetype(g.n_feeders, has_gen)
    n_tr = sum(1 for br in desk_case.branches if br.is_transformer)
    transformers = [c for g in graphs.values() for c in g.components.values() if c.kind == ComponentKind.TRANSFORMER]
    assert len(transformers) == n_tr
    # 6-9 transformer (500/230 kV) sits at the 500 kV end -> high voltage class
    owner = next(g for g in graphs.values() if 11 in g.transformer_components.values())
    assert owner.bus_id == 6
    cid = next(c for c, b in owner.transformer_components.items() if b == 11)
    assert owner.components[cid].voltage_class == VoltageClass.HIGH


def test_dump_is_json(desk_case):
    import json

    dumped = json.loads(dump_xbb(build_xbb(desk_case)))
    assert len(dumped) == 30
    assert {"bus_id", "archetype", "nodes", "edges", "components"} <= set(dumped[0])
