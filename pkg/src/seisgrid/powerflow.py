"""Island detection and Newton-Raphson AC power flow on the bus-branch model."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .grid_model import GridCase

DENSE_LIMIT = 500


class NoSlackError(RuntimeError):
    """The island has no in-service generator to act as reference."""


@dataclass(frozen=True)
class ServiceState:
    """In-service flags aligned with the case's (id-sorted) record tuples."""

    bus: np.ndarray
    branch: np.ndarray
    gen: np.ndarray
    load: np.ndarray

    @classmethod
    def from_case(cls, case: GridCase) -> ServiceState:
        return cls(
            bus=np.ones(len(case.buses), dtype=bool),
            branch=np.array([br.in_service for br in case.branches], dtype=bool),
            gen=np.array([g.in_service for g in case.generators], dtype=bool),
            load=np.array([ld.in_service for ld in case.loads], dtype=bool),
        )


@dataclass(frozen=True)
class Island:
    bus_ids: tuple[int, ...]
    branches: tuple[int, ...]  # indices into case.branches
    gens: tuple[int, ...]  # indices into case.generators
    loads: tuple[int, ...]  # indices into case.loads

    @property
    def size(self) -> int:
        return len(self.bus_ids)


@dataclass(frozen=True)
class PfSolution:
    converged: bool
    iterations: int
    bus_ids: tuple[int, ...]
    vm: np.ndarray
    va: np.ndarray
    max_mismatch_pu: float
    slack_bus: int | None = None
    flag: str | None = None  # "no_slack" | "singular_jacobian" | "diverged" | "max_iterations"


@dataclass(frozen=True)
class IslandAccounting:
    load_served_mw: float | None
    generation_available_mw: float


class _CaseArrays:
    def __init__(self, case: GridCase):
        self.bus_pos = {b.bus_id: i for i, b in enumerate(case.buses)}
        self.bus_ids = np.array([b.bus_id for b in case.buses], dtype=np.int64)
        self.br_f = np.array([self.bus_pos[b.from_bus] for b in case.branches], dtype=np.int64)
        self.br_t = np.array([self.bus_pos[b.to_bus] for b in case.branches], dtype=np.int64)
        self.br_y = np.array([1.0 / complex(b.resistance_pu, b.reactance_pu) for b in case.branches], dtype=complex)
        self.br_b = np.array([b.total_line_charging_pu for b in case.branches], dtype=float)
        self.gen_bus = np.array([self.bus_pos[g.bus_id] for g in case.generators], dtype=np.int64)
        self.gen_pmax = np.array([g.p_max_mw for g in case.generators], dtype=float)
        self.gen_pmin = np.array([g.p_min_mw for g in case.generators], dtype=float)
        self.gen_vset = np.array([g.voltage_setpoint_pu for g in case.generators], dtype=float)
        self.load_bus = np.array([self.bus_pos[ld.bus_id] for ld in case.loads], dtype=np.int64)
        self.load_p = np.array([ld.p_mw for ld in case.loads], dtype=float)
        self.load_q = np.array([ld.q_mvar for ld in case.loads], dtype=float)


def case_arrays(case: GridCase) -> _CaseArrays:
    arrays = case.__dict__.get("_pf_arrays")
    if arrays is None:
        arrays = _CaseArrays(case)
        object.__setattr__(case, "_pf_arrays", arrays)
    return arrays


def find_islands(case: GridCase, state: ServiceState) -> list[Island]:
    """Connected components of in-service buses over in-service branches.

    Sorted by bus count descending, ties broken by smallest contained bus id.
    """
    a = case_arrays(case)
    n = len(case.buses)
    br_ok = state.branch & state.bus[a.br_f] & state.bus[a.br_t]
    adj = sp.coo_matrix((np.ones(int(br_ok.sum())), (a.br_f[br_ok], a.br_t[br_ok])), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    bus_idx = np.flatnonzero(state.bus)
    if bus_idx.size == 0:
        return []
    members: dict[int, list[int]] = {}
    for i in bus_idx:
        members.setdefault(int(labels[i]), []).append(int(i))
    br_label = labels[a.br_f]
    gen_ok = state.gen & state.bus[a.gen_bus]
    load_ok = state.load & state.bus[a.load_bus]
    islands = []
    for lab, idx in members.items():
        islands.append(
            Island(
                bus_ids=tuple(int(a.bus_ids[i]) for i in idx),
                branches=tuple(int(k) for k in np.flatnonzero(br_ok & (br_label == lab))),
                gens=tuple(int(k) for k in np.flatnonzero(gen_ok & (labels[a.gen_bus] == lab))),
                loads=tuple(int(k) for k in np.flatnonzero(load_ok & (labels[a.load_bus] == lab))),
            )
        )
    islands.sort(key=lambda isl: (-isl.size, isl.bus_ids[0]))
    return islands


def select_slack(case: GridCase, island: Island) -> int:
    """Bus with the largest in-service p_max in the island (ties: smallest bus id)."""
    totals: dict[int, float] = {}
    for k in island.gens:
        g = case.generators[k]
        totals[g.bus_id] = totals.get(g.bus_id, 0.0) + g.p_max_mw
    if not totals:
        raise NoSlackError(f"island of {island.size} buses has no in-service generator")
    return min(totals, key=lambda b: (-totals[b], b))


def island_admittance(case: GridCase, island: Island):
    """Bus admittance matrix over the island (pi-model branches, unity taps)."""
    a = case_arrays(case)
    local = {a.bus_pos[b]: i for i, b in enumerate(island.bus_ids)}
    m = len(island.bus_ids)
    br = np.array(island.branches, dtype=np.int64)
    f = np.array([local[i] for i in a.br_f[br]], dtype=np.int64)
    t = np.array([local[i] for i in a.br_t[br]], dtype=np.int64)
    y = a.br_y[br]
    ysh = 0.5j * a.br_b[br]
    rows = np.concatenate([f, t, f, t])
    cols = np.concatenate([f, t, t, f])
    vals = np.concatenate([y + ysh, y + ysh, -y, -y])
    ybus = sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
    return ybus.toarray() if m <= DENSE_LIMIT else ybus


def island_injections(case: GridCase, island: Island, slack_bus: int):
    """Scheduled complex injections (pu), PV setpoints, and bus partitions.

    Island load is shared among its in-service generators in proportion to
    p_max (clipped to [p_min, p_max]); the slack takes up the balance.
    """
    a = case_arrays(case)
    pos_local = {a.bus_pos[b]: i for i, b in enumerate(island.bus_ids)}
    m = len(island.bus_ids)
    base = case.system_base_mva
    sbus = np.zeros(m, dtype=complex)
    loads = np.array(island.loads, dtype=np.int64)
    for k in loads:
        sbus[pos_local[a.load_bus[k]]] -= complex(a.load_p[k], a.load_q[k]) / base
    gens = np.array(island.gens, dtype=np.int64)
    total_load = float(a.load_p[loads].sum()) if loads.size else 0.0
    vset = np.ones(m)
    seen: set[int] = set()
    pmax_total = float(a.gen_pmax[gens].sum()) if gens.size else 0.0
    for k in gens:
        i = pos_local[a.gen_bus[k]]
        if i not in seen:
            vset[i] = a.gen_vset[k]
            seen.add(i)
        if pmax_total > 0:
            pg = np.clip(total_load * a.gen_pmax[k] / pmax_total, a.gen_pmin[k], a.gen_pmax[k])
            sbus[i] += pg / base
    ref = island.bus_ids.index(slack_bus)
    pv = np.array(sorted(i for i in seen if i != ref), dtype=np.int64)
    pq = np.array([i for i in range(m) if i != ref and i not in seen], dtype=np.int64)
    return sbus, vset, ref, pv, pq


def _jacobian(ybus, v, pvpq, pq, dense: bool):
    ibus = ybus @ v
    vnorm = v / np.abs(v)
    if dense:
        dv = np.diag(v)
        ds_dva = 1j * dv @ np.conj(np.diag(ibus) - ybus * v[np.newaxis, :])
        ds_dvm = dv @ np.conj(ybus * vnorm[np.newaxis, :]) + np.diag(np.conj(ibus) * vnorm)
        j11 = ds_dva[np.ix_(pvpq, pvpq)].real
        j12 = ds_dvm[np.ix_(pvpq, pq)].real
        j21 = ds_dva[np.ix_(pq, pvpq)].imag
        j22 = ds_dvm[np.ix_(pq, pq)].imag
        return np.block([[j11, j12], [j21, j22]])
    dv = sp.diags(v)
    ds_dva = 1j * (dv @ (sp.diags(ibus) - ybus @ dv).conj())
    ds_dvm = dv @ (ybus @ sp.diags(vnorm)).conj() + sp.diags(np.conj(ibus) * vnorm)
    ds_dva, ds_dvm = sp.csr_matrix(ds_dva), sp.csr_matrix(ds_dvm)
    j11 = ds_dva[pvpq][:, pvpq].real
    j12 = ds_dvm[pvpq][:, pq].real
    j21 = ds_dva[pq][:, pvpq].imag
    j22 = ds_dvm[pq][:, pq].imag
    return sp.bmat([[j11, j12], [j21, j22]], format="csc")


def _mismatch(ybus, v, sbus, pvpq, pq):
    mis = v * np.conj(ybus @ v) - sbus
    return np.concatenate([mis[pvpq].real, mis[pq].imag])


def solve_newton_raphson(
    case: GridCase,
    island: Island,
    tolerance_pu: float = 1e-6,
    max_iterations: int = 30,
    start: tuple[np.ndarray, np.ndarray] | None = None,
) -> PfSolution:
    """Polar Newton-Raphson from a flat start (PV buses at setpoint).

    Failure to converge is reported in the returned solution, never raised.
    """
    m = island.size
    try:
        slack = select_slack(case, island)
    except NoSlackError:
        return PfSolution(False, 0, island.bus_ids, np.ones(m), np.zeros(m), float("inf"), None, "no_slack")
    ybus = island_admittance(case, island)
    dense = isinstance(ybus, np.ndarray)
    sbus, vset, ref, pv, pq = island_injections(case, island, slack)
    pvpq = np.concatenate([pv, pq])

    if start is None:
        vm = np.ones(m)
        vm[pv] = vset[pv]
        vm[ref] = vset[ref]
        va = np.zeros(m)
    else:
        vm, va = np.array(start[0], dtype=float), np.array(start[1], dtype=float)
    v = vm * np.exp(1j * va)

    f = _mismatch(ybus, v, sbus, pvpq, pq)
    norm = float(np.max(np.abs(f))) if f.size else 0.0
    it = 0
    flag = None
    while norm >= tolerance_pu and it < max_iterations:
        it += 1
        jac = _jacobian(ybus, v, pvpq, pq, dense)
        try:
            if dense:
                dx = -np.linalg.solve(jac, f)
            else:
                dx = -spsolve(jac, f)
        except (np.linalg.LinAlgError, RuntimeError):
            flag = "singular_jacobian"
            break
        if not np.all(np.isfinite(dx)):
            flag = "singular_jacobian"
            break
        va = np.angle(v)
        vm = np.abs(v)
        va[pvpq] += dx[: pvpq.size]
        vm[pq] += dx[pvpq.size:]
        v = vm * np.exp(1j * va)
        f = _mismatch(ybus, v, sbus, pvpq, pq)
        norm = float(np.max(np.abs(f))) if f.size else 0.0
        if not np.isfinite(norm):
            flag = "diverged"
            break
    converged = flag is None and norm < tolerance_pu
    if not converged and flag is None:
        flag = "max_iterations"
    return PfSolution(converged, it, island.bus_ids, np.abs(v), np.angle(v), norm, slack, flag)


def island_accounting(case: GridCase, island: Island, solution: PfSolution | None) -> IslandAccounting:
    """MW load served (only when the solve converged) and MW generation capacity in the island."""
    a = case_arrays(case)
    gen = float(a.gen_pmax[list(island.gens)].sum()) if island.gens else 0.0
    served = None
    if solution is not None and solution.converged:
        served = float(a.load_p[list(island.loads)].sum()) if island.loads else 0.0
    return IslandAccounting(served, gen)


def write_solution_csv(solution: PfSolution, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bus", "vm_pu", "va_rad"])
        for b, vm, va in zip(solution.bus_ids, solution.vm, solution.va):
            w.writerow([b, repr(float(vm)), repr(float(va))])
