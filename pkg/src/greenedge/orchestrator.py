"""Multi-site slot loop: switch-off planning, load handoff, per-site control, metrics.

Each slot, every cluster first decides which base stations to switch off
(least network impact first, subject to no neighbour exceeding full load),
hands their traffic to an active neighbour, then runs the per-site policy on
the resulting load of every active station. Batteries advance with the
realized load and harvest.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from greenedge.controller import (
    CostWeights,
    ControlAction,
    SearchConfig,
    SiteParams,
    SiteState,
    deta_r_step,
    enaam_search,
    forecasts,
    no_management_breakdown,
    sleep_action,
    transition,
)
from greenedge.energy import step_battery
from greenedge.errors import DomainError
from greenedge.traces import DELAY_SENSITIVE_SHARE, EnergyTrace, TrafficTrace

POLICIES = ("enaam", "deta_r", "none")
CSV_COLUMNS = (
    "slot",
    "bs_id",
    "theta_bs",
    "theta_mec",
    "theta_tx",
    "theta_tot",
    "q",
    "beta",
    "served_mb",
    "dropped_mb",
    "zeta",
)


# ---------------------------------------------------------------- switch-off planning


def _effective(n, loads, delta):
    return loads[n] + delta.get(n, 0.0)


def feasible_offload_targets(
    n: int,
    loads: Mapping[int, float],
    neighbors: Iterable[int],
    delta: Optional[Mapping[int, float]] = None,
    active: Optional[Set[int]] = None,
) -> Set[int]:
    """Active neighbours that can absorb all of ``n``'s traffic without exceeding full load.

    ``loads`` are normalized to [0, 1]; ``delta`` holds traffic already handed
    over in this slot. Traffic ``n`` itself has received moves with it.
    """
    delta = delta or {}
    if any(not 0 <= loads[i] <= 1 for i in list(neighbors) + [n]):
        raise DomainError("normalized loads must lie in [0, 1]")
    own = _effective(n, loads, delta)
    return {
        j
        for j in neighbors
        if (active is None or j in active) and _effective(j, loads, delta) + own <= 1.0
    }


def network_impact(
    n: int,
    loads: Mapping[int, float],
    neighbors: Iterable[int],
    delta: Optional[Mapping[int, float]] = None,
    active: Optional[Set[int]] = None,
) -> float:
    """Worst neighbour load if ``n`` switched off and any neighbour took its traffic."""
    delta = delta or {}
    cands = [j for j in neighbors if active is None or j in active]
    if not cands:
        raise DomainError(f"BS {n} has no active neighbour; network impact undefined")
    own = _effective(n, loads, delta)
    return max(_effective(j, loads, delta) + own for j in cands)


@dataclass
class ClusterSlotPlan:
    off_set: Set[int] = field(default_factory=set)
    delta_load: Dict[int, float] = field(default_factory=dict)  # normalized
    host: Dict[int, Optional[int]] = field(default_factory=dict)  # where each BS's traffic is served
    commitment: Dict[int, int] = field(default_factory=dict)  # remaining off-slots
    order: List[Tuple[int, int]] = field(default_factory=list)  # (switched-off BS, target)

    def active(self, cluster: Sequence[int]) -> List[int]:
        return [n for n in cluster if n not in self.off_set]


def _switch_off(plan, n, target, loads):
    carried = loads[n] + plan.delta_load.pop(n, 0.0)
    for src, h in list(plan.host.items()):
        if h == n:
            plan.host[src] = target
    plan.off_set.add(n)
    if target is not None:
        plan.delta_load[target] = plan.delta_load.get(target, 0.0) + carried
        plan.order.append((n, target))


def _best_target(n, targets, loads, delta):
    return min(targets, key=lambda j: (_effective(j, loads, delta) + _effective(n, loads, delta), j))


def select_switch_offs(
    cluster: Sequence[int],
    loads: Mapping[int, float],
    neighbors: Mapping[int, Iterable[int]],
    forced_off: Iterable[int] = (),
) -> ClusterSlotPlan:
    """Sequentially switch off the station of least network impact while one is feasible.

    ``neighbors[n]`` must already be restricted to the cluster. Stations in
    ``forced_off`` (still within their commitment time) are off before the
    procedure starts; their traffic goes to the best feasible neighbour or is
    dropped. At least one station of the cluster always stays active.
    """
    if not cluster:
        raise DomainError("cluster must be non-empty")
    plan = ClusterSlotPlan(host={n: n for n in cluster})
    members = sorted(cluster)
    forced = [n for n in members if n in set(forced_off)]
    if len(forced) == len(members):
        forced = forced[1:]
    active = set(members) - set(forced)

    for n in forced:
        targets = feasible_offload_targets(n, loads, neighbors[n], plan.delta_load, active)
        _switch_off(plan, n, _best_target(n, targets, loads, plan.delta_load) if targets else None, loads)

    while len(active) > 1:
        best = None
        for n in sorted(active):
            targets = feasible_offload_targets(n, loads, neighbors[n], plan.delta_load, active - {n})
            if not targets:
                continue
            impact = network_impact(n, loads, neighbors[n], plan.delta_load, active - {n})
            if best is None or impact < best[0]:
                best = (impact, n, targets)
        if best is None:
            break
        _, n, targets = best
        target = _best_target(n, targets, loads, plan.delta_load)
        active.discard(n)
        _switch_off(plan, n, target, loads)
    return plan


def select_random_switch_off(
    cluster: Sequence[int],
    loads: Mapping[int, float],
    neighbors: Mapping[int, Iterable[int]],
    rng: np.random.Generator,
    forced_off: Iterable[int] = (),
) -> ClusterSlotPlan:
    """Baseline planner: one random station hands its traffic to its least-loaded feasible neighbour."""
    plan = ClusterSlotPlan(host={n: n for n in cluster})
    members = sorted(cluster)
    forced = [n for n in members if n in set(forced_off)]
    if len(forced) == len(members):
        forced = forced[1:]
    active = set(members) - set(forced)
    for n in forced:
        targets = feasible_offload_targets(n, loads, neighbors[n], plan.delta_load, active)
        target = min(targets, key=lambda j: (_effective(j, loads, plan.delta_load), j)) if targets else None
        _switch_off(plan, n, target, loads)
    if len(active) > 1:
        cands = [
            n
            for n in sorted(active)
            if feasible_offload_targets(n, loads, neighbors[n], plan.delta_load, active - {n})
        ]
        if cands:
            n = cands[int(rng.integers(len(cands)))]
            targets = feasible_offload_targets(n, loads, neighbors[n], plan.delta_load, active - {n})
            target = min(targets, key=lambda j: (_effective(j, loads, plan.delta_load), j))
            _switch_off(plan, n, target, loads)
    return plan


# ---------------------------------------------------------------- per-slot execution


@dataclass
class SlotRecord:
    slot: int
    bs_id: int
    theta_bs: float
    theta_mec: float
    theta_tx: float
    theta_tot: float
    q: float
    beta: float  # buffer level at the end of the slot
    served_mb: float
    dropped_mb: float
    zeta: float
    beta_start: float = 0.0
    harvest: float = 0.0
    discarded: float = 0.0
    deficit: float = 0.0
    gamma_mb: float = 0.0  # own delay-sensitive workload
    handed_out_mb: float = 0.0
    baseline_tot: float = 0.0
    m_count: int = 0
    per_vm: tuple = ()
    switched_off: bool = False
    nodes: int = 0
    node_bound: int = 0


@dataclass
class SimContext:
    """Everything a slot needs besides the mutable site states."""

    params: SiteParams
    search: SearchConfig
    weights: CostWeights
    policy: str
    loads: Sequence[TrafficTrace]
    energies: Sequence[EnergyTrace]
    load_forecasters: Sequence
    energy_forecasters: Sequence
    offset: int = 0  # trace index of simulated slot 0
    seed: int = 0
    neighbors: Optional[List[Set[int]]] = None
    commitment_slots: int = 1

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise DomainError(f"unknown policy {self.policy!r}")

    def rng(self, *stream) -> np.random.Generator:
        return np.random.default_rng([self.seed, *stream])


def _decide(ctx: SimContext, n: int, state: SiteState, t_abs: int, extra_mb: float):
    """Per-site control decision on the forecast load plus handed-over traffic."""
    if ctx.policy == "none":
        return None, 0, 0
    horizon = ctx.search.horizon
    l_hat = forecasts(ctx.load_forecasters[n], t_abs, horizon)
    if ctx.policy == "enaam":
        h_hat = forecasts(ctx.energy_forecasters[n], t_abs, horizon)
        l_hat[0] += extra_mb
        res = enaam_search(state, l_hat, h_hat, ctx.search, ctx.params, ctx.weights)
        return res.action, res.nodes, res.bound
    l_next = ctx.load_forecasters[n].predict(t_abs - 1, 2) if horizon >= 2 else l_hat[0]
    action = deta_r_step(
        state, l_hat[0] + extra_mb, l_next + extra_mb, ctx.rng(1, n, t_abs), ctx.params
    )
    return action, 0, 0


def _realize(
    ctx: SimContext,
    n: int,
    state: SiteState,
    action: Optional[ControlAction],
    gamma_real: float,
    t: int,
    own_gamma: float,
    switched_off: bool = False,
):
    t_abs = ctx.offset + t
    h = float(ctx.energies[n].values[t_abs])
    params = ctx.params
    baseline = no_management_breakdown(float(ctx.loads[n].values[t_abs]), params)
    if action is None:
        # unmanaged: radio on, all VMs at full rate, everything served
        bd = no_management_breakdown(gamma_real / DELAY_SENSITIVE_SHARE, params)
        step = step_battery(state.beta, h, bd.theta_tot, params.battery)
        nxt = SiteState(params.vm.m_cap, step.beta_next, 1.0)
        served, m, per_vm, zeta = gamma_real, params.vm.m_cap, (), 1.0
    else:
        served = min(action.b_served, gamma_real)
        realized = ControlAction(action.zeta, served, action.m_count, action.per_vm)
        nxt, bd, step = transition(state, realized, h, params)
        m, per_vm, zeta = action.m_count, action.per_vm, action.zeta
    rec = SlotRecord(
        slot=t,
        bs_id=n,
        theta_bs=bd.theta_bs,
        theta_mec=bd.theta_mec,
        theta_tx=bd.theta_tx,
        theta_tot=bd.theta_tot,
        q=step.q,
        beta=step.beta_next,
        served_mb=served,
        dropped_mb=gamma_real - served,
        zeta=zeta,
        beta_start=state.beta,
        harvest=h,
        discarded=step.discarded,
        deficit=step.deficit,
        gamma_mb=own_gamma,
        baseline_tot=baseline.theta_tot,
        m_count=m,
        per_vm=per_vm,
        switched_off=switched_off,
    )
    return nxt, rec


def run_slot(
    cluster: Sequence[int],
    states: Dict[int, SiteState],
    ctx: SimContext,
    t: int,
    commitments: Optional[Dict[int, int]] = None,
) -> Tuple[Dict[int, SiteState], List[SlotRecord]]:
    """Advance one cluster by one slot. ``commitments`` (BS -> remaining off-slots) is updated in place."""
    commitments = {} if commitments is None else commitments
    t_abs = ctx.offset + t
    l_max = ctx.params.l_max
    members = sorted(cluster)
    real_load = {n: float(ctx.loads[n].values[t_abs]) for n in members}

    if len(members) > 1 and ctx.policy != "none":
        neighbors = {n: [j for j in ctx.neighbors[n] if j in set(members)] for n in members}
        est = {
            n: min(1.0, max(0.0, ctx.load_forecasters[n].predict(t_abs - 1, 1) / l_max))
            for n in members
        }
        forced = [n for n in members if commitments.get(n, 0) > 0]
        if ctx.policy == "enaam":
            plan = select_switch_offs(members, est, neighbors, forced_off=forced)
        else:
            plan = select_random_switch_off(members, est, neighbors, ctx.rng(2, members[0], t_abs), forced_off=forced)
    else:
        plan = ClusterSlotPlan(host={n: n for n in members})

    for n in list(commitments):
        if n in set(members):
            commitments[n] -= 1
            if commitments[n] <= 0:
                del commitments[n]
    for n in plan.off_set:
        if n not in commitments and ctx.commitment_slots > 1:
            commitments[n] = ctx.commitment_slots - 1

    hosted: Dict[int, List[int]] = {n: [] for n in members}
    for src, h in plan.host.items():
        if h is not None:
            hosted[h].append(src)

    next_states, records = {}, []
    for n in members:
        own_gamma = DELAY_SENSITIVE_SHARE * real_load[n]
        if n in plan.off_set:
            action = sleep_action(ctx.params)
            nxt, rec = _realize(ctx, n, states[n], action, 0.0, t, own_gamma, switched_off=True)
            if plan.host[n] is None:
                rec.dropped_mb = own_gamma
            else:
                rec.handed_out_mb = own_gamma
        else:
            extra_mb = plan.delta_load.get(n, 0.0) * l_max
            action, nodes, bound = _decide(ctx, n, states[n], t_abs, extra_mb)
            gamma_real = DELAY_SENSITIVE_SHARE * sum(real_load[j] for j in hosted[n])
            nxt, rec = _realize(ctx, n, states[n], action, gamma_real, t, own_gamma)
            rec.nodes, rec.node_bound = nodes, bound
        next_states[n] = nxt
        records.append(rec)
    return next_states, records


# ---------------------------------------------------------------- metrics


def energy_savings(managed: Sequence[float], baseline: Sequence[float]) -> np.ndarray:
    m = np.asarray(managed, dtype=float)
    b = np.asarray(baseline, dtype=float)
    if m.shape != b.shape:
        raise DomainError("managed and baseline series must have equal length")
    if np.any(b <= 0):
        raise DomainError("baseline energy must be positive")
    return 100.0 * (1.0 - m / b)


@dataclass
class MetricsReport:
    records: List[SlotRecord]
    n_bs: int
    slots: int

    def _per_slot(self, attr) -> np.ndarray:
        out = np.zeros(self.slots)
        for r in self.sorted_records():
            out[r.slot] += getattr(r, attr)
        return out

    @property
    def managed(self) -> np.ndarray:
        return self._per_slot("theta_tot")

    @property
    def baseline(self) -> np.ndarray:
        return self._per_slot("baseline_tot")

    @property
    def savings(self) -> np.ndarray:
        if self.slots == 0:
            return np.zeros(0)
        return energy_savings(self.managed, self.baseline)

    @property
    def mean_savings_percent(self) -> float:
        s = self.savings
        return float(s.mean()) if len(s) else 0.0

    def summary(self) -> dict:
        q = self._per_slot("q")
        return {
            "n_bs": self.n_bs,
            "slots": self.slots,
            "mean_savings_percent": self.mean_savings_percent,
            "mean_grid_purchase_j": float(q.mean()) if self.slots else 0.0,
            "total_managed_j": float(self.managed.sum()),
            "total_baseline_j": float(self.baseline.sum()),
            "served_mb": float(sum(r.served_mb for r in self.records)),
            "dropped_mb": float(sum(r.dropped_mb for r in self.records)),
            "sleep_fraction": (
                float(np.mean([r.zeta != 1 for r in self.records])) if self.records else 0.0
            ),
        }

    def sorted_records(self) -> List[SlotRecord]:
        return sorted(self.records, key=lambda r: (r.slot, r.bs_id))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.sorted_records():
                w.writerow([getattr(r, c) for c in CSV_COLUMNS])

    def write_summary(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def run_clusters(
    partition_clusters: Sequence[Sequence[int]],
    ctx: SimContext,
    slots: int,
    initial: Dict[int, SiteState],
) -> MetricsReport:
    states = dict(initial)
    commitments: Dict[int, int] = {}
    records: List[SlotRecord] = []
    for t in range(slots):
        for cluster in partition_clusters:
            nxt, recs = run_slot(cluster, states, ctx, t, commitments)
            states.update(nxt)
            records.extend(recs)
    return MetricsReport(records, n_bs=len(initial), slots=slots)


def run_single_site(n: int, ctx: SimContext, slots: int, initial: SiteState) -> List[SlotRecord]:
    """Plain receding-horizon loop for one isolated site."""
    state = initial
    records = []
    for t in range(slots):
        t_abs = ctx.offset + t
        action, nodes, bound = _decide(ctx, n, state, t_abs, 0.0)
        own_gamma = DELAY_SENSITIVE_SHARE * float(ctx.loads[n].values[t_abs])
        state, rec = _realize(ctx, n, state, action, own_gamma, t, own_gamma)
        rec.nodes, rec.node_bound = nodes, bound
        records.append(rec)
    return records


def run_independent(ctx: SimContext, slots: int, initial: Dict[int, SiteState]) -> MetricsReport:
    records = []
    for n in sorted(initial):
        records.extend(run_single_site(n, ctx, slots, initial[n]))
    return MetricsReport(records, n_bs=len(initial), slots=slots)


# ---------------------------------------------------------------- scenario runner


@dataclass
class Scenario:
    """Materialized inputs of a run: traces, topology, partition, forecasters."""

    ctx: SimContext
    clusters: List[Tuple[int, ...]]
    initial: Dict[int, SiteState]
    slots: int


def build_scenario(cfg) -> Scenario:
    from greenedge.cluster import adjacency, grid_topology, kmeans_partition, load_topology_csv
    from greenedge.forecast import fit
    from greenedge.traces import (
        load_trace_csv,
        synthesize_energy_profile,
        synthesize_load_profile,
    )

    params = cfg.site_params()
    total = cfg.history_slots + cfg.slots
    rng = np.random.default_rng([cfg.seed, 0])
    load_ids = rng.integers(1, 5, size=cfg.n_bs)
    energy_ids = rng.integers(1, 4, size=cfg.n_bs)
    loads, energies = [], []
    for n in range(cfg.n_bs):
        if cfg.load_csv:
            tr = load_trace_csv(cfg.load_csv.format(bs=n), "load", bs_id=n, l_max=cfg.l_max)
        else:
            pid = cfg.load_profile or int(load_ids[n])
            tr = synthesize_load_profile(pid, cfg.seed * 1000 + n, total, cfg.l_max, bs_id=n)
        if cfg.energy_csv:
            er = load_trace_csv(cfg.energy_csv.format(bs=n), "energy", bs_id=n)
        else:
            pid = cfg.energy_profile or int(energy_ids[n])
            er = synthesize_energy_profile(pid, cfg.seed * 1000 + n, total, cfg.beta_max, bs_id=n)
        if len(tr) < total or len(er) < total:
            raise DomainError(f"traces of BS {n} shorter than history_slots + slots = {total}")
        loads.append(tr)
        energies.append(er)

    if cfg.topology_csv:
        topo = load_topology_csv(cfg.topology_csv, e_d=cfg.e_d, sigma_d=cfg.sigma_d)
        if topo.n != cfg.n_bs:
            raise DomainError(f"topology has {topo.n} stations, config says {cfg.n_bs}")
    else:
        topo = grid_topology(cfg.n_bs, cfg.grid_spacing, cfg.e_d, cfg.sigma_d)
    partition = kmeans_partition(topo, cfg.n_clusters, seed=cfg.seed)

    spec = cfg.forecaster_spec()
    lf = [fit(spec, tr.values, seed=cfg.seed, train_end=cfg.history_slots) for tr in loads]
    ef = [fit(spec, er.values, seed=cfg.seed, train_end=cfg.history_slots) for er in energies]

    ctx = SimContext(
        params=params,
        search=cfg.search_config(),
        weights=cfg.weights(),
        policy=cfg.policy,
        loads=loads,
        energies=energies,
        load_forecasters=lf,
        energy_forecasters=ef,
        offset=cfg.history_slots,
        seed=cfg.seed,
        neighbors=adjacency(topo),
        commitment_slots=cfg.commitment_slots,
    )
    beta0 = cfg.beta_init_fraction * cfg.beta_max
    initial = {n: SiteState(m_active=cfg.m_min, beta=beta0, zeta_prev=1.0) for n in range(cfg.n_bs)}
    return Scenario(ctx, list(partition.clusters), initial, cfg.slots)


def run_simulation(cfg) -> MetricsReport:
    """Form clusters once, then run every cluster slot by slot."""
    sc = build_scenario(cfg)
    return run_clusters(sc.clusters, sc.ctx, sc.slots, sc.initial)
