"""Single-site decision engine.

The state of a site is ``(M(t), beta(t))`` plus the previous radio mode. A
control action fixes the radio mode, the delay-sensitive load served at the
edge and the per-VM workload/rate allocation. ENAAM is a limited-lookahead
tree search over quantized actions; states reached at the same depth are
merged on a ``(VM count, battery bin, radio mode)`` grid keeping the cheapest
representative, which keeps the search linear in the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from greenedge.energy import (
    BatteryParams,
    EnergyBreakdown,
    EnergyParams,
    VmParams,
    load_factor,
    required_rate,
    step_battery,
    total_energy,
    vm_op_energy,
)
from greenedge.errors import ConfigError, DomainError, InfeasibleError
from greenedge.traces import DEFAULT_L_MAX, DELAY_SENSITIVE_SHARE


@dataclass(frozen=True)
class SiteParams:
    energy: EnergyParams = field(default_factory=EnergyParams)
    battery: BatteryParams = field(default_factory=BatteryParams)
    l_low: float = 4.0  # MB
    l_max: float = DEFAULT_L_MAX

    @property
    def vm(self) -> VmParams:
        return self.energy.vm


@dataclass(frozen=True)
class SiteState:
    m_active: int
    beta: float
    zeta_prev: float = 1.0


@dataclass(frozen=True)
class VmAllocation:
    gamma: float  # MB
    f: float  # MB/s
    alpha: float

    @property
    def mu(self) -> float:
        return self.gamma / self.f if self.f > 0 else 0.0


@dataclass(frozen=True)
class ControlAction:
    zeta: float
    b_served: float
    m_count: int
    per_vm: Tuple[VmAllocation, ...] = ()

    @property
    def alphas(self) -> Tuple[float, ...]:
        return tuple(v.alpha for v in self.per_vm)

    @property
    def active(self) -> bool:
        return self.zeta == 1


@dataclass(frozen=True)
class CostWeights:
    eta: float = 0.0

    def __post_init__(self):
        if not 0 <= self.eta <= 1:
            raise ConfigError(f"must lie in [0, 1], got {self.eta}", field="eta")


@dataclass(frozen=True)
class SearchConfig:
    horizon: int = 3
    n_b_points: int = 5
    n_beta_levels: int = 64

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("must be >= 1", field="horizon")
        if self.n_b_points < 2:
            raise ConfigError("must be >= 2", field="n_b_points")
        if self.n_beta_levels < 2:
            raise ConfigError("must be >= 2", field="n_beta_levels")


@dataclass
class SearchResult:
    action: ControlAction
    cost: float
    nodes: int  # (state, action) expansions performed
    bound: int  # N_x * N_sigma * T for this call


def sleep_action(params: SiteParams) -> ControlAction:
    return ControlAction(zeta=params.energy.epsilon, b_served=0.0, m_count=0, per_vm=())


def vm_provision(gamma_hat: float, vm: VmParams) -> Tuple[int, Tuple[float, ...]]:
    """Number of VMs for a workload and the per-VM split.

    Every VM but the last is filled to ``gamma_max``; the last takes the rest.
    Workload beyond ``m_cap * gamma_max`` is not allocated.
    """
    if gamma_hat < 0:
        raise DomainError(f"workload must be non-negative, got {gamma_hat}")
    m = max(vm.m_min, min(vm.m_cap, math.ceil(gamma_hat / vm.gamma_max)))
    remaining = min(gamma_hat, m * vm.gamma_max)
    loads = []
    for _ in range(m):
        share = min(vm.gamma_max, remaining)
        loads.append(share)
        remaining -= share
    return m, tuple(loads)


def active_action(b: float, params: SiteParams) -> ControlAction:
    """Active-mode action serving ``b`` MB; raises InfeasibleError if a VM misses the deadline."""
    vm = params.vm
    m, loads = vm_provision(b, vm)
    per_vm = []
    for g in loads:
        f = required_rate(g, vm)
        per_vm.append(VmAllocation(gamma=g, f=f, alpha=load_factor(f, vm.f_max)))
    return ControlAction(zeta=1.0, b_served=sum(loads), m_count=m, per_vm=tuple(per_vm))


def cost(theta_tot: float, gamma: float, b_served: float, w: CostWeights) -> float:
    if b_served > gamma:
        raise DomainError(f"served load {b_served} exceeds the workload {gamma}")
    return (1.0 - w.eta) * theta_tot + w.eta * (gamma - b_served) ** 2


def lower_workload(vm: VmParams) -> float:
    """Smallest workload that rounds (half up) to the minimum VM count."""
    return (vm.m_min - 0.5) * vm.gamma_max


def _active_candidates(l_hat: float, n_points: int, params: SiteParams) -> List[ControlAction]:
    gamma_hat = DELAY_SENSITIVE_SHARE * l_hat
    g_low = lower_workload(params.vm)
    if gamma_hat < g_low:
        return []
    actions, seen = [], set()
    for b in np.linspace(g_low, gamma_hat, n_points):
        try:
            a = active_action(float(b), params)
        except InfeasibleError:
            continue
        if a.b_served not in seen:
            seen.add(a.b_served)
            actions.append(a)
    return actions


def feasibility_set(
    state: SiteState,
    l_hat: float,
    beta_pred: float,
    cfg: SearchConfig,
    params: SiteParams,
) -> List[ControlAction]:
    """Admissible actions for one slot of the lookahead.

    The radio sleeps when the buffer is predicted below ``beta_low`` or the
    load below ``l_low``. Otherwise the served load is quantized over
    ``[lower_workload, 0.8 * l_hat]``. If that interval is empty, or no point
    in it meets the processing deadline, the sleep action is the only one left.
    """
    if l_hat < 0:
        raise DomainError(f"forecast load must be non-negative, got {l_hat}")
    if beta_pred < params.battery.beta_low or l_hat < params.l_low:
        return [sleep_action(params)]
    return _active_candidates(l_hat, cfg.n_b_points, params) or [sleep_action(params)]


def transition(
    state: SiteState, action: ControlAction, h: float, params: SiteParams
) -> Tuple[SiteState, EnergyBreakdown, object]:
    """Apply one action for one slot; returns next state, energy breakdown and battery step."""
    switch_events = abs(action.m_count - state.m_active)
    fraction = min(1.0, action.b_served / params.l_max)
    bd = total_energy(
        action.zeta, fraction, action.alphas, switch_events, action.b_served, params.energy
    )
    step = step_battery(state.beta, h, bd.theta_tot, params.battery)
    return SiteState(action.m_count, step.beta_next, action.zeta), bd, step


def predict_next_state(
    state: SiteState, action: ControlAction, l_hat: float, h_hat: float, params: SiteParams
) -> SiteState:
    """Model of the site one slot ahead under forecast harvest ``h_hat``."""
    return transition(state, action, h_hat, params)[0]


def beta_bin(beta: float, n_levels: int, beta_max: float) -> int:
    return min(n_levels - 1, int(beta / beta_max * n_levels))


def tie_key(theta_tot: float, action: ControlAction) -> Tuple[float, float, int]:
    # lower energy, then more load served, then fewer VMs
    return (theta_tot, -action.b_served, action.m_count)


@dataclass
class _Node:
    state: SiteState
    cost: float
    first: Optional[ControlAction]
    first_key: Optional[tuple]

    @property
    def rank(self):
        return (self.cost, self.first_key)


def enaam_search(
    state: SiteState,
    l_hat: Sequence[float],
    h_hat: Sequence[float],
    cfg: SearchConfig,
    params: SiteParams,
    w: CostWeights,
) -> SearchResult:
    """Limited-lookahead search over ``T = len(l_hat)`` slots.

    ``l_hat[k]`` and ``h_hat[k]`` are the forecasts for slot ``t + k``.
    Returns the first action of the cheapest path.
    """
    horizon = len(l_hat)
    if horizon < 1 or len(h_hat) != horizon:
        raise DomainError("need equal-length, non-empty load and energy forecasts")
    bp, vm = params.battery, params.vm
    overhead = vm.switch_overhead
    sleep = sleep_action(params)

    frontier = {None: _Node(state, 0.0, None, None)}
    nodes = 0
    n_sigma = 1
    for k in range(horizon):
        gamma_hat = DELAY_SENSITIVE_SHARE * l_hat[k]
        if l_hat[k] < params.l_low:
            active = []
        else:
            active = _active_candidates(l_hat[k], cfg.n_b_points, params)
        n_sigma = max(n_sigma, len(active) or 1)
        # terms of theta_tot that do not depend on the origin state
        terms = {}
        for a in active + [sleep]:
            fraction = min(1.0, a.b_served / params.l_max)
            # same summation order as energy.total_energy
            terms[id(a)] = (
                total_energy(a.zeta, fraction, a.alphas, 0, a.b_served, params.energy).theta_bs,
                sum(vm_op_energy(x, vm) for x in a.alphas),
                total_energy(a.zeta, fraction, (), 0, a.b_served, params.energy).theta_tx,
            )
        new = {}
        for node in frontier.values():
            s = node.state
            actions = active if (active and s.beta >= bp.beta_low) else [sleep]
            for a in actions:
                nodes += 1
                theta_bs, op, theta_tx = terms[id(a)]
                theta_mec = op + abs(a.m_count - s.m_active) * overhead
                theta_tot = theta_bs + theta_mec + theta_tx
                nxt = SiteState(a.m_count, step_battery(s.beta, h_hat[k], theta_tot, bp).beta_next, a.zeta)
                c = node.cost + cost(theta_tot, gamma_hat, a.b_served, w)
                if k == 0:
                    first, first_key = a, tie_key(theta_tot, a)
                else:
                    first, first_key = node.first, node.first_key
                key = (nxt.m_active, beta_bin(nxt.beta, cfg.n_beta_levels, bp.beta_max), nxt.zeta_prev)
                cand = _Node(nxt, c, first, first_key)
                incumbent = new.get(key)
                if incumbent is None or cand.rank < incumbent.rank:
                    new[key] = cand
        frontier = new
    best = min(frontier.values(), key=lambda n: n.rank)
    n_x = (vm.m_cap + 1) * cfg.n_beta_levels * 2
    return SearchResult(best.first, best.cost, nodes, n_x * n_sigma * horizon)


def forecasts(forecaster, t: int, horizon: int) -> List[float]:
    """Forecasts for slots ``t .. t+horizon-1`` made at the start of slot ``t``."""
    return [forecaster.predict(t - 1, k) for k in range(1, horizon + 1)]


def enaam_step(
    state: SiteState,
    load_forecaster,
    energy_forecaster,
    t: int,
    cfg: SearchConfig,
    params: SiteParams,
    w: CostWeights,
) -> ControlAction:
    l_hat = forecasts(load_forecaster, t, cfg.horizon)
    h_hat = forecasts(energy_forecaster, t, cfg.horizon)
    return enaam_search(state, l_hat, h_hat, cfg, params, w).action


def deta_r_step(
    state: SiteState,
    l_hat_t: float,
    l_hat_t1: float,
    rng_seed: Union[int, np.random.Generator, Sequence[int]],
    params: SiteParams,
) -> ControlAction:
    """Randomized baseline: serve a random share of the forecast workload.

    The share is drawn from [0.6, 1] when the load forecast is rising and from
    (0, 0.6) otherwise.
    """
    if state.beta < params.battery.beta_low or l_hat_t < params.l_low:
        return sleep_action(params)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    if l_hat_t1 - l_hat_t > 0:
        fraction = rng.uniform(0.6, 1.0)
    else:
        fraction = rng.uniform(0.0, 0.6)
        while fraction == 0.0:
            fraction = rng.uniform(0.0, 0.6)
    return active_action(fraction * DELAY_SENSITIVE_SHARE * l_hat_t, params)


def no_management_breakdown(l: float, params: SiteParams) -> EnergyBreakdown:
    """Site dimensioned for peak capacity: radio on, every VM at full rate, all workload served."""
    if l < 0:
        raise DomainError(f"load must be non-negative, got {l}")
    vm = params.vm
    return total_energy(
        1.0,
        min(1.0, l / params.l_max),
        (1.0,) * vm.m_cap,
        0,
        DELAY_SENSITIVE_SHARE * l,
        params.energy,
    )


def no_management_energy(l: float, params: SiteParams) -> float:
    return no_management_breakdown(l, params).theta_tot
