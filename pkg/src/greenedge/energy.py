"""Per-slot energy accounting for a communication site and its energy buffer.

All quantities are joules per slot. Powers given in watts are multiplied by
the slot duration where they enter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

from greenedge.errors import ConfigError, ConstraintViolation, DomainError, InfeasibleError


@dataclass(frozen=True)
class VmParams:
    rate_set: Tuple[float, ...] = (0.0, 4.0, 8.0, 12.0, 16.0, 20.0)  # MB/s
    theta_idle_vm: float = 4.0
    theta_max_vm: float = 10.0
    switch_overhead: float = 20.0  # J per VM on/off event
    gamma_max: float = 10.0  # MB
    delta: float = 0.8  # s
    m_cap: int = 27
    m_min: int = 1

    def __post_init__(self):
        object.__setattr__(self, "rate_set", tuple(float(f) for f in self.rate_set))
        rates = self.rate_set
        if not rates or rates[0] != 0.0:
            raise ConfigError("rate set must start at 0", field="rate_set")
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ConfigError("rate set must be strictly ascending", field="rate_set")
        if len(rates) < 2:
            raise ConfigError("rate set needs a positive rate", field="rate_set")
        if not 0 <= self.theta_idle_vm <= self.theta_max_vm:
            raise ConfigError("need 0 <= theta_idle_vm <= theta_max_vm", field="theta_idle_vm")
        if self.switch_overhead < 0:
            raise ConfigError("must be non-negative", field="switch_overhead")
        if self.delta <= 0:
            raise ConfigError("must be positive", field="delta")
        if not 1 <= self.m_min <= self.m_cap:
            raise ConfigError("need 1 <= m_min <= m_cap", field="m_min")
        if not 0 < self.gamma_max <= self.f_max * self.delta:
            raise ConfigError(
                f"must lie in (0, f_max*delta = {self.f_max * self.delta}]", field="gamma_max"
            )

    @property
    def f_max(self) -> float:
        return self.rate_set[-1]


@dataclass(frozen=True)
class EnergyParams:
    theta0: float = 10.6  # W
    epsilon: float = 0.3
    p_tx_max: float = 1.0  # W
    theta_idle_nic: float = 3.0  # J per slot
    theta_data: float = 6.0  # J per MB
    vm: VmParams = field(default_factory=VmParams)
    tau: float = 1800.0

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ConfigError("must lie in (0, 1)", field="epsilon")
        for name in ("theta0", "p_tx_max", "theta_idle_nic", "theta_data"):
            if getattr(self, name) < 0:
                raise ConfigError("must be non-negative", field=name)
        if self.tau <= 0:
            raise ConfigError("must be positive", field="tau")


@dataclass(frozen=True)
class BatteryParams:
    beta_max: float = 490_000.0
    beta_low: float = 147_000.0
    beta_up: float = 343_000.0

    def __post_init__(self):
        if not 0 < self.beta_low < self.beta_up < self.beta_max:
            raise ConfigError("need 0 < beta_low < beta_up < beta_max", field="beta_low")


@dataclass(frozen=True)
class EnergyBreakdown:
    theta_bs: float
    theta_mec: float
    theta_tx: float
    theta_tot: float


@dataclass(frozen=True)
class BatteryStep:
    beta_next: float
    q: float  # grid purchase
    discarded: float = 0.0  # harvest lost at the capacity clamp
    deficit: float = 0.0  # shortfall absorbed at the empty clamp

    def __iter__(self):
        # unpacks as (beta_next, q)
        return iter((self.beta_next, self.q))


def load_factor(f: float, f_max: float) -> float:
    if not 0 <= f <= f_max:
        raise DomainError(f"rate {f} outside [0, {f_max}]")
    return (f / f_max) ** 2


def vm_op_energy(alpha: float, vm: VmParams) -> float:
    if not 0 <= alpha <= 1:
        raise DomainError(f"load factor {alpha} outside [0, 1]")
    return vm.theta_idle_vm + alpha * (vm.theta_max_vm - vm.theta_idle_vm)


def mec_energy(alphas: Sequence[float], switch_events: int, vm: VmParams) -> float:
    """Server energy: operating energy of every running VM plus on/off overheads."""
    if len(alphas) > vm.m_cap:
        raise ConstraintViolation(f"{len(alphas)} VMs exceed the cap of {vm.m_cap}")
    if switch_events < 0:
        raise DomainError("switch_events must be non-negative")
    return sum(vm_op_energy(a, vm) for a in alphas) + switch_events * vm.switch_overhead


def bs_energy(zeta: float, served_fraction: float, p: EnergyParams) -> float:
    """Radio energy: scaled operating energy plus a transmit term linear in served load.

    The transmit term is only drawn in active mode.
    """
    if not 0 <= served_fraction <= 1:
        raise DomainError(f"served fraction {served_fraction} outside [0, 1]")
    if zeta != 1 and zeta != p.epsilon:
        raise DomainError(f"radio mode must be 1 or epsilon={p.epsilon}, got {zeta}")
    theta_load = served_fraction * p.p_tx_max * p.tau if zeta == 1 else 0.0
    return zeta * p.theta0 * p.tau + theta_load


def tx_energy(b: float, p: EnergyParams) -> float:
    if b < 0:
        raise DomainError(f"exchanged data must be non-negative, got {b}")
    return p.theta_idle_nic + p.theta_data * b


def total_energy(
    zeta: float,
    served_fraction: float,
    alphas: Sequence[float],
    switch_events: int,
    b: float,
    p: EnergyParams,
) -> EnergyBreakdown:
    theta_bs = bs_energy(zeta, served_fraction, p)
    theta_mec = mec_energy(alphas, switch_events, p.vm)
    theta_tx = tx_energy(b, p)
    return EnergyBreakdown(theta_bs, theta_mec, theta_tx, theta_bs + theta_mec + theta_tx)


def required_rate(gamma: float, vm: VmParams) -> float:
    """Slowest non-zero rate in the rate set that processes ``gamma`` MB within ``delta``."""
    if gamma < 0:
        raise DomainError(f"workload must be non-negative, got {gamma}")
    if gamma == 0:
        return 0.0
    for f in vm.rate_set[1:]:
        if gamma / f <= vm.delta:
            return f
    raise InfeasibleError(
        f"workload {gamma} MB cannot be processed within {vm.delta} s at f_max={vm.f_max}"
    )


def step_battery(beta: float, h: float, theta_tot: float, bp: BatteryParams) -> BatteryStep:
    """Advance the energy buffer by one slot.

    Below ``beta_up`` the grid tops the buffer up to ``beta_up`` before harvest and
    consumption are applied; the result is clamped to ``[0, beta_max]``.
    """
    if not 0 <= beta <= bp.beta_max:
        raise DomainError(f"buffer level {beta} outside [0, {bp.beta_max}]")
    if h < 0 or theta_tot < 0:
        raise DomainError("harvest and consumption must be non-negative")
    q = max(0.0, bp.beta_up - beta)
    # beta + q computed as max() so that every topped-up state lands exactly on beta_up
    raw = max(beta, bp.beta_up) + h - theta_tot
    if raw > bp.beta_max:
        return BatteryStep(bp.beta_max, q, discarded=raw - bp.beta_max)
    if raw < 0:
        return BatteryStep(0.0, q, deficit=-raw)
    return BatteryStep(raw, q)
