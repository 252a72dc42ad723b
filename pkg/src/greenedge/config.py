"""Scenario configuration: defaults, YAML round-trip and field-level validation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from greenedge.controller import CostWeights, SearchConfig, SiteParams
from greenedge.energy import BatteryParams, EnergyParams, VmParams
from greenedge.errors import ConfigError
from greenedge.forecast import KINDS, ForecasterSpec

POLICY_NAMES = ("enaam", "deta_r", "none")


@dataclass
class ScenarioConfig:
    # network and VMs
    n_bs: int = 24
    m_cap: int = 27
    m_min: int = 1
    tau: float = 1800.0
    theta0: float = 10.6
    epsilon: float = 0.3
    p_tx_max: float = 1.0
    switch_overhead: float = 20.0
    gamma_max: float = 10.0
    delta: float = 0.8
    theta_idle_nic: float = 3.0
    theta_data: float = 6.0
    rate_set: List[float] = field(default_factory=lambda: [0.0, 4.0, 8.0, 12.0, 16.0, 20.0])
    theta_idle_vm: float = 4.0
    theta_max_vm: float = 10.0
    # energy buffer
    beta_max: float = 490_000.0
    beta_low_fraction: float = 0.3
    beta_up_fraction: float = 0.7
    beta_init_fraction: float = 0.7
    l_low: float = 4.0
    # controller
    policy: str = "enaam"
    eta: float = 0.0
    horizon: int = 3
    n_b_points: int = 5
    n_beta_levels: int = 64
    forecaster: str = "seasonal_persistence"
    # clustering
    n_clusters: int = 4
    e_d: float = 80.0
    sigma_d: float = 30.0
    grid_spacing: float = 60.0
    commitment_slots: int = 1
    # traces and run length
    slots: int = 336
    history_slots: int = 96
    l_max: float = 30.0
    load_profile: Optional[int] = None  # None: each BS draws one of 1..4
    energy_profile: Optional[int] = None  # None: each BS draws one of 1..3
    load_csv: Optional[str] = None  # path pattern with {bs}
    energy_csv: Optional[str] = None
    topology_csv: Optional[str] = None
    seed: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(msg, field=name)

        for name in ("n_bs", "m_cap", "m_min", "horizon", "n_b_points", "n_beta_levels",
                     "n_clusters", "commitment_slots", "slots", "history_slots", "seed"):
            v = getattr(self, name)
            need(isinstance(v, int) and not isinstance(v, bool), name, f"must be an integer, got {v!r}")
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.type in ("float", "Optional[float]") and v is not None:
                need(isinstance(v, (int, float)) and not isinstance(v, bool), f.name,
                     f"must be a number, got {v!r}")
        need(self.n_bs >= 1, "n_bs", "must be >= 1")
        need(self.slots >= 0, "slots", "must be >= 0")
        need(0 <= self.eta <= 1, "eta", f"must lie in [0, 1], got {self.eta}")
        need(self.policy in POLICY_NAMES, "policy", f"must be one of {POLICY_NAMES}")
        need(self.forecaster in KINDS, "forecaster", f"must be one of {KINDS}")
        need(1 <= self.n_clusters <= self.n_bs, "n_clusters", "must lie in [1, n_bs]")
        need(self.commitment_slots >= 1, "commitment_slots", "must be >= 1")
        need(self.l_max > 0, "l_max", "must be positive")
        need(self.l_low >= 0, "l_low", "must be non-negative")
        need(0 < self.beta_low_fraction < self.beta_up_fraction < 1, "beta_low_fraction",
             "need 0 < beta_low_fraction < beta_up_fraction < 1")
        need(0 <= self.beta_init_fraction <= 1, "beta_init_fraction", "must lie in [0, 1]")
        need(self.grid_spacing > 0, "grid_spacing", "must be positive")
        need(self.load_profile is None or self.load_profile in (1, 2, 3, 4), "load_profile",
             "must be 1..4 or null")
        need(self.energy_profile is None or self.energy_profile in (1, 2, 3), "energy_profile",
             "must be 1..3 or null")
        need(self.history_slots >= 96, "history_slots", "must cover two days (>= 96)")
        # delegate the physical-parameter checks to the value types
        self.site_params()
        self.search_config()

    # ---- derived parameter objects

    def site_params(self) -> SiteParams:
        vm = VmParams(
            rate_set=tuple(self.rate_set),
            theta_idle_vm=self.theta_idle_vm,
            theta_max_vm=self.theta_max_vm,
            switch_overhead=self.switch_overhead,
            gamma_max=self.gamma_max,
            delta=self.delta,
            m_cap=self.m_cap,
            m_min=self.m_min,
        )
        energy = EnergyParams(
            theta0=self.theta0,
            epsilon=self.epsilon,
            p_tx_max=self.p_tx_max,
            theta_idle_nic=self.theta_idle_nic,
            theta_data=self.theta_data,
            vm=vm,
            tau=self.tau,
        )
        battery = BatteryParams(
            beta_max=self.beta_max,
            beta_low=self.beta_low_fraction * self.beta_max,
            beta_up=self.beta_up_fraction * self.beta_max,
        )
        return SiteParams(energy=energy, battery=battery, l_low=self.l_low, l_max=self.l_max)

    def search_config(self) -> SearchConfig:
        return SearchConfig(self.horizon, self.n_b_points, self.n_beta_levels)

    def weights(self) -> CostWeights:
        return CostWeights(self.eta)

    def forecaster_spec(self) -> ForecasterSpec:
        return ForecasterSpec(kind=self.forecaster, horizon=max(2, self.horizon))

    # ---- serialization

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "ScenarioConfig":
        data = dict(data or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError("unknown configuration key", field=unknown[0])
        if "policy" in data and isinstance(data["policy"], str):
            data["policy"] = normalize_policy(data["policy"])
        for name, value in data.items():
            f = next(f for f in dataclasses.fields(cls) if f.name == name)
            if f.type == "float" and isinstance(value, int) and not isinstance(value, bool):
                data[name] = float(value)
        return cls(**data)


def normalize_policy(name: str) -> str:
    return name.replace("-", "_").lower()


def load_config(path: Union[str, Path, None]) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    return ScenarioConfig.from_dict(data)


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def save_config(cfg: ScenarioConfig, path: Union[str, Path]) -> None:
    Path(path).write_text(dump_config(cfg), encoding="utf-8")
