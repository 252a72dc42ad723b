"""Per-BS traffic-load and harvested-energy time series.

Synthetic generators stand in for measured operator and solar datasets. They
are pure functions of ``(profile_id, seed, slots, scale)``; their contract is
a set of shape properties (overnight trough, daytime peaks, zero harvest at
night), not particular values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from greenedge.errors import ConfigError, DomainError, TraceParseError, TraceValidationError

SLOT_DURATION = 1800.0  # seconds
SLOTS_PER_DAY = int(round(86400 / SLOT_DURATION))
DEFAULT_L_MAX = 30.0  # MB per slot per BS
DELAY_SENSITIVE_SHARE = 0.8
NOISE_AMPLITUDE = 0.05

# (floor, [(centre hour, amplitude, width hours), ...]) on a 24 h circle.
_LOAD_SHAPES = {
    1: (0.06, [(13.0, 0.45, 3.0), (20.5, 0.85, 2.5)]),
    2: (0.05, [(10.5, 0.80, 2.0), (16.0, 0.75, 2.0)]),
    3: (0.08, [(13.5, 0.90, 3.5)]),
    4: (0.10, [(18.0, 0.50, 3.0), (23.0, 0.70, 2.0)]),
}

# (sunrise hour, sunset hour, fraction of the buffer capacity harvested per day)
_SOLAR_SHAPES = {
    1: (6.0, 20.0, 1.0),
    2: (7.0, 19.0, 0.8),
    3: (8.0, 17.0, 0.6),
}


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TrafficTrace:
    """Offered load ``L_n(t)`` in MB per slot."""

    bs_id: int
    values: np.ndarray
    l_max: float = DEFAULT_L_MAX
    slot_duration: float = SLOT_DURATION

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.slot_duration != SLOT_DURATION:
            raise TraceValidationError(
                f"slot duration must be {SLOT_DURATION} s, got {self.slot_duration}"
            )
        if self.l_max <= 0:
            raise TraceValidationError("l_max must be positive")
        if np.any(self.values < 0) or np.any(self.values > self.l_max):
            raise TraceValidationError(f"load values must lie in [0, {self.l_max}]")

    def __len__(self):
        return len(self.values)

    def normalized(self) -> np.ndarray:
        return self.values / self.l_max


@dataclass(frozen=True)
class EnergyTrace:
    """Harvested energy ``H_n(t)`` in joules per slot."""

    bs_id: int
    values: np.ndarray
    slot_duration: float = SLOT_DURATION

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.slot_duration != SLOT_DURATION:
            raise TraceValidationError(
                f"slot duration must be {SLOT_DURATION} s, got {self.slot_duration}"
            )
        if np.any(self.values < 0):
            raise TraceValidationError("harvested energy must be non-negative")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class WorkloadSplit:
    gamma: float  # delay-sensitive MB, processed at the edge
    gamma_prime: float  # delay-tolerant MB


def split_workload(l: float) -> WorkloadSplit:
    if l < 0:
        raise DomainError(f"load must be non-negative, got {l}")
    gamma = DELAY_SENSITIVE_SHARE * l
    return WorkloadSplit(gamma=gamma, gamma_prime=l - gamma)


def _slot_hours(slots: int) -> np.ndarray:
    # hour of day at each slot midpoint
    return ((np.arange(slots) + 0.5) * SLOT_DURATION / 3600.0) % 24.0


def load_shape(profile_id: int, hours: np.ndarray) -> np.ndarray:
    """Noise-free normalized load in [0, 1] at the given hours of day."""
    if profile_id not in _LOAD_SHAPES:
        raise ConfigError(f"unknown load profile {profile_id}", field="load_profile")
    floor, bumps = _LOAD_SHAPES[profile_id]
    shape = np.full_like(hours, floor, dtype=float)
    for centre, amp, width in bumps:
        d = np.abs(hours - centre)
        d = np.minimum(d, 24.0 - d)
        shape += amp * np.exp(-(d**2) / (2 * width**2))
    return np.clip(shape, 0.0, 1.0)


def solar_shape(profile_id: int, hours: np.ndarray) -> np.ndarray:
    """Unscaled bell-shaped irradiance, exactly zero outside daylight."""
    if profile_id not in _SOLAR_SHAPES:
        raise ConfigError(f"unknown energy profile {profile_id}", field="energy_profile")
    rise, sset, _ = _SOLAR_SHAPES[profile_id]
    phase = (hours - rise) / (sset - rise)
    shape = np.where((phase > 0) & (phase < 1), np.sin(np.pi * np.clip(phase, 0, 1)), 0.0)
    return shape**1.5


def _noise(seed: int, stream: int, slots: int) -> np.ndarray:
    rng = np.random.default_rng([seed, stream])
    return 1.0 + rng.uniform(-NOISE_AMPLITUDE, NOISE_AMPLITUDE, size=slots)


def synthesize_load_profile(
    profile_id: int, seed: int, slots: int, l_max: float = DEFAULT_L_MAX, bs_id: int = 0
) -> TrafficTrace:
    """Diurnal load trace for one of four representative BS behaviours.

    Args:
        profile_id: 1 (evening peak), 2 (office double peak), 3 (midday),
            4 (late night).
        seed: noise seed.
        slots: number of 30-minute slots.
        l_max: load in MB that corresponds to a normalized value of 1.
    """
    if slots < 1:
        raise ConfigError("slots must be >= 1", field="slots")
    shape = load_shape(profile_id, _slot_hours(slots))
    values = np.clip(shape * _noise(seed, profile_id, slots), 0.0, 1.0) * l_max
    return TrafficTrace(bs_id=bs_id, values=values, l_max=l_max)


def synthesize_energy_profile(
    profile_id: int, seed: int, slots: int, beta_max: float = 490_000.0, bs_id: int = 0
) -> EnergyTrace:
    """Solar harvest trace; one noise-free day sums to a profile-specific share of ``beta_max``."""
    if slots < 1:
        raise ConfigError("slots must be >= 1", field="slots")
    hours = _slot_hours(slots)
    shape = solar_shape(profile_id, hours)
    day = solar_shape(profile_id, _slot_hours(SLOTS_PER_DAY))
    daily_fraction = _SOLAR_SHAPES[profile_id][2]
    values = shape / day.sum() * daily_fraction * beta_max
    values = values * _noise(seed, 100 + profile_id, slots)
    return EnergyTrace(bs_id=bs_id, values=values)


def load_trace_csv(
    path: Union[str, Path], kind: str, bs_id: int = 0, l_max: float = DEFAULT_L_MAX
) -> Union[TrafficTrace, EnergyTrace]:
    """Read a header-less ``slot,value`` CSV file.

    Raises:
        TraceParseError: a row does not hold an integer slot and a float value.
        TraceValidationError: slots are not contiguous from 0, or a value is out of range.
    """
    if kind not in ("load", "energy"):
        raise ConfigError(f"kind must be 'load' or 'energy', got {kind!r}", field="kind")
    values = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise TraceParseError(f"expected 2 columns, got {len(row)}", row=row_no)
            try:
                slot = int(row[0])
                value = float(row[1])
            except ValueError as exc:
                raise TraceParseError(str(exc), row=row_no) from None
            if slot != len(values):
                raise TraceValidationError(
                    f"row {row_no}: expected slot {len(values)}, got {slot}"
                )
            if not np.isfinite(value) or value < 0:
                raise TraceValidationError(f"row {row_no}: invalid value {value}")
            values.append(value)
    if kind == "load":
        return TrafficTrace(bs_id=bs_id, values=values, l_max=l_max)
    return EnergyTrace(bs_id=bs_id, values=values)


def write_trace_csv(path: Union[str, Path], trace: Union[TrafficTrace, EnergyTrace]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for i, v in enumerate(trace.values):
            writer.writerow([i, repr(float(v))])
