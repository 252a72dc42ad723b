"""Short-horizon forecasters for load and harvested energy.

Two kinds are built in: seasonal persistence (repeat the value observed one
season earlier) and a small Elman recurrent network trained from scratch with
truncated backpropagation through time. A last-value forecaster is provided as
the reference every built-in kind must beat.

Indexing convention: ``predict(t, k)`` forecasts slot ``t + k`` using
observations up to and including slot ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from greenedge.errors import ConfigError, DomainError, TrainingError

KINDS = ("seasonal_persistence", "recurrent", "last_value")


@dataclass(frozen=True)
class ForecasterSpec:
    kind: str = "seasonal_persistence"
    season_length: int = 48
    hidden_units: int = 4
    epochs: int = 100
    train_fraction: float = 0.67
    horizon: int = 3
    window: int = 12  # truncation length for backpropagation through time
    learning_rate: float = 0.01

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown forecaster kind {self.kind!r}", field="kind")
        if self.season_length < 1:
            raise ConfigError("must be >= 1", field="season_length")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("must lie in (0, 1)", field="train_fraction")
        if self.horizon < 1:
            raise ConfigError("must be >= 1", field="horizon")
        if self.hidden_units < 1 or self.epochs < 1 or self.window < 1:
            raise ConfigError("hidden_units, epochs and window must be >= 1", field="hidden_units")


@dataclass(frozen=True)
class ForecastHorizon:
    t_origin: int
    predictions: np.ndarray


class Forecaster:
    """Base class: holds the observed series and validates queries."""

    def __init__(self, spec: ForecasterSpec, history: Sequence[float]):
        self.spec = spec
        self.history = np.asarray(history, dtype=float)
        self.history.setflags(write=False)

    def _check(self, t: int, k: int):
        if not 1 <= k <= self.spec.horizon:
            raise DomainError(f"step {k} outside 1..{self.spec.horizon}")
        if not 0 <= t < len(self.history):
            raise DomainError(f"origin {t} outside the observed history")

    def predict(self, t: int, k: int) -> float:
        raise NotImplementedError

    def forecast(self, t: int) -> ForecastHorizon:
        preds = np.array([self.predict(t, k) for k in range(1, self.spec.horizon + 1)])
        return ForecastHorizon(t_origin=t, predictions=preds)


class LastValueForecaster(Forecaster):
    def predict(self, t, k):
        self._check(t, k)
        return max(0.0, float(self.history[t]))


class SeasonalPersistence(Forecaster):
    def predict(self, t, k):
        self._check(t, k)
        if k > self.spec.season_length:
            raise DomainError(f"step {k} exceeds the season length")
        idx = t + k - self.spec.season_length
        if idx < 0:
            raise DomainError(f"history does not cover slot {t + k} minus one season")
        return max(0.0, float(self.history[idx]))


class _Adam:
    def __init__(self, params, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            mhat = m / (1 - self.b1**self.t)
            vhat = v / (1 - self.b2**self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


class RecurrentForecaster(Forecaster):
    """Single-layer Elman network ``h_t = tanh(W_x x_t + W_h h_{t-1} + b)``, ``y_t = w_o . h_t + c``.

    Inputs are min-max scaled with the training segment's range. Multi-step
    forecasts feed each prediction back as the next input.
    """

    def __init__(self, spec, history, seed=0, train_end=None):
        super().__init__(spec, history)
        n = len(self.history)
        if train_end is None:
            train_end = int(round(spec.train_fraction * n))
        if train_end < 10 or n < 10:
            raise TrainingError(f"need at least 10 training samples, got {min(train_end, n)}")
        train = self.history[:train_end]
        self.lo = float(train.min())
        span = float(train.max()) - self.lo
        self.span = span if span > 0 else 1.0

        rng = np.random.default_rng(seed)
        h = spec.hidden_units
        scale = 1.0 / np.sqrt(h)
        self.w_x = rng.uniform(-scale, scale, size=h)
        self.w_h = rng.uniform(-scale, scale, size=(h, h))
        self.b = np.zeros(h)
        self.w_o = rng.uniform(-scale, scale, size=h)
        self.c = np.zeros(1)
        self._train(self._scale(train))
        self._states = self._run(self._scale(self.history))

    def _scale(self, x):
        return (np.asarray(x, dtype=float) - self.lo) / self.span

    def _run(self, xs):
        states = np.empty((len(xs), len(self.b)))
        h = np.zeros(len(self.b))
        for i, x in enumerate(xs):
            h = np.tanh(self.w_x * x + self.w_h @ h + self.b)
            states[i] = h
        return states

    def _train(self, xs):
        params = [self.w_x, self.w_h, self.b, self.w_o, self.c]
        opt = _Adam(params, self.spec.learning_rate)
        inputs, targets = xs[:-1], xs[1:]
        win = self.spec.window
        n_hidden = len(self.b)
        for _ in range(self.spec.epochs):
            h_carry = np.zeros(n_hidden)
            for start in range(0, len(inputs), win):
                x = inputs[start : start + win]
                y_true = targets[start : start + win]
                steps = len(x)
                hs = np.empty((steps + 1, n_hidden))
                hs[0] = h_carry
                for s in range(steps):
                    hs[s + 1] = np.tanh(self.w_x * x[s] + self.w_h @ hs[s] + self.b)
                y = hs[1:] @ self.w_o + self.c[0]
                err = 2.0 * (y - y_true) / steps

                g_wo = hs[1:].T @ err
                g_c = np.array([err.sum()])
                g_wx = np.zeros_like(self.w_x)
                g_wh = np.zeros_like(self.w_h)
                g_b = np.zeros_like(self.b)
                dh_next = np.zeros(n_hidden)
                for s in range(steps - 1, -1, -1):
                    dh = err[s] * self.w_o + dh_next
                    dz = dh * (1.0 - hs[s + 1] ** 2)
                    g_wx += dz * x[s]
                    g_wh += np.outer(dz, hs[s])
                    g_b += dz
                    dh_next = self.w_h.T @ dz
                opt.step([g_wx, g_wh, g_b, g_wo, g_c])
                h_carry = hs[-1]
        if not all(np.all(np.isfinite(p)) for p in params):
            raise TrainingError("training diverged")

    def predict(self, t, k):
        self._check(t, k)
        h = self._states[t]
        y = float(h @ self.w_o + self.c[0])
        for _ in range(k - 1):
            h = np.tanh(self.w_x * y + self.w_h @ h + self.b)
            y = float(h @ self.w_o + self.c[0])
        return max(0.0, y * self.span + self.lo)


def fit(
    spec: ForecasterSpec,
    history: Sequence[float],
    seed: int = 0,
    train_end: Optional[int] = None,
) -> Forecaster:
    """Build a forecaster over ``history``.

    Only ``history[:train_end]`` is used for training (default: the
    ``train_fraction`` prefix); the rest is available to ``predict`` as
    observations.
    """
    n = len(history)
    if spec.kind == "seasonal_persistence":
        if n < 2 * spec.season_length:
            raise TrainingError(
                f"seasonal persistence needs >= {2 * spec.season_length} samples, got {n}"
            )
        return SeasonalPersistence(spec, history)
    if spec.kind == "last_value":
        if n < 1:
            raise TrainingError("empty history")
        return LastValueForecaster(spec, history)
    return RecurrentForecaster(spec, history, seed=seed, train_end=train_end)


def rmse(predicted: Sequence[float], actual: Sequence[float]) -> float:
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.ndim != 1 or len(p) < 1:
        raise DomainError(f"need equal non-empty 1-D sequences, got {p.shape} and {a.shape}")
    return float(np.sqrt(np.mean((p - a) ** 2)))


def evaluate(forecaster: Forecaster, k: int, start: int, stop: Optional[int] = None) -> float:
    """RMSE of ``k``-step forecasts for target slots ``start..stop-1``.

    Both predictions and observations are scaled by the series' min-max range.
    """
    series = forecaster.history
    stop = len(series) if stop is None else stop
    targets = range(max(start, k), stop)
    lo, hi = float(series.min()), float(series.max())
    span = hi - lo if hi > lo else 1.0
    preds = np.array([forecaster.predict(s - k, k) for s in targets])
    actual = series[list(targets)]
    return rmse((preds - lo) / span, (actual - lo) / span)
