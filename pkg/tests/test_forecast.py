import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenedge.errors import DomainError, TrainingError
from greenedge.forecast import ForecasterSpec, evaluate, fit, rmse
from greenedge.traces import synthesize_energy_profile, synthesize_load_profile

SEASONAL = ForecasterSpec()
RECURRENT = ForecasterSpec(kind="recurrent")
LAST = ForecasterSpec(kind="last_value")


def sinusoid(days=7):
    t = np.arange(48 * days)
    return 10 + 5 * np.sin(2 * np.pi * t / 48)


def test_seasonal_constant_series():
    f = fit(SEASONAL, [4.2] * 100)
    assert all(f.predict(t, k) == 4.2 for t in range(48, 97) for k in (1, 2, 3))


def test_seasonal_exact_on_periodic():
    series = sinusoid()
    f = fit(SEASONAL, series)
    assert f.predict(100, 1) == pytest.approx(series[101])
    for k in (1, 2, 3):
        assert evaluate(f, k, start=48) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("k", [0, 4])
def test_step_out_of_range(k):
    f = fit(SEASONAL, sinusoid())
    with pytest.raises(DomainError):
        f.predict(100, k)


def test_seasonal_needs_a_season_of_history():
    f = fit(SEASONAL, sinusoid())
    with pytest.raises(DomainError):
        f.predict(10, 1)
    with pytest.raises(TrainingError):
        fit(SEASONAL, [1.0] * 95)


def test_recurrent_insufficient_history():
    with pytest.raises(TrainingError):
        fit(RECURRENT, [1.0])


def test_recurrent_deterministic():
    series = sinusoid(4)
    a = fit(RECURRENT, series, seed=5)
    b = fit(RECURRENT, series, seed=5)
    pa = np.array([a.predict(t, k) for t in range(100, 150) for k in (1, 2, 3)])
    pb = np.array([b.predict(t, k) for t in range(100, 150) for k in (1, 2, 3)])
    assert pa.tobytes() == pb.tobytes()


def test_recurrent_beats_persistence_on_sinusoid():
    series = sinusoid()
    start = int(round(0.67 * len(series)))
    rnn = evaluate(fit(RECURRENT, series, seed=0), 1, start)
    last = evaluate(fit(LAST, series), 1, start)
    assert rnn < last


def test_recurrent_forecasts_non_negative():
    series = synthesize_energy_profile(3, 1, 48 * 5).values
    f = fit(RECURRENT, series, seed=2)
    assert min(f.predict(t, k) for t in range(len(series)) for k in (1, 2, 3)) >= 0


def test_forecast_horizon_object():
    f = fit(SEASONAL, sinusoid())
    h = f.forecast(100)
    assert h.t_origin == 100 and len(h.predictions) == 3


def test_rmse():
    assert rmse([1, 2, 3], [1, 2, 3]) == 0
    assert rmse([0, 0], [3, 4]) == pytest.approx(np.sqrt(12.5))
    assert rmse([0, 0], [3, 4]) == pytest.approx(3.5355, abs=1e-4)
    with pytest.raises(DomainError):
        rmse([1, 2], [1])
    with pytest.raises(DomainError):
        rmse([], [])


@pytest.mark.parametrize("kind", ["seasonal_persistence", "recurrent"])
def test_builtin_beats_last_value_on_bundled_traces(kind):
    spec = ForecasterSpec(kind=kind)
    traces = [synthesize_load_profile(p, 1, 48 * 7).values for p in (1, 2, 3, 4)]
    traces += [synthesize_energy_profile(p, 1, 48 * 7).values for p in (1, 2, 3)]
    for series in traces:
        start = int(round(0.67 * len(series)))
        assert evaluate(fit(spec, series, seed=0), 1, start) < evaluate(fit(LAST, series), 1, start)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.integers(1, 4), st.integers(1, 3))
def test_seasonal_rmse_bounded_by_range(seed, pid, k):
    series = synthesize_load_profile(pid, seed, 48 * 3).values
    err = evaluate(fit(SEASONAL, series), k, start=96)
    assert np.isfinite(err) and 0 <= err <= 1
