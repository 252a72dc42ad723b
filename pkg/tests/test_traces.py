import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenedge.errors import ConfigError, DomainError, TraceParseError, TraceValidationError
from greenedge.traces import (
    EnergyTrace,
    TrafficTrace,
    load_trace_csv,
    split_workload,
    synthesize_energy_profile,
    synthesize_load_profile,
    write_trace_csv,
)


def test_load_profile_shape():
    tr = synthesize_load_profile(1, seed=7, slots=48, l_max=30)
    assert len(tr) == 48
    assert np.all(tr.values >= 0) and np.all(tr.values <= 30)
    assert tr.values.min() / tr.values.max() < 0.6
    # overnight trough, evening peak
    assert np.argmin(tr.values) < 16
    assert 24 <= np.argmax(tr.values) < 46


@pytest.mark.parametrize("pid", [1, 2, 3, 4])
def test_every_load_profile_is_diurnal(pid):
    tr = synthesize_load_profile(pid, seed=3, slots=96)
    assert tr.values.min() / tr.values.max() < 0.6
    assert tr.slot_duration == 1800.0


def test_load_profile_deterministic():
    a = synthesize_load_profile(1, seed=7, slots=48, l_max=30)
    b = synthesize_load_profile(1, seed=7, slots=48, l_max=30)
    assert np.array_equal(a.values, b.values)
    c = synthesize_load_profile(1, seed=8, slots=48, l_max=30)
    assert not np.array_equal(a.values, c.values)


def test_load_profile_noise_bounded():
    from greenedge.traces import load_shape, _slot_hours

    tr = synthesize_load_profile(2, seed=11, slots=96, l_max=30)
    clean = load_shape(2, _slot_hours(96)) * 30
    assert np.all(np.abs(tr.values / clean - 1) <= 0.10 + 1e-12)


def test_load_profile_errors():
    with pytest.raises(ConfigError):
        synthesize_load_profile(1, seed=7, slots=0)
    with pytest.raises(ConfigError):
        synthesize_load_profile(5, seed=7, slots=48)


def test_energy_profile_shape():
    tr = synthesize_energy_profile(1, seed=3, slots=48, beta_max=490000)
    assert tr.values.max() <= 490000
    # night slots (before 05:00 and after 21:00) harvest nothing
    assert np.all(tr.values[:10] == 0) and np.all(tr.values[42:] == 0)
    assert tr.values[26] > 0
    # bell: rises to the peak then falls
    peak = int(np.argmax(tr.values))
    assert 20 <= peak <= 30


@pytest.mark.parametrize("pid", [1, 2, 3])
def test_energy_profile_daily_total_within_capacity(pid):
    tr = synthesize_energy_profile(pid, seed=0, slots=48, beta_max=490000)
    assert 0 < tr.values.sum() <= 490000 * 1.05


def test_energy_profile_deterministic_and_errors():
    a = synthesize_energy_profile(1, seed=3, slots=48)
    b = synthesize_energy_profile(1, seed=3, slots=48)
    assert np.array_equal(a.values, b.values)
    with pytest.raises(ConfigError):
        synthesize_energy_profile(9, seed=3, slots=48)


def test_traces_are_immutable():
    tr = synthesize_load_profile(1, seed=1, slots=48)
    with pytest.raises(ValueError):
        tr.values[0] = 1.0


def test_mixed_slot_duration_rejected():
    with pytest.raises(TraceValidationError):
        TrafficTrace(0, [1.0], slot_duration=900.0)
    with pytest.raises(TraceValidationError):
        EnergyTrace(0, [-1.0])


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("0,5.0\n1,6.0\n")
    tr = load_trace_csv(p, "load")
    assert list(tr.values) == [5.0, 6.0]
    src = synthesize_energy_profile(2, 1, 48)
    write_trace_csv(tmp_path / "e.csv", src)
    assert np.array_equal(load_trace_csv(tmp_path / "e.csv", "energy").values, src.values)


def test_csv_gap_rejected(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("0,5.0\n2,6.0\n")
    with pytest.raises(TraceValidationError):
        load_trace_csv(p, "load")


def test_csv_negative_rejected(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("0,5.0\n1,-6.0\n")
    with pytest.raises(TraceValidationError):
        load_trace_csv(p, "energy")


def test_csv_malformed_row_reports_row(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("0,5.0\n1,abc\n")
    with pytest.raises(TraceParseError) as exc:
        load_trace_csv(p, "load")
    assert exc.value.row == 2


def test_csv_load_above_lmax_rejected(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("0,31.0\n")
    with pytest.raises(TraceValidationError):
        load_trace_csv(p, "load", l_max=30)


@pytest.mark.parametrize("l, gamma, gamma_prime", [(10, 8, 2), (0, 0, 0), (25, 20, 5)])
def test_split_workload(l, gamma, gamma_prime):
    s = split_workload(l)
    assert s.gamma == pytest.approx(gamma)
    assert s.gamma_prime == pytest.approx(gamma_prime)


def test_split_negative():
    with pytest.raises(DomainError):
        split_workload(-1)


@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_split_is_linear(a, b):
    s, sa, sb = split_workload(a + b), split_workload(a), split_workload(b)
    assert s.gamma == pytest.approx(sa.gamma + sb.gamma, rel=1e-9, abs=1e-9)
    assert s.gamma_prime == pytest.approx(sa.gamma_prime + sb.gamma_prime, rel=1e-9, abs=1e-6)
    assert s.gamma + s.gamma_prime == pytest.approx(a + b, rel=1e-9, abs=1e-12)


@settings(max_examples=30)
@given(st.integers(1, 4), st.integers(0, 10_000), st.integers(1, 200), st.floats(1, 100))
def test_synthesized_load_in_range(pid, seed, slots, l_max):
    tr = synthesize_load_profile(pid, seed, slots, l_max)
    assert np.all(tr.values >= 0) and np.all(tr.values <= l_max)
