import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dsula.schedule import StepSchedule, eta, prefix_times, time_at, validate


def test_eta_examples():
    assert eta(StepSchedule.polynomial(1.0, 1.0), 3) == pytest.approx(1 / 3, rel=1e-15)
    assert eta(StepSchedule.constant(0.01), 999) == 0.01
    assert eta(StepSchedule.polynomial(2.0, 0.5), 4) == pytest.approx(1.0, rel=1e-15)


def test_eta_explicit_out_of_range():
    s = StepSchedule.explicit([0.5, 0.25])
    assert eta(s, 2) == 0.25
    with pytest.raises(IndexError):
        eta(s, 3)
    with pytest.raises(IndexError):
        eta(s, 0)


def test_time_at_examples():
    assert time_at(StepSchedule.polynomial(3.0), 0) == 0.0
    assert time_at(StepSchedule.polynomial(1.0), 3) == pytest.approx(11 / 6, rel=1e-15)
    assert time_at(StepSchedule.constant(0.5), 4) == 2.0


def test_vectorized_etas_match_scalar():
    s = StepSchedule.polynomial(2.0, 0.7)
    assert np.allclose(s.etas(1, 50), [eta(s, k) for k in range(1, 50)], rtol=1e-15, atol=0)


def test_validate_examples():
    r = validate(StepSchedule.polynomial(1.0, 1.0))
    assert r.valid and r.divergent and r.decaying
    r = validate(StepSchedule.explicit([0.5, 0.6]))
    assert not r.valid and r.violations[0].startswith("monotonicity")
    r = validate(StepSchedule.polynomial(1.0, 1.5))
    assert not r.valid and any(v.startswith("divergence") for v in r.violations)
    r = validate(StepSchedule.constant(0.1))
    assert not r.valid and any(v.startswith("decay") for v in r.violations)


def test_validate_explicit_positivity():
    r = validate(StepSchedule.explicit([0.5, 0.0]))
    assert not r.positive
    assert r.violations[0].startswith("positivity")


def test_prefix_times_extends_consistently():
    s = StepSchedule.polynomial(1.0)
    short = prefix_times(s, 10).copy()
    long = prefix_times(s, 10_000)
    assert np.array_equal(short, long[:11])


@settings(max_examples=50, deadline=None)
@given(theta=st.floats(0.01, 10), a=st.floats(0.05, 1.0), k=st.integers(1, 10_000))
def test_non_increasing(theta, a, k):
    s = StepSchedule.polynomial(theta, a)
    assert eta(s, k + 1) <= eta(s, k)


@settings(max_examples=30, deadline=None)
@given(theta=st.floats(0.01, 10), a=st.floats(0.05, 1.0), n=st.integers(0, 5000))
def test_increment_equals_eta(theta, a, n):
    s = StepSchedule.polynomial(theta, a)
    diff = time_at(s, n + 1) - time_at(s, n)
    assert diff == pytest.approx(eta(s, n + 1), rel=1e-12, abs=1e-12 * time_at(s, n + 1))


@settings(max_examples=30, deadline=None)
@given(theta=st.floats(0.01, 10), n=st.integers(1, 100_000))
def test_harmonic_bound(theta, n):
    s = StepSchedule.polynomial(theta, 1.0)
    assert abs(time_at(s, n) - theta * math.log(n)) <= theta * (1 + 1 / n)


def test_long_sum_accuracy():
    # harmonic number against the asymptotic expansion
    n = 10**7
    h = time_at(StepSchedule.polynomial(1.0), n)
    ref = math.log(n) + 0.5772156649015329 + 1 / (2 * n) - 1 / (12 * n * n)
    assert abs(h - ref) < 1e-12
