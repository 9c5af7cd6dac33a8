import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from egai.memory import DecayedCounter, decay_update, decayed_history, mem_denominator_bound_check


def test_counter_update():
    c = decay_update(DecayedCounter(0.5), True)
    c = decay_update(c, False)
    c = decay_update(c, True)
    assert c.value == pytest.approx(0.25 + 1.0)
    with pytest.raises(ValueError):
        DecayedCounter(0.0)


@given(st.lists(st.booleans(), max_size=60), st.floats(0.05, 1.0))
def test_history_matches_explicit_sum(deltas, d):
    hist = decayed_history(deltas, d)
    for t in range(len(deltas) + 1):
        oracle = sum(d ** (t - j) for j in range(1, t + 1) if deltas[j - 1])
        assert hist[t] == pytest.approx(oracle, rel=1e-12, abs=1e-15)


@settings(max_examples=200)
@given(st.lists(st.booleans(), min_size=1, max_size=80), st.floats(0.05, 1.0))
def test_denominator_inequality_always_holds(deltas, d):
    hist = decayed_history(deltas, d)
    times = [j for j, x in enumerate(deltas, start=1) if x]
    for t in range(1, len(deltas) + 1):
        assert mem_denominator_bound_check(times, hist, d, t)


def test_bound_check_detects_a_bad_history():
    # a history understating R^d_t must fail
    assert not mem_denominator_bound_check([1, 2], [0.0, 1.0, 1.0], 1.0, 2)
