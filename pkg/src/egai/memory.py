"""Decaying-memory bookkeeping for the mem-FDR variants."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class DecayedCounter:
    """Exponentially discounted rejection count ``sum_j d^(t-j) delta_j``."""

    d: float = 1.0
    value: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.d <= 1.0:
            raise ValueError(f"decay must lie in (0, 1], got {self.d!r}")


def decay_update(counter: DecayedCounter, delta: bool) -> DecayedCounter:
    return DecayedCounter(counter.d, counter.d * counter.value + (1.0 if delta else 0.0))


def decayed_history(deltas: Sequence[bool], d: float) -> list:
    """``[R^d_0, R^d_1, ..., R^d_T]`` with ``R^d_0 = 0``."""
    counter = DecayedCounter(d)
    out = [0.0]
    for delta in deltas:
        counter = decay_update(counter, bool(delta))
        out.append(counter.value)
    return out


def mem_denominator_bound_check(
    rejection_times: Sequence[int],
    history: Sequence[float],
    d: float,
    t: int,
    rtol: float = 1e-12,
) -> bool:
    """Check ``d^(t-j) (d R^d_{j-1} + 1) <= max(R^d_t, 1)`` at every rejection ``j <= t``.

    ``history[j]`` must hold ``R^d_j`` (so ``history[0] == 0``). This
    inequality is what lets the predictable denominator stand in for the
    unknown final decayed rejection count.
    """
    bound = max(history[t], 1.0)
    for j in rejection_times:
        if j > t:
            continue
        lhs = d ** (t - j) * (d * history[j - 1] + 1.0)
        if lhs > bound * (1.0 + rtol):
            return False
    return True
