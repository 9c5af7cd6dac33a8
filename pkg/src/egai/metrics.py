"""Error metrics and FDP estimators computed from a decision log.

Nothing here reads procedure internals: the prior rejection counts
``R_{j-1}`` and decayed counts ``R^d_{j-1}`` are rebuilt from the reject
flags, so these estimators double as audits of the engine's wealth
accounting. Every scalar metric has a ``*_trajectory`` companion giving the
value at each ``t = 1..n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from .core import Decision, EvidenceKind


@dataclass(frozen=True)
class LabeledRun:
    """Arrays of levels, values and reject flags; ``labels`` (1 = non-null) optional."""

    levels: np.ndarray
    rejects: np.ndarray
    values: np.ndarray
    kind: EvidenceKind = EvidenceKind.E
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        rejects = np.asarray(self.rejects, dtype=bool)
        values = np.asarray(self.values, dtype=float)
        if not (levels.shape == rejects.shape == values.shape) or levels.ndim != 1:
            raise ValueError("levels, rejects and values must be 1-d arrays of equal length")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "rejects", rejects)
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.asarray(self.labels).astype(int)
            if labels.shape != levels.shape:
                raise ValueError("labels must match the decision log length")
            if np.any((labels != 0) & (labels != 1)):
                raise ValueError("labels must be 0 (null) or 1 (non-null)")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def from_decisions(cls, decisions: Sequence[Decision], labels=None) -> "LabeledRun":
        kind = decisions[0].evidence.kind if decisions else EvidenceKind.E
        return cls(
            levels=np.array([d.level for d in decisions], dtype=float),
            rejects=np.array([d.reject for d in decisions], dtype=bool),
            values=np.array([d.evidence.value for d in decisions], dtype=float),
            kind=kind,
            labels=labels,
        )

    def __len__(self):
        return self.levels.shape[0]

    def _require_labels(self):
        if self.labels is None:
            raise ValueError("this metric needs ground-truth labels")
        return self.labels


def _at(traj: np.ndarray, t: Optional[int]) -> float:
    n = traj.shape[0]
    if t is None:
        t = n
    if not 0 <= t <= n:
        raise ValueError(f"t={t} outside 0..{n}")
    return 0.0 if t == 0 else float(traj[t - 1])


def _prior_counts(run: LabeledRun) -> np.ndarray:
    r = np.cumsum(run.rejects)
    return np.concatenate(([0], r[:-1])).astype(float)


def _decayed(x: np.ndarray, d: float) -> np.ndarray:
    """``y_t = sum_{j<=t} d^(t-j) x_j``."""
    if x.size == 0:
        return x.astype(float)
    return lfilter([1.0], [1.0, -d], x.astype(float))


def _prior_decayed(run: LabeledRun, d: float) -> np.ndarray:
    rd = _decayed(run.rejects, d)
    return np.concatenate(([0.0], rd[:-1]))


def _weak_mask(run: LabeledRun, lam: float) -> np.ndarray:
    """Indicator of weak evidence (``e < 1/lam`` or ``p > lam``)."""
    if run.kind is EvidenceKind.E:
        if lam == 0.0:
            return np.ones(len(run), dtype=bool)
        return run.values < 1.0 / lam
    return run.values > lam


# ground-truth metrics

def fdp_trajectory(run: LabeledRun) -> np.ndarray:
    labels = run._require_labels()
    false = np.cumsum(run.rejects & (labels == 0))
    total = np.cumsum(run.rejects)
    return false / np.maximum(total, 1)


def power_trajectory(run: LabeledRun) -> np.ndarray:
    labels = run._require_labels()
    hits = np.cumsum(run.rejects & (labels == 1))
    nonnull = np.cumsum(labels == 1)
    return np.where(nonnull > 0, hits / np.maximum(nonnull, 1), 0.0)


def _mem_ratio(num_terms, den_terms, d):
    n = num_terms.shape[0]
    out = np.zeros(n)
    if n == 0:
        return out
    num = _decayed(num_terms, d)
    den = _decayed(den_terms, d)
    pos = den > 0
    out[pos] = num[pos] / den[pos]
    return out


def mem_fdp_trajectory(run: LabeledRun, d: float) -> np.ndarray:
    labels = run._require_labels()
    return _mem_ratio(run.rejects & (labels == 0), run.rejects, d)


def mem_power_trajectory(run: LabeledRun, d: float) -> np.ndarray:
    labels = run._require_labels()
    return _mem_ratio(run.rejects & (labels == 1), labels == 1, d)


def fdp(run: LabeledRun, t: Optional[int] = None) -> float:
    return _at(fdp_trajectory(run), t)


def power(run: LabeledRun, t: Optional[int] = None) -> float:
    """Fraction of non-nulls up to ``t`` that were rejected (0 if there are none)."""
    return _at(power_trajectory(run), t)


def mem_fdp(run: LabeledRun, t: Optional[int] = None, d: float = 1.0) -> float:
    return _at(mem_fdp_trajectory(run, d), t)


def mem_power(run: LabeledRun, t: Optional[int] = None, d: float = 1.0) -> float:
    return _at(mem_power_trajectory(run, d), t)


# oracle estimates (need labels)

def fdp_star_e_trajectory(run: LabeledRun) -> np.ndarray:
    labels = run._require_labels()
    return np.cumsum(np.where(labels == 0, run.levels / (_prior_counts(run) + 1.0), 0.0))


def mem_fdp_star_trajectory(run: LabeledRun, d: float) -> np.ndarray:
    labels = run._require_labels()
    return np.cumsum(np.where(labels == 0, run.levels / (d * _prior_decayed(run, d) + 1.0), 0.0))


def fdp_star_e_ind_trajectory(run: LabeledRun) -> np.ndarray:
    labels = run._require_labels()
    num = np.cumsum(np.where(labels == 0, run.levels, 0.0))
    return num / np.maximum(np.cumsum(run.rejects), 1)


def fdp_star_e(run: LabeledRun, t: Optional[int] = None) -> float:
    """Oracle estimate ``sum_{j null, j<=t} alpha_j / (R_{j-1} + 1)``."""
    return _at(fdp_star_e_trajectory(run), t)


def mem_fdp_star(run: LabeledRun, t: Optional[int] = None, d: float = 1.0) -> float:
    return _at(mem_fdp_star_trajectory(run, d), t)


def fdp_star_e_ind(run: LabeledRun, t: Optional[int] = None) -> float:
    """Independence-case oracle ``sum_{j null} alpha_j / (R_t v 1)``."""
    return _at(fdp_star_e_ind_trajectory(run), t)


# observable overestimates

def fdp_hat_lord_trajectory(run: LabeledRun, d: float = 1.0) -> np.ndarray:
    if d == 1.0:
        denom = _prior_counts(run) + 1.0
    else:
        denom = d * _prior_decayed(run, d) + 1.0
    return np.cumsum(run.levels / denom)


def fdp_hat_saffron_trajectory(run: LabeledRun, lam: float, d: float = 1.0) -> np.ndarray:
    if d == 1.0:
        denom = _prior_counts(run) + 1.0
    else:
        denom = d * _prior_decayed(run, d) + 1.0
    return np.cumsum(np.where(_weak_mask(run, lam), run.levels / denom, 0.0)) / (1.0 - lam)


def fdp_hat_lord_e(run: LabeledRun, t: Optional[int] = None) -> float:
    """``sum_{j<=t} alpha_j / (R_{j-1} + 1)``; kept at or below alpha by e-LORD."""
    return _at(fdp_hat_lord_trajectory(run), t)


def fdp_hat_saffron_e(run: LabeledRun, t: Optional[int] = None, lam: float = 0.1) -> float:
    """Adaptive overestimate counting only steps with ``e_j < 1/lam``."""
    if run.kind is not EvidenceKind.E:
        raise ValueError("fdp_hat_saffron_e needs an e-value run; use fdp_hat_ps_rai")
    return _at(fdp_hat_saffron_trajectory(run, lam), t)


def mem_fdp_hat_lord(run: LabeledRun, t: Optional[int] = None, d: float = 0.99) -> float:
    return _at(fdp_hat_lord_trajectory(run, d), t)


def mem_fdp_hat_saffron(run: LabeledRun, t: Optional[int] = None, d: float = 0.99, lam: float = 0.1) -> float:
    return _at(fdp_hat_saffron_trajectory(run, lam, d), t)


def fdp_hat_pl_rai(run: LabeledRun, t: Optional[int] = None) -> float:
    return _at(fdp_hat_lord_trajectory(run), t)


def fdp_hat_ps_rai(run: LabeledRun, t: Optional[int] = None, lam: float = 0.1) -> float:
    """Adaptive overestimate for p-values, counting steps with ``p_j > lam``."""
    if run.kind is not EvidenceKind.P:
        raise ValueError("fdp_hat_ps_rai needs a p-value run; use fdp_hat_saffron_e")
    return _at(fdp_hat_saffron_trajectory(run, lam), t)


def mem_fdp_hat_pl_rai(run: LabeledRun, t: Optional[int] = None, d: float = 0.99) -> float:
    return _at(fdp_hat_lord_trajectory(run, d), t)


def mem_fdp_hat_ps_rai(run: LabeledRun, t: Optional[int] = None, d: float = 0.99, lam: float = 0.1) -> float:
    return mem_fdp_hat_saffron(run, t, d, lam)


# GAI baseline estimators

def fdp_hat_gai_lord_trajectory(run: LabeledRun) -> np.ndarray:
    return np.cumsum(run.levels) / np.maximum(np.cumsum(run.rejects), 1)


def fdp_hat_gai_saffron_trajectory(run: LabeledRun, lam: float) -> np.ndarray:
    num = np.cumsum(np.where(_weak_mask(run, lam), run.levels, 0.0)) / (1.0 - lam)
    return num / np.maximum(np.cumsum(run.rejects), 1)


def fdp_hat_gai_lord(run: LabeledRun, t: Optional[int] = None) -> float:
    return _at(fdp_hat_gai_lord_trajectory(run), t)


def fdp_hat_gai_saffron(run: LabeledRun, t: Optional[int] = None, lam: float = 0.5) -> float:
    return _at(fdp_hat_gai_saffron_trajectory(run, lam), t)
