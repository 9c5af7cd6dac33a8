"""Domain types shared by every procedure.

Time indices are 1-based throughout, matching the usual online-testing
notation where the first hypothesis is tested at ``t = 1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import zeta


class EGaiError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(EGaiError, ValueError):
    """A configuration field is outside its admissible range."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class EvidenceError(EGaiError, ValueError):
    """An evidence value is malformed or cannot be produced."""


class EvidenceKindMismatch(EGaiError, TypeError):
    """Evidence of the wrong kind was fed to a procedure."""


class EvidenceKind(enum.Enum):
    E = "e"
    P = "p"

    @classmethod
    def parse(cls, value: Union[str, "EvidenceKind"]) -> "EvidenceKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"e": cls.E, "evalue": cls.E, "e-value": cls.E, "p": cls.P, "pvalue": cls.P, "p-value": cls.P}
        try:
            return aliases[key]
        except KeyError:
            raise EvidenceError(f"unknown evidence kind {value!r}") from None


@dataclass(frozen=True)
class Evidence:
    """A single test statistic: an e-value (finite, >= 0) or a p-value in [0, 1]."""

    kind: EvidenceKind
    value: float

    def __post_init__(self):
        v = float(self.value)
        if math.isnan(v):
            raise EvidenceError("evidence value is NaN")
        if self.kind is EvidenceKind.E:
            if not math.isfinite(v) or v < 0:
                raise EvidenceError(f"e-value must be finite and non-negative, got {v!r}")
        elif not 0.0 <= v <= 1.0:
            raise EvidenceError(f"p-value must lie in [0, 1], got {v!r}")
        object.__setattr__(self, "value", v)

    @classmethod
    def e(cls, value: float) -> "Evidence":
        return cls(EvidenceKind.E, value)

    @classmethod
    def p(cls, value: float) -> "Evidence":
        return cls(EvidenceKind.P, value)

    @property
    def is_e(self) -> bool:
        return self.kind is EvidenceKind.E


def rejects(kind: EvidenceKind, value: float, level: float) -> bool:
    """Weak-inequality rejection rule; a zero level never rejects."""
    if level <= 0.0:
        return False
    if kind is EvidenceKind.E:
        return value >= 1.0 / level
    return value <= level


@dataclass(frozen=True)
class Decision:
    t: int
    level: float
    evidence: Evidence
    reject: bool


def make_decision(evidence: Evidence, level: float, t: int = 1) -> Decision:
    """Apply the rejection rule for ``evidence`` at testing level ``level``."""
    level = float(level)
    if not 0.0 <= level <= 1.0:
        raise ValueError(f"level must lie in [0, 1], got {level!r}")
    return Decision(t, level, evidence, rejects(evidence.kind, evidence.value, level))


@dataclass
class ProcedureState:
    """Mutable alpha-investing state, owned by exactly one procedure instance.

    ``omega`` is ``None`` for procedures that do not allocate through an
    investment fraction (e-LOND, LORD++, SAFFRON).
    """

    t: int = 1
    remaining_wealth: float = 0.0
    rejections: int = 0
    decayed_rejections: float = 0.0
    omega: Optional[float] = None
    rejection_times: list = field(default_factory=list)
    candidate_counts: list = field(default_factory=list)


def _check_open(name, value, lo, hi, lo_closed=False, hi_closed=False):
    ok_lo = value >= lo if lo_closed else value > lo
    ok_hi = value <= hi if hi_closed else value < hi
    if not (ok_lo and ok_hi) or math.isnan(value):
        lb = "[" if lo_closed else "("
        rb = "]" if hi_closed else ")"
        raise ConfigError(name, f"must lie in {lb}{lo}, {hi}{rb}, got {value!r}")


DEFAULT_OMEGA1 = 0.005


@dataclass(frozen=True)
class RaiConfig:
    """Parameters of the risk-aversion investing procedures.

    ``lam`` is only read by the adaptive (SAFFRON-style) variants and
    ``decay < 1`` switches on decaying-memory accounting.
    """

    alpha: float = 0.05
    omega1: float = DEFAULT_OMEGA1
    phi: float = 0.5
    psi: float = 0.5
    lam: float = 0.1
    decay: float = 1.0

    def __post_init__(self):
        _check_open("alpha", self.alpha, 0.0, 1.0)
        _check_open("omega1", self.omega1, 0.0, 0.5)
        _check_open("phi", self.phi, 0.0, 0.5, lo_closed=True, hi_closed=True)
        _check_open("psi", self.psi, 0.0, 0.5, lo_closed=True, hi_closed=True)
        _check_open("lambda", self.lam, 0.0, 1.0, lo_closed=True)
        _check_open("decay", self.decay, 0.0, 1.0, hi_closed=True)

    @classmethod
    def for_horizon(cls, T: int, **kwargs) -> "RaiConfig":
        """Config with ``omega1 = min(0.005, 1/T)`` unless given explicitly."""
        kwargs.setdefault("omega1", min(DEFAULT_OMEGA1, 1.0 / T))
        return cls(**kwargs)


# onlineFDR's LORD++ default sequence constant
_LORD_GAMMA_CONST = 0.07720838


class GammaSequence:
    """Non-negative, non-increasing sequence ``gamma_1, gamma_2, ...`` with sum <= 1.

    Built from a named family (``"pi2"``: ``6/(pi^2 t^2)``; ``"lord"``: the
    onlineFDR LORD++ default; ``"saffron"``: ``t^-1.6 / zeta(1.6)``), from an
    explicit finite list (zero beyond its end), or from a callable of ``t``.
    Partial sums are checked as terms are materialised. ``monotone=False``
    drops the non-increasing requirement, which e-LOND does not need.
    """

    FAMILIES = ("pi2", "lord", "saffron")

    def __init__(
        self,
        spec: Union[str, Sequence[float], Callable[[int], float], "GammaSequence"] = "pi2",
        monotone: bool = True,
    ):
        self._finite = None
        self._func = None
        if isinstance(spec, GammaSequence):
            self.name, self._finite, self._func = spec.name, spec._finite, spec._func
        elif isinstance(spec, str):
            if spec not in self.FAMILIES:
                raise ConfigError("gamma", f"unknown family {spec!r}; choose one of {self.FAMILIES}")
            self.name = spec
        elif callable(spec):
            self.name = getattr(spec, "__name__", "custom")
            self._func = spec
        else:
            arr = np.asarray(spec, dtype=float).ravel()
            if arr.size == 0 or np.any(~np.isfinite(arr)) or np.any(arr < 0):
                raise ConfigError("gamma", "explicit sequence must be non-empty, finite and non-negative")
            if monotone and np.any(np.diff(arr) > 0):
                raise ConfigError("gamma", "sequence must be non-increasing")
            self.name = "explicit"
            self._finite = arr
        self._cache = np.zeros(0)
        self._ensure(64)

    def _compute(self, t: np.ndarray) -> np.ndarray:
        if self._finite is not None:
            out = np.zeros(t.shape)
            inside = t <= self._finite.size
            out[inside] = self._finite[t[inside] - 1]
            return out
        if self._func is not None:
            return np.array([float(self._func(int(k))) for k in t])
        tf = t.astype(float)
        if self.name == "pi2":
            return 6.0 / (math.pi ** 2 * tf ** 2)
        if self.name == "lord":
            return _LORD_GAMMA_CONST * np.log(np.maximum(tf, 2.0)) / (tf * np.exp(np.sqrt(np.log(tf))))
        return tf ** -1.6 / float(zeta(1.6))

    def _ensure(self, n: int):
        if n <= self._cache.size:
            return
        size = max(n, 2 * self._cache.size)
        arr = self._compute(np.arange(1, size + 1))
        if np.any(arr < 0) or np.any(~np.isfinite(arr)):
            raise ConfigError("gamma", "sequence terms must be finite and non-negative")
        if np.cumsum(arr)[-1] > 1.0 + 1e-12:
            raise ConfigError("gamma", "partial sums of the sequence exceed 1")
        self._cache = arr

    def __call__(self, t: int) -> float:
        if t < 1:
            raise IndexError("gamma is indexed from t = 1")
        self._ensure(t)
        return float(self._cache[t - 1])

    def array(self, n: int) -> np.ndarray:
        """First ``n`` terms as a float array (index 0 holds gamma_1)."""
        self._ensure(n)
        return self._cache[:n].copy()

    def __repr__(self):
        return f"GammaSequence({self.name!r})"


@dataclass(frozen=True)
class GaiConfig:
    """Parameters of e-LOND and the GAI baselines (LORD++, SAFFRON).

    ``w0=None`` selects the procedure's conventional default: ``alpha/2`` for
    LORD++ and ``(1 - lam) * alpha / 2`` for SAFFRON.
    """

    alpha: float = 0.05
    w0: Optional[float] = None
    gamma: Union[str, Sequence[float], GammaSequence] = "pi2"
    lam: float = 0.5

    def __post_init__(self):
        _check_open("alpha", self.alpha, 0.0, 1.0)
        _check_open("lambda", self.lam, 0.0, 1.0)
        if self.w0 is not None:
            _check_open("w0", self.w0, 0.0, self.alpha, hi_closed=True)
        if not isinstance(self.gamma, GammaSequence):
            object.__setattr__(self, "gamma", GammaSequence(self.gamma))
