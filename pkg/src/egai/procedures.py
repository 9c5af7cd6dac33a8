"""Online testing procedures.

Every procedure is a single-owner state machine with the same contract:
:meth:`Procedure.next_level` returns the level for the upcoming hypothesis
using only past decisions, and :meth:`Procedure.step` applies it to one piece
of evidence and advances the state.

The RAI family (e-LORD, e-SAFFRON, pL-RAI, pS-RAI and their decaying-memory
versions) is implemented once in :class:`RaiProcedure` using the
remaining-wealth recursion ``alpha_t = omega_t * rw_t * (d R^d_{t-1} + 1)``.
"""

from __future__ import annotations

import enum
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

from . import kernels
from .core import (
    ConfigError,
    Decision,
    Evidence,
    EvidenceKind,
    EvidenceKindMismatch,
    GaiConfig,
    GammaSequence,
    ProcedureState,
    RaiConfig,
    rejects,
)


class ProcedureKind(enum.Enum):
    ELORD = "e-lord"
    ESAFFRON = "e-saffron"
    PLRAI = "pl-rai"
    PSRAI = "ps-rai"
    ELOND = "e-lond"
    LORDPP = "lord++"
    SAFFRON = "saffron"

    @property
    def evidence_kind(self) -> EvidenceKind:
        if self in (ProcedureKind.ELORD, ProcedureKind.ESAFFRON, ProcedureKind.ELOND):
            return EvidenceKind.E
        return EvidenceKind.P

    @property
    def is_rai(self) -> bool:
        return self in _RAI_KINDS

    @property
    def adaptive(self) -> bool:
        return self in (ProcedureKind.ESAFFRON, ProcedureKind.PSRAI)


_RAI_KINDS = (ProcedureKind.ELORD, ProcedureKind.ESAFFRON, ProcedureKind.PLRAI, ProcedureKind.PSRAI)

DEFAULT_MEM_DECAY = 0.99

_ALIASES = {
    "elord": "e-lord",
    "esaffron": "e-saffron",
    "plrai": "pl-rai",
    "psrai": "ps-rai",
    "elond": "e-lond",
    "lordpp": "lord++",
    "lord-plus-plus": "lord++",
}


def parse_kind(name: Union[str, ProcedureKind]):
    """Resolve a procedure name; returns ``(kind, is_mem)``.

    Names are case-insensitive and accept a ``mem-`` prefix on RAI kinds.
    """
    if isinstance(name, ProcedureKind):
        return name, False
    key = str(name).strip().lower()
    mem = key.startswith("mem-")
    if mem:
        key = key[4:]
    key = _ALIASES.get(key, key)
    try:
        kind = ProcedureKind(key)
    except ValueError:
        raise ConfigError("procedure", f"unknown procedure {name!r}") from None
    if mem and not kind.is_rai:
        raise ConfigError("procedure", f"{kind.value} has no decaying-memory variant")
    return kind, mem


def next_omega(omega: float, omega1: float, phi: float, psi: float, t: int, rejections: int, delta: bool) -> float:
    """Incremental allocation update; ``rejections`` already includes ``delta``."""
    if delta:
        return omega - omega1 * psi ** rejections
    return omega + omega1 * phi ** (t - rejections)


def update_omega(state: ProcedureState, delta: bool, config: RaiConfig) -> float:
    """``omega_{t+1}`` from a state whose ``t`` is the step just decided and
    whose ``rejections`` already counts ``delta``."""
    return next_omega(state.omega, config.omega1, config.phi, config.psi, state.t, state.rejections, delta)


def _clamp_level(a: float, hi: float = 1.0) -> float:
    if a > hi:
        return hi
    if a < 0.0:
        return 0.0
    return a


class Procedure:
    """Common driver; subclasses implement ``next_level`` and ``_advance``."""

    kind: ProcedureKind
    state: ProcedureState

    @property
    def evidence_kind(self) -> EvidenceKind:
        return self.kind.evidence_kind

    @property
    def name(self) -> str:
        return self.kind.value

    def next_level(self) -> float:
        raise NotImplementedError

    def _advance(self, level: float, evidence: Evidence, delta: bool):
        raise NotImplementedError

    def step(self, evidence: Union[Evidence, float]) -> Decision:
        if not isinstance(evidence, Evidence):
            evidence = Evidence(self.evidence_kind, evidence)
        if evidence.kind is not self.evidence_kind:
            raise EvidenceKindMismatch(
                f"{self.name} expects {self.evidence_kind.value}-values, got a {evidence.kind.value}-value"
            )
        level = self.next_level()
        delta = rejects(evidence.kind, evidence.value, level)
        decision = Decision(self.state.t, level, evidence, delta)
        self._advance(level, evidence, delta)
        if delta:
            self.state.rejection_times.append(decision.t)
        self.state.t += 1
        return decision

    def run(self, values: Iterable[Union[Evidence, float]]) -> List[Decision]:
        return [self.step(v) for v in values]


class RaiProcedure(Procedure):
    """Risk-aversion investing with a non-increasing wealth budget.

    The LORD-style variants pay ``alpha_t / (d R^d_{t-1} + 1)`` at every step.
    The SAFFRON-style variants start from ``alpha (1 - lam)`` and only pay
    when the evidence is weak (``e_t < 1/lam`` or ``p_t > lam``), so strong
    non-rejected evidence costs nothing.
    """

    def __init__(self, kind: ProcedureKind, config: RaiConfig):
        if not kind.is_rai:
            raise ConfigError("procedure", f"{kind.value} is not an RAI procedure")
        self.kind = kind
        self.config = config
        self.adaptive = kind.adaptive
        self.lam = config.lam if self.adaptive else 0.0
        self.decay = config.decay
        self.state = ProcedureState(
            t=1,
            remaining_wealth=config.alpha * (1.0 - self.lam),
            omega=config.omega1,
        )

    @property
    def name(self) -> str:
        return ("mem-" + self.kind.value) if self.decay < 1.0 else self.kind.value

    def _denominator(self) -> float:
        return self.decay * self.state.decayed_rejections + 1.0

    def next_level(self) -> float:
        s = self.state
        return _clamp_level(s.omega * s.remaining_wealth * self._denominator())

    def pays(self, evidence: Evidence) -> bool:
        """Whether this step's level is charged against the wealth."""
        if not self.adaptive:
            return True
        if evidence.is_e:
            return self.lam == 0.0 or evidence.value < 1.0 / self.lam
        return evidence.value > self.lam

    def _advance(self, level, evidence, delta):
        s = self.state
        cfg = self.config
        denom = self._denominator()
        if self.pays(evidence):
            s.remaining_wealth = max(s.remaining_wealth - level / denom, 0.0)
        if delta:
            s.rejections += 1
            s.decayed_rejections = self.decay * s.decayed_rejections + 1.0
        else:
            s.decayed_rejections = self.decay * s.decayed_rejections
        s.omega = next_omega(s.omega, cfg.omega1, cfg.phi, cfg.psi, s.t, s.rejections, delta)


class ELond(Procedure):
    """e-LOND: ``alpha_t = alpha * gamma_t * (R_{t-1} + 1)`` with a fixed sequence."""

    kind = ProcedureKind.ELOND

    def __init__(self, config: GaiConfig):
        self.config = config
        self.gamma = config.gamma
        self.state = ProcedureState(t=1, remaining_wealth=config.alpha)

    def next_level(self) -> float:
        s = self.state
        return _clamp_level(self.config.alpha * self.gamma(s.t) * (s.rejections + 1))

    def _advance(self, level, evidence, delta):
        s = self.state
        s.remaining_wealth = max(s.remaining_wealth - level / (s.rejections + 1), 0.0)
        if delta:
            s.rejections += 1
        s.decayed_rejections = float(s.rejections)


class LordPlusPlus(Procedure):
    """LORD++ baseline on p-values.

    ``remaining_wealth`` reports the GAI wealth ``W0 - sum alpha_j`` plus the
    rewards ``alpha - W0`` (first rejection) and ``alpha`` (later ones).
    """

    kind = ProcedureKind.LORDPP

    def __init__(self, config: GaiConfig):
        self.config = config
        self.gamma = config.gamma
        self.w0 = config.alpha / 2 if config.w0 is None else config.w0
        self.state = ProcedureState(t=1, remaining_wealth=self.w0)

    def next_level(self) -> float:
        s, g, alpha, w0 = self.state, self.gamma, self.config.alpha, self.w0
        t = s.t
        a = w0 * g(t)
        for k, tau in enumerate(s.rejection_times):
            coef = (alpha - w0) if k == 0 else alpha
            a += coef * g(t - tau)
        return _clamp_level(a)

    def _advance(self, level, evidence, delta):
        s = self.state
        s.remaining_wealth -= level
        if delta:
            s.remaining_wealth += (self.config.alpha - self.w0) if s.rejections == 0 else self.config.alpha
            s.rejections += 1
        s.decayed_rejections = float(s.rejections)


class Saffron(Procedure):
    """SAFFRON baseline on p-values.

    ``state.candidate_counts[i]`` holds ``C_{i+}``, the number of candidates
    (``p <= lam``) observed after the i-th rejection (``i = 0``: since start).
    """

    kind = ProcedureKind.SAFFRON

    def __init__(self, config: GaiConfig):
        self.config = config
        self.gamma = config.gamma
        self.lam = config.lam
        base = (1.0 - config.lam) * config.alpha
        self.w0 = base / 2 if config.w0 is None else config.w0
        if self.w0 > base:
            raise ConfigError("w0", f"must not exceed (1 - lambda) * alpha = {base!r} for SAFFRON")
        self.state = ProcedureState(t=1, remaining_wealth=self.w0, candidate_counts=[0])

    def next_level(self) -> float:
        s, g, w0 = self.state, self.gamma, self.w0
        base = (1.0 - self.lam) * self.config.alpha
        t = s.t
        c = s.candidate_counts
        a = w0 * g(t - c[0])
        for k, tau in enumerate(s.rejection_times, start=1):
            coef = (base - w0) if k == 1 else base
            a += coef * g(t - tau - c[k])
        return _clamp_level(a, self.lam)

    def _advance(self, level, evidence, delta):
        s = self.state
        base = (1.0 - self.lam) * self.config.alpha
        p = evidence.value
        if p > self.lam:
            s.remaining_wealth -= level
        else:
            for k in range(len(s.candidate_counts)):
                s.candidate_counts[k] += 1
        if delta:
            s.remaining_wealth += (base - self.w0) if s.rejections == 0 else base
            s.rejections += 1
            s.candidate_counts.append(0)
        s.decayed_rejections = float(s.rejections)


def make_procedure(
    kind: Union[str, ProcedureKind],
    config: Optional[Union[RaiConfig, GaiConfig]] = None,
    **params,
) -> Procedure:
    """Build a fresh procedure.

    ``config`` may be omitted, in which case ``params`` are forwarded to the
    matching config class. A ``mem-`` prefixed name defaults ``decay`` to
    0.99.
    """
    kind, mem = parse_kind(kind)
    if kind.is_rai:
        if config is None:
            if mem:
                params.setdefault("decay", DEFAULT_MEM_DECAY)
            config = RaiConfig(**params)
        elif params:
            raise TypeError("pass either a config or keyword parameters, not both")
        if not isinstance(config, RaiConfig):
            raise ConfigError("config", f"{kind.value} needs a RaiConfig")
        return RaiProcedure(kind, config)
    if config is None:
        config = GaiConfig(**params)
    elif params:
        raise TypeError("pass either a config or keyword parameters, not both")
    if not isinstance(config, GaiConfig):
        raise ConfigError("config", f"{kind.value} needs a GaiConfig")
    if kind is ProcedureKind.ELOND:
        return ELond(config)
    if kind is ProcedureKind.LORDPP:
        return LordPlusPlus(config)
    return Saffron(config)


def closed_form_level_elord(alpha: float, omegas: Sequence[float], prior_rejections: int) -> float:
    """Non-recursive e-LORD level ``alpha (R_{t-1}+1) omega_t prod_{j<t} (1 - omega_j)``.

    ``omegas`` holds ``omega_1 .. omega_t``.
    """
    om = np.asarray(omegas, dtype=float)
    return float(alpha * (prior_rejections + 1) * om[-1] * np.prod(1.0 - om[:-1]))


def closed_form_level_esaffron(
    alpha: float, lam: float, omegas: Sequence[float], paid: Sequence[bool], prior_rejections: int
) -> float:
    """Non-recursive e-SAFFRON level; ``paid[j]`` is ``1{e_j < 1/lam}`` for ``j < t``."""
    om = np.asarray(omegas, dtype=float)
    mask = np.asarray(paid, dtype=float)
    return float(alpha * (1.0 - lam) * (prior_rejections + 1) * om[-1] * np.prod(1.0 - om[:-1] * mask))


def elond_gamma_from_omegas(omegas: Sequence[float]) -> np.ndarray:
    """``gamma_t = omega_t prod_{j<t} (1 - omega_j)``: the e-LOND sequence matching e-LORD."""
    om = np.asarray(omegas, dtype=float)
    if np.any((om <= 0) | (om >= 1)):
        raise ValueError("allocation fractions must lie in (0, 1)")
    survival = np.concatenate(([1.0], np.cumprod(1.0 - om[:-1])))
    return om * survival


def run_batch(proc_kind: Union[str, ProcedureKind], config: Union[RaiConfig, GaiConfig, None], values, **params):
    """Run a whole stream through the compiled kernel for ``proc_kind``.

    Returns ``(levels, rejects)`` arrays; equivalent to stepping a fresh
    :func:`make_procedure` instance through ``values``.
    """
    kind, mem = parse_kind(proc_kind)
    if config is None:
        if kind.is_rai:
            if mem:
                params.setdefault("decay", DEFAULT_MEM_DECAY)
            config = RaiConfig(**params)
        else:
            config = GaiConfig(**params)
    values = np.ascontiguousarray(values, dtype=float)
    n = values.shape[0]
    if kind.is_rai:
        is_e = kind.evidence_kind is EvidenceKind.E
        levels, rej, _, _ = kernels.rai_run(
            values, is_e, config.alpha, config.omega1, config.phi, config.psi,
            config.lam, kind.adaptive, config.decay,
        )
        return levels, rej
    gamma = config.gamma.array(max(n, 1))
    if kind is ProcedureKind.ELOND:
        return kernels.elond_run(values, config.alpha, gamma)
    if kind is ProcedureKind.LORDPP:
        w0 = config.alpha / 2 if config.w0 is None else config.w0
        return kernels.lordpp_run(values, config.alpha, w0, gamma)
    base = (1.0 - config.lam) * config.alpha
    w0 = base / 2 if config.w0 is None else config.w0
    if w0 > base:
        raise ConfigError("w0", f"must not exceed (1 - lambda) * alpha = {base!r} for SAFFRON")
    return kernels.saffron_run(values, config.alpha, config.lam, w0, gamma)
