"""Constructing valid e-values and p-values."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from scipy import integrate

from .core import Evidence, EvidenceError, EvidenceKind


@dataclass(frozen=True)
class DensityPair:
    """Log-densities of the null and of the (estimated) alternative at one step.

    The alternative must integrate to one; that is the caller's contract and
    is what makes the likelihood ratio a valid e-value under the null.
    """

    null_logdensity: Callable[[float], float]
    alt_logdensity: Callable[[float], float]


def lr_evalue(x: float, densities: DensityPair) -> Evidence:
    """Likelihood-ratio e-value ``f_alt(x) / f_null(x)``."""
    log_null = float(densities.null_logdensity(x))
    if not math.isfinite(log_null):
        raise EvidenceError("null log-density is not finite at the observation")
    log_ratio = float(densities.alt_logdensity(x)) - log_null
    if math.isnan(log_ratio):
        raise EvidenceError("evidence overflow: likelihood ratio is NaN")
    try:
        value = math.exp(log_ratio)
    except OverflowError:
        raise EvidenceError("evidence overflow: likelihood ratio is not finite") from None
    return Evidence.e(value)


def power_calibrator(eta: float) -> Callable[[float], float]:
    """The calibrator ``s -> eta * s**(eta - 1)`` for ``eta`` in (0, 1)."""
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta!r}")

    def f(s: float) -> float:
        return eta * s ** (eta - 1.0)

    f.eta = eta
    return f


def calibrator_mass(calibrator: Callable[[float], float]) -> float:
    """Numerically integrate a calibrator over [0, 1]; valid calibrators give 1.

    The integrable singularity at 0 is handled by QUADPACK's algebraic-weight
    rule when the calibrator is a power calibrator, and by adaptive
    quadrature otherwise.
    """
    eta = getattr(calibrator, "eta", None)
    if eta is not None:
        # integrand eta * s^(eta-1): weight s^(eta-1), remaining factor constant
        val, _ = integrate.quad(lambda s: eta, 0.0, 1.0, weight="alg", wvar=(eta - 1.0, 0.0))
        return val
    val, _ = integrate.quad(calibrator, 0.0, 1.0, limit=200)
    return val


def check_calibrator(calibrator: Callable[[float], float], tol: float = 1e-8, grid: int = 257) -> None:
    """Raise ``ValueError`` unless ``calibrator`` is decreasing with unit mass."""
    mass = calibrator_mass(calibrator)
    if abs(mass - 1.0) > tol:
        raise ValueError(f"calibrator integrates to {mass!r}, not 1")
    prev = math.inf
    for k in range(1, grid + 1):
        v = calibrator(k / grid)
        if v > prev:
            raise ValueError("calibrator must be non-increasing")
        prev = v


def p_to_e(p: Evidence, eta: float = 0.5, calibrator: Callable[[float], float] = None) -> Evidence:
    """Calibrate a p-value into an e-value.

    Uses ``eta * p**(eta - 1)`` unless a custom ``calibrator`` (checked with
    :func:`check_calibrator` by the caller) is supplied.
    """
    if p.kind is not EvidenceKind.P:
        raise EvidenceError("p_to_e expects a p-value")
    if p.value == 0.0:
        raise EvidenceError("calibrator singularity: p = 0 maps to an unbounded e-value")
    f = calibrator if calibrator is not None else power_calibrator(eta)
    return Evidence.e(f(p.value))


def e_to_p(e: Evidence) -> Evidence:
    """``min(1/e, 1)``, a valid p-value by Markov's inequality (``e = 0`` gives 1)."""
    if e.kind is not EvidenceKind.E:
        raise EvidenceError("e_to_p expects an e-value")
    if e.value <= 1.0:
        return Evidence.p(1.0)
    return Evidence.p(1.0 / e.value)


def indicator_evalue(p: Evidence, level: float) -> Evidence:
    """``1{p <= level} / level``: turns a level-``level`` p-test into an e-value."""
    if p.kind is not EvidenceKind.P:
        raise EvidenceError("indicator_evalue expects a p-value")
    if not 0.0 < level <= 1.0:
        raise EvidenceError(f"degenerate level {level!r}: must lie in (0, 1]")
    return Evidence.e(1.0 / level if p.value <= level else 0.0)
