"""Online false discovery rate control with e-values.

This package provides the risk-aversion investing procedures (e-LORD,
e-SAFFRON, their p-value and decaying-memory variants) and the e-LOND,
LORD++ and SAFFRON baselines. Around them it adds evidence calibration, FDP
diagnostics and a simulation harness.
"""

from .core import (
    ConfigError,
    Decision,
    EGaiError,
    Evidence,
    EvidenceError,
    EvidenceKind,
    EvidenceKindMismatch,
    GaiConfig,
    GammaSequence,
    ProcedureState,
    RaiConfig,
    make_decision,
    rejects,
)
from .procedures import (
    ELond,
    LordPlusPlus,
    Procedure,
    ProcedureKind,
    RaiProcedure,
    Saffron,
    make_procedure,
    parse_kind,
    run_batch,
)
from .metrics import LabeledRun

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Decision",
    "EGaiError",
    "ELond",
    "Evidence",
    "EvidenceError",
    "EvidenceKind",
    "EvidenceKindMismatch",
    "GaiConfig",
    "GammaSequence",
    "LabeledRun",
    "LordPlusPlus",
    "Procedure",
    "ProcedureKind",
    "ProcedureState",
    "RaiConfig",
    "RaiProcedure",
    "Saffron",
    "make_decision",
    "make_procedure",
    "parse_kind",
    "rejects",
    "run_batch",
]
