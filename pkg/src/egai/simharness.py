"""Data-generating models, exact evidence and a Monte-Carlo experiment runner.

Two models are provided. The banded Gaussian model draws the whole stream
jointly from ``N(mu, Sigma)`` with ``Sigma_ij = rho^|i-j| 1{|i-j| <= L}``.
The time-varying AR(1) model drifts from negative to positive
autocorrelation along a logistic curve.

Replication ``r`` of an experiment seeded with ``seed`` draws from
``default_rng(SeedSequence(seed, spawn_key=(r,)))``. That makes every
replication independent of the others and of the execution order. Within
a replication the labels are drawn first and the noise second.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cholesky_banded
from scipy.stats import norm

from . import kernels
from .core import ConfigError, Evidence, EvidenceKind, GaiConfig, RaiConfig
from .metrics import LabeledRun, fdp, mem_fdp, mem_power, power
from .procedures import DEFAULT_MEM_DECAY, ProcedureKind, parse_kind, run_batch

EVIDENCE_MODES = ("conditional", "marginal")


def _check_int(name, value, lo):
    if isinstance(value, bool) or int(value) != value or value < lo:
        raise ConfigError(name, f"must be an integer >= {lo}, got {value!r}")
    return int(value)


def _check_pi1(value):
    if not 0.0 <= value <= 1.0:
        raise ConfigError("pi1", f"must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class GaussianConfig:
    """Banded-correlation Gaussian stream; ``mu_t = mu_c`` for alternatives.

    ``evidence`` picks how the per-step statistics are formed:

    * ``"conditional"`` standardizes ``x_t`` by its law given the past
      observations and the true past means. The resulting e- and p-values
      are exactly valid conditionally on the past.
    * ``"marginal"`` uses the marginal law ``N(0, 1)`` of each observation,
      ignoring the dependence. The statistics are marginally valid but
      dependent, which is the regime where the p-value baselines can
      lose FDR control.
    """

    T: int = 500
    pi1: float = 0.1
    mu_c: float = 3.0
    rho: float = 0.5
    L: int = 30
    seed: int = 0
    evidence: str = "conditional"
    _band: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "T", _check_int("T", self.T, 1))
        object.__setattr__(self, "L", _check_int("L", self.L, 0))
        _check_pi1(self.pi1)
        if not self.mu_c > 0:
            raise ConfigError("mu_c", f"must be positive, got {self.mu_c!r}")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError("rho", f"must lie in [0, 1), got {self.rho!r}")
        if self.evidence not in EVIDENCE_MODES:
            raise ConfigError("evidence", f"must be one of {EVIDENCE_MODES}, got {self.evidence!r}")
        width = min(self.L, self.T - 1) + 1
        band = np.zeros((width, self.T))
        for k in range(width):
            band[k, : self.T - k] = self.rho ** k
        try:
            factor = cholesky_banded(band, lower=True)
        except LinAlgError:
            raise ConfigError(
                "rho", f"covariance with rho={self.rho!r}, L={self.L!r} is not positive definite"
            ) from None
        factor.setflags(write=False)
        object.__setattr__(self, "_band", factor)

    @property
    def cholesky_band(self) -> np.ndarray:
        """Lower Cholesky factor of Sigma in LAPACK band storage (read-only)."""
        return self._band

    def covariance(self) -> np.ndarray:
        """Dense Sigma; for inspection and tests."""
        idx = np.arange(self.T)
        lag = np.abs(idx[:, None] - idx[None, :])
        return np.where(lag <= self.L, self.rho ** lag.astype(float), 0.0)


@dataclass(frozen=True)
class Ar1Config:
    """AR(1) stream ``X_t = rho_t X_{t-1} + mu_t + eps_t`` with logistic ``rho_t``."""

    T: int = 500
    pi1: float = 0.4
    mu_c: float = 4.0
    eta: float = 0.01
    t0: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "T", _check_int("T", self.T, 1))
        _check_pi1(self.pi1)
        if not self.mu_c > 0:
            raise ConfigError("mu_c", f"must be positive, got {self.mu_c!r}")
        if not (math.isfinite(self.eta) and self.eta >= 0):
            raise ConfigError("eta", f"must be finite and non-negative, got {self.eta!r}")
        if self.t0 is None:
            object.__setattr__(self, "t0", self.T / 2)
        r = self.rho
        if np.any(np.abs(r) >= 1.0):
            raise ConfigError("eta", "rho_t reaches +-1 in floating point; reduce eta")

    @property
    def rho(self) -> np.ndarray:
        """``rho_t`` for ``t = 1..T`` (index 0 holds ``rho_1``)."""
        t = np.arange(1, self.T + 1, dtype=float)
        # 2/(1+exp(-u)) - 1 == tanh(u/2), which stays exact near the midpoint.
        return np.tanh(self.eta * (t - self.t0) / 2.0)


ModelConfig = Union[GaussianConfig, Ar1Config]


def _draw_labels(T: int, pi1: float, rng: np.random.Generator) -> np.ndarray:
    return (rng.random(T) < pi1).astype(np.int64)


def sample_gaussian_stream(config: GaussianConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Draw ``(x, theta)``: labels iid Bernoulli(pi1), then ``x = mu + L z``."""
    theta = _draw_labels(config.T, config.pi1, rng)
    z = rng.standard_normal(config.T)
    x = config.mu_c * theta + kernels.banded_lower_matvec(config.cholesky_band, z)
    return x, theta


def _gaussian_stats(s, sigma, mu_c):
    e = np.exp(mu_c * s / sigma - mu_c ** 2 / (2.0 * sigma ** 2))
    p = norm.sf(s)
    return e, p


def gaussian_evidence_stream(x, theta, config: GaussianConfig) -> Tuple[np.ndarray, np.ndarray]:
    """e- and p-values for every step of a Gaussian stream.

    In conditional mode step ``t`` only uses ``x_1..x_t`` and ``theta_1..theta_{t-1}``.
    """
    x = np.ascontiguousarray(x, dtype=float)
    if config.evidence == "marginal":
        return _gaussian_stats(x, 1.0, config.mu_c)
    mu = config.mu_c * np.asarray(theta, dtype=float)
    band = config.cholesky_band[:, : x.shape[0]]
    _, s = kernels.banded_innovations(np.ascontiguousarray(band), x, mu)
    return _gaussian_stats(s, band[0], config.mu_c)


def gaussian_evidence(x, theta_past, config: GaussianConfig) -> Tuple[Evidence, Evidence]:
    """Evidence ``(e_t, p_t)`` for the last entry of ``x = x_1..x_t``.

    ``theta_past`` holds ``theta_1..theta_{t-1}``. The conditional law of
    ``X_t`` given the past is ``N(m_t, sigma_t^2)`` under the null. The
    e-value is the likelihood ratio of a ``mu_c`` mean shift and the p-value
    is one-sided.
    """
    x = np.asarray(x, dtype=float)
    t = x.shape[0]
    if not 1 <= t <= config.T:
        raise ValueError(f"need 1 <= t <= T={config.T}, got {t}")
    theta_past = np.asarray(theta_past, dtype=float)
    if theta_past.shape[0] != t - 1:
        raise ValueError("theta_past must hold exactly t - 1 labels")
    theta = np.concatenate((theta_past, [0.0]))
    e, p = gaussian_evidence_stream(x, theta, config)
    return Evidence.e(e[-1]), Evidence.p(min(max(p[-1], 0.0), 1.0))


def sample_ar1_stream(config: Ar1Config, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Draw ``(x, theta)`` with ``X_0 = 0``."""
    theta = _draw_labels(config.T, config.pi1, rng)
    noise = rng.standard_normal(config.T)
    x = kernels.ar1_simulate(config.rho, config.mu_c * theta.astype(float), noise)
    return x, theta


def ar1_evidence(x_t: float, x_prev: float, rho_t: float, config: Ar1Config) -> Tuple[Evidence, Evidence]:
    """Evidence from the residual ``r = x_t - rho_t x_{t-1}``."""
    r = x_t - rho_t * x_prev
    mu = config.mu_c
    return Evidence.e(math.exp(mu * r - mu * mu / 2.0)), Evidence.p(float(norm.sf(r)))


def ar1_evidence_stream(x, config: Ar1Config) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    rho = config.rho[: x.shape[0]]
    prev = np.concatenate(([0.0], x[:-1]))
    r = x - rho * prev
    mu = config.mu_c
    return np.exp(mu * r - mu * mu / 2.0), norm.sf(r)


def simulate_stream(config: ModelConfig, rng: np.random.Generator):
    """One replication: ``(x, theta, e, p)``."""
    if isinstance(config, GaussianConfig):
        x, theta = sample_gaussian_stream(config, rng)
        e, p = gaussian_evidence_stream(x, theta, config)
    else:
        x, theta = sample_ar1_stream(config, rng)
        e, p = ar1_evidence_stream(x, config)
    return x, theta, e, p


def replication_rng(seed: int, r: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))


_HORIZON_EXPR = {
    "1/t": lambda T: 1.0 / T,
    "1/sqrt(t)": lambda T: 1.0 / math.sqrt(T),
    "1/t^2": lambda T: 1.0 / T ** 2,
    "1/t**2": lambda T: 1.0 / T ** 2,
}


def _resolve_param(name, value, T):
    if isinstance(value, str) and name != "gamma":
        key = value.replace(" ", "").lower()
        if key in _HORIZON_EXPR:
            return _HORIZON_EXPR[key](T)
        raise ConfigError(name, f"cannot interpret {value!r}; use a number or one of 1/T, 1/sqrt(T), 1/T^2")
    return value


@dataclass(frozen=True)
class ProcedureSpec:
    """A procedure in an experiment: its name, parameters and display label.

    Numeric ``omega1`` may be written relative to the horizon as ``"1/T"``,
    ``"1/sqrt(T)"`` or ``"1/T^2"``.
    """

    name: str
    params: Mapping[str, Any] = field(default_factory=dict)
    label: Optional[str] = None

    def __post_init__(self):
        kind, mem = parse_kind(self.name)
        object.__setattr__(self, "params", dict(self.params))
        if self.label is None:
            object.__setattr__(self, "label", ("mem-" if mem else "") + kind.value)

    @property
    def kind(self) -> ProcedureKind:
        return parse_kind(self.name)[0]

    def config(self, T: int, alpha: Optional[float] = None):
        kind, mem = parse_kind(self.name)
        params = {k: _resolve_param(k, v, T) for k, v in self.params.items()}
        if "lambda" in params:
            params["lam"] = params.pop("lambda")
        if alpha is not None:
            params.setdefault("alpha", alpha)
        cls = RaiConfig if kind.is_rai else GaiConfig
        allowed = {f.name for f in dataclasses.fields(cls)}
        for key in params:
            if key not in allowed:
                raise ConfigError(key, f"not a parameter of {kind.value}")
        if kind.is_rai and mem:
            params.setdefault("decay", DEFAULT_MEM_DECAY)
        try:
            return cls(**params)
        except TypeError as exc:
            raise ConfigError(self.name, str(exc)) from None

    @property
    def decay(self) -> float:
        kind, mem = parse_kind(self.name)
        if not kind.is_rai:
            return 1.0
        return float(self.params.get("decay", DEFAULT_MEM_DECAY if mem else 1.0))


@dataclass(frozen=True)
class RunMetrics:
    """Mean and standard error over replications of the final-time metrics."""

    procedure: str
    reps: int
    fdr_mean: float
    fdr_se: float
    power_mean: float
    power_se: float
    mem_fdr_mean: float
    mem_fdr_se: float
    mem_power_mean: float
    mem_power_se: float
    mem_decay: float
    #: per-replication ``(fdp, power, mem_fdp, mem_power)``, shape ``(reps, 4)``
    scores: np.ndarray = field(default=None, repr=False, compare=False)


def _mean_se(values: np.ndarray) -> Tuple[float, float]:
    n = values.shape[0]
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def run_experiment(
    model: ModelConfig,
    procedures: Sequence[Union[ProcedureSpec, str]],
    reps: int,
    seed: Optional[int] = None,
    alpha: Optional[float] = None,
    mem_decay: float = DEFAULT_MEM_DECAY,
) -> List[RunMetrics]:
    """Replicate ``model`` ``reps`` times and score every procedure.

    All procedures see the same streams in every replication. The mem metrics
    use each mem procedure's own ``decay`` and ``mem_decay`` for the others.
    ``seed`` defaults to the model's seed.
    """
    reps = _check_int("reps", reps, 1)
    seed = model.seed if seed is None else seed
    specs = [p if isinstance(p, ProcedureSpec) else ProcedureSpec(p) for p in procedures]
    configs = [s.config(model.T, alpha) for s in specs]
    decays = [s.decay if s.decay < 1.0 else mem_decay for s in specs]
    scores = np.zeros((len(specs), reps, 4))
    for r in range(reps):
        _, theta, e, p = simulate_stream(model, replication_rng(seed, r))
        for i, (spec, cfg) in enumerate(zip(specs, configs)):
            kind = spec.kind
            values = e if kind.evidence_kind is EvidenceKind.E else p
            levels, rej = run_batch(spec.name, cfg, values)
            run = LabeledRun(levels, rej, values, kind.evidence_kind, theta)
            d = decays[i]
            scores[i, r] = (fdp(run), power(run), mem_fdp(run, d=d), mem_power(run, d=d))
    out = []
    for i, spec in enumerate(specs):
        stats = [_mean_se(scores[i, :, k]) for k in range(4)]
        out.append(
            RunMetrics(
                spec.label, reps,
                *stats[0], *stats[1], *stats[2], *stats[3],
                mem_decay=decays[i],
                scores=scores[i].copy(),
            )
        )
    return out


@dataclass(frozen=True)
class Experiment:
    """A parsed experiment file: a model, a pi1 sweep and the procedures to run."""

    model: ModelConfig
    pi1_grid: Tuple[float, ...]
    procedures: Tuple[ProcedureSpec, ...]
    reps: int
    seed: int
    alpha: Optional[float] = None
    mem_decay: float = DEFAULT_MEM_DECAY

    def run(self) -> List[Tuple[float, RunMetrics]]:
        rows = []
        for pi1 in self.pi1_grid:
            model = dataclasses.replace(self.model, pi1=pi1)
            for m in run_experiment(model, self.procedures, self.reps, self.seed, self.alpha, self.mem_decay):
                rows.append((pi1, m))
        return rows


_MODEL_KEYS = {
    "gaussian": {"T", "mu_c", "rho", "L", "evidence"},
    "ar1": {"T", "mu_c", "eta", "t0"},
}
_TOP_KEYS = {"model", "pi1", "procedures", "reps", "seed", "alpha", "mem_decay"}


def _parse_procedures(raw) -> Tuple[ProcedureSpec, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("procedures", "must be a non-empty list")
    specs = []
    for item in raw:
        if isinstance(item, str):
            specs.append(ProcedureSpec(item))
        elif isinstance(item, Mapping) and "name" in item:
            item = dict(item)
            name = item.pop("name")
            label = item.pop("label", None)
            params = item.pop("params", None)
            if params is not None:
                if item:
                    raise ConfigError("procedures", "give parameters either under params or inline, not both")
                item = dict(params)
            specs.append(ProcedureSpec(name, item, label))
        else:
            raise ConfigError("procedures", f"entries must be names or mappings with a name, got {item!r}")
    return tuple(specs)


def experiment_from_dict(data: Mapping[str, Any]) -> Experiment:
    """Validate a mapping (as read from YAML) into an :class:`Experiment`."""
    if not isinstance(data, Mapping):
        raise ConfigError("config", "top level must be a mapping")
    model_name = str(data.get("model", "gaussian")).lower()
    if model_name not in _MODEL_KEYS:
        raise ConfigError("model", f"must be one of {sorted(_MODEL_KEYS)}, got {model_name!r}")
    model_keys = _MODEL_KEYS[model_name]
    for key in data:
        if key not in _TOP_KEYS and key not in model_keys:
            raise ConfigError(key, "unknown configuration key")
    pi1 = data.get("pi1", 0.1)
    grid = tuple(float(v) for v in (pi1 if isinstance(pi1, (list, tuple)) else [pi1]))
    if not grid:
        raise ConfigError("pi1", "sweep must contain at least one value")
    for v in grid:
        _check_pi1(v)
    seed = _check_int("seed", data.get("seed", 0), 0)
    kwargs = {k: data[k] for k in model_keys if k in data}
    cls = GaussianConfig if model_name == "gaussian" else Ar1Config
    model = cls(pi1=grid[0], seed=seed, **kwargs)
    alpha = data.get("alpha")
    if alpha is not None and not 0.0 < float(alpha) < 1.0:
        raise ConfigError("alpha", f"must lie in (0, 1), got {alpha!r}")
    mem_decay = float(data.get("mem_decay", DEFAULT_MEM_DECAY))
    if not 0.0 < mem_decay <= 1.0:
        raise ConfigError("mem_decay", f"must lie in (0, 1], got {mem_decay!r}")
    procs = _parse_procedures(data.get("procedures"))
    for spec in procs:
        spec.config(model.T, alpha)  # surface parameter errors before any work
    return Experiment(
        model=model,
        pi1_grid=grid,
        procedures=procs,
        reps=_check_int("reps", data.get("reps", 100), 1),
        seed=seed,
        alpha=None if alpha is None else float(alpha),
        mem_decay=mem_decay,
    )


def load_experiment(path) -> Experiment:
    """Read a YAML experiment file."""
    import yaml

    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError("config", f"not valid YAML: {exc}") from None
    return experiment_from_dict(data if data is not None else {})


RESULT_COLUMNS = (
    "pi1", "procedure", "fdr_mean", "fdr_se", "power_mean", "power_se",
    "mem_fdr_mean", "mem_fdr_se", "mem_power_mean", "mem_power_se", "mem_decay", "reps",
)


def result_rows(rows: Sequence[Tuple[float, RunMetrics]]) -> List[Dict[str, Any]]:
    out = []
    for pi1, m in rows:
        out.append({
            "pi1": pi1, "procedure": m.procedure,
            "fdr_mean": m.fdr_mean, "fdr_se": m.fdr_se,
            "power_mean": m.power_mean, "power_se": m.power_se,
            "mem_fdr_mean": m.mem_fdr_mean, "mem_fdr_se": m.mem_fdr_se,
            "mem_power_mean": m.mem_power_mean, "mem_power_se": m.mem_power_se,
            "mem_decay": m.mem_decay, "reps": m.reps,
        })
    return out
