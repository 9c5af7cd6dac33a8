import numpy as np
import pytest

from egai.simharness import Ar1Config, GaussianConfig, replication_rng, simulate_stream


def _adversarial(rng, n):
    """Heavy-tailed e-values with clusters of strong signals."""
    e = np.exp(rng.normal(0.0, 2.5, n))
    burst = rng.random(n) < 0.15
    e[burst] *= 1e4
    e[rng.random(n) < 0.05] = 0.0
    p = np.minimum(1.0, 1.0 / np.maximum(e, 1e-300))
    return e, p


def build_corpus(seed=20240601):
    """Deterministic trajectory corpus shared by the invariant tests."""
    corpus = []
    models = [
        ("gauss-cond", GaussianConfig(T=400, pi1=0.2, evidence="conditional")),
        ("gauss-cond-dense", GaussianConfig(T=400, pi1=0.5, rho=0.8, L=10)),
        ("gauss-marg", GaussianConfig(T=400, pi1=0.3, evidence="marginal")),
        ("ar1", Ar1Config(T=400, pi1=0.4)),
        ("ar1-sparse", Ar1Config(T=400, pi1=0.05, mu_c=3.0)),
    ]
    for name, model in models:
        for r in range(8):
            _, theta, e, p = simulate_stream(model, replication_rng(seed, r))
            corpus.append((f"{name}-{r}", e, p, theta))
    rng = np.random.default_rng(seed)
    for r in range(12):
        e, p = _adversarial(rng, 300)
        theta = (rng.random(300) < 0.3).astype(int)
        corpus.append((f"adversarial-{r}", e, p, theta))
    return corpus


@pytest.fixture(scope="session")
def corpus():
    return build_corpus()
