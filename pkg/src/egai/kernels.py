"""Batch kernels for the simulation harness.

Each kernel processes a whole evidence stream in one call. They mirror the
streaming procedures in :mod:`egai.procedures` operation for operation so both
paths produce identical levels and decisions; the harness uses these because
they are compiled by numba when available (see :mod:`egai._accel`).
"""

import numpy as np

from ._accel import njit


@njit
def _rejects(is_e, value, level):
    if level <= 0.0:
        return False
    if is_e:
        return value >= 1.0 / level
    return value <= level


@njit
def rai_run(values, is_e, alpha, omega1, phi, psi, lam, adaptive, decay):
    """Risk-aversion investing (e-LORD / e-SAFFRON / pL-RAI / pS-RAI, mem or not).

    Returns ``(levels, rejects, wealth, omegas)`` where ``wealth[t-1]`` and
    ``omegas[t-1]`` are the remaining wealth and allocation fraction used to
    set the level at step ``t``.
    """
    n = values.shape[0]
    levels = np.empty(n)
    rej = np.zeros(n, dtype=np.bool_)
    wealth = np.empty(n)
    omegas = np.empty(n)
    lam_eff = lam if adaptive else 0.0
    rw = alpha * (1.0 - lam_eff)
    omega = omega1
    r = 0
    rd = 0.0
    for i in range(n):
        t = i + 1
        denom = decay * rd + 1.0
        a = omega * rw * denom
        if a > 1.0:
            a = 1.0
        elif a < 0.0:
            a = 0.0
        v = values[i]
        d = _rejects(is_e, v, a)
        levels[i] = a
        wealth[i] = rw
        omegas[i] = omega
        rej[i] = d
        if not adaptive:
            pays = True
        elif is_e:
            pays = lam_eff == 0.0 or v < 1.0 / lam_eff
        else:
            pays = v > lam_eff
        if pays:
            rw = rw - a / denom
            if rw < 0.0:
                rw = 0.0
        if d:
            r += 1
            rd = decay * rd + 1.0
            omega = omega - omega1 * psi ** r
        else:
            rd = decay * rd
            omega = omega + omega1 * phi ** (t - r)
    return levels, rej, wealth, omegas


@njit
def elond_run(evalues, alpha, gamma):
    n = evalues.shape[0]
    levels = np.empty(n)
    rej = np.zeros(n, dtype=np.bool_)
    r = 0
    for i in range(n):
        g = gamma[i] if i < gamma.shape[0] else 0.0
        a = alpha * g * (r + 1)
        if a > 1.0:
            a = 1.0
        d = _rejects(True, evalues[i], a)
        levels[i] = a
        rej[i] = d
        if d:
            r += 1
    return levels, rej


@njit
def _gamma_at(gamma, k):
    if k <= gamma.shape[0]:
        return gamma[k - 1]
    return 0.0


@njit
def lordpp_run(pvalues, alpha, w0, gamma):
    n = pvalues.shape[0]
    levels = np.empty(n)
    rej = np.zeros(n, dtype=np.bool_)
    taus = np.zeros(n + 1, dtype=np.int64)
    r = 0
    for i in range(n):
        t = i + 1
        a = w0 * _gamma_at(gamma, t)
        for k in range(1, r + 1):
            coef = (alpha - w0) if k == 1 else alpha
            a += coef * _gamma_at(gamma, t - taus[k])
        if a > 1.0:
            a = 1.0
        d = _rejects(False, pvalues[i], a)
        levels[i] = a
        rej[i] = d
        if d:
            r += 1
            taus[r] = t
    return levels, rej


@njit
def saffron_run(pvalues, alpha, lam, w0, gamma):
    n = pvalues.shape[0]
    levels = np.empty(n)
    rej = np.zeros(n, dtype=np.bool_)
    taus = np.zeros(n + 1, dtype=np.int64)
    cands = np.zeros(n + 1, dtype=np.int64)
    r = 0
    base = (1.0 - lam) * alpha
    for i in range(n):
        t = i + 1
        a = w0 * _gamma_at(gamma, t - cands[0])
        for k in range(1, r + 1):
            coef = (base - w0) if k == 1 else base
            a += coef * _gamma_at(gamma, t - taus[k] - cands[k])
        if a > lam:
            a = lam
        p = pvalues[i]
        d = _rejects(False, p, a)
        levels[i] = a
        rej[i] = d
        if p <= lam:
            for k in range(r + 1):
                cands[k] += 1
        if d:
            r += 1
            taus[r] = t
            cands[r] = 0
    return levels, rej


@njit
def banded_lower_matvec(band, z):
    """``L @ z`` for lower-triangular ``L`` in LAPACK lower-band storage.

    ``band[k, j]`` holds ``L[j + k, j]``, the layout returned by
    ``scipy.linalg.cholesky_banded(..., lower=True)``.
    """
    width = band.shape[0]
    n = z.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        lo = i - width + 1
        if lo < 0:
            lo = 0
        for j in range(lo, i + 1):
            acc += band[i - j, j] * z[j]
        out[i] = acc
    return out


@njit
def banded_innovations(band, x, mu):
    """Conditional means and standardized residuals of a banded Gaussian stream.

    With ``Sigma = L L^T`` and known means ``mu``, step ``t`` has conditional
    mean ``m_t = sum_{j<t} L[t, j] eps_j`` (relative to zero current mean) and
    standard deviation ``L[t, t]``, where ``eps_j = (x_j - mu_j - m_j) / L[j, j]``.
    Returns ``(m, s)`` with ``s_t = (x_t - m_t) / L[t, t]``.
    """
    width = band.shape[0]
    n = x.shape[0]
    eps = np.zeros(n)
    m = np.zeros(n)
    s = np.zeros(n)
    for i in range(n):
        acc = 0.0
        lo = i - width + 1
        if lo < 0:
            lo = 0
        for j in range(lo, i):
            acc += band[i - j, j] * eps[j]
        m[i] = acc
        sd = band[0, i]
        s[i] = (x[i] - acc) / sd
        eps[i] = (x[i] - mu[i] - acc) / sd
    return m, s


@njit
def ar1_simulate(rho, mu, noise):
    n = noise.shape[0]
    x = np.empty(n)
    prev = 0.0
    for i in range(n):
        prev = rho[i] * prev + mu[i] + noise[i]
        x[i] = prev
    return x
