"""Hot numeric kernels.

Each kernel has a jitted loop version and a vectorised numpy version with the
same contract. The public names at the bottom of the module are bound to one
or the other according to :data:`privp0._accel.USE_NUMBA`; both
implementations stay importable (``*_numba`` / ``*_numpy``) so tests and the
benchmark can compare them directly.

Dyad weights are evaluated with max-exponent shifting: for s = alpha_i + beta_j
the unnormalised pmf is e^{k s}; when s <= 0 the largest term is k = 0 and the
weights are x^k with x = e^s, otherwise the largest is k = q-1 and the weights
are x^{q-1-k} with x = e^{-s}. Only one exponential per dyad is needed and no
term exceeds 1.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

__all__ = [
    "dyad_moments",
    "dyad_moments_numba",
    "dyad_moments_numpy",
    "sample_weights",
    "sample_weights_numba",
    "sample_weights_numpy",
    "solve_coordinates",
    "solve_coordinates_numba",
    "solve_coordinates_numpy",
]


# ---------------------------------------------------------------------------
# numba
# ---------------------------------------------------------------------------
@njit(cache=True, nogil=True)
def _fill_weights(s, q, w):
    if s <= 0.0:
        x = np.exp(s)
        w[0] = 1.0
        for k in range(1, q):
            w[k] = w[k - 1] * x
    else:
        x = np.exp(-s)
        w[q - 1] = 1.0
        for k in range(q - 2, -1, -1):
            w[k] = w[k + 1] * x
    tot = 0.0
    for k in range(q):
        tot += w[k]
    for k in range(q):
        w[k] /= tot


@njit(cache=True, nogil=True)
def _scalar_moments(s, q, w):
    # unnormalised weights, largest term 1; normalise once at the end
    if s <= 0.0:
        x = np.exp(s)
        w[0] = 1.0
        for k in range(1, q):
            w[k] = w[k - 1] * x
    else:
        x = np.exp(-s)
        w[q - 1] = 1.0
        for k in range(q - 2, -1, -1):
            w[k] = w[k + 1] * x
    tot = 0.0
    s1 = 0.0
    for k in range(q):
        tot += w[k]
        s1 += k * w[k]
    inv = 1.0 / tot
    mu = s1 * inv
    s2 = 0.0
    for k in range(q):
        d = k - mu
        s2 += w[k] * d * d
    return mu, s2 * inv


@njit(cache=True, nogil=True)
def dyad_moments_numba(alpha, beta, q):
    n = alpha.shape[0]
    mean = np.zeros((n, n))
    var = np.zeros((n, n))
    w = np.empty(q)
    for i in range(n):
        ai = alpha[i]
        for j in range(n):
            if i == j:
                continue
            mu, v = _scalar_moments(ai + beta[j], q, w)
            mean[i, j] = mu
            var[i, j] = v
    return mean, var


@njit(cache=True, nogil=True)
def sample_weights_numba(alpha, beta, q, u):
    n = alpha.shape[0]
    out = np.zeros((n, n), dtype=np.int64)
    w = np.empty(q)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            _fill_weights(alpha[i] + beta[j], q, w)
            cdf = 0.0
            a = q - 1
            for k in range(q - 1):
                cdf += w[k]
                if u[i, j] < cdf:
                    a = k
                    break
            out[i, j] = a
    return out


@njit(cache=True, nogil=True)
def _row_value(x, other, r, q, w):
    g = 0.0
    dg = 0.0
    for c in range(other.shape[0]):
        if c == r:
            continue
        mu, v = _scalar_moments(x + other[c], q, w)
        g += mu
        dg += v
    return g, dg


@njit(cache=True, nogil=True)
def solve_coordinates_numba(target, x0, other, lo, hi, q):
    m = target.shape[0]
    out = np.empty(m)
    w = np.empty(q)
    for r in range(m):
        t = target[r]
        a = lo
        b = hi
        ga, _ = _row_value(a, other, r, q, w)
        if ga >= t:
            out[r] = a
            continue
        gb, _ = _row_value(b, other, r, q, w)
        if gb <= t:
            out[r] = b
            continue
        x = min(max(x0[r], a), b)
        ftol = 1e-13 * max(1.0, abs(t))
        for _ in range(200):
            g, dg = _row_value(x, other, r, q, w)
            f = g - t
            if abs(f) <= ftol:
                break
            if f < 0.0:
                a = x
            else:
                b = x
            if b - a <= 1e-15 * max(1.0, abs(x)):
                break
            xn = x - f / dg if dg > 0.0 else 0.5 * (a + b)
            if not (a < xn < b):
                xn = 0.5 * (a + b)
            x = xn
        out[r] = x
    return out


# ---------------------------------------------------------------------------
# numpy
# ---------------------------------------------------------------------------
def _weights_numpy(s, q):
    """Normalised pmf over the trailing axis, shape s.shape + (q,)."""
    k = np.arange(q, dtype=np.float64)
    shift = np.where(s > 0.0, (q - 1) * s, 0.0)
    logw = k * s[..., None] - shift[..., None]
    w = np.exp(logw)
    return w / w.sum(axis=-1, keepdims=True)


def _moments_numpy(s, q):
    p = _weights_numpy(s, q)
    k = np.arange(q, dtype=np.float64)
    mu = p @ k
    var = np.einsum("...k,...k->...", p, (k - mu[..., None]) ** 2)
    return mu, var


def dyad_moments_numpy(alpha, beta, q):
    s = alpha[:, None] + beta[None, :]
    mean, var = _moments_numpy(s, q)
    np.fill_diagonal(mean, 0.0)
    np.fill_diagonal(var, 0.0)
    return mean, var


def sample_weights_numpy(alpha, beta, q, u):
    s = alpha[:, None] + beta[None, :]
    cdf = np.cumsum(_weights_numpy(s, q)[..., :-1], axis=-1)
    out = (u[..., None] >= cdf).sum(axis=-1).astype(np.int64)
    np.fill_diagonal(out, 0)
    return out


def _rows_value_numpy(x, other, q):
    m = x.shape[0]
    s = x[:, None] + other[None, :]
    mu, var = _moments_numpy(s, q)
    idx = np.arange(m)
    mu[idx, idx] = 0.0
    var[idx, idx] = 0.0
    return mu.sum(axis=1), var.sum(axis=1)


def solve_coordinates_numpy(target, x0, other, lo, hi, q):
    m = target.shape[0]
    a = np.full(m, float(lo))
    b = np.full(m, float(hi))
    ga, _ = _rows_value_numpy(a, other, q)
    gb, _ = _rows_value_numpy(b, other, q)
    at_lo = ga >= target
    at_hi = (gb <= target) & ~at_lo
    active = ~(at_lo | at_hi)
    x = np.clip(x0, a, b)
    ftol = 1e-13 * np.maximum(1.0, np.abs(target))
    for _ in range(200):
        if not active.any():
            break
        g, dg = _rows_value_numpy(x, other, q)
        f = g - target
        done = np.abs(f) <= ftol
        a = np.where(active & ~done & (f < 0.0), x, a)
        b = np.where(active & ~done & (f >= 0.0), x, b)
        done |= (b - a) <= 1e-15 * np.maximum(1.0, np.abs(x))
        active &= ~done
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = np.where(dg > 0.0, x - f / dg, 0.5 * (a + b))
        bad = ~((a < xn) & (xn < b))
        xn = np.where(bad, 0.5 * (a + b), xn)
        x = np.where(active, xn, x)
    x = np.where(at_lo, lo, x)
    x = np.where(at_hi, hi, x)
    return x


if USE_NUMBA:
    dyad_moments = dyad_moments_numba
    sample_weights = sample_weights_numba
    solve_coordinates = solve_coordinates_numba
else:
    dyad_moments = dyad_moments_numpy
    sample_weights = sample_weights_numpy
    solve_coordinates = solve_coordinates_numpy
