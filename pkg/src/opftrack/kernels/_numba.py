"""numba-compiled versions of the kernels in ``_numpy``."""
import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi


@njit(cache=True, inline="always")
def _wrap1(a):
    if -math.pi < a <= math.pi:
        return a
    r = (math.pi - a) % TWO_PI
    return math.pi - r


@njit(cache=True)
def wrap(a):
    out = np.empty_like(a)
    flat_in = a.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.shape[0]):
        flat_out[i] = _wrap1(flat_in[i])
    return out


@njit(cache=True)
def propagate(particles, delta, factor, z, angular):
    n = particles.shape[0]
    out = np.empty((n, 3))
    for i in range(n):
        for a in range(3):
            v = particles[i, a] + delta[a]
            for b in range(3):
                v += z[i, b] * factor[a, b]
            out[i, a] = _wrap1(v) if angular else v
    return out


@njit(cache=True)
def weight_update(particles, weights, y, q_inv, log_norm, angular):
    n = particles.shape[0]
    logw = np.empty(n)
    mx = -np.inf
    for i in range(n):
        d0 = y[0] - particles[i, 0]
        d1 = y[1] - particles[i, 1]
        d2 = y[2] - particles[i, 2]
        if angular:
            d0 = _wrap1(d0)
            d1 = _wrap1(d1)
            d2 = _wrap1(d2)
        maha = (d0 * (q_inv[0, 0] * d0 + q_inv[0, 1] * d1 + q_inv[0, 2] * d2)
                + d1 * (q_inv[1, 0] * d0 + q_inv[1, 1] * d1 + q_inv[1, 2] * d2)
                + d2 * (q_inv[2, 0] * d0 + q_inv[2, 1] * d1 + q_inv[2, 2] * d2))
        wi = weights[i]
        if wi > 0.0:
            lw = math.log(wi) + (log_norm - 0.5 * maha)
        else:
            lw = -np.inf
        logw[i] = lw
        if lw > mx:
            mx = lw
    if not np.isfinite(mx):
        return weights.copy(), False
    out = np.empty(n)
    s = 0.0
    for i in range(n):
        v = math.exp(logw[i] - mx)
        out[i] = v
        s += v
    for i in range(n):
        out[i] /= s
    return out, True


@njit(cache=True)
def systematic_indices(weights, u):
    n = weights.shape[0]
    cum = np.cumsum(weights)
    idx = np.empty(n, dtype=np.int64)
    j = 0
    for i in range(n):
        pos = u + i / n
        while j < n - 1 and pos >= cum[j]:
            j += 1
        idx[i] = j
    return idx


@njit(cache=True)
def weighted_mean_cov(particles, weights, angular):
    n = particles.shape[0]
    mean = np.zeros(3)
    if angular:
        s = np.zeros(3)
        c = np.zeros(3)
        for i in range(n):
            w = weights[i]
            for k in range(3):
                s[k] += w * math.sin(particles[i, k])
                c[k] += w * math.cos(particles[i, k])
        for k in range(3):
            mean[k] = _wrap1(math.atan2(s[k], c[k]))
    else:
        for i in range(n):
            w = weights[i]
            for k in range(3):
                mean[k] += w * particles[i, k]
    cov = np.zeros((3, 3))
    d = np.empty(3)
    for i in range(n):
        w = weights[i]
        for k in range(3):
            dk = particles[i, k] - mean[k]
            if angular:
                dk = _wrap1(dk)
            d[k] = dk
        for a in range(3):
            for b in range(a, 3):
                cov[a, b] += w * d[a] * d[b]
    for a in range(3):
        for b in range(a):
            cov[a, b] = cov[b, a]
    return mean, cov


@njit(cache=True)
def max_pairwise(points, angular):
    m = points.shape[0]
    best = 0.0
    for p in range(m):
        for q in range(p + 1, m):
            acc = 0.0
            for k in range(points.shape[1]):
                d = points[p, k] - points[q, k]
                if angular:
                    d = _wrap1(d)
                acc += d * d
            if acc > best:
                best = acc
    return math.sqrt(best)
