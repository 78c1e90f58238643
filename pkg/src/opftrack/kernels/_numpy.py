"""Pure-numpy reference implementations of the hot kernels.

Every function here has a twin in ``_numba`` with the same signature and
semantics; the two are cross-checked in the test suite.
"""
import numpy as np

TWO_PI = 2.0 * np.pi


def wrap(a):
    """Map angles into (-pi, pi]; values already in range pass through unchanged."""
    inside = (a > -np.pi) & (a <= np.pi)
    return np.where(inside, a, np.pi - np.mod(np.pi - a, TWO_PI))


def propagate(particles, delta, factor, z, angular):
    """``particles + delta + z @ factor.T``, wrapped for angular clouds."""
    x = particles + delta + z @ factor.T
    return wrap(x) if angular else x


def weight_update(particles, weights, y, q_inv, log_norm, angular):
    """Multiply weights by the Gaussian likelihood of ``y`` and renormalise.

    Works in log space with the maximum subtracted before exponentiation.
    Returns ``(new_weights, ok)``; ``ok`` is False when no particle has a
    finite log-weight.
    """
    d = y[None, :] - particles
    if angular:
        d = wrap(d)
    maha = np.einsum("ij,jk,ik->i", d, q_inv, d)
    with np.errstate(divide="ignore"):
        logw = np.log(weights) + (log_norm - 0.5 * maha)
    mx = np.max(logw)
    if not np.isfinite(mx):
        return weights.copy(), False
    w = np.exp(logw - mx)
    w /= w.sum()
    return w, True


def systematic_indices(weights, u):
    """Indices selected by systematic resampling with offset ``u`` in [0, 1/n)."""
    n = weights.shape[0]
    cum = np.cumsum(weights)
    positions = u + np.arange(n) / n
    idx = np.searchsorted(cum, positions, side="right")
    return np.minimum(idx, n - 1)


def weighted_mean_cov(particles, weights, angular):
    """Weighted mean and (biased) weighted covariance of an (n, 3) cloud.

    Angular clouds use the per-component circular mean and wrapped deviations.
    """
    if angular:
        s = weights @ np.sin(particles)
        c = weights @ np.cos(particles)
        mean = wrap(np.arctan2(s, c))
        d = wrap(particles - mean)
    else:
        mean = weights @ particles
        d = particles - mean
    cov = (d * weights[:, None]).T @ d
    return mean, cov


def max_pairwise(points, angular):
    """Exact maximum Euclidean distance over all pairs of rows."""
    d = points[:, None, :] - points[None, :, :]
    if angular:
        d = wrap(d)
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))
