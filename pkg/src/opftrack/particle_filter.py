"""Baseline 6-DoF particle filter: predict, Gaussian weight update, resample.

A pose is tracked by two independent particle portions of dimension three,
one for translation and one for the Euler rotation triple. The measurement
function is the identity on each portion and the control input is zero, so
prediction is a pure random walk driven by the process noise.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import (DegenerateUpdateError, InvalidConfigError, InvalidInputError,
                     NumericalSingularityError)
from .pose_math import Pose6DoF, wrap_angle

log = logging.getLogger(__name__)

DEFAULT_PARTICLES = 5000
_PSD_TOL = 1e-12


@dataclass
class ParticleSet:
    """``n`` weighted 3-vectors. ``angular`` marks a set of Euler angles."""

    particles: np.ndarray
    weights: np.ndarray
    angular: bool = False

    def __post_init__(self):
        self.particles = np.ascontiguousarray(self.particles, dtype=float)
        self.weights = np.ascontiguousarray(self.weights, dtype=float)
        if self.particles.ndim != 2 or self.particles.shape[1] != 3:
            raise InvalidInputError(f"particles must be (n, 3), got {self.particles.shape}")
        if self.weights.shape != (self.particles.shape[0],):
            raise InvalidInputError("weights must have one entry per particle")

    @property
    def n(self) -> int:
        return self.particles.shape[0]

    def copy(self) -> ParticleSet:
        return ParticleSet(self.particles.copy(), self.weights.copy(), self.angular)


@dataclass
class ParticlePair:
    translation: ParticleSet
    rotation: ParticleSet

    def copy(self) -> ParticlePair:
        return ParticlePair(self.translation.copy(), self.rotation.copy())


_ZERO3 = np.zeros(3)


def _check_psd(m, name) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise InvalidConfigError(f"{name} must be a finite 3x3 matrix")
    if not np.allclose(m, m.T, atol=1e-12):
        raise InvalidConfigError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(m).min() < -_PSD_TOL * max(1.0, np.abs(m).max()):
        raise InvalidConfigError(f"{name} must be positive semi-definite")
    return m


def _noise_factor(cov) -> np.ndarray:
    """Matrix ``L`` with ``L @ L.T == cov`` for a PSD (possibly singular) cov."""
    vals, vecs = np.linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass
class NoiseModel:
    """Process (R) and measurement (Q) covariances for both portions.

    ``scale`` is the covariance inflation factor; the effective measurement
    covariance of a portion is ``scale * Q``.
    """

    process_t: np.ndarray = field(default_factory=lambda: np.eye(3) * 0.005 ** 2)
    process_r: np.ndarray = field(default_factory=lambda: np.eye(3) * 0.02 ** 2)
    meas_t: np.ndarray = field(default_factory=lambda: np.eye(3) * 0.003 ** 2)
    meas_r: np.ndarray = field(default_factory=lambda: np.eye(3) * 0.01 ** 2)
    scale: float = 1.0

    def __post_init__(self):
        self.process_t = _check_psd(self.process_t, "process_t")
        self.process_r = _check_psd(self.process_r, "process_r")
        self.meas_t = _check_psd(self.meas_t, "meas_t")
        self.meas_r = _check_psd(self.meas_r, "meas_r")
        if not (self.scale >= 1.0 and math.isfinite(self.scale)):
            raise InvalidConfigError(f"covariance scale must be >= 1, got {self.scale}")

    @classmethod
    def isotropic(cls, process_std_t, process_std_r, meas_std_t, meas_std_r) -> NoiseModel:
        return cls(np.eye(3) * process_std_t ** 2, np.eye(3) * process_std_r ** 2,
                   np.eye(3) * meas_std_t ** 2, np.eye(3) * meas_std_r ** 2)

    def effective(self, scale: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        s = self.scale if scale is None else scale
        return s * self.meas_t, s * self.meas_r


def init_particles(initial: Pose6DoF, n: int = DEFAULT_PARTICLES,
                   spread_t: float = 0.0, spread_r: float = 0.0,
                   rng: np.random.Generator | None = None) -> ParticlePair:
    """Gaussian cloud around ``initial`` with uniform weights."""
    if n < 1:
        raise InvalidConfigError(f"particle count must be >= 1, got {n}")
    if spread_t < 0 or spread_r < 0:
        raise InvalidConfigError("spread must be non-negative")
    rng = rng if rng is not None else np.random.default_rng()
    w = np.full(n, 1.0 / n)
    t = initial.translation + spread_t * rng.standard_normal((n, 3))
    r = wrap_angle(initial.rotation + spread_r * rng.standard_normal((n, 3)))
    return ParticlePair(ParticleSet(t, w.copy()), ParticleSet(r, w.copy(), angular=True))


def predict(pset: ParticleSet, motion_delta, R, rng: np.random.Generator,
            factor=None) -> ParticleSet:
    """Propagate every particle by ``motion_delta`` plus N(0, R) noise.

    Weights are carried over untouched. ``factor`` is an optional
    precomputed square root of ``R`` (skips validation and factorisation).
    """
    if factor is None:
        factor = _noise_factor(_check_psd(R, "R"))
    delta = np.asarray(motion_delta, dtype=float).reshape(3)
    z = rng.standard_normal((pset.n, 3))
    x = kernels.propagate(pset.particles, delta, factor, z, pset.angular)
    return ParticleSet(x, pset.weights, pset.angular)


def _inverse_and_lognorm(Q) -> tuple[np.ndarray, float]:
    Q = np.asarray(Q, dtype=float)
    sign, logdet = np.linalg.slogdet(Q)
    if sign <= 0 or not np.isfinite(logdet):
        raise NumericalSingularityError("measurement covariance is not positive definite")
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        raise NumericalSingularityError("measurement covariance is not positive definite") from None
    p = Q.shape[0]
    return np.linalg.inv(Q), -0.5 * (p * math.log(2.0 * math.pi) + logdet)


def gaussian_likelihood(innovation, Q) -> float:
    """Density of N(0, Q) at ``innovation``."""
    nu = np.asarray(innovation, dtype=float).reshape(-1)
    q_inv, log_norm = _inverse_and_lognorm(Q)
    return math.exp(log_norm - 0.5 * float(nu @ q_inv @ nu))


def update_weights(pset: ParticleSet, measurement, Q, g=None, prepared=None) -> ParticleSet:
    """Reweight by the likelihood of ``measurement`` and renormalise.

    ``g`` maps the (n, 3) particle array to predicted measurements; the
    default is the identity. Angular sets use wrapped innovations.
    ``prepared`` is an optional ``(Q^-1, log normaliser)`` pair for ``Q``.
    """
    y = np.asarray(measurement, dtype=float).reshape(3)
    if not np.all(np.isfinite(y)):
        raise InvalidInputError(f"measurement must be finite, got {y}")
    q_inv, log_norm = prepared if prepared is not None else _inverse_and_lognorm(Q)
    x = pset.particles if g is None else np.ascontiguousarray(g(pset.particles), dtype=float)
    w, ok = kernels.weight_update(x, pset.weights, y, np.ascontiguousarray(q_inv),
                                  log_norm, pset.angular)
    if not ok:
        raise DegenerateUpdateError("all particle likelihoods underflowed")
    return ParticleSet(pset.particles, w, pset.angular)


def effective_sample_size(pset: ParticleSet) -> float:
    w = pset.weights
    return 1.0 / float(w @ w)


def resample(pset: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Systematic resampling; the output has uniform weights."""
    n = pset.n
    u = rng.uniform(0.0, 1.0 / n)
    idx = kernels.systematic_indices(pset.weights, u)
    return ParticleSet(np.take(pset.particles, idx, axis=0), np.full(n, 1.0 / n), pset.angular)


def resample_if_needed(pset: ParticleSet, rng: np.random.Generator,
                       threshold: float = 0.5) -> ParticleSet:
    if effective_sample_size(pset) < threshold * pset.n:
        return resample(pset, rng)
    return pset


def moments(pset: ParticleSet) -> tuple[np.ndarray, np.ndarray]:
    """Weighted mean (circular for angular sets) and weighted covariance."""
    return kernels.weighted_mean_cov(pset.particles, pset.weights, pset.angular)


def estimate(pair: ParticlePair) -> tuple[Pose6DoF, np.ndarray]:
    """Point estimate and 6x6 block-diagonal posterior covariance."""
    mt, ct = moments(pair.translation)
    mr, cr = moments(pair.rotation)
    cov = np.zeros((6, 6))
    cov[:3, :3] = ct
    cov[3:, 3:] = cr
    return Pose6DoF.from_parts(mt, mr), cov


class ParticleFilter:
    """One object's filter: a particle pair, its noise model and its RNG.

    This is a thin stateful wrapper over the module functions with the
    resample-below-half-ESS schedule built in.
    """

    def __init__(self, pair: ParticlePair, noise: NoiseModel, rng: np.random.Generator,
                 resample_threshold: float = 0.5):
        self.pair = pair
        self.noise = noise
        self.rng = rng
        self.resample_threshold = resample_threshold
        # noise is fixed for the filter's lifetime; factor it once
        self._factors = (_noise_factor(noise.process_t), _noise_factor(noise.process_r))
        self._q_prep = (_inverse_and_lognorm(noise.meas_t), _inverse_and_lognorm(noise.meas_r))

    @classmethod
    def from_pose(cls, pose: Pose6DoF, noise: NoiseModel, rng: np.random.Generator,
                  n: int = DEFAULT_PARTICLES) -> ParticleFilter:
        spread_t = math.sqrt(np.trace(noise.meas_t) / 3.0)
        spread_r = math.sqrt(np.trace(noise.meas_r) / 3.0)
        return cls(init_particles(pose, n, spread_t, spread_r, rng), noise, rng)

    def clone(self, rng: np.random.Generator) -> ParticleFilter:
        return ParticleFilter(self.pair.copy(), replace(self.noise), rng, self.resample_threshold)

    def predict(self) -> None:
        ft, fr = self._factors
        self.pair = ParticlePair(
            predict(self.pair.translation, _ZERO3, self.noise.process_t, self.rng, ft),
            predict(self.pair.rotation, _ZERO3, self.noise.process_r, self.rng, fr),
        )

    def _prepared(self, which: int, scale: float):
        # (sQ)^-1 = Q^-1 / s and log|sQ| = log|Q| + 3 log s
        q_inv, log_norm = self._q_prep[which]
        if scale == 1.0:
            return q_inv, log_norm
        return q_inv / scale, log_norm - 1.5 * math.log(scale)

    def update(self, measurement: Pose6DoF, scale: float = 1.0) -> None:
        """Weight update with effective covariance ``scale * Q`` on both portions."""
        qt, qr = self.noise.effective(scale)
        t, r = self.pair.translation, self.pair.rotation
        try:
            t = update_weights(t, measurement.translation, qt, prepared=self._prepared(0, scale))
        except DegenerateUpdateError as exc:
            log.warning("translation %s; weights reset to uniform", exc)
            t = ParticleSet(t.particles, np.full(t.n, 1.0 / t.n))
        try:
            r = update_weights(r, measurement.rotation, qr, prepared=self._prepared(1, scale))
        except DegenerateUpdateError as exc:
            log.warning("rotation %s; weights reset to uniform", exc)
            r = ParticleSet(r.particles, np.full(r.n, 1.0 / r.n), angular=True)
        self.pair = ParticlePair(
            resample_if_needed(t, self.rng, self.resample_threshold),
            resample_if_needed(r, self.rng, self.resample_threshold),
        )

    def estimate(self) -> tuple[Pose6DoF, np.ndarray]:
        return estimate(self.pair)
