"""Uncertainty monitoring, safety alerting and a cautious tracking controller."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError


@dataclass(frozen=True)
class FeedbackConfig:
    """``eps_safe`` left as None is resolved to 100x the visible trace."""

    eps_safe: float | None = None
    kp_nom: float = 2.0
    kd_nom: float = 1.0
    steepness: float = 4.0

    def __post_init__(self):
        if self.eps_safe is not None and not self.eps_safe > 0:
            raise InvalidConfigError("eps_safe must be > 0")
        if not self.kp_nom > 0:
            raise InvalidConfigError("kp_nom must be > 0")
        if not 0 <= self.kd_nom <= 1:
            raise InvalidConfigError("kd_nom must lie in [0, 1]")
        if not self.steepness >= 1:
            raise InvalidConfigError("steepness must be >= 1")

    def resolved(self, visible_trace: float) -> FeedbackConfig:
        if self.eps_safe is not None:
            return self
        return FeedbackConfig(100.0 * visible_trace, self.kp_nom, self.kd_nom, self.steepness)


@dataclass(frozen=True)
class RobotPoint:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        for name in ("position", "velocity"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(v)):
                raise InvalidInputError(f"robot {name} must be finite")
            object.__setattr__(self, name, v)


def uncertainty(q_eff) -> float:
    """Trace of the effective measurement covariance."""
    q = np.asarray(q_eff, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {q.shape}")
    return float(np.trace(q))


def sigmoid_gain(u: float, k_nom: float, eps_safe: float, n: float) -> float:
    """Decreasing sigmoid, equal to ``k_nom`` at zero and ``k_nom/2`` at eps_safe/2."""
    if u < 0:
        raise InvalidInputError("uncertainty must be non-negative")
    m = 0.5 * eps_safe
    # divide through by m**n so large n / large u cannot overflow
    return k_nom / (1.0 + (u / m) ** n)


class SafetyMonitor:
    """Edge-triggered alert latch on ``U >= eps_safe``.

    :meth:`update` returns ``"enter"`` or ``"exit"`` on a crossing and None
    otherwise.
    """

    def __init__(self, eps_safe: float):
        if not eps_safe > 0:
            raise InvalidConfigError("eps_safe must be > 0")
        self.eps_safe = eps_safe
        self.alert = False

    def status(self, u: float) -> str:
        return "alert" if u >= self.eps_safe else "normal"

    def update(self, u: float) -> str | None:
        now = u >= self.eps_safe
        if now == self.alert:
            return None
        self.alert = now
        return "enter" if now else "exit"


def safety_status(u: float, cfg: FeedbackConfig) -> str:
    if u < 0:
        raise InvalidInputError("uncertainty must be non-negative")
    if cfg.eps_safe is None:
        raise InvalidConfigError("eps_safe is unresolved")
    return "alert" if u >= cfg.eps_safe else "normal"


def tracking_command(robot: RobotPoint, target_pos, target_vel, u: float,
                     cfg: FeedbackConfig) -> np.ndarray:
    """Velocity command pulling the robot toward the target, softened by ``u``."""
    xo = np.asarray(target_pos, dtype=float).reshape(3)
    vo = np.asarray(target_vel, dtype=float).reshape(3)
    if not (np.all(np.isfinite(xo)) and np.all(np.isfinite(vo)) and np.isfinite(u)):
        raise InvalidInputError("tracking inputs must be finite")
    kp = sigmoid_gain(u, cfg.kp_nom, cfg.eps_safe, cfg.steepness)
    kd = sigmoid_gain(u, cfg.kd_nom, cfg.eps_safe, cfg.steepness)
    return -kp * (robot.position - xo) + kd * vo


def finite_difference_velocity(prev_pos, pos, frame_rate: float) -> np.ndarray:
    return (np.asarray(pos, float) - np.asarray(prev_pos, float)) * frame_rate


def simulate_tracking(start, targets, uncertainties, cfg: FeedbackConfig,
                      frame_rate: float) -> np.ndarray:
    """Integrate a kinematic point robot with explicit Euler steps.

    ``targets`` is a (T, 3) sequence of target position estimates and
    ``uncertainties`` the matching U values; returns the (T, 3) robot path.
    """
    targets = np.asarray(targets, dtype=float)
    dt = 1.0 / frame_rate
    pos = np.asarray(start, dtype=float).reshape(3).copy()
    path = np.empty_like(targets)
    prev = targets[0]
    for i, (xo, u) in enumerate(zip(targets, uncertainties)):
        vo = finite_difference_velocity(prev, xo, frame_rate)
        cmd = tracking_command(RobotPoint(pos, np.zeros(3)), xo, vo, float(u), cfg)
        pos = pos + dt * cmd
        path[i] = pos
        prev = xo
    return path
