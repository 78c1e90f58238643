"""Object-permanence update and the K-object filter ensemble.

When an object's measurement is missing, the update step is fed a virtual
measurement instead of being skipped:

* an object that was moving before it disappeared is extrapolated with a
  first-order least-squares fit of its recent translation and of its
  rotation angle about a fixed axis;
* an object that was static is assumed to be hidden by (and to move with)
  the nearest other object, nearness being the Bhattacharyya distance
  between translation particle clouds. When the two nearest candidates are
  within ``eps_occ`` of each other, a virtual clone is spawned so that both
  hypotheses are tracked;
* the measurement covariance is inflated by ``kappa ** v`` per occluded
  frame, ``v`` being a speed (m/s) frozen at occlusion onset.

The occlusion decision (branch, occluder, motion model, speed) is latched at
onset and held for the whole episode.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import feedback
from .errors import (InsufficientHistoryError, InvalidConfigError, InvalidInputError,
                     NoCandidateError, NumericalSingularityError, OpfError)
from .particle_filter import DEFAULT_PARTICLES, NoiseModel, ParticleFilter
from .pose_math import (DEFAULT_AXIS, AxisAngle, Pose6DoF, TrajectoryBuffer,
                        axis_angle_to_euler, euler_to_axis_angle, max_pairwise_displacement,
                        wrap_angle)

log = logging.getLogger(__name__)

COV_FLOOR = 1e-8
_ZERO_ROTATION = 1e-6


@dataclass(frozen=True)
class OpConfig:
    history: int = 50
    delta_t: float = 0.01
    delta_r: float = 0.5
    eps_occ: float = 0.01
    kappa: float = 1.03
    # keep the occluded object's onset offset from its occluder instead of
    # copying the occluder's measurement verbatim
    offset_preserving: bool = False

    def __post_init__(self):
        if self.history < 2:
            raise InvalidConfigError(f"history must be >= 2, got {self.history}")
        for name in ("delta_t", "delta_r", "eps_occ"):
            if not getattr(self, name) > 0:
                raise InvalidConfigError(f"{name} must be > 0")
        if not self.kappa > 1:
            raise InvalidConfigError(f"kappa must be > 1, got {self.kappa}")


class Motion(enum.Enum):
    STATIC = "static"
    MOVING = "moving"


class OcclusionKind(enum.Enum):
    VISIBLE = "visible"
    STATIC = "occluded_static"
    MOVING = "occluded_moving"
    AMBIGUOUS = "occluded_ambiguous"
    HOLD = "occluded_hold"  # fallback when no rule applies


@dataclass(frozen=True)
class MotionModel:
    """Frozen linear fit ``y(k) = slope * k + intercept``.

    Components are (x, y, z, omega) where omega is the rotation angle about
    ``axis``.
    """

    slope: np.ndarray
    intercept: np.ndarray
    axis: np.ndarray
    fit_frame: int


@dataclass
class OcclusionStatus:
    kind: OcclusionKind = OcclusionKind.VISIBLE
    since: int | None = None
    alpha: float = 1.0
    alpha_step: float = 1.0
    velocity: float = 0.0
    occluder: object = None
    second_occluder: object = None
    model: MotionModel | None = None
    offset: np.ndarray | None = None

    @property
    def occluded(self) -> bool:
        return self.kind is not OcclusionKind.VISIBLE


@dataclass(frozen=True)
class ObjectSnapshot:
    """Previous-frame view of an object used by the occluder module."""

    id: object
    pose: Pose6DoF
    mean_t: np.ndarray
    cov_t: np.ndarray
    speed: float


@dataclass(frozen=True)
class OccluderChoice:
    primary: object
    secondary: object = None
    distances: tuple = ()

    @property
    def ambiguous(self) -> bool:
        return self.secondary is not None


# ----------------------------------------------------------------- dynamics

def classify_motion(buf: TrajectoryBuffer, cfg: OpConfig) -> Motion:
    """Static iff both max pairwise displacements stay within thresholds."""
    if len(buf) < 2:
        return Motion.STATIC
    if max_pairwise_displacement(buf, "translation") > cfg.delta_t:
        return Motion.MOVING
    if max_pairwise_displacement(buf, "rotation") > cfg.delta_r:
        return Motion.MOVING
    return Motion.STATIC


def _fixed_axis(aas: list[AxisAngle]) -> np.ndarray:
    if aas[-1].angle >= _ZERO_ROTATION:
        return aas[-1].axis
    biggest = max(aas, key=lambda a: a.angle)
    if biggest.angle >= _ZERO_ROTATION:
        return biggest.axis
    return DEFAULT_AXIS.copy()


def fit_motion_model(buf: TrajectoryBuffer) -> MotionModel:
    """Least-squares line through the buffered translation and rotation angle.

    The rotation is reduced to one scalar: the rotation vector of each pose
    projected onto a fixed axis (that of the latest pose), then unwrapped.
    """
    if len(buf) < 2:
        raise InsufficientHistoryError("motion fit needs at least 2 history entries")
    frames = buf.frames().astype(float)
    if np.ptp(frames) == 0:
        raise InsufficientHistoryError("motion fit needs distinct frame indices")
    aas = [euler_to_axis_angle(r) for r in buf.rotations()]
    axis = _fixed_axis(aas)
    omega = np.unwrap([a.angle * float(a.axis @ axis) for a in aas])
    Y = np.column_stack([buf.translations(), omega])
    A = np.column_stack([frames, np.ones_like(frames)])
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    return MotionModel(coef[0].copy(), coef[1].copy(), np.array(axis, dtype=float),
                       int(frames[-1]))


def predict_virtual_measurement(model: MotionModel, k: int) -> Pose6DoF:
    if k < model.fit_frame:
        raise InvalidInputError(f"cannot extrapolate to frame {k} before fit frame {model.fit_frame}")
    y = model.slope * k + model.intercept
    rot = axis_angle_to_euler(AxisAngle.canonical(model.axis, float(y[3])))
    return Pose6DoF.from_parts(y[:3], rot)


# ----------------------------------------------------------------- occluder

def bhattacharyya_gaussian(mu1, cov1, mu2, cov2) -> float:
    """Closed-form Bhattacharyya distance between two Gaussians."""
    mu1 = np.atleast_1d(np.asarray(mu1, dtype=float))
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=float))
    c1 = np.atleast_2d(np.asarray(cov1, dtype=float))
    c2 = np.atleast_2d(np.asarray(cov2, dtype=float))
    cov = 0.5 * (c1 + c2)
    try:
        for c in (c1, c2, cov):
            np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        raise NumericalSingularityError("Bhattacharyya distance needs positive-definite covariances") from None
    d = mu1 - mu2
    maha = float(d @ np.linalg.solve(cov, d))
    ld = np.linalg.slogdet(cov)[1]
    ld1 = np.linalg.slogdet(c1)[1]
    ld2 = np.linalg.slogdet(c2)[1]
    return 0.125 * maha + 0.5 * (ld - 0.5 * (ld1 + ld2))


def choose_occluder(distances: dict, eps_occ: float) -> OccluderChoice:
    """Single occluder unless the runner-up is within ``eps_occ`` of the best."""
    if not distances:
        raise NoCandidateError("no candidate occluders")
    ranked = sorted(distances.items(), key=lambda kv: kv[1])
    dist_tuple = tuple(ranked)
    if len(ranked) == 1:
        return OccluderChoice(ranked[0][0], None, dist_tuple)
    (p, dp), (q, dq) = ranked[0], ranked[1]
    if dq - dp > eps_occ:
        return OccluderChoice(p, None, dist_tuple)
    return OccluderChoice(p, q, dist_tuple)


def _floored(cov):
    return cov + COV_FLOOR * np.eye(cov.shape[0])


def select_occluder(target: ObjectSnapshot, others, cfg: OpConfig) -> OccluderChoice:
    """Rank every other object by Bhattacharyya distance of translation clouds."""
    cands = [o for o in others if o.id != target.id]
    if not cands:
        raise NoCandidateError(f"object {target.id!r} has no candidate occluders")
    dist = {o.id: bhattacharyya_gaussian(target.mean_t, _floored(target.cov_t),
                                         o.mean_t, _floored(o.cov_t)) for o in cands}
    return choose_occluder(dist, cfg.eps_occ)


# -------------------------------------------------------------- uncertainty

def uncertainty_scale(velocity: float, kappa: float = 1.03) -> float:
    if velocity < 0 or not kappa > 1:
        raise InvalidInputError("need velocity >= 0 and kappa > 1")
    return kappa ** velocity


def speed_from_history(buf: TrajectoryBuffer, frame_rate: float) -> float:
    """Translation speed (m/s) from the last two history entries."""
    if len(buf) < 2:
        return 0.0
    fr = buf.frames()[-2:]
    tr = buf.translations()[-2:]
    return float(np.linalg.norm(tr[1] - tr[0])) / float(fr[1] - fr[0]) * frame_rate


# ----------------------------------------------------------------- objects

@dataclass
class TrackedObject:
    id: object
    filter: ParticleFilter
    history: TrajectoryBuffer
    status: OcclusionStatus = field(default_factory=OcclusionStatus)
    is_virtual_clone: bool = False
    clone: TrackedObject | None = None
    pose: Pose6DoF | None = None
    cov: np.ndarray | None = None

    @property
    def hypotheses(self) -> int:
        return 1 + (self.clone is not None)

    def snapshot(self, frame_rate: float) -> ObjectSnapshot:
        # particles have not moved since the last record(), so its moments stand
        if self.pose is None:
            self.pose, self.cov = self.filter.estimate()
        mean_t, cov_t = self.pose.translation, self.cov[:3, :3].copy()
        return ObjectSnapshot(self.id, self.pose, mean_t, cov_t,
                              speed_from_history(self.history, frame_rate))

    def record(self, frame: int) -> None:
        self.pose, self.cov = self.filter.estimate()
        self.history.append(frame, self.pose)


@dataclass
class OpUpdate:
    """Virtual measurement(s) and per-frame inflation produced for one frame."""

    measurement: Pose6DoF
    alpha_step: float
    spawn_clone: bool = False
    clone_status: OcclusionStatus | None = None


def _pose_offset(a: Pose6DoF, b: Pose6DoF) -> np.ndarray:
    return np.concatenate([a.translation - b.translation, wrap_angle(a.rotation - b.rotation)])


def _occluder_measurement(oid, snapshots, measurements) -> Pose6DoF:
    y = measurements.get(oid)
    return y if y is not None else snapshots[oid].pose


def _begin_occlusion(obj: TrackedObject, snapshots: dict, k: int, cfg: OpConfig,
                     frame_rate: float) -> OcclusionStatus | tuple:
    buf = obj.history
    if classify_motion(buf, cfg) is Motion.MOVING:
        v = speed_from_history(buf, frame_rate)
        return OcclusionStatus(OcclusionKind.MOVING, since=k, velocity=v,
                               alpha_step=uncertainty_scale(v, cfg.kappa),
                               model=fit_motion_model(buf))
    me = snapshots[obj.id]
    choice = select_occluder(me, [s for s in snapshots.values() if s.id != obj.id], cfg)

    def static_on(oid):
        v = snapshots[oid].speed
        off = _pose_offset(me.pose, snapshots[oid].pose) if cfg.offset_preserving else None
        return OcclusionStatus(OcclusionKind.STATIC, since=k, velocity=v,
                               alpha_step=uncertainty_scale(v, cfg.kappa),
                               occluder=oid, offset=off)

    primary = static_on(choice.primary)
    if not choice.ambiguous:
        return primary
    primary.kind = OcclusionKind.AMBIGUOUS
    primary.second_occluder = choice.secondary
    return primary, static_on(choice.secondary)


def _hold_status(obj: TrackedObject, k: int, cfg: OpConfig, frame_rate: float) -> OcclusionStatus:
    v = speed_from_history(obj.history, frame_rate)
    return OcclusionStatus(OcclusionKind.HOLD, since=k, velocity=v,
                           alpha_step=uncertainty_scale(v, cfg.kappa))


def virtual_measurement(obj: TrackedObject, status: OcclusionStatus, snapshots: dict,
                        measurements: dict, k: int) -> Pose6DoF:
    """Measurement fed to the update step while ``status`` holds."""
    if status.kind is OcclusionKind.MOVING:
        return predict_virtual_measurement(status.model, k)
    if status.kind in (OcclusionKind.STATIC, OcclusionKind.AMBIGUOUS):
        y = _occluder_measurement(status.occluder, snapshots, measurements)
        if status.offset is not None:
            y = Pose6DoF.from_array(y.as_array() + status.offset)
        return y
    # HOLD: last pose estimated before the occlusion, kept for the episode
    for f, p in reversed(obj.history.last(obj.history.capacity)):
        if f < status.since:
            return p
    return obj.pose


def op_update_step(obj: TrackedObject, snapshots: dict, measurements: dict, k: int,
                   cfg: OpConfig, frame_rate: float) -> OpUpdate:
    """Object-permanence update for one object with no measurement at frame ``k``.

    On the first occluded frame the branch is decided and latched into
    ``obj.status``; later frames reuse it. Failures of any sub-step degrade to
    holding the last pose (with inflation) and are logged.
    """
    spawn, clone_status = False, None
    if not obj.status.occluded:
        try:
            decided = _begin_occlusion(obj, snapshots, k, cfg, frame_rate)
        except OpfError as exc:
            log.warning("object %r frame %d: OP update degraded to last-pose hold (%s)",
                        obj.id, k, exc)
            decided = _hold_status(obj, k, cfg, frame_rate)
        if isinstance(decided, tuple):
            decided, clone_status = decided
            spawn = True
        decided.alpha = 1.0
        obj.status = decided
    status = obj.status
    status.alpha *= status.alpha_step
    y = virtual_measurement(obj, status, snapshots, measurements, k)
    return OpUpdate(y, status.alpha_step, spawn, clone_status)


# ----------------------------------------------------------------- ensemble

@dataclass
class HypothesisResult:
    frame: int
    object_id: object
    hypothesis: int
    pose: Pose6DoF
    cov: np.ndarray
    status: OcclusionKind
    occluder_id: object
    alpha: float
    alpha_step: float
    velocity: float
    trace_q: float
    measured: bool
    fed_measurement: Pose6DoF | None


class Ensemble:
    """K interconnected object filters stepped frame-synchronously.

    ``kind='pf'`` turns the object-permanence path off: a missing measurement
    then means predict only, with weights left unchanged.
    """

    def __init__(self, initial_poses: dict, *, kind: str = "opf", cfg: OpConfig | None = None,
                 noise: NoiseModel | None = None, n_particles: int = DEFAULT_PARTICLES,
                 frame_rate: float = 30.0, rngs: dict | None = None, seed=0):
        if kind not in ("opf", "pf"):
            raise InvalidConfigError(f"filter kind must be 'opf' or 'pf', got {kind!r}")
        if not initial_poses:
            raise InvalidConfigError("ensemble needs at least one object")
        self.kind = kind
        self.cfg = cfg or OpConfig()
        self.noise = noise or NoiseModel()
        self.frame_rate = float(frame_rate)
        self.frame: int | None = None
        if rngs is None:
            root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
            children = root.spawn(len(initial_poses))
            rngs = {oid: np.random.default_rng(ss) for oid, ss in zip(initial_poses, children)}
        self.objects: dict = {}
        for oid, pose in initial_poses.items():
            pf = ParticleFilter.from_pose(pose, self.noise, rngs[oid], n_particles)
            obj = TrackedObject(oid, pf, TrajectoryBuffer(self.cfg.history))
            obj.pose, obj.cov = pf.estimate()
            self.objects[oid] = obj
        self._base_trace = feedback.uncertainty(self._q_block(1.0))

    @property
    def visible_trace(self) -> float:
        """Trace of the un-inflated measurement covariance over both portions."""
        return self._base_trace

    def _q_block(self, alpha: float) -> np.ndarray:
        qt, qr = self.noise.effective(alpha)
        q = np.zeros((6, 6))
        q[:3, :3], q[3:, 3:] = qt, qr
        return q

    def _trace(self, alpha: float) -> float:
        return alpha * self._base_trace

    def snapshots(self) -> dict:
        return {oid: o.snapshot(self.frame_rate) for oid, o in self.objects.items()}

    def step_frame(self, frame: int, measurements: dict) -> list[HypothesisResult]:
        """Advance every object by one frame.

        ``measurements`` maps object id to a :class:`Pose6DoF` or ``None``
        (absent). Ids not in the ensemble reject the whole frame.
        """
        unknown = [m for m in measurements if m not in self.objects]
        if unknown:
            raise InvalidInputError(f"frame {frame}: unknown object ids {unknown}")
        if self.frame is not None and frame <= self.frame:
            raise InvalidInputError(f"frame {frame} is not after frame {self.frame}")
        snaps = self.snapshots() if self.kind == "opf" else {}
        out: list[HypothesisResult] = []
        for oid, obj in self.objects.items():
            out.extend(self._step_object(obj, frame, measurements.get(oid), measurements, snaps))
        self.frame = frame
        return out

    def _step_object(self, obj, k, y, measurements, snaps):
        obj.filter.predict()
        if obj.clone is not None:
            obj.clone.filter.predict()
        if y is not None:
            obj.filter.update(y, 1.0)
            obj.status = OcclusionStatus()
            obj.clone = None
            obj.record(k)
            return [self._result(obj, k, 0, y, measured=True)]
        if self.kind == "pf":
            obj.record(k)
            return [self._result(obj, k, 0, None, measured=False)]

        op = op_update_step(obj, snaps, measurements, k, self.cfg, self.frame_rate)
        if op.spawn_clone:
            clone = TrackedObject(obj.id, obj.filter.clone(obj.filter.rng.spawn(1)[0]),
                                  obj.history.copy(), op.clone_status, is_virtual_clone=True)
            clone.status.alpha = 1.0
            obj.clone = clone
        obj.filter.update(op.measurement, obj.status.alpha)
        obj.record(k)
        results = [self._result(obj, k, 0, op.measurement, measured=False)]
        if obj.clone is not None:
            c = obj.clone
            c.status.alpha *= c.status.alpha_step
            yc = virtual_measurement(c, c.status, snaps, measurements, k)
            c.filter.update(yc, c.status.alpha)
            c.record(k)
            results.append(self._result(c, k, 1, yc, measured=False))
        return results

    def _result(self, obj, k, hyp, fed, measured) -> HypothesisResult:
        st = obj.status
        return HypothesisResult(
            frame=k, object_id=obj.id, hypothesis=hyp, pose=obj.pose, cov=obj.cov,
            status=st.kind, occluder_id=st.occluder, alpha=st.alpha,
            alpha_step=st.alpha_step, velocity=st.velocity,
            trace_q=self._trace(st.alpha), measured=measured, fed_measurement=fed)
