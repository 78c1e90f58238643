"""Deterministic kinematic scene simulator.

Objects are bounding spheres following piecewise-linear waypoint
trajectories; a fixed camera loses sight of an object whenever another
opaque sphere cuts the camera-to-object segment in front of it. Noisy pose
measurements and ground truth are produced frame by frame.

Scenario files are JSON::

    {
      "name": "optional label",
      "frame_rate": 30,
      "duration": 12.0,            # optional, defaults to the last waypoint
      "target": "ball",            # optional object of interest for metrics
      "camera": {"position": [x, y, z], "look": [dx, dy, dz]},
      "noise": {"sigma_t": 0.002, "sigma_r": 0.01, "dropout": 0.0},
      "objects": [
        {"id": "ball", "radius": 0.02, "opaque": true,
         "waypoints": [{"t": 0.0, "pose": [tx, ty, tz, theta, phi, psi]}, ...]}
      ]
    }

Units are meters, radians and seconds. Unknown keys are rejected.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ScenarioError
from .pose_math import Pose6DoF, wrap_angle


@dataclass(frozen=True)
class Waypoint:
    t: float
    pose: Pose6DoF


@dataclass(frozen=True)
class SceneObject:
    id: str
    radius: float
    waypoints: tuple
    opaque: bool = True

    def __post_init__(self):
        if not self.waypoints:
            raise ScenarioError("object needs at least one waypoint", self.id)
        if not self.radius > 0:
            raise ScenarioError("radius must be > 0", self.id)
        ts = [w.t for w in self.waypoints]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ScenarioError("waypoint times must increase strictly", self.id)

    @property
    def max_speed(self) -> float:
        best = 0.0
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            d = np.linalg.norm(b.pose.translation - a.pose.translation)
            best = max(best, d / (b.t - a.t))
        return best


@dataclass(frozen=True)
class CameraModel:
    position: np.ndarray
    look: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        look = np.asarray(self.look, dtype=float).reshape(3)
        n = np.linalg.norm(look)
        if not n > 0:
            raise ScenarioError("camera look direction must be nonzero", "camera.look")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "look", look / n)


@dataclass(frozen=True)
class NoiseSpec:
    sigma_t: float = 0.002
    sigma_r: float = 0.01
    dropout: float = 0.0

    def __post_init__(self):
        if self.sigma_t < 0 or self.sigma_r < 0:
            raise ScenarioError("noise std must be non-negative", "noise")
        if not 0 <= self.dropout < 1:
            raise ScenarioError("dropout must lie in [0, 1)", "noise.dropout")


@dataclass(frozen=True)
class ScenarioSpec:
    objects: tuple
    camera: CameraModel
    noise: NoiseSpec = NoiseSpec()
    frame_rate: float = 30.0
    duration: float | None = None
    target: str | None = None
    name: str = "scenario"

    def __post_init__(self):
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ScenarioError("object ids must be unique", "objects")
        if not ids:
            raise ScenarioError("scenario needs at least one object", "objects")
        if not self.frame_rate > 0:
            raise ScenarioError("frame_rate must be > 0", "frame_rate")
        if self.target is not None and self.target not in ids:
            raise ScenarioError(f"unknown target {self.target!r}", "target")

    @property
    def target_id(self) -> str:
        return self.target if self.target is not None else self.objects[0].id

    @property
    def end_time(self) -> float:
        if self.duration is not None:
            return self.duration
        return max(o.waypoints[-1].t for o in self.objects)

    @property
    def n_frames(self) -> int:
        return int(math.floor(self.end_time * self.frame_rate + 1e-9)) + 1

    def object(self, oid) -> SceneObject:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def with_noise(self, noise: NoiseSpec) -> ScenarioSpec:
        return replace(self, noise=noise)


@dataclass(frozen=True)
class MeasurementFrame:
    """Per-object measurement (``None`` when absent) for one frame."""

    frame: int
    t: float
    measurements: dict
    occluders: dict  # object id -> occluding object id (geometric occlusion only)


# ------------------------------------------------------------------ geometry

def object_pose_at(obj: SceneObject, t: float) -> Pose6DoF:
    """Piecewise-linear pose; angles follow the shortest wrapped path."""
    wps = obj.waypoints
    if t <= wps[0].t:
        return wps[0].pose
    if t >= wps[-1].t:
        return wps[-1].pose
    times = [w.t for w in wps]
    i = int(np.searchsorted(times, t, side="right")) - 1
    a, b = wps[i], wps[i + 1]
    s = (t - a.t) / (b.t - a.t)
    trans = a.pose.translation + s * (b.pose.translation - a.pose.translation)
    rot = a.pose.rotation + s * wrap_angle(b.pose.rotation - a.pose.rotation)
    return Pose6DoF.from_parts(trans, rot)


def _segment_hit(origin, target, center, radius) -> float | None:
    """Smallest ray parameter s in (0, 1) where the segment enters the sphere."""
    d = target - origin
    f = origin - center
    a = float(d @ d)
    b = 2.0 * float(f @ d)
    c = float(f @ f) - radius * radius
    disc = b * b - 4 * a * c
    if a == 0.0 or disc < 0:
        return None
    root = math.sqrt(disc)
    s0 = (-b - root) / (2 * a)
    s1 = (-b + root) / (2 * a)
    if s1 <= 0.0:
        return None
    s = max(s0, 0.0)  # camera inside the sphere counts as blocked from s=0
    return s if s < 1.0 else None


def is_occluded(camera: CameraModel, objects, target_id, t: float,
                poses: dict | None = None):
    """Id of the occluder nearest the camera, or None when the target is visible."""
    poses = poses or {o.id: object_pose_at(o, t) for o in objects}
    target = poses[target_id].translation
    best, best_s = None, math.inf
    for o in objects:
        if o.id == target_id or not o.opaque:
            continue
        s = _segment_hit(camera.position, target, poses[o.id].translation, o.radius)
        if s is not None and s < best_s:
            best, best_s = o.id, s
    return best


# -------------------------------------------------------------- measurement

def ground_truth(scene: ScenarioSpec, t: float) -> dict:
    return {o.id: object_pose_at(o, t) for o in scene.objects}


def generate_frame(scene: ScenarioSpec, k: int, rng: np.random.Generator,
                   noise: NoiseSpec | None = None) -> tuple[MeasurementFrame, dict]:
    """Measurements and ground truth at frame ``k``.

    The RNG is consumed in a fixed pattern (one dropout draw and six normals
    per object, occluded or not) so a seed fixes the whole sequence.
    """
    noise = noise or scene.noise
    t = k / scene.frame_rate
    truth = ground_truth(scene, t)
    meas, occ = {}, {}
    for o in scene.objects:
        drop = rng.uniform()
        eps = rng.standard_normal(6)
        blocker = is_occluded(scene.camera, scene.objects, o.id, t, truth)
        occ[o.id] = blocker
        if blocker is not None or drop < noise.dropout:
            meas[o.id] = None
            continue
        p = truth[o.id]
        meas[o.id] = Pose6DoF.from_parts(p.translation + noise.sigma_t * eps[:3],
                                         p.rotation + noise.sigma_r * eps[3:])
    return MeasurementFrame(k, t, meas, occ), truth


def generate_frames(scene: ScenarioSpec, seed, noise: NoiseSpec | None = None):
    """Yield ``(MeasurementFrame, truth)`` for every frame.

    An int seed is expanded to its first spawned child; a SeedSequence is used as is.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed).spawn(1)[0]
    rng = np.random.default_rng(ss)
    for k in range(scene.n_frames):
        yield generate_frame(scene, k, rng, noise)


# ------------------------------------------------------------------- files

_TOP_KEYS = {"name", "frame_rate", "duration", "target", "camera", "noise", "objects"}
_REQUIRED_TOP = {"camera", "objects"}


def _num(v, where, *, positive=False, nonneg=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ScenarioError(f"expected a finite number, got {v!r}", where)
    if positive and not v > 0:
        raise ScenarioError("must be > 0", where)
    if nonneg and v < 0:
        raise ScenarioError("must be >= 0", where)
    return float(v)


def _vec(v, n, where) -> list:
    if not isinstance(v, list) or len(v) != n:
        raise ScenarioError(f"expected a list of {n} numbers", where)
    return [_num(x, f"{where}[{i}]") for i, x in enumerate(v)]


def _keys(d, allowed, required, where):
    if not isinstance(d, dict):
        raise ScenarioError("expected an object", where)
    extra = sorted(set(d) - allowed)
    if extra:
        raise ScenarioError(f"unknown key(s) {extra}", where)
    missing = sorted(required - set(d))
    if missing:
        raise ScenarioError(f"missing key(s) {missing}", where)


def scenario_from_dict(doc: dict) -> ScenarioSpec:
    _keys(doc, _TOP_KEYS, _REQUIRED_TOP, "$")
    cam = doc["camera"]
    _keys(cam, {"position", "look"}, {"position"}, "camera")
    camera = CameraModel(_vec(cam["position"], 3, "camera.position"),
                         _vec(cam.get("look", [0, 0, -1]), 3, "camera.look"))
    nz = doc.get("noise", {})
    _keys(nz, {"sigma_t", "sigma_r", "dropout"}, set(), "noise")
    noise = NoiseSpec(_num(nz.get("sigma_t", 0.002), "noise.sigma_t", nonneg=True),
                      _num(nz.get("sigma_r", 0.01), "noise.sigma_r", nonneg=True),
                      _num(nz.get("dropout", 0.0), "noise.dropout", nonneg=True))
    objs = doc["objects"]
    if not isinstance(objs, list) or not objs:
        raise ScenarioError("expected a non-empty list", "objects")
    objects = []
    for i, od in enumerate(objs):
        w = f"objects[{i}]"
        _keys(od, {"id", "radius", "opaque", "waypoints"}, {"id", "radius", "waypoints"}, w)
        if not isinstance(od["id"], str) or not od["id"]:
            raise ScenarioError("id must be a non-empty string", f"{w}.id")
        opaque = od.get("opaque", True)
        if not isinstance(opaque, bool):
            raise ScenarioError("must be true or false", f"{w}.opaque")
        wps_doc = od["waypoints"]
        if not isinstance(wps_doc, list) or not wps_doc:
            raise ScenarioError("expected a non-empty list", f"{w}.waypoints")
        wps = []
        for j, wd in enumerate(wps_doc):
            ww = f"{w}.waypoints[{j}]"
            _keys(wd, {"t", "pose"}, {"t", "pose"}, ww)
            t = _num(wd["t"], f"{ww}.t", nonneg=True)
            if wps and t <= wps[-1].t:
                raise ScenarioError("waypoint times must increase strictly", f"{ww}.t")
            wps.append(Waypoint(t, Pose6DoF.from_array(_vec(wd["pose"], 6, f"{ww}.pose"))))
        objects.append(SceneObject(od["id"], _num(od["radius"], f"{w}.radius", positive=True),
                                   tuple(wps), opaque))
    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        raise ScenarioError("must be a string", "name")
    duration = doc.get("duration")
    target = doc.get("target")
    if target is not None and not isinstance(target, str):
        raise ScenarioError("must be a string", "target")
    return ScenarioSpec(
        tuple(objects), camera, noise,
        frame_rate=_num(doc.get("frame_rate", 30.0), "frame_rate", positive=True),
        duration=None if duration is None else _num(duration, "duration", positive=True),
        target=target, name=name)


def scenario_to_dict(scene: ScenarioSpec) -> dict:
    doc = {
        "name": scene.name,
        "frame_rate": scene.frame_rate,
        "camera": {"position": scene.camera.position.tolist(), "look": scene.camera.look.tolist()},
        "noise": {"sigma_t": scene.noise.sigma_t, "sigma_r": scene.noise.sigma_r,
                  "dropout": scene.noise.dropout},
        "objects": [
            {"id": o.id, "radius": o.radius, "opaque": o.opaque,
             "waypoints": [{"t": w.t, "pose": w.pose.as_array().tolist()} for w in o.waypoints]}
            for o in scene.objects
        ],
    }
    if scene.duration is not None:
        doc["duration"] = scene.duration
    if scene.target is not None:
        doc["target"] = scene.target
    return doc


def loads_scenario(text: str) -> ScenarioSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return scenario_from_dict(doc)


def load_scenario(path) -> ScenarioSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc.strerror}", str(path)) from None
    return loads_scenario(text)
