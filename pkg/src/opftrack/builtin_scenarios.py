"""The two built-in desk scenarios.

Coordinates follow the robot-base frame of a tabletop setup. Timings keep
the main occlusion episodes over two seconds long (the brief re-cover after
the reveal is under a second), and every moving object has been visibly
moving for more than the history window before it disappears.
"""
from __future__ import annotations

from .pose_math import Pose6DoF
from .scenario import CameraModel, NoiseSpec, SceneObject, ScenarioSpec, Waypoint


def _track(*points) -> tuple:
    """``(t, x, y, z[, yaw])`` tuples to waypoints; roll and pitch stay 0."""
    out = []
    for p in points:
        t, x, y, z, *rest = p
        yaw = rest[0] if rest else 0.0
        out.append(Waypoint(float(t), Pose6DoF(x, y, z, 0.0, 0.0, yaw)))
    return tuple(out)


def general_op_tracking() -> ScenarioSpec:
    """Ball hidden and carried by a mug, then rolled under a tray.

    Step one: both mugs close in on the ball, the left one covers it and
    carries it (rotating) to the far side, lifts away, and briefly covers it
    again. Step two: the ball rolls toward the near-right corner and passes
    under the static tray.
    """
    ball = SceneObject("ball", 0.02, _track(
        (0.0, 0.4, 0.0, 0.0, 0.0),
        (4.0, 0.4, 0.0, 0.0, 0.0),
        (8.0, 0.8, 0.09, 0.0, 1.0),
        (13.5, 0.8, 0.09, 0.0, 1.0),
        (19.5, 0.3, -0.35, 0.0, 2.5),
    ))
    mug_left = SceneObject("mug_left", 0.08, _track(
        (0.0, 0.4, 0.15, 0.03),
        (1.0, 0.4, 0.15, 0.03),
        (3.0, 0.4, 0.06, 0.03),
        (4.0, 0.4, 0.06, 0.03, 0.0),
        (8.0, 0.8, 0.15, 0.03, 1.0),
        (9.0, 0.8, 0.15, 0.03, 1.0),
        (9.5, 0.8, 0.27, 0.03, 1.0),
        (11.0, 0.8, 0.27, 0.03, 1.0),
        (11.4, 0.8, 0.175, 0.03, 1.0),
        (12.4, 0.8, 0.155, 0.03, 1.0),
        (12.6, 0.8, 0.155, 0.03, 1.0),
        (13.0, 0.8, 0.40, 0.03, 1.0),
    ))
    mug_right = SceneObject("mug_right", 0.08, _track(
        (0.0, 0.4, -0.15, 0.03),
        (1.0, 0.4, -0.15, 0.03),
        (3.0, 0.4, -0.12, 0.03),
        (4.0, 0.4, -0.12, 0.03),
        (6.0, 0.25, -0.05, 0.03),
    ))
    tray = SceneObject("tray", 0.08, _track((0.0, 0.55, -0.09, 0.2)))
    return ScenarioSpec(
        objects=(ball, mug_left, mug_right, tray),
        camera=CameraModel([0.55, 0.0, 0.49], [0.0, 0.0, -1.0]),
        noise=NoiseSpec(sigma_t=0.001, sigma_r=0.005, dropout=0.0),
        frame_rate=30.0, duration=20.0, target="ball", name="general_op",
    )


def sugar_dropping() -> ScenarioSpec:
    """A mug slides across the table under the robot's end-effector.

    The end-effector hovers over the middle of the path and hides the mug
    from the overhead camera while it passes underneath.
    """
    mug = SceneObject("mug", 0.05, _track(
        (0.0, 0.55, 0.45, 0.0, 0.0),
        (1.0, 0.55, 0.45, 0.0, 0.0),
        (10.0, 0.55, -0.45, 0.0, 0.9),
    ))
    effector = SceneObject("end_effector", 0.065, _track((0.0, 0.55, 0.0, 0.3)))
    return ScenarioSpec(
        objects=(mug, effector),
        camera=CameraModel([0.55, 0.0, 0.8], [0.0, 0.0, -1.0]),
        noise=NoiseSpec(sigma_t=0.001, sigma_r=0.005, dropout=0.0),
        frame_rate=30.0, duration=11.0, target="mug", name="sugar_dropping",
    )


BUILTINS = {
    "general_op": general_op_tracking,
    "sugar_dropping": sugar_dropping,
}


def builtin_scenarios() -> dict:
    return {name: make() for name, make in BUILTINS.items()}


def get_builtin(name: str) -> ScenarioSpec:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown builtin scenario {name!r}; choose from {sorted(BUILTINS)}") from None
