import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opftrack.builtin_scenarios import builtin_scenarios, get_builtin
from opftrack.errors import ScenarioError
from opftrack.scenario import (CameraModel, NoiseSpec, ScenarioSpec, generate_frame,
                               generate_frames, ground_truth, is_occluded, load_scenario,
                               loads_scenario, object_pose_at, scenario_from_dict,
                               scenario_to_dict)

from scenes import cups_scene, obj, pose

CAM = CameraModel([0.0, 0.0, 1.0])


def _doc():
    return scenario_to_dict(cups_scene())


# --------------------------------------------------------- interpolation

def test_pose_interpolation_examples():
    o = obj("a", 0.1, (1.0, pose(0.0)), (2.0, pose(1.0)))
    assert object_pose_at(o, 1.0) == pose(0.0)
    assert object_pose_at(o, 1.5).tx == pytest.approx(0.5)
    assert object_pose_at(o, 0.0) == pose(0.0)
    assert object_pose_at(o, 9.0) == pose(1.0)


def test_angle_interpolation_takes_short_way():
    o = obj("a", 0.1, (0, pose(ps=3.0)), (1, pose(ps=-3.0)))
    mid = object_pose_at(o, 0.5)
    assert abs(mid.psi) == pytest.approx(math.pi, abs=1e-12)
    quarter = object_pose_at(o, 0.25)
    assert quarter.psi == pytest.approx(3.0 + 0.25 * (2 * math.pi - 6.0), abs=1e-12)


# --------------------------------------------------------------- occlusion

def test_is_occluded_examples():
    target = obj("t", 0.05, (0, pose(0, 0, 0)))
    assert is_occluded(CAM, [target], "t", 0.0) is None
    mid = obj("m", 0.1, (0, pose(0, 0, 0.5)))
    assert is_occluded(CAM, [target, mid], "t", 0.0) == "m"
    behind = obj("b", 0.1, (0, pose(0, 0, -0.5)))
    assert is_occluded(CAM, [target, behind], "t", 0.0) is None
    glass = obj("g", 0.1, (0, pose(0, 0, 0.5)), opaque=False)
    assert is_occluded(CAM, [target, glass], "t", 0.0) is None


def test_nearest_occluder_reported():
    target = obj("t", 0.05, (0, pose(0, 0, 0)))
    low = obj("low", 0.1, (0, pose(0, 0, 0.3)))
    high = obj("high", 0.1, (0, pose(0, 0, 0.7)))
    assert is_occluded(CAM, [target, low, high], "t", 0.0) == "high"


@given(st.lists(st.tuples(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-0.2, 0.9),
                          st.floats(0.01, 0.2), st.booleans()), min_size=1, max_size=6))
def test_occluder_is_never_self_and_always_opaque(specs):
    objs = [obj(f"o{i}", r, (0, pose(x, y, z)), opaque=op) for i, (x, y, z, r, op) in enumerate(specs)]
    for o in objs:
        hit = is_occluded(CAM, objs, o.id, 0.0)
        if hit is not None:
            assert hit != o.id
            assert next(x for x in objs if x.id == hit).opaque


# ------------------------------------------------------------ measurement

def _clear_scene(noise):
    return ScenarioSpec((obj("a", 0.02, (0, pose(0.1, 0.2, 0.0, 0.1, 0.2, 0.3))),),
                        CAM, noise, duration=1.0)


def test_zero_noise_measurements_equal_truth():
    for mf, truth in generate_frames(_clear_scene(NoiseSpec(0, 0, 0)), 1):
        assert mf.measurements["a"] == truth["a"]


def test_near_certain_dropout_hides_everything():
    frames = list(generate_frames(_clear_scene(NoiseSpec(0.01, 0.01, 1 - 1e-12)), 1))
    assert all(mf.measurements["a"] is None for mf, _ in frames)
    with pytest.raises(ScenarioError):
        NoiseSpec(0, 0, 1.0)


def test_translation_noise_std():
    scene = replace(_clear_scene(NoiseSpec(0.005, 0.0, 0.0)), duration=(10_000 - 1) / 30.0)
    err = np.array([mf.measurements["a"].translation - truth["a"].translation
                    for mf, truth in generate_frames(scene, 4)])
    assert len(err) == 10_000
    for axis_std in err.std(axis=0, ddof=1):
        assert abs(axis_std - 0.005) < 0.05 * 0.005


def test_rng_consumed_identically_whether_or_not_hidden():
    rng_a, rng_b = np.random.default_rng(9), np.random.default_rng(9)
    scene = cups_scene()
    generate_frame(scene, 0, rng_a)
    generate_frame(scene, 130, rng_b)
    assert rng_a.uniform() == rng_b.uniform()


def test_frames_are_deterministic_per_seed():
    def dump(seed):
        return repr([(mf.frame, sorted((k, None if v is None else tuple(v.as_array()))
                                       for k, v in mf.measurements.items()))
                     for mf, _ in generate_frames(cups_scene(), seed)])
    assert dump(5) == dump(5)
    assert dump(5) != dump(6)


def test_seed_sequence_accepted():
    ss = np.random.SeedSequence(3).spawn(1)[0]
    a = [mf.measurements["ball"] for mf, _ in generate_frames(cups_scene(), 3)]
    b = [mf.measurements["ball"] for mf, _ in generate_frames(cups_scene(), ss)]
    assert a == b


@pytest.mark.parametrize("name", ["general_op", "sugar_dropping"])
def test_ground_truth_continuity(name):
    scene = get_builtin(name)
    dt = 1.0 / scene.frame_rate
    prev = ground_truth(scene, 0.0)
    for k in range(1, scene.n_frames):
        cur = ground_truth(scene, k * dt)
        for o in scene.objects:
            step = np.linalg.norm(cur[o.id].translation - prev[o.id].translation)
            assert step <= o.max_speed * dt + 1e-12
        prev = cur


# -------------------------------------------------------------- builtins

def test_builtin_coordinates():
    scenes = builtin_scenarios()
    assert set(scenes) == {"general_op", "sugar_dropping"}
    g = scenes["general_op"]
    gt = ground_truth(g, 0.0)
    np.testing.assert_array_equal(gt["ball"].translation, [0.4, 0, 0])
    np.testing.assert_array_equal(gt["mug_left"].translation, [0.4, 0.15, 0.03])
    np.testing.assert_array_equal(gt["mug_right"].translation, [0.4, -0.15, 0.03])
    np.testing.assert_array_equal(gt["tray"].translation, [0.55, -0.09, 0.2])
    np.testing.assert_array_equal(g.camera.position, [0.55, 0, 0.49])
    np.testing.assert_array_equal(g.object("ball").waypoints[-1].pose.translation, [0.3, -0.35, 0])
    s = scenes["sugar_dropping"]
    np.testing.assert_array_equal(ground_truth(s, 0.0)["mug"].translation, [0.55, 0.45, 0])
    np.testing.assert_array_equal(s.object("mug").waypoints[-1].pose.translation, [0.55, -0.45, 0])
    np.testing.assert_array_equal(s.camera.position, [0.55, 0, 0.8])
    with pytest.raises(KeyError):
        get_builtin("nope")


def test_tray_hides_ball_during_step_two():
    g = get_builtin("general_op")
    hidden = [mf.frame for mf, _ in generate_frames(g, 0)
              if mf.frame > 13.5 * g.frame_rate and mf.occluders["ball"] == "tray"]
    assert len(hidden) >= 60
    first = next(mf for mf, _ in generate_frames(g, 0) if mf.frame == hidden[0])
    assert first.measurements["ball"] is None


def test_sugar_mug_passes_under_effector():
    s = get_builtin("sugar_dropping")
    hidden = [mf.frame for mf, _ in generate_frames(s, 0) if mf.measurements["mug"] is None]
    assert len(hidden) >= 60
    assert hidden == list(range(hidden[0], hidden[-1] + 1))


# ------------------------------------------------------------------ files

def test_json_round_trip(tmp_path):
    scene = cups_scene()
    path = tmp_path / "cups.json"
    path.write_text(json.dumps(scenario_to_dict(scene)))
    back = load_scenario(path)
    assert scenario_to_dict(back) == scenario_to_dict(scene)
    assert back.target == "ball" and back.n_frames == scene.n_frames


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d.update(colour="red"), "$"),
    (lambda d: d["camera"].update(fov=1.0), "camera"),
    (lambda d: d["objects"][1].update(mass=1.0), "objects[1]"),
    (lambda d: d["objects"][1]["waypoints"][0].update(v=1.0), "objects[1].waypoints[0]"),
    (lambda d: d["objects"][0].update(radius=-1), "objects[0].radius"),
    (lambda d: d["objects"][1]["waypoints"][2].update(t=0.1), "objects[1].waypoints[2].t"),
    (lambda d: d["objects"][0]["waypoints"][0].update(pose=[1, 2]), "objects[0].waypoints[0].pose"),
    (lambda d: d["noise"].update(dropout=1.0), "noise.dropout"),
    (lambda d: d.pop("camera"), "$"),
])
def test_invalid_documents_name_the_field(mutate, where):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(doc)
    assert exc.value.where == where


def test_syntax_errors_report_position():
    with pytest.raises(ScenarioError) as exc:
        loads_scenario('{"camera": {"position": [0, 0, 1]},\n  "objects": [,]}')
    assert exc.value.where.startswith("line 2 column")


def test_missing_file_is_a_scenario_error(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "absent.json")
