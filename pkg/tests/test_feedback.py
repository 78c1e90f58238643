import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opftrack.errors import InvalidConfigError, InvalidInputError
from opftrack.feedback import (FeedbackConfig, RobotPoint, SafetyMonitor, safety_status,
                               sigmoid_gain, simulate_tracking, tracking_command, uncertainty)

CFG = FeedbackConfig(eps_safe=0.5, kp_nom=2.0, kd_nom=0.8, steepness=4.0)


@pytest.mark.parametrize("kwargs", [dict(eps_safe=0.0), dict(kp_nom=0.0), dict(kd_nom=1.5),
                                    dict(kd_nom=-0.1), dict(steepness=0.5)])
def test_config_validation(kwargs):
    with pytest.raises(InvalidConfigError):
        FeedbackConfig(**kwargs)


def test_eps_safe_resolves_from_visible_trace():
    cfg = FeedbackConfig().resolved(0.000327)
    assert cfg.eps_safe == pytest.approx(0.0327)
    assert CFG.resolved(1.0) is CFG


def test_uncertainty_examples(rng):
    assert uncertainty(np.eye(6)) == 6.0
    assert uncertainty(1.0609 * np.eye(6)) == pytest.approx(6.3654, abs=1e-12)
    a = rng.normal(size=(6, 6))
    q = a @ a.T
    assert uncertainty(2.5 * q) == pytest.approx(2.5 * uncertainty(q))
    with pytest.raises(InvalidInputError):
        uncertainty(np.ones((2, 3)))


def test_safety_status_boundary_inclusive():
    assert safety_status(0.0, CFG) == "normal"
    assert safety_status(0.5, CFG) == "alert"
    assert safety_status(0.4999, CFG) == "normal"
    with pytest.raises(InvalidConfigError):
        safety_status(0.1, FeedbackConfig())


def test_monitor_is_edge_triggered():
    mon = SafetyMonitor(0.5)
    trace = [0.1, 0.3, 0.5, 0.7, 0.9, 0.6, 0.4, 0.2, 0.1]
    events = [e for e in map(mon.update, trace) if e]
    assert events == ["enter", "exit"]
    assert not mon.alert


def test_sigmoid_examples():
    assert sigmoid_gain(0.0, 2.0, 0.5, 4) == 2.0
    assert sigmoid_gain(0.25, 2.0, 0.5, 4) == pytest.approx(1.0, abs=1e-15)
    tail = [sigmoid_gain(u, 2.0, 0.5, 4) for u in (1, 10, 100, 1e6)]
    assert tail == sorted(tail, reverse=True) and tail[-1] < 1e-12
    with pytest.raises(InvalidInputError):
        sigmoid_gain(-1e-9, 1.0, 1.0, 1)


@given(st.floats(0.01, 10), st.floats(1e-4, 10), st.floats(1, 12),
       st.lists(st.floats(0, 50), min_size=2, max_size=30))
def test_sigmoid_non_increasing(k, eps, n, us):
    us = sorted(us)
    g = [sigmoid_gain(u, k, eps, n) for u in us]
    assert all(a >= b for a, b in zip(g, g[1:]))
    assert all(0 <= x <= k for x in g)


def test_sigmoid_matches_ratio_form():
    for u in (0.0, 0.1, 0.25, 0.4, 3.0):
        m = 0.25
        assert sigmoid_gain(u, 2.0, 0.5, 4) == pytest.approx(2.0 * m ** 4 / (m ** 4 + u ** 4),
                                                             rel=1e-14)


def test_command_examples():
    at = RobotPoint([0.1, 0.2, 0.3], np.zeros(3))
    np.testing.assert_array_equal(tracking_command(at, [0.1, 0.2, 0.3], np.zeros(3), 0.0, CFG),
                                  np.zeros(3))
    d = np.array([0.05, -0.02, 0.01])
    off = RobotPoint(d, np.zeros(3))
    np.testing.assert_allclose(tracking_command(off, np.zeros(3), np.zeros(3), 0.0, CFG),
                               -CFG.kp_nom * d, atol=1e-15)
    cmd = tracking_command(off, np.zeros(3), np.zeros(3), 100 * CFG.eps_safe, CFG)
    assert np.linalg.norm(cmd) < 1e-3 * CFG.kp_nom * np.linalg.norm(d)
    with pytest.raises(InvalidInputError):
        tracking_command(off, [np.nan, 0, 0], np.zeros(3), 0.0, CFG)
    with pytest.raises(InvalidInputError):
        RobotPoint([0, np.inf, 0], np.zeros(3))


@given(st.floats(0, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_command_linear_in_offset_and_velocity(u, a, b):
    rng = np.random.default_rng(0)
    d1, d2, v1, v2 = rng.normal(size=(4, 3))
    xo = rng.normal(size=3)

    def cmd(d, v):
        return tracking_command(RobotPoint(xo + d, np.zeros(3)), xo, v, u, CFG)

    lhs = cmd(a * d1 + b * d2, a * v1 + b * v2)
    rhs = a * cmd(d1, v1) + b * cmd(d2, v2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_closed_loop_settles_within_first_order_bound():
    rate = 100.0
    horizon = int(round(5.0 / CFG.kp_nom * rate))
    target = np.array([0.55, -0.2, 0.1])
    start = target + np.array([0.06, 0.05, -0.06])
    path = simulate_tracking(start, np.tile(target, (horizon, 1)), np.zeros(horizon), CFG, rate)
    assert np.linalg.norm(path[-1] - target) < 1e-3


def test_commanded_speed_falls_while_uncertainty_grows():
    cfg = FeedbackConfig(eps_safe=0.0327)
    base = 0.000327
    u = base * 1.03 ** np.arange(200)
    robot = RobotPoint([0.5, 0.1, 0.0], np.zeros(3))
    speeds = [np.linalg.norm(tracking_command(robot, [0.55, 0.0, 0.0], [0.0, -0.1, 0.0], x, cfg))
              for x in u]
    assert all(a > b for a, b in zip(speeds, speeds[1:]))
    assert speeds[-1] < 1e-3 * speeds[0]
