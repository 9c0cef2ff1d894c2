import math
from pathlib import Path

import numpy as np
import pytest

import tagnav

WORLDS = Path(__file__).resolve().parents[2] / "worlds"


def camera():
    return tagnav.default_tello_intrinsics()


def test_focal_length_from_sensor():
    f = tagnav.focal_from_sensor(tagnav.SensorSpec(4.0, 4.0, 3.0, 960, 720))
    assert f == pytest.approx([960.0, 960.0])
    c = tagnav.default_principal_point(960, 720)
    assert (c.u, c.v) == (480.0, 360.0)


def test_project_and_undistort_round_trip():
    K = camera()
    K.distortion = tagnav.Distortion(k1=-0.2)
    p = tagnav.project(np.array([0.3, -0.2, 1.0]), K)
    q = tagnav.undistort_point(p, K)
    ideal = (K.fx * 0.3 + K.cx, K.fy * -0.2 + K.cy)
    assert (q.u, q.v) == pytest.approx(ideal, abs=1e-8)


def test_estimate_pose_from_projected_corners():
    K = camera()
    size = 0.184
    t = np.array([0.1, -0.05, 2.0])
    truth = tagnav.TagPose(np.eye(3), t)
    obs = tagnav.TagObservation(0, tagnav.predict_corners(truth, K, size))
    pose = tagnav.estimate_tag_pose(obs, K, size)
    assert pose.translation == pytest.approx(t, abs=1e-9)
    assert tagnav.distance_estimate(pose.translation) == pytest.approx(np.linalg.norm(t))


def test_observation_line_round_trip():
    line = "0 450.56 330.56 509.44 330.56 509.44 389.44 450.56 389.44"
    obs = tagnav.parse_observation_line(line)
    assert obs.tag_id == 0
    assert tagnav.parse_observation_line(tagnav.format_observation_line(obs)).corners == obs.corners


def test_degenerate_quad_raises():
    flat = [tagnav.PixelPoint(i, i) for i in range(4)]
    with pytest.raises(tagnav.TagnavError):
        tagnav.estimate_tag_pose(tagnav.TagObservation(0, flat), camera(), 0.184)


def test_frame_permutation_and_turn():
    assert tagnav.camera_to_drone(np.array([1.0, 2.0, 3.0])) == pytest.approx([3.0, 1.0, 2.0])
    assert tagnav.angle_between(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(math.pi / 2)
    with pytest.raises(tagnav.UndefinedAngle):
        tagnav.angle_between(np.array([0.0, 0.0]), np.array([1.0, 0.0]))


def test_error_statistics():
    assert tagnav.errors(2.9, 3.0) == pytest.approx((0.1, 0.1 / 3.0))
    assert tagnav.pearson([1, 2, 3], [2, 4, 6]).r == pytest.approx(1.0)
    assert tagnav.spearman([1, 2, 3], [1, 4, 9]).r == pytest.approx(1.0)


def test_range_sweep_and_report():
    records = tagnav.range_sweep(str(WORLDS / "one_tag_noisy.json"), trials=5, seed=3, distances=[5.0, 3.0, 1.0])
    assert len(records) == 15
    nominal = sorted({round(r.ref_distance_m) for r in records})
    assert nominal == [1, 3, 5]
    assert all(abs(r.ref_distance_m - round(r.ref_distance_m)) < 0.01 for r in records)
    assert "regressions flagged" in tagnav.sweep_report(records)
    assert tagnav.sweep_csv(records).count("\n") == 16


def test_yaw_sweep_returns_correlation():
    offsets = [math.radians(d) for d in (0, 10, 20, 30, 40)]
    records, corr = tagnav.yaw_sweep(str(WORLDS / "one_tag_noisy.json"), offsets, trials=50, seed=2)
    assert len(records) == 50
    assert not corr.degenerate
    assert abs(corr.r) < 1.0


def test_mission_hovers_in_front_of_tag():
    log = tagnav.run_mission(str(WORLDS / "one_tag.json"))
    assert log.final_phase == tagnav.Phase.Landed
    assert log.commands[0] == "takeoff"
    assert log.commands[-1] == "land"
    hover = log.hovers[0]
    assert (hover.x, hover.y, hover.z) == pytest.approx((2.5, 0.0, 0.8), abs=1e-2)
    assert log.to_jsonl().splitlines()[0].startswith('{"t":')


def test_empty_world_mission_is_deterministic():
    cfg = tagnav.MissionConfig()
    assert cfg.altitude_levels() == pytest.approx([0.8, 1.3, 1.8])
    a = tagnav.run_mission(str(WORLDS / "empty.json"), cfg)
    b = tagnav.run_mission(str(WORLDS / "empty.json"), cfg)
    assert a.commands.count("cw 45") == 24
    assert a.to_jsonl() == b.to_jsonl()


def test_link_commands():
    assert tagnav.normalize_command("go 150 0 0") == "go 150 0 0"
    assert tagnav.go_command(np.array([1.5, 0.0, -0.1])) == "go 150 0 -10"
    assert tagnav.go_command(np.array([0.001, 0.0, 0.0])) is None
    assert tagnav.turn_command(math.pi / 4) == "cw 45"
    with pytest.raises(tagnav.ParseError):
        tagnav.normalize_command("fly away")
    with pytest.raises(tagnav.ParseError):
        tagnav.normalize_command("go  150 0 0")
