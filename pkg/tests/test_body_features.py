import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from engage.body_features import (
    SCHEGLOFF_IDS, FaceFeatures, Joint, SkeletonFrame, body_record, circular_mean, face_box, face_features,
    largest_face, schegloff_metrics, segment_rotation, skeleton_distance, wrap_angle,
)
from engage.core import JOINTS

angle = st.floats(-math.pi, math.pi, allow_nan=False)


def _pair(yaw, centre=(0.0, 1.0, 2.0), half=0.2, conf=1.0):
    """Left/right joints of a segment turned by ``yaw`` about the vertical axis."""
    cx, cy, cz = centre
    dx, dz = half * math.cos(yaw), half * math.sin(yaw)
    return Joint(cx - dx, cy, cz - dz, conf), Joint(cx + dx, cy, cz + dz, conf)


def skeleton(stance=0.0, hip=0.0, shoulder=0.0, depth=2.0, x=0.0, conf=1.0):
    j = {name: Joint(x, 0.0, depth, conf) for name in JOINTS}
    j["left_ankle"], j["right_ankle"] = _pair(stance, (x, -0.9, depth), 0.15, conf)
    j["left_hip"], j["right_hip"] = _pair(hip, (x, -0.05, depth), 0.12, conf)
    j["left_shoulder"], j["right_shoulder"] = _pair(shoulder, (x, 0.45, depth), 0.2, conf)
    return SkeletonFrame(0, 1, j)


def test_wrap_range():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(6.0 - 2 * math.pi) == pytest.approx(6.0 - 2 * math.pi)


def test_rotation_examples():
    assert segment_rotation(Joint(-0.2, 0, 2, 1), Joint(0.2, 0, 2, 1)) == 0.0
    left, right = _pair(math.pi / 6)
    assert segment_rotation(left, right) == pytest.approx(math.pi / 6, abs=1e-12)
    swapped = segment_rotation(right, left)
    assert math.cos(swapped - math.pi / 6) == pytest.approx(-1.0, abs=1e-12)


def test_rotation_absent_below_confidence():
    assert segment_rotation(Joint(0, 0, 2, 0.4), Joint(0.2, 0, 2, 1.0)) is None


def test_aligned_pose_has_zero_torques():
    m = schegloff_metrics(skeleton())
    assert set(m) == set(SCHEGLOFF_IDS)
    assert m["hipTorque"] == m["torsoTorque"] == m["shoulderTorque"] == 0.0


def test_shoulder_turn_splits_over_torso():
    # Torso rotation is the circular mean of hips and shoulders, so a 30 degree
    # shoulder turn over aligned hips shows up as two 15 degree torques.
    m = schegloff_metrics(skeleton(shoulder=math.pi / 6))
    assert m["shoulderPose_rot"] == pytest.approx(math.pi / 6, abs=1e-12)
    assert m["torsoPose_rot"] == pytest.approx(math.pi / 12, abs=1e-12)
    assert m["hipTorque"] == pytest.approx(0.0, abs=1e-12)
    assert m["torsoTorque"] == pytest.approx(math.pi / 12, abs=1e-12)
    assert m["shoulderTorque"] == pytest.approx(math.pi / 12, abs=1e-12)


def test_torque_wraps():
    m = schegloff_metrics(skeleton(stance=-3.0, hip=3.0, shoulder=3.0))
    assert m["hipTorque"] == pytest.approx(6.0 - 2 * math.pi, abs=1e-9)
    assert abs(m["hipTorque"]) < 0.3


@settings(max_examples=200)
@given(angle, angle, angle, angle)
def test_torques_invariant_under_whole_body_turn(stance, hip, shoulder, offset):
    # Shoulders exactly opposite the hips leave the torso bisector on a seam.
    assume(abs(wrap_angle(shoulder - hip)) < math.pi - 1e-6)
    base = schegloff_metrics(skeleton(stance, hip, shoulder))
    turned = schegloff_metrics(skeleton(stance + offset, hip + offset, shoulder + offset))
    for k in ("hipTorque", "torsoTorque", "shoulderTorque"):
        assert wrap_angle(turned[k] - base[k]) == pytest.approx(0.0, abs=1e-9)
    for k in SCHEGLOFF_IDS:
        if k.endswith(("rot", "Torque")):
            assert -math.pi < turned[k] <= math.pi


@given(angle, angle)
def test_circular_mean_matches_vector_mean(a, b):
    assume(abs(wrap_angle(b - a)) < math.pi - 1e-3)
    m = circular_mean(a, b)
    oracle = math.atan2(math.sin(a) + math.sin(b), math.cos(a) + math.cos(b))
    assert math.cos(m - oracle) == pytest.approx(1.0, abs=1e-9)


def test_low_confidence_segment_drops_dependents():
    sk = skeleton()
    joints = dict(sk.joints)
    joints["left_shoulder"] = Joint(-0.2, 0.45, 2.0, 0.3)
    m = schegloff_metrics(SkeletonFrame(0, 1, joints))
    for k in ("shoulderPose_rot", "shoulderPose_x", "torsoPose_rot", "shoulderTorque", "torsoTorque"):
        assert k not in m
    assert "hipTorque" in m and "torsoPose_x" in m


def test_skeleton_distance_examples():
    assert skeleton_distance(skeleton(depth=2.0)) == pytest.approx(2.0)
    j = dict(skeleton().joints)
    j["torso"] = Joint(0, 0, 1.9, 1.0)
    j["left_hip"] = Joint(0, 0, 2.0, 1.0)
    j["right_hip"] = Joint(0, 0, 2.1, 1.0)
    j["left_shoulder"] = Joint(0, 0, 9.0, 0.2)
    j["right_shoulder"] = Joint(0, 0, 9.0, 0.1)
    assert skeleton_distance(SkeletonFrame(0, 1, j)) == pytest.approx(2.0, abs=1e-12)
    assert skeleton_distance(skeleton(conf=0.0)) is None


@given(st.floats(-2, 2))
def test_skeleton_distance_lateral_invariance(dx):
    assert skeleton_distance(skeleton(x=dx, hip=0.3)) == pytest.approx(skeleton_distance(skeleton(hip=0.3)), abs=1e-12)


def test_skeleton_frame_validation():
    with pytest.raises(ValueError):
        SkeletonFrame(0, 1, {n: Joint(0, 0, 1, 1) for n in JOINTS[:14]})
    with pytest.raises(ValueError):
        SkeletonFrame(0, 1, {n: Joint(0, 0, 1, 1.5) for n in JOINTS})


def test_body_record_has_joints_and_distance():
    rec = body_record(skeleton())
    assert rec["skl_dist"] == pytest.approx(2.0)
    assert rec["head_conf"] == 1.0 and "right_ankle_z" in rec


def test_face_examples():
    assert face_features((320 - 16, 240 - 16, 32), 640, 480) == FaceFeatures(0.0, 0.0, 32.0)
    assert face_features((400 - 32, 200 - 32, 64), 640, 480) == FaceFeatures(80.0, -40.0, 64.0)
    with pytest.raises(ValueError):
        face_features((620, 10, 40), 640, 480)


def test_largest_face_selected():
    faces = [FaceFeatures(0, 0, 20), FaceFeatures(10, 5, 48), FaceFeatures(-3, 2, 30)]
    assert largest_face(faces).face_size == 48
    assert largest_face([]) is None


@given(st.integers(0, 600), st.integers(0, 440), st.integers(1, 40))
def test_face_round_trip(px, py, size):
    f = face_features((px, py, size), 640, 480)
    assert face_box(f, 640, 480) == (px, py, size)
    assert abs(f.face_x) <= 320 and abs(f.face_y) <= 240


def test_joint_record_parsing():
    rec = {"t": 5, "id": 2, "joints": {n: [0.0, 0.0, 1.0, 1.0] for n in JOINTS}}
    sk = SkeletonFrame.from_record(rec)
    assert sk.t == 5 and np.isclose(sk.joints["head"].z, 1.0)
