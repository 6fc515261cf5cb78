"""Body-pose metrics (stance/hip/torso/shoulder poses and torques), skeleton
distance and image-centred face features.

Sensor frame convention: x lateral (towards the tracked person's right when
they face the sensor), y up, z depth away from the sensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import JOINTS

C_MIN = 0.5
SEGMENTS = ("stance", "hip", "torso", "shoulder")
_PAIRS = {
    "stance": ("left_ankle", "right_ankle"),
    "hip": ("left_hip", "right_hip"),
    "shoulder": ("left_shoulder", "right_shoulder"),
}
DISTANCE_JOINTS = ("torso", "left_hip", "right_hip", "left_shoulder", "right_shoulder")

SCHEGLOFF_IDS = tuple(
    f"{seg}Pose_{c}" for seg in SEGMENTS for c in ("x", "y", "z", "rot")
) + ("hipTorque", "torsoTorque", "shoulderTorque")


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.fmod(a + math.pi, 2 * math.pi)
    if w <= 0:
        w += 2 * math.pi
    return w - math.pi


def circular_mean(a: float, b: float) -> float:
    """Bisector of the shorter arc from ``a`` to ``b``; opposite angles resolve to ``a + pi/2``."""
    return wrap_angle(a + 0.5 * wrap_angle(b - a))


@dataclass(frozen=True)
class Joint:
    x: float
    y: float
    z: float
    conf: float

    @property
    def confident(self) -> bool:
        return self.conf >= C_MIN


@dataclass(frozen=True)
class SkeletonFrame:
    t: int
    id: int
    joints: Mapping[str, Joint]

    def __post_init__(self):
        missing = set(JOINTS) - set(self.joints)
        if missing or len(self.joints) != len(JOINTS):
            raise ValueError(f"skeleton needs exactly the 15 joints, missing {sorted(missing)}")
        for name, j in self.joints.items():
            if not 0.0 <= j.conf <= 1.0:
                raise ValueError(f"confidence of {name} outside [0, 1]")

    @classmethod
    def from_record(cls, rec: Mapping) -> "SkeletonFrame":
        return cls(int(rec["t"]), int(rec["id"]), {k: Joint(*map(float, v)) for k, v in rec["joints"].items()})


def segment_rotation(left: Joint, right: Joint) -> float | None:
    """Facing angle of a left/right joint pair; 0 when the segment faces the sensor.

    Returns ``None`` when either joint is below the confidence floor.
    """
    if not (left.confident and right.confident):
        return None
    return wrap_angle(math.atan2(right.z - left.z, right.x - left.x))


def schegloff_metrics(sk: SkeletonFrame) -> dict[str, float]:
    """Segment poses, rotations and torques; absent metrics are left out of the dict."""
    J = sk.joints
    out: dict[str, float] = {}
    rot: dict[str, float | None] = {}
    for seg, (lname, rname) in _PAIRS.items():
        l, r = J[lname], J[rname]
        rot[seg] = segment_rotation(l, r)
        if rot[seg] is not None:
            out[f"{seg}Pose_x"] = 0.5 * (l.x + r.x)
            out[f"{seg}Pose_y"] = 0.5 * (l.y + r.y)
            out[f"{seg}Pose_z"] = 0.5 * (l.z + r.z)
            out[f"{seg}Pose_rot"] = rot[seg]

    torso = J["torso"]
    if torso.confident:
        out["torsoPose_x"], out["torsoPose_y"], out["torsoPose_z"] = torso.x, torso.y, torso.z
    if rot["hip"] is not None and rot["shoulder"] is not None:
        rot["torso"] = circular_mean(rot["hip"], rot["shoulder"])
        out["torsoPose_rot"] = rot["torso"]
    else:
        rot["torso"] = None

    for name, upper, lower in (
        ("hipTorque", "hip", "stance"),
        ("torsoTorque", "torso", "hip"),
        ("shoulderTorque", "shoulder", "torso"),
    ):
        if rot[upper] is not None and rot[lower] is not None:
            out[name] = wrap_angle(rot[upper] - rot[lower])
    return out


def skeleton_distance(sk: SkeletonFrame) -> float | None:
    zs = [sk.joints[j].z for j in DISTANCE_JOINTS if sk.joints[j].confident]
    if not zs:
        return None
    return sum(zs) / len(zs)


def joint_features(sk: SkeletonFrame) -> dict[str, float]:
    out = {}
    for name in JOINTS:
        j = sk.joints[name]
        out[f"{name}_x"], out[f"{name}_y"], out[f"{name}_z"], out[f"{name}_conf"] = j.x, j.y, j.z, j.conf
    return out


def body_record(sk: SkeletonFrame) -> dict:
    """All skeleton-channel features for one skeleton frame."""
    rec = {"t": sk.t, "id": sk.id}
    rec.update(schegloff_metrics(sk))
    d = skeleton_distance(sk)
    if d is not None:
        rec["skl_dist"] = d
    rec.update(joint_features(sk))
    return rec


# -- faces ------------------------------------------------------------------

@dataclass(frozen=True)
class FaceFeatures:
    face_x: float
    face_y: float
    face_size: float


def face_features(box: Sequence[float], image_width: int, image_height: int) -> FaceFeatures:
    px, py, size = (float(v) for v in box)
    if size <= 0 or px < 0 or py < 0 or px + size > image_width or py + size > image_height:
        raise ValueError(f"face box {tuple(box)} outside {image_width}x{image_height} image")
    return FaceFeatures(px + size / 2 - image_width / 2, py + size / 2 - image_height / 2, size)


def face_box(f: FaceFeatures, image_width: int, image_height: int) -> tuple[float, float, float]:
    """Inverse of :func:`face_features`."""
    return (f.face_x + image_width / 2 - f.face_size / 2, f.face_y + image_height / 2 - f.face_size / 2, f.face_size)


def largest_face(faces: Sequence[FaceFeatures]) -> FaceFeatures | None:
    # max() keeps the first of equal sizes, so detection order breaks ties.
    return max(faces, key=lambda f: f.face_size) if faces else None
