"""Shared domain types: feature manifest, labels, frames and validation."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

TICK_US = 80_000
CHANNELS = ("laser", "skeleton", "face", "audio")
UNITS = ("meter", "meter.s-1", "radian", "pixel", "tag", "count", "dimensionless")

# 15-joint skeleton, in the order used for the raw joint features.
JOINTS = (
    "head", "neck", "torso",
    "left_shoulder", "right_shoulder",
    "left_elbow", "right_elbow",
    "left_hand", "right_hand",
    "left_hip", "right_hip",
    "left_knee", "right_knee",
    "left_ankle", "right_ankle",
)

SPATIAL_FEATURES = ("cible_x", "cible_y", "cible_dx", "cible_dy", "cible_dist")

SAD_NOT_SPEECH = 0.0
SAD_SPEECH = 1.0


class Edition(enum.Enum):
    SELECTED_32 = 32
    FULL_99 = 99


class Label5(enum.Enum):
    NO_ONE = "noOne"
    SOMEONE = "someone"
    WANT_INTERACTION = "wantInteraction"
    INTERACTION = "interaction"
    LEAVE_INTERACTION = "leaveInteraction"


class Label3(enum.Enum):
    NO_ONE = "noOne"
    SOMEONE = "someone"
    WANT_INTERACTION = "wantInteraction"


def relabel_to_3(label: Label5) -> Label3 | None:
    """Map a 5-class label onto the 3-class scheme; ``None`` means drop the frame."""
    if label is Label5.INTERACTION:
        return None
    if label is Label5.LEAVE_INTERACTION:
        return Label3.SOMEONE
    return Label3(label.value)


@dataclass(frozen=True)
class FeatureSpec:
    id: str
    unit: str
    channel: str
    neutral: float = 0.0


# Ranked order of the 32 selected features (index = MRMR rank - 1).
_SELECTED_32 = (
    FeatureSpec("shoulderPose_rot", "radian", "skeleton"),
    FeatureSpec("cible_dx", "meter.s-1", "laser"),
    FeatureSpec("cible_y", "meter", "laser"),
    FeatureSpec("face_size", "pixel", "face"),
    FeatureSpec("face_x", "pixel", "face"),
    FeatureSpec("beam", "radian", "audio"),
    FeatureSpec("angle", "radian", "audio"),
    FeatureSpec("hipPose_x", "meter", "skeleton"),
    FeatureSpec("hipPose_y", "meter", "skeleton"),
    FeatureSpec("hipPose_rot", "radian", "skeleton"),
    FeatureSpec("face_y", "pixel", "face"),
    FeatureSpec("sad_event", "tag", "audio", SAD_NOT_SPEECH),
    FeatureSpec("stancePose_rot", "radian", "skeleton"),
    FeatureSpec("torsoPose_rot", "radian", "skeleton"),
    FeatureSpec("shoulderTorque", "radian", "skeleton"),
    FeatureSpec("shoulderPose_y", "meter", "skeleton"),
    FeatureSpec("source_confidence", "dimensionless", "audio"),
    FeatureSpec("torsoTorque", "radian", "skeleton"),
    FeatureSpec("stancePose_z", "meter", "skeleton"),
    FeatureSpec("skl_dist", "meter", "skeleton"),
    FeatureSpec("cible_x", "meter", "laser"),
    FeatureSpec("hipTorque", "radian", "skeleton"),
    FeatureSpec("torsoPose_y", "meter", "skeleton"),
    FeatureSpec("torsoPose_x", "meter", "skeleton"),
    FeatureSpec("shoulderPose_x", "meter", "skeleton"),
    FeatureSpec("stancePose_x", "meter", "skeleton"),
    FeatureSpec("cible_dy", "meter.s-1", "laser"),
    FeatureSpec("cible_dist", "meter", "laser"),
    FeatureSpec("torsoPose_z", "meter", "skeleton"),
    FeatureSpec("stancePose_y", "meter", "skeleton"),
    FeatureSpec("hipPose_z", "meter", "skeleton"),
    FeatureSpec("shoulderPose_z", "meter", "skeleton"),
)


def _joint_specs() -> tuple[FeatureSpec, ...]:
    out = []
    for joint in JOINTS:
        for axis in ("x", "y", "z"):
            out.append(FeatureSpec(f"{joint}_{axis}", "meter", "skeleton"))
        out.append(FeatureSpec(f"{joint}_conf", "dimensionless", "skeleton"))
    return tuple(out)


_SUPPLEMENTS = (
    FeatureSpec("number_of_pedestrians", "count", "laser"),
    FeatureSpec("number_of_skeletons", "count", "skeleton"),
    FeatureSpec("pedestrian_id", "dimensionless", "laser"),
    FeatureSpec("skeleton_id", "dimensionless", "skeleton"),
    FeatureSpec("face_count", "count", "face"),
    FeatureSpec("sad_confidence", "dimensionless", "audio"),
    FeatureSpec("source_beam_energy", "dimensionless", "audio"),
)


@dataclass(frozen=True)
class FeatureManifest:
    """Ordered feature catalog for one edition."""

    edition: Edition
    features: tuple[FeatureSpec, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ids = [f.id for f in self.features]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate feature ids in manifest")
        object.__setattr__(self, "_index", {fid: i for i, fid in enumerate(ids)})

    def __len__(self) -> int:
        return len(self.features)

    def __contains__(self, fid: str) -> bool:
        return fid in self._index

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(f.id for f in self.features)

    @property
    def neutrals(self) -> np.ndarray:
        return np.array([f.neutral for f in self.features], dtype=float)

    def index(self, fid: str) -> int:
        return self._index[fid]

    def channel_of(self, fid: str) -> str:
        return self.features[self._index[fid]].channel

    def channel_mask(self, channel: str) -> np.ndarray:
        return np.array([f.channel == channel for f in self.features])

    def to_text(self) -> str:
        lines = [f"# edition={self.edition.name}"]
        for i, f in enumerate(self.features):
            lines.append(f"{i}\t{f.id}\t{f.unit}\t{f.channel}\t{f.neutral!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FeatureManifest":
        edition = None
        features = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# edition="):
                    edition = Edition[line.split("=", 1)[1].strip()]
                continue
            idx, fid, unit, channel, neutral = line.split("\t")
            if int(idx) != len(features):
                raise ValueError(f"manifest index out of order at {fid!r}")
            if unit not in UNITS or channel not in CHANNELS:
                raise ValueError(f"bad unit/channel for {fid!r}")
            features.append(FeatureSpec(fid, unit, channel, float(neutral)))
        if edition is None:
            edition = Edition(len(features))
        if len(features) != edition.value:
            raise ValueError(f"{edition.name} needs {edition.value} features, got {len(features)}")
        return cls(edition, tuple(features))

    def restrict(self, ids: Sequence[str]) -> "FeatureManifest":
        """Sub-manifest in the given order; edition kept for provenance only."""
        sub = object.__new__(FeatureManifest)
        object.__setattr__(sub, "edition", self.edition)
        object.__setattr__(sub, "features", tuple(self.features[self.index(i)] for i in ids))
        object.__setattr__(sub, "_index", {fid: k for k, fid in enumerate(ids)})
        return sub


def manifest(edition: Edition | int = Edition.SELECTED_32) -> FeatureManifest:
    if isinstance(edition, int):
        edition = Edition(edition)
    if edition is Edition.SELECTED_32:
        return FeatureManifest(edition, _SELECTED_32)
    return FeatureManifest(edition, _SELECTED_32 + _joint_specs() + _SUPPLEMENTS)


def read_manifest(path: str | Path) -> FeatureManifest:
    return FeatureManifest.from_text(Path(path).read_text())


def write_manifest(m: FeatureManifest, path: str | Path) -> None:
    Path(path).write_text(m.to_text())


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    presence: Mapping[str, bool]

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "presence", dict(self.presence))


@dataclass(frozen=True)
class SyncedFrame:
    t: int
    features: FeatureVector
    label: Label5


def neutral_vector(edition: Edition | int | FeatureManifest) -> FeatureVector:
    m = edition if isinstance(edition, FeatureManifest) else manifest(edition)
    return FeatureVector(m.neutrals, {c: False for c in CHANNELS})


def validate_frame(frame: SyncedFrame, m: FeatureManifest) -> list[str]:
    """Return human-readable invariant violations; empty when the frame is sound."""
    problems = []
    values = frame.features.values
    if len(values) != len(m):
        problems.append(f"length mismatch: {len(values)} values for {len(m)} features")
        return problems
    if frame.t % TICK_US != 0:
        problems.append(f"tick misaligned: t={frame.t}")
    if not isinstance(frame.label, Label5):
        problems.append(f"bad label: {frame.label!r}")
    for i, spec in enumerate(m.features):
        v = values[i]
        if not math.isfinite(v):
            problems.append(f"non-finite value: {spec.id}")
        elif not frame.features.presence.get(spec.channel, False) and v != spec.neutral:
            problems.append(f"neutral violation: {spec.id}")
    return problems


# -- fused dataset CSV ------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def write_fused_csv(
    path: str | Path,
    frames: Iterable[SyncedFrame],
    m: FeatureManifest,
    header: str | None = None,
) -> None:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", *m.ids, "label"])
    for fr in frames:
        w.writerow([fr.t, *(_fmt(v) for v in fr.features.values), fr.label.value])
    Path(path).write_text(buf.getvalue())


@dataclass
class FusedDataset:
    """Tabular view of a fused CSV: times, feature matrix, label strings."""

    t: np.ndarray
    X: np.ndarray
    labels: list[str]
    ids: tuple[str, ...]

    def columns(self, ids: Sequence[str]) -> np.ndarray:
        pos = {fid: i for i, fid in enumerate(self.ids)}
        return self.X[:, [pos[i] for i in ids]]


def read_fused_csv(path: str | Path) -> FusedDataset:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    head = rows[0]
    if head[0] != "t" or head[-1] != "label":
        raise ValueError("fused CSV must start with 't' and end with 'label'")
    body = rows[1:]
    t = np.array([int(r[0]) for r in body], dtype=np.int64)
    X = np.array([[float(v) for v in r[1:-1]] for r in body], dtype=float).reshape(len(body), len(head) - 2)
    return FusedDataset(t, X, [r[-1] for r in body], tuple(head[1:-1]))
