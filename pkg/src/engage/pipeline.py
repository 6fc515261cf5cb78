"""Stage plumbing: stream files, per-recording feature extraction, fusion and
dataset assembly for learning."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .acoustic_features import SadTag, SourceLocalization, localization_record, sad_per_tick
from .body_features import SkeletonFrame, body_record, face_features
from .core import (
    SPATIAL_FEATURES, TICK_US, FeatureManifest, FusedDataset, Label5, SyncedFrame, relabel_to_3,
)
from .fusion import (
    AnnotationTimeline, ChannelBuffer, fuse, largest_face, nearest_pedestrian, nearest_skeleton,
)
from .laser_tracking import LaserConfig, LaserScan, TrackerConfig, run_tracker
from .simulator import Recording

HEADER_KEY = "_header"


# -- JSON Lines -------------------------------------------------------------

def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_jsonl(path: str | Path, records: Iterable[dict], header: dict | None = None) -> str:
    """Write records one per line; returns the sha256 of the bytes written."""
    lines = [_dump({HEADER_KEY: header})] if header else []
    lines += [_dump(r) for r in records]
    data = ("\n".join(lines) + "\n" if lines else "").encode()
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def read_jsonl(path: str | Path) -> list[dict]:
    out = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{n}: malformed JSON ({exc.msg})") from None
        if HEADER_KEY not in rec:
            out.append(rec)
    return out


def config_hash(config: dict) -> str:
    return hashlib.sha256(_dump(config).encode()).hexdigest()[:12]


# -- raw streams ------------------------------------------------------------

STREAM_FILES = {
    "laser": "laser.jsonl",
    "skeleton": "skeleton.jsonl",
    "face": "face.jsonl",
    "sad": "sad.jsonl",
    "localization": "localization.jsonl",
    "timeline": "timeline.jsonl",
    "truth": "truth.jsonl",
}


@dataclass
class Streams:
    laser: LaserConfig
    scans: list[LaserScan]
    skeletons: list[dict]
    faces: list[dict]
    sad: list[dict]
    localization: list[dict]
    timeline: list[dict]
    t_end: int

    @classmethod
    def from_recording(cls, rec: Recording) -> "Streams":
        return cls(rec.config.laser, rec.scans, rec.skeletons, rec.faces, rec.sad, rec.localization,
                   rec.timeline, rec.t_end)


def save_streams(rec: Recording, out_dir: str | Path, header: dict | None = None) -> dict[str, str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sums = {}
    lc = rec.laser_config()
    lc["t_end"] = rec.t_end
    (out / "laser_config.json").write_text(_dump(lc) + "\n")
    rec.script.save(out / "script.json")
    scans = ({"t": s.t, "ranges": [float(r) for r in s.ranges]} for s in rec.scans)
    sums["laser"] = write_jsonl(out / STREAM_FILES["laser"], scans, header)
    for name, records in (
        ("skeleton", rec.skeletons), ("face", rec.faces), ("sad", rec.sad),
        ("localization", rec.localization), ("timeline", rec.timeline), ("truth", rec.truth),
    ):
        sums[name] = write_jsonl(out / STREAM_FILES[name], records, header)
    return sums


def load_streams(in_dir: str | Path) -> Streams:
    d = Path(in_dir)
    lc = json.loads((d / "laser_config.json").read_text())
    laser = LaserConfig(int(lc["n_beams"]), float(lc["angle_min"]), float(lc["angle_max"]))
    scans = []
    for r in read_jsonl(d / STREAM_FILES["laser"]):
        ranges = np.asarray(r["ranges"], dtype=float)
        if ranges.shape != (laser.n_beams,):
            raise ValueError(f"scan at t={r['t']} has {ranges.size} ranges, expected {laser.n_beams}")
        scans.append(LaserScan(int(r["t"]), ranges))
    load = lambda k: read_jsonl(d / STREAM_FILES[k])  # noqa: E731
    t_end = int(lc.get("t_end", (scans[-1].t + TICK_US) if scans else TICK_US))
    return Streams(laser, scans, load("skeleton"), load("face"), load("sad"), load("localization"),
                   load("timeline"), t_end)


# -- feature extraction -----------------------------------------------------

@dataclass
class FeatureStreams:
    pedestrians: list[dict]
    body: list[dict]
    faces: list[dict]
    sad: list[dict]
    localization: list[dict]

    FILES = {
        "pedestrians": "pedestrians.jsonl", "body": "body.jsonl", "faces": "faces.jsonl",
        "sad": "sad_ticks.jsonl", "localization": "localization_features.jsonl",
    }


def track_stream(streams: Streams, cfg: TrackerConfig = TrackerConfig()) -> list[dict]:
    feats, _ = run_tracker(streams.scans, streams.laser, cfg)
    return [f.as_record() for f in feats]


def extract_body(skeletons: Sequence[dict]) -> list[dict]:
    return [body_record(SkeletonFrame.from_record(r)) for r in skeletons]


def extract_faces(faces: Sequence[dict]) -> list[dict]:
    out = []
    for r in faces:
        f = face_features(r["box"], int(r["image"][0]), int(r["image"][1]))
        out.append({"t": int(r["t"]), **asdict(f)})
    return out


def extract_audio(sad: Sequence[dict], loc: Sequence[dict], t_end: int) -> tuple[list[dict], list[dict]]:
    tags = [SadTag(int(r["t"]), bool(r["sad"]), float(r.get("conf", 1.0))) for r in sad]
    events = [
        SourceLocalization(int(r["t"]), float(r["beam"]), float(r["angle"]), float(r["conf"]), float(r.get("energy", 0.0)))
        for r in loc
    ]
    return sad_per_tick(tags, 0, t_end), [localization_record(e) for e in events]


def extract_all(streams: Streams, cfg: TrackerConfig = TrackerConfig()) -> FeatureStreams:
    sad, loc = extract_audio(streams.sad, streams.localization, streams.t_end)
    return FeatureStreams(
        track_stream(streams, cfg), extract_body(streams.skeletons), extract_faces(streams.faces), sad, loc,
    )


def save_features(fs: FeatureStreams, out_dir: str | Path, header: dict | None = None) -> None:
    for attr, name in FeatureStreams.FILES.items():
        write_jsonl(Path(out_dir) / name, getattr(fs, attr), header)


def load_features(in_dir: str | Path) -> FeatureStreams:
    return FeatureStreams(*(read_jsonl(Path(in_dir) / name) for name in FeatureStreams.FILES.values()))


def fuse_features(fs: FeatureStreams, timeline: Sequence[dict], t_end: int, m: FeatureManifest) -> list[SyncedFrame]:
    buffers = [
        ChannelBuffer("laser", "laser", nearest_pedestrian(fs.pedestrians)),
        ChannelBuffer("skeleton", "skeleton", nearest_skeleton(fs.body)),
        ChannelBuffer("face", "face", largest_face(fs.faces)),
        ChannelBuffer("sad", "audio", fs.sad),
        ChannelBuffer("localization", "audio", fs.localization),
    ]
    return fuse(buffers, AnnotationTimeline.from_records(timeline), 0, t_end, m)


def process_recording(rec: Recording | Streams, m: FeatureManifest, cfg: TrackerConfig = TrackerConfig()) -> list[SyncedFrame]:
    streams = Streams.from_recording(rec) if isinstance(rec, Recording) else rec
    return fuse_features(extract_all(streams, cfg), streams.timeline, streams.t_end, m)


def concatenate(recordings: Sequence[Sequence[SyncedFrame]]) -> list[SyncedFrame]:
    """Chain recordings on one clock by shifting each after the previous one."""
    out: list[SyncedFrame] = []
    offset = 0
    for frames in recordings:
        for fr in frames:
            out.append(SyncedFrame(fr.t + offset, fr.features, fr.label))
        if frames:
            offset = out[-1].t + TICK_US
    return out


# -- learning views ---------------------------------------------------------

def labels_for_scheme(labels: Sequence[str], scheme: int) -> tuple[np.ndarray, list[str]]:
    """Boolean keep-mask and kept labels for the 3- or 5-class scheme."""
    if scheme == 5:
        return np.ones(len(labels), dtype=bool), [Label5(v).value for v in labels]
    if scheme != 3:
        raise ValueError(f"label scheme must be 3 or 5, got {scheme}")
    keep, out = [], []
    for v in labels:
        r = relabel_to_3(Label5(v))
        keep.append(r is not None)
        if r is not None:
            out.append(r.value)
    return np.array(keep, dtype=bool), out


def feature_ids(feature_set: str, available: Sequence[str], ranking: Sequence[str] | None = None,
                mrmr_k: int | None = None) -> list[str]:
    if feature_set == "spatial":
        return list(SPATIAL_FEATURES)
    if feature_set != "multimodal":
        raise ValueError(f"unknown feature set {feature_set!r}")
    if mrmr_k is None:
        return list(available)
    if ranking is None:
        raise ValueError("--mrmr-k needs a ranking")
    if not 0 < mrmr_k <= len(ranking):
        raise ValueError(f"mrmr K={mrmr_k} outside [1, {len(ranking)}]")
    return list(ranking[:mrmr_k])


def learning_view(ds: FusedDataset, label_scheme: int, ids: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    keep, y = labels_for_scheme(ds.labels, label_scheme)
    return ds.columns(ids)[keep], np.array(y, dtype=object)


def dataset_from_frames(frames: Sequence[SyncedFrame], m: FeatureManifest) -> FusedDataset:
    t = np.array([f.t for f in frames], dtype=np.int64)
    X = np.array([f.features.values for f in frames], dtype=float).reshape(len(frames), len(m))
    return FusedDataset(t, X, [f.label.value for f in frames], m.ids)
