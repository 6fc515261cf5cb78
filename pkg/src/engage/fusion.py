"""Synchronization of feature channels onto the 80 ms master clock, neutral
imputation and timeline-driven labeling."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import (
    CHANNELS, TICK_US, FeatureManifest, FeatureVector, Label5, SyncedFrame,
)

# Last-value hold expiry per buffer (microseconds).
STALENESS_US = {
    "laser": 160_000,
    "skeleton": 200_000,
    "face": 200_000,
    "sad": 0,
    "localization": 250_000,
}


class ChannelBuffer:
    """Time-ordered feature records for one source; ``channel`` names its presence bit."""

    def __init__(self, name: str, channel: str, records: Iterable[Mapping], staleness_us: int | None = None):
        if channel not in CHANNELS:
            raise ValueError(f"unknown channel {channel!r}")
        self.name = name
        self.channel = channel
        self.staleness_us = STALENESS_US.get(name, 0) if staleness_us is None else staleness_us
        self.records = list(records)
        for prev, cur in zip(self.records, self.records[1:]):
            if cur["t"] < prev["t"]:
                raise ValueError(f"{name}: non-monotone timestamp in record {dict(cur)!r}")
        self._cursor = 0

    def at(self, t: int) -> Mapping | None:
        """Newest record with timestamp <= t within the staleness bound; cursor only moves forward."""
        recs = self.records
        while self._cursor < len(recs) and recs[self._cursor]["t"] <= t:
            self._cursor += 1
        if self._cursor == 0:
            return None
        rec = recs[self._cursor - 1]
        return rec if t - rec["t"] <= self.staleness_us else None


@dataclass
class RawFrame:
    """Synchronized but not yet imputed: NaN marks an absent feature."""

    t: int
    values: np.ndarray
    presence: dict = field(default_factory=dict)


def _check_tick(t: int, name: str) -> None:
    if t % TICK_US:
        raise ValueError(f"{name}={t} is not a multiple of {TICK_US} us")


def synchronize(buffers: Sequence[ChannelBuffer], t0: int, t1: int, m: FeatureManifest) -> list[RawFrame]:
    _check_tick(t0, "t0")
    _check_tick(t1, "t1")
    if not t0 < t1:
        raise ValueError("t0 must precede t1")
    frames = []
    for t in range(t0, t1, TICK_US):
        values = np.full(len(m), np.nan)
        presence = {c: False for c in CHANNELS}
        for buf in buffers:
            rec = buf.at(t)
            if rec is None:
                continue
            for key, v in rec.items():
                if key in m and m.channel_of(key) == buf.channel and v is not None:
                    values[m.index(key)] = float(v)
                    presence[buf.channel] = True
        frames.append(RawFrame(t, values, presence))
    return frames


def impute_neutral(frame: RawFrame, m: FeatureManifest) -> FeatureVector:
    """Replace absent features by manifest neutrals.

    A channel whose every feature is absent is masked false, so the
    neutral-under-absent-mask invariant holds by construction.
    """
    values = np.where(np.isnan(frame.values), m.neutrals, frame.values)
    presence = {}
    for c in CHANNELS:
        sel = m.channel_mask(c)
        presence[c] = bool(frame.presence.get(c, False) and np.any(~np.isnan(frame.values[sel])))
    return FeatureVector(values, presence)


# -- per-timestamp collapsing of multi-target channels ----------------------

def collapse_by_time(
    records: Iterable[Mapping],
    score: Callable[[Mapping], float],
    count_key: str | None = None,
    id_key: str | None = None,
) -> list[dict]:
    """Keep one record per timestamp: the lowest ``score`` (first wins ties)."""
    groups: dict[int, list[Mapping]] = defaultdict(list)
    order = []
    for r in records:
        if r["t"] not in groups:
            order.append(r["t"])
        groups[r["t"]].append(r)
    out = []
    for t in sorted(order):
        group = groups[t]
        best = dict(min(group, key=score))
        if count_key:
            best[count_key] = float(len(group))
        if id_key and "id" in best:
            best[id_key] = float(best["id"])
        out.append(best)
    return out


def nearest_pedestrian(records):
    return collapse_by_time(records, lambda r: r["cible_dist"], "number_of_pedestrians", "pedestrian_id")


def nearest_skeleton(records):
    return collapse_by_time(records, lambda r: r.get("skl_dist", math.inf), "number_of_skeletons", "skeleton_id")


def largest_face(records):
    return collapse_by_time(records, lambda r: -r["face_size"], "face_count")


# -- labeling ---------------------------------------------------------------

TIMELINE_KINDS = (
    "touch_first", "touch_last", "enter", "exit",
    "approach_start", "approach_end", "depart_start", "depart_end",
)


@dataclass(frozen=True)
class TimelineEvent:
    t: int
    kind: str
    who: int

    def __post_init__(self):
        if self.kind not in TIMELINE_KINDS:
            raise ValueError(f"unknown timeline event kind {self.kind!r}")


@dataclass
class PersonIntervals:
    presence: list = field(default_factory=list)
    approach: list = field(default_factory=list)
    interaction: list = field(default_factory=list)
    depart: list = field(default_factory=list)


class AnnotationTimeline:
    """Per-person intervals built from start/end events.

    Presence, approach and depart intervals are half-open [start, end);
    interaction runs from first touch to last click inclusive.
    """

    _PAIRS = {
        "enter": ("exit", "presence"),
        "approach_start": ("approach_end", "approach"),
        "touch_first": ("touch_last", "interaction"),
        "depart_start": ("depart_end", "depart"),
    }

    def __init__(self, events: Iterable[TimelineEvent]):
        self.events = sorted(events, key=lambda e: (e.t, e.who, TIMELINE_KINDS.index(e.kind)))
        self.people: dict[int, PersonIntervals] = defaultdict(PersonIntervals)
        open_: dict[tuple[int, str], int] = {}
        closers = {end: (start, attr) for start, (end, attr) in self._PAIRS.items()}
        for ev in self.events:
            if ev.kind in self._PAIRS:
                if (ev.who, ev.kind) in open_:
                    raise ValueError(f"{ev.kind} for {ev.who} at {ev.t} while already open")
                open_[(ev.who, ev.kind)] = ev.t
            else:
                start_kind, attr = closers[ev.kind]
                start = open_.pop((ev.who, start_kind), None)
                if start is None:
                    raise ValueError(f"{ev.kind} for {ev.who} at {ev.t} without {start_kind}")
                if not start < ev.t:
                    raise ValueError(f"empty {attr} interval for {ev.who} at {ev.t}")
                getattr(self.people[ev.who], attr).append((start, ev.t))
        if open_:
            raise ValueError(f"unterminated intervals: {sorted(open_)}")
        self._check_contradictions()

    def _check_contradictions(self) -> None:
        for who, p in self.people.items():
            phases = [(s, e, "approach") for s, e in p.approach]
            phases += [(s, e, "interaction") for s, e in p.interaction]
            phases += [(s, e, "depart") for s, e in p.depart]
            phases.sort()
            for (s0, e0, k0), (s1, e1, k1) in zip(phases, phases[1:]):
                if s1 < e0:
                    raise ValueError(f"person {who}: {k0} overlaps {k1} at {s1}")
            for s, e, k in phases:
                if not any(ps <= s and e <= pe for ps, pe in p.presence):
                    raise ValueError(f"person {who}: {k} interval outside presence")

    @classmethod
    def from_records(cls, records: Iterable[Mapping]) -> "AnnotationTimeline":
        return cls(TimelineEvent(int(r["t"]), r["kind"], int(r["who"])) for r in records)

    def label_at(self, t: int) -> Label5:
        inter = want = leave = present = False
        for p in self.people.values():
            inter |= any(s <= t <= e for s, e in p.interaction)
            want |= any(s <= t < e for s, e in p.approach)
            leave |= any(s <= t < e for s, e in p.depart)
            present |= any(s <= t < e for s, e in p.presence)
        if inter:
            return Label5.INTERACTION
        if want:
            return Label5.WANT_INTERACTION
        if leave:
            return Label5.LEAVE_INTERACTION
        if present:
            return Label5.SOMEONE
        return Label5.NO_ONE


def label_from_timeline(
    timeline: AnnotationTimeline, frames: Sequence[tuple[int, FeatureVector]]
) -> list[SyncedFrame]:
    return [SyncedFrame(t, fv, timeline.label_at(t)) for t, fv in frames]


def fuse(
    buffers: Sequence[ChannelBuffer],
    timeline: AnnotationTimeline,
    t0: int,
    t1: int,
    m: FeatureManifest,
) -> list[SyncedFrame]:
    raw = synchronize(buffers, t0, t1, m)
    imputed = [(fr.t, impute_neutral(fr, m)) for fr in raw]
    return label_from_timeline(timeline, imputed)
