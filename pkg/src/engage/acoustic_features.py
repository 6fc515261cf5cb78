"""Per-tick acoustic features from speech-activity tags and sound-source localization."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

from .core import SAD_NOT_SPEECH, SAD_SPEECH, TICK_US

STALENESS_US = 250_000


@dataclass(frozen=True)
class SadTag:
    t: int
    speech: bool
    conf: float = 1.0


@dataclass(frozen=True)
class SourceLocalization:
    t: int
    beam: float
    angle: float
    conf: float
    energy: float = 0.0


def beam_set(n: int = 11, half_width_deg: float = 50.0) -> list[float]:
    step = 2 * half_width_deg / (n - 1)
    return [math.radians(-half_width_deg + k * step) for k in range(n)]


def nearest_beam(angle: float, beams: Sequence[float] | None = None) -> float:
    beams = beam_set() if beams is None else beams
    return min(beams, key=lambda b: (abs(b - angle), b))


def sad_for_tick(tags: Sequence[SadTag]) -> float | None:
    """Speech if any tag in the tick window is speech; ``None`` for an empty window."""
    if not tags:
        return None
    return SAD_SPEECH if any(tag.speech for tag in tags) else SAD_NOT_SPEECH


def sad_per_tick(tags: Sequence[SadTag], t0: int, t1: int) -> list[dict]:
    """One record per master tick in [t0, t1) that has tags in (t - tick, t]."""
    times = [tag.t for tag in tags]
    out = []
    for t in range(t0, t1, TICK_US):
        lo = bisect.bisect_right(times, t - TICK_US)
        hi = bisect.bisect_right(times, t)
        window = tags[lo:hi]
        v = sad_for_tick(window)
        if v is not None:
            conf = max(tag.conf for tag in window) if v == SAD_SPEECH else min(tag.conf for tag in window)
            out.append({"t": t, "sad_event": v, "sad_confidence": conf})
    return out


def localization_for_tick(
    events: Sequence[SourceLocalization], t: int, staleness_us: int = STALENESS_US
) -> SourceLocalization | None:
    """Last event at or before ``t``, if no older than the staleness bound.

    ``events`` must be sorted by time.
    """
    i = bisect.bisect_right([e.t for e in events], t)
    if i == 0:
        return None
    ev = events[i - 1]
    return ev if t - ev.t <= staleness_us else None


def localization_record(ev: SourceLocalization) -> dict:
    return {
        "t": ev.t, "beam": ev.beam, "angle": ev.angle,
        "source_confidence": ev.conf, "source_beam_energy": ev.energy,
    }
