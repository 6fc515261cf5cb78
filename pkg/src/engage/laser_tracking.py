"""Foot detection and pedestrian tracking from a single-row 270 degree range scanner.

Pipeline per scan: adaptive background subtraction, clustering of foreground
beams into foot candidates, constant-velocity Kalman tracking of each foot,
two-stage pairing of feet into pedestrians (1 m gate, then stable leg space
over a short window), and emission of position/speed features.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

DT = 0.080


@dataclass(frozen=True)
class LaserConfig:
    n_beams: int = 541
    angle_min: float = -3 * math.pi / 4
    angle_max: float = 3 * math.pi / 4

    @property
    def angles(self) -> np.ndarray:
        return np.linspace(self.angle_min, self.angle_max, self.n_beams)


@dataclass(frozen=True)
class TrackerConfig:
    warmup: int = 25
    alpha: float = 0.02
    tau_fg: float = 0.25
    gap_beams: int = 2
    split_dist: float = 0.15
    min_beams: int = 2
    sigma_a: float = 2.0
    sigma_m: float = 0.05
    gate: float = 0.5
    pair_gate: float = 1.0
    window: int = 6
    leg_min: float = 0.10
    leg_max: float = 0.45
    leg_std_max: float = 0.05
    still_eps: float = 0.02
    max_misses: int = 8


@dataclass(frozen=True)
class LaserScan:
    t: int
    ranges: np.ndarray


# -- background -------------------------------------------------------------

@dataclass(frozen=True)
class BackgroundModel:
    bg: np.ndarray
    alpha: float = 0.02
    tau_fg: float = 0.25
    warmup: int = 25
    n_seen: int = 0

    @classmethod
    def empty(cls, n_beams: int, cfg: TrackerConfig = TrackerConfig()) -> "BackgroundModel":
        return cls(np.zeros(n_beams), cfg.alpha, cfg.tau_fg, cfg.warmup, 0)

    @property
    def ready(self) -> bool:
        return self.n_seen >= self.warmup


def foreground_mask(model: BackgroundModel, ranges: np.ndarray) -> np.ndarray:
    if len(ranges) != len(model.bg):
        raise ValueError(f"scan has {len(ranges)} beams, background has {len(model.bg)}")
    if not model.ready:
        return np.zeros(len(ranges), dtype=bool)
    return ranges < model.bg - model.tau_fg


def update_background(model: BackgroundModel, ranges: np.ndarray) -> BackgroundModel:
    ranges = np.asarray(ranges, dtype=float)
    if len(ranges) != len(model.bg):
        raise ValueError(f"scan has {len(ranges)} beams, background has {len(model.bg)}")
    if model.n_seen == 0:
        bg = ranges.copy()
    elif not model.ready:
        bg = (1 - model.alpha) * model.bg + model.alpha * ranges
    else:
        fg = ranges < model.bg - model.tau_fg
        bg = np.where(fg, model.bg, (1 - model.alpha) * model.bg + model.alpha * ranges)
    return replace(model, bg=bg, n_seen=model.n_seen + 1)


# -- detection --------------------------------------------------------------

@dataclass(frozen=True)
class FootCandidate:
    x: float
    y: float
    beam_span: tuple[int, int]


def detect_moving_points(
    model: BackgroundModel,
    ranges: np.ndarray,
    angles: np.ndarray,
    cfg: TrackerConfig = TrackerConfig(),
) -> list[FootCandidate]:
    ranges = np.asarray(ranges, dtype=float)
    fg = np.flatnonzero(foreground_mask(model, ranges))
    if fg.size == 0:
        return []
    px = ranges[fg] * np.cos(angles[fg])
    py = ranges[fg] * np.sin(angles[fg])

    clusters: list[list[int]] = [[0]]
    for k in range(1, fg.size):
        gap = fg[k] - fg[k - 1] - 1
        jump = math.hypot(px[k] - px[k - 1], py[k] - py[k - 1])
        if gap > cfg.gap_beams or jump > cfg.split_dist:
            clusters.append([k])
        else:
            clusters[-1].append(k)

    out = []
    for members in clusters:
        if len(members) < cfg.min_beams:
            continue
        beams = fg[members]
        r = float(np.mean(ranges[beams]))
        a = float(np.mean(angles[beams]))
        out.append(FootCandidate(r * math.cos(a), r * math.sin(a), (int(beams[0]), int(beams[-1]))))
    return out


# -- Kalman filter ----------------------------------------------------------

def _transition(dt: float) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    return F


def _process_noise(dt: float, sigma_a: float) -> np.ndarray:
    q = sigma_a**2
    Q = np.zeros((4, 4))
    for p, v in ((0, 2), (1, 3)):
        Q[p, p] = q * dt**4 / 4
        Q[p, v] = Q[v, p] = q * dt**3 / 2
        Q[v, v] = q * dt**2
    return Q


_H = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])


def _repair_covariance(P: np.ndarray) -> np.ndarray:
    P = 0.5 * (P + P.T)
    w, V = np.linalg.eigh(P)
    if w.min() < 0:
        log.warning("covariance lost positive semi-definiteness (min eig %.3g); flooring", w.min())
        P = (V * np.maximum(w, 0.0)) @ V.T
        P = 0.5 * (P + P.T)
    return P


@dataclass
class KalmanState:
    x: np.ndarray
    P: np.ndarray

    @classmethod
    def at(cls, x: float, y: float, sigma_m: float = 0.05, sigma_v: float = 1.0) -> "KalmanState":
        return cls(np.array([x, y, 0.0, 0.0]), np.diag([sigma_m**2, sigma_m**2, sigma_v**2, sigma_v**2]))


def kalman_step(
    state: KalmanState,
    measurement: Sequence[float] | None,
    dt: float = DT,
    sigma_a: float = 2.0,
    sigma_m: float = 0.05,
) -> KalmanState:
    """Constant-velocity predict, then update when a gated (x, y) measurement exists."""
    F = _transition(dt)
    x = F @ state.x
    P = F @ state.P @ F.T + _process_noise(dt, sigma_a)
    if measurement is not None:
        z = np.asarray(measurement, dtype=float)
        R = np.eye(2) * sigma_m**2
        S = _H @ P @ _H.T + R
        K = np.linalg.solve(S, _H @ P).T
        x = x + K @ (z - _H @ x)
        # Joseph form keeps P symmetric PSD under round-off.
        IKH = np.eye(4) - K @ _H
        P = IKH @ P @ IKH.T + K @ R @ K.T
    return KalmanState(x, _repair_covariance(P))


# -- foot tracks and pedestrians --------------------------------------------

@dataclass
class FootTrack:
    id: int
    kf: KalmanState
    history: deque = field(default_factory=lambda: deque(maxlen=3))
    direction: np.ndarray = field(default_factory=lambda: np.zeros(2))
    age: int = 0
    misses: int = 0
    last_measurement: np.ndarray | None = None

    @property
    def position(self) -> np.ndarray:
        return self.kf.x[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.kf.x[2:]

    def refresh_direction(self, still_eps: float = 0.02) -> None:
        if len(self.history) < 2:
            self.direction = np.zeros(2)
            return
        d = self.history[-1] - self.history[0]
        n = float(np.hypot(*d))
        self.direction = d / n if n >= still_eps else np.zeros(2)


def leg_space(feet: Sequence[Sequence[float]], direction: Sequence[float]) -> float:
    """Sum of perpendicular distances of two feet to the line through their
    midpoint along ``direction``."""
    if len(feet) < 2:
        raise ValueError("insufficient feet: leg space needs two feet")
    a = np.asarray(feet[0], dtype=float)
    b = np.asarray(feet[1], dtype=float)
    d = np.asarray(direction, dtype=float)
    n = float(np.hypot(*d))
    if n == 0.0:
        raise ValueError("main direction is zero")
    u = d / n
    mid = 0.5 * (a + b)
    cross = lambda p: abs(float(u[0] * (p[1] - mid[1]) - u[1] * (p[0] - mid[0])))  # noqa: E731
    return cross(a) + cross(b)


def main_direction(a: FootTrack, b: FootTrack) -> np.ndarray:
    d = a.direction + b.direction
    n = float(np.hypot(*d))
    return d / n if n > 1e-12 else np.zeros(2)


def window_accepts(samples: Sequence[float], cfg: TrackerConfig = TrackerConfig()) -> bool:
    if len(samples) < cfg.window:
        return False
    s = np.asarray(samples[-cfg.window:], dtype=float)
    return cfg.leg_min <= float(s.mean()) <= cfg.leg_max and float(s.std()) < cfg.leg_std_max


@dataclass
class PedestrianTrack:
    id: int
    feet: list[int]
    kf: KalmanState
    leg_space_window: deque
    offsets: dict = field(default_factory=dict)
    main_direction: np.ndarray = field(default_factory=lambda: np.zeros(2))


@dataclass(frozen=True)
class PedestrianFeatures:
    t: int
    id: int
    cible_x: float
    cible_y: float
    cible_dx: float
    cible_dy: float

    @property
    def cible_dist(self) -> float:
        return math.hypot(self.cible_x, self.cible_y)

    def as_record(self) -> dict:
        return {
            "t": self.t, "id": self.id,
            "cible_x": self.cible_x, "cible_y": self.cible_y,
            "cible_dx": self.cible_dx, "cible_dy": self.cible_dy,
            "cible_dist": self.cible_dist,
        }


class FeetPairer:
    """Two-stage pairing: 1 m gate over unpaired feet, then leg-space stability."""

    def __init__(self, cfg: TrackerConfig = TrackerConfig()):
        self.cfg = cfg
        self.candidates: dict[tuple[int, int], deque] = {}

    def update(self, tracks: dict[int, FootTrack], taken: set[int]) -> list[tuple[int, int, deque]]:
        cfg = self.cfg
        free = sorted(i for i in tracks if i not in taken)
        live = set()
        for i, a in enumerate(free):
            for b in free[i + 1:]:
                ta, tb = tracks[a], tracks[b]
                if float(np.hypot(*(ta.position - tb.position))) >= cfg.pair_gate:
                    continue
                key = (a, b)
                live.add(key)
                win = self.candidates.setdefault(key, deque(maxlen=cfg.window))
                d = main_direction(ta, tb)
                if ta.misses == 0 and tb.misses == 0 and np.any(d):
                    win.append(leg_space([ta.position, tb.position], d))
        self.candidates = {k: v for k, v in self.candidates.items() if k in live}

        ready = sorted(
            (float(np.std(w)), k) for k, w in self.candidates.items() if window_accepts(list(w), cfg)
        )
        promoted = []
        used: set[int] = set()
        for _, (a, b) in ready:
            if a in used or b in used:
                continue
            used.update((a, b))
            promoted.append((a, b, self.candidates.pop((a, b))))
        self.candidates = {k: v for k, v in self.candidates.items() if not (set(k) & used)}
        return promoted


class LaserTracker:
    """Single-writer tracker state for one scan stream."""

    def __init__(self, laser: LaserConfig = LaserConfig(), cfg: TrackerConfig = TrackerConfig()):
        self.laser = laser
        self.cfg = cfg
        self.angles = laser.angles
        self.background = BackgroundModel.empty(laser.n_beams, cfg)
        self.feet: dict[int, FootTrack] = {}
        self.pedestrians: dict[int, PedestrianTrack] = {}
        self.pairer = FeetPairer(cfg)
        self._next_foot = 1
        self._next_ped = 1

    def _kf(self, state, z):
        return kalman_step(state, z, DT, self.cfg.sigma_a, self.cfg.sigma_m)

    def _associate(self, candidates: list[FootCandidate]) -> dict[int, np.ndarray]:
        cfg = self.cfg
        preds = {i: _transition(DT)[:2] @ tr.kf.x for i, tr in self.feet.items()}
        pairs = []
        for i, p in preds.items():
            for j, c in enumerate(candidates):
                d = math.hypot(c.x - p[0], c.y - p[1])
                if d < cfg.gate:
                    pairs.append((d, i, j))
        pairs.sort()
        matched: dict[int, np.ndarray] = {}
        used = set()
        for _, i, j in pairs:
            if i in matched or j in used:
                continue
            matched[i] = np.array([candidates[j].x, candidates[j].y])
            used.add(j)
        for j, c in enumerate(candidates):
            if j not in used:
                tr = FootTrack(self._next_foot, KalmanState.at(c.x, c.y, cfg.sigma_m))
                tr.history.append(np.array([c.x, c.y]))
                tr.last_measurement = np.array([c.x, c.y])
                self.feet[tr.id] = tr
                self._next_foot += 1
        return matched

    def track_scan(self, scan: LaserScan) -> tuple[list[PedestrianFeatures], int]:
        cfg = self.cfg
        ranges = np.asarray(scan.ranges, dtype=float)
        candidates = detect_moving_points(self.background, ranges, self.angles, cfg)
        self.background = update_background(self.background, ranges)

        existing = list(self.feet)
        matched = self._associate(candidates)
        for i in existing:
            tr = self.feet[i]
            z = matched.get(i)
            tr.kf = self._kf(tr.kf, z)
            tr.age += 1
            if z is None:
                tr.misses += 1
            else:
                tr.misses = 0
                tr.history.append(z)
                tr.last_measurement = z
                tr.refresh_direction(cfg.still_eps)
        for i in [i for i, tr in self.feet.items() if tr.misses >= cfg.max_misses]:
            del self.feet[i]

        self._maintain_pedestrians()
        taken = {f for p in self.pedestrians.values() for f in p.feet}
        for a, b, win in self.pairer.update(self.feet, taken):
            self._create_pedestrian(a, b, win)

        out = []
        for pid in sorted(self.pedestrians):
            ped = self.pedestrians[pid]
            z = self._pedestrian_measurement(ped)
            ped.kf = self._kf(ped.kf, z)
            x, y, dx, dy = (float(v) for v in ped.kf.x)
            out.append(PedestrianFeatures(scan.t, pid, x, y, dx, dy))
        return out, len(out)

    def _create_pedestrian(self, a: int, b: int, win: deque) -> None:
        fa, fb = self.feet[a], self.feet[b]
        mid = 0.5 * (fa.last_measurement + fb.last_measurement)
        kf = KalmanState.at(mid[0], mid[1], self.cfg.sigma_m)
        kf.x[2:] = 0.5 * (fa.velocity + fb.velocity)
        ped = PedestrianTrack(self._next_ped, [a, b], kf, deque(win, maxlen=self.cfg.window))
        ped.main_direction = main_direction(fa, fb)
        self.pedestrians[ped.id] = ped
        self._next_ped += 1

    def _maintain_pedestrians(self) -> None:
        cfg = self.cfg
        for pid in sorted(self.pedestrians):
            ped = self.pedestrians[pid]
            ped.feet = [f for f in ped.feet if f in self.feet]
            if not ped.feet:
                del self.pedestrians[pid]
                continue
            if len(ped.feet) == 2:
                fa, fb = (self.feet[f] for f in ped.feet)
                d = main_direction(fa, fb)
                if np.any(d):
                    ped.main_direction = d
                    if fa.misses == 0 and fb.misses == 0:
                        ped.leg_space_window.append(leg_space([fa.position, fb.position], d))

        # A pedestrian left with one foot re-adopts the nearest free foot track.
        taken = {f for p in self.pedestrians.values() for f in p.feet}
        for pid in sorted(self.pedestrians):
            ped = self.pedestrians[pid]
            if len(ped.feet) != 1:
                continue
            anchor = self.feet[ped.feet[0]].position
            best = None
            for fid in sorted(self.feet):
                if fid in taken:
                    continue
                d = float(np.hypot(*(self.feet[fid].position - anchor)))
                if d < cfg.pair_gate and (best is None or d < best[0]):
                    best = (d, fid)
            if best is not None:
                ped.feet.append(best[1])
                taken.add(best[1])

    def _pedestrian_measurement(self, ped: PedestrianTrack) -> np.ndarray | None:
        seen = [self.feet[f] for f in ped.feet if self.feet[f].misses == 0]
        if len(seen) == 2:
            a, b = seen[0].last_measurement, seen[1].last_measurement
            mid = 0.5 * (a + b)
            ped.offsets = {seen[0].id: mid - a, seen[1].id: mid - b}
            return mid
        if len(seen) == 1:
            foot = seen[0]
            off = ped.offsets.get(foot.id)
            if off is None:
                return foot.last_measurement.copy()
            return foot.last_measurement + off
        return None


def run_tracker(
    scans: Sequence[LaserScan],
    laser: LaserConfig = LaserConfig(),
    cfg: TrackerConfig = TrackerConfig(),
) -> tuple[list[PedestrianFeatures], list[tuple[int, int]]]:
    """Track a whole scan sequence; returns feature records and per-scan pedestrian counts."""
    tracker = LaserTracker(laser, cfg)
    feats: list[PedestrianFeatures] = []
    counts = []
    for scan in scans:
        f, n = tracker.track_scan(scan)
        feats.extend(f)
        counts.append((scan.t, n))
    return feats, counts
