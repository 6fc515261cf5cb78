"""Deterministic scenario engine producing synthetic sensor streams and the
ground-truth annotation timeline.

Geometry lives in the robot frame: x forward, y left, origin at the robot.
The scanner sees walls and each agent's two foot discs; the depth camera has
a 60 degree horizontal cone; the microphone array reports speech activity and
the bearing of whoever is talking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .acoustic_features import beam_set, nearest_beam
from .core import JOINTS, TICK_US
from .laser_tracking import LaserConfig, LaserScan

US = 1_000_000


# -- scripts ----------------------------------------------------------------

ROOM_POLYGON = ((-2.5, -2.5), (3.5, -2.5), (3.5, 2.5), (-0.5, 2.5), (-0.5, 0.0), (-2.5, 0.0))
DOORS = {"A": (-2.2, -1.25), "B": (1.5, 2.2), "C": (1.5, -2.2)}
TABLET_SPOT = (0.55, 0.0)
INTENT_KINDS = ("approach", "interact", "depart", "wander")


@dataclass(frozen=True)
class Intent:
    kind: str
    start: float
    end: float


@dataclass(frozen=True)
class AgentScript:
    id: int
    waypoints: tuple[tuple[float, float, float], ...]  # (t seconds, x, y)
    intents: tuple[Intent, ...] = ()
    speech: tuple[tuple[float, float], ...] = ()
    leg_space: float = 0.30
    step_length: float = 0.60

    @property
    def t_enter(self) -> float:
        return self.waypoints[0][0]

    @property
    def t_exit(self) -> float:
        return self.waypoints[-1][0]


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    duration: float
    agents: tuple[AgentScript, ...] = ()
    room: tuple[tuple[float, float], ...] = ROOM_POLYGON
    doors: dict = field(default_factory=lambda: dict(DOORS))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "duration": self.duration,
            "room": [list(p) for p in self.room],
            "doors": {k: list(v) for k, v in self.doors.items()},
            "agents": [
                {
                    "id": a.id,
                    "waypoints": [list(w) for w in a.waypoints],
                    "intents": [{"kind": i.kind, "start": i.start, "end": i.end} for i in a.intents],
                    "speech": [list(s) for s in a.speech],
                    "leg_space": a.leg_space,
                    "step_length": a.step_length,
                }
                for a in self.agents
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioScript":
        agents = tuple(
            AgentScript(
                int(a["id"]),
                tuple(tuple(float(v) for v in w) for w in a["waypoints"]),
                tuple(Intent(i["kind"], float(i["start"]), float(i["end"])) for i in a.get("intents", ())),
                tuple(tuple(float(v) for v in s) for s in a.get("speech", ())),
                float(a.get("leg_space", 0.30)),
                float(a.get("step_length", 0.60)),
            )
            for a in d.get("agents", ())
        )
        room = tuple(tuple(float(v) for v in p) for p in d.get("room", ROOM_POLYGON))
        doors = {k: tuple(v) for k, v in d.get("doors", DOORS).items()}
        return cls(d.get("name", "script"), float(d["duration"]), agents, room, doors)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioScript":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _inside(poly: Sequence[tuple[float, float]], x: float, y: float) -> bool:
    inside = False
    n = len(poly)
    for i in range(n):
        (x0, y0), (x1, y1) = poly[i], poly[(i + 1) % n]
        if (y0 > y) != (y1 > y) and x < x0 + (y - y0) * (x1 - x0) / (y1 - y0):
            inside = not inside
    return inside


def validate_script(script: ScenarioScript) -> None:
    for a in script.agents:
        if len(a.waypoints) < 2:
            raise ValueError(f"agent {a.id}: needs at least two waypoints")
        times = [w[0] for w in a.waypoints]
        if any(t1 < t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError(f"agent {a.id}: waypoint times must not decrease")
        if times[0] < 0 or times[-1] > script.duration:
            raise ValueError(f"agent {a.id}: waypoints outside [0, duration]")
        for t, x, y in a.waypoints:
            if not _inside(script.room, x, y):
                raise ValueError(f"agent {a.id}: waypoint ({x}, {y}) at t={t} outside room geometry")
        ivs = sorted(a.intents, key=lambda i: i.start)
        for i in ivs:
            if i.kind not in INTENT_KINDS or not i.start < i.end:
                raise ValueError(f"agent {a.id}: bad intent {i}")
            if i.start < a.t_enter or i.end > a.t_exit:
                raise ValueError(f"agent {a.id}: intent {i.kind} outside presence")
        for i0, i1 in zip(ivs, ivs[1:]):
            if i1.start < i0.end:
                raise ValueError(f"agent {a.id}: intents {i0.kind} and {i1.kind} overlap")


# -- configuration ----------------------------------------------------------

@dataclass(frozen=True)
class SensorConfig:
    seed: int = 0
    laser: LaserConfig = LaserConfig()
    range_noise: float = 0.02
    max_range: float = 10.0
    foot_radius: float = 0.06
    kinect_fov: float = math.radians(60.0)
    kinect_vfov: float = math.radians(43.0)
    kinect_hz: int = 30
    kinect_height: float = 1.2
    kinect_tilt: float = math.radians(10.0)  # upward pitch of the depth sensor
    depth_min: float = 0.8
    depth_max: float = 4.0
    joint_noise: float = 0.02
    image: tuple[int, int] = (640, 480)
    face_cone: float = math.radians(25.0)
    face_depth: tuple[float, float] = (0.5, 4.0)
    face_miss: float = 0.10
    face_size_m: float = 0.16
    sad_period_us: int = 10_000
    sad_miss: float = 0.05
    sad_false_alarm: float = 0.0
    loc_period_us: int = 125_000
    angle_noise: float = math.radians(5.0)
    shoulder_pre_rotation: float = math.radians(20.0)
    gaze_lookahead: float = 1.5


# -- agent kinematics -------------------------------------------------------

def _foot_offset(phase: float) -> float:
    """Fore/aft foot offset in strides: stance slides back, swing eases forward."""
    if phase < 0.5:
        return 0.25 - phase
    return -0.25 + 0.25 * (1 - math.cos(2 * math.pi * (phase - 0.5)))


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def _turn_toward(current: float, target: float, max_turn: float) -> float:
    d = _wrap(target - current)
    return current + max(-max_turn, min(max_turn, d))


@dataclass
class AgentPose:
    center: np.ndarray
    feet: tuple[np.ndarray, np.ndarray]  # left, right
    heading: float
    body_yaw: float
    shoulder_yaw: float
    head_yaw: float
    intent: str | None
    speaking: bool
    moving: bool


class AgentMotion:
    def __init__(self, agent: AgentScript, cfg: SensorConfig):
        self.a = agent
        self.cfg = cfg
        w = np.array(agent.waypoints, dtype=float)
        self.times = w[:, 0]
        self.pts = w[:, 1:]
        seg = np.hypot(*np.diff(self.pts, axis=0).T) if len(w) > 1 else np.zeros(0)
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])

    def present(self, t: float) -> bool:
        return self.a.t_enter <= t < self.a.t_exit

    def _arc(self, t: float) -> float:
        return float(np.interp(t, self.times, self.cum))

    def _at_arc(self, u: float) -> np.ndarray:
        if self.cum[-1] == 0:
            return self.pts[0].copy()
        return np.array([np.interp(u, self.cum, self.pts[:, 0]), np.interp(u, self.cum, self.pts[:, 1])])

    def _heading(self, u: float) -> float:
        total = self.cum[-1]
        if total == 0:
            p = self.pts[0]
            return math.atan2(-p[1], -p[0])
        delta = 0.3
        lo, hi = max(0.0, u - delta), min(total, u + delta)
        if hi - lo < 1e-9:
            lo, hi = max(0.0, total - 2 * delta), total
        d = self._at_arc(hi) - self._at_arc(lo)
        return math.atan2(d[1], d[0])

    def intent(self, t: float) -> str | None:
        for i in self.a.intents:
            if i.start <= t < i.end:
                return i.kind
        return None

    def pose(self, t: float) -> AgentPose:
        u = self._arc(t)
        center = self._at_arc(u)
        heading = self._heading(u)
        h = np.array([math.cos(heading), math.sin(heading)])
        left = np.array([-h[1], h[0]])
        stride = 2 * self.a.step_length
        ph = u / stride
        off_l = _foot_offset(ph % 1.0) * stride
        off_r = _foot_offset((ph + 0.5) % 1.0) * stride
        half = self.a.leg_space / 2
        feet = (center + off_l * h + half * left, center + off_r * h - half * left)

        intent = self.intent(t)
        to_robot = math.atan2(-center[1], -center[0])
        moving = abs(self._arc(t + 0.04) - self._arc(t - 0.04)) > 1e-6
        body = heading
        shoulder = heading
        # Wanderers look where the path is taking them.
        ahead = self._at_arc(min(self.cum[-1], u + self.cfg.gaze_lookahead)) - center
        head = math.atan2(ahead[1], ahead[0]) if np.hypot(*ahead) > 0.2 else heading
        if intent == "interact":
            body = shoulder = head = to_robot
        elif intent == "approach":
            shoulder = _turn_toward(heading, to_robot, self.cfg.shoulder_pre_rotation)
            head = to_robot
        speaking = any(s <= t < e for s, e in self.a.speech)
        return AgentPose(center, feet, heading, body, shoulder, head, intent, speaking, moving)


# -- sensors ----------------------------------------------------------------

def _wall_ranges(angles: np.ndarray, poly, max_range: float) -> np.ndarray:
    dx, dy = np.cos(angles), np.sin(angles)
    best = np.full(len(angles), max_range)
    n = len(poly)
    for i in range(n):
        (x0, y0), (x1, y1) = poly[i], poly[(i + 1) % n]
        ex, ey = x1 - x0, y1 - y0
        den = dx * ey - dy * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (x0 * ey - y0 * ex) / den
            s = (x0 * dy - y0 * dx) / den
        ok = (np.abs(den) > 1e-12) & (t > 0) & (s >= 0) & (s <= 1)
        best = np.where(ok & (t < best), t, best)
    return best


def _disc_ranges(angles: np.ndarray, c: np.ndarray, r: float) -> np.ndarray:
    dx, dy = np.cos(angles), np.sin(angles)
    proj = dx * c[0] + dy * c[1]
    perp2 = c[0] ** 2 + c[1] ** 2 - proj**2
    disc = r * r - perp2
    hit = (disc >= 0) & (proj > 0)
    out = np.full(len(angles), np.inf)
    out[hit] = proj[hit] - np.sqrt(disc[hit])
    return out


def _rot2(yaw: float) -> np.ndarray:
    return np.array([math.cos(yaw), math.sin(yaw)])


def skeleton_joints_world(pose: AgentPose) -> dict[str, np.ndarray]:
    """Joint positions (x, y, z-up) in the robot frame from an articulated template."""
    c = pose.center

    def right_of(yaw):
        h = _rot2(yaw)
        return np.array([h[1], -h[0]])

    r_hip, r_sh = right_of(pose.body_yaw), right_of(pose.shoulder_yaw)
    lf, rf = pose.feet
    P = lambda xy, z: np.array([xy[0], xy[1], z])  # noqa: E731
    hips = {"left_hip": c - 0.12 * r_hip, "right_hip": c + 0.12 * r_hip}
    sh = {"left_shoulder": c - 0.20 * r_sh, "right_shoulder": c + 0.20 * r_sh}
    j = {
        "head": P(c, 1.68), "neck": P(c, 1.50), "torso": P(c, 1.15),
        "left_shoulder": P(sh["left_shoulder"], 1.45), "right_shoulder": P(sh["right_shoulder"], 1.45),
        "left_elbow": P(sh["left_shoulder"], 1.15), "right_elbow": P(sh["right_shoulder"], 1.15),
        "left_hand": P(sh["left_shoulder"], 0.88), "right_hand": P(sh["right_shoulder"], 0.88),
        "left_hip": P(hips["left_hip"], 0.95), "right_hip": P(hips["right_hip"], 0.95),
        "left_knee": P(0.5 * (hips["left_hip"] + lf), 0.50), "right_knee": P(0.5 * (hips["right_hip"] + rf), 0.50),
        "left_ankle": P(lf, 0.10), "right_ankle": P(rf, 0.10),
    }
    return j


def to_sensor(p: np.ndarray, kinect_height: float, tilt: float = 0.0) -> np.ndarray:
    """Robot frame (x fwd, y left, z up) to depth-sensor frame (x = robot y, y up, z depth),
    for a sensor pitched up by ``tilt``."""
    y, z = p[2] - kinect_height, p[0]
    c, s = math.cos(tilt), math.sin(tilt)
    return np.array([p[1], c * y - s * z, s * y + c * z])


def in_fov(center: np.ndarray, cfg: SensorConfig) -> bool:
    x, y = float(center[0]), float(center[1])
    return x > 0 and abs(math.atan2(y, x)) <= cfg.kinect_fov / 2 and cfg.depth_min <= x <= cfg.depth_max


@dataclass
class Recording:
    script: ScenarioScript
    config: SensorConfig
    scans: list[LaserScan]
    skeletons: list[dict]
    faces: list[dict]
    sad: list[dict]
    localization: list[dict]
    timeline: list[dict]
    truth: list[dict]

    @property
    def t_end(self) -> int:
        return len(self.scans) * TICK_US

    def laser_config(self) -> dict:
        lc = self.config.laser
        return {"angle_min": lc.angle_min, "angle_max": lc.angle_max, "n_beams": lc.n_beams}


def _r(v: float, nd: int = 4) -> float:
    return round(float(v), nd)


def simulate(script: ScenarioScript, cfg: SensorConfig = SensorConfig()) -> Recording:
    validate_script(script)
    rng = np.random.default_rng(cfg.seed)
    motions = [AgentMotion(a, cfg) for a in script.agents]
    angles = cfg.laser.angles
    walls = _wall_ranges(angles, script.room, cfg.max_range)
    n_ticks = int(round(script.duration * US)) // TICK_US
    t_end = n_ticks * TICK_US

    scans, truth = [], []
    for k in range(n_ticks):
        t_us = k * TICK_US
        t = t_us / US
        ranges = walls.copy()
        owner = np.full(len(angles), -1)
        feet_meta = []
        for m in motions:
            if not m.present(t):
                continue
            pose = m.pose(t)
            for f, foot in enumerate(pose.feet):
                d = _disc_ranges(angles, foot, cfg.foot_radius)
                closer = d < ranges
                ranges = np.where(closer, d, ranges)
                owner[closer] = len(feet_meta)
                feet_meta.append((m.a.id, f, foot))
        noisy = np.clip(ranges + rng.normal(0.0, cfg.range_noise, len(angles)), 0.0, cfg.max_range)
        scans.append(LaserScan(t_us, np.round(noisy, 4)))
        agents = {}
        for idx, (aid, f, foot) in enumerate(feet_meta):
            a = agents.setdefault(aid, {"id": aid, "feet": [None, None], "visible_beams": [0, 0]})
            a["feet"][f] = [_r(foot[0]), _r(foot[1])]
            a["visible_beams"][f] = int(np.sum(owner == idx))
        for m in motions:
            if m.a.id in agents:
                pose = m.pose(t)
                agents[m.a.id]["center"] = [_r(pose.center[0]), _r(pose.center[1])]
                agents[m.a.id]["moving"] = pose.moving
        truth.append({"t": t_us, "agents": [agents[k] for k in sorted(agents)]})

    skeletons, faces = [], []
    W, Hh = cfg.image
    fx = (W / 2) / math.tan(cfg.kinect_fov / 2)
    half_v = cfg.kinect_vfov / 2
    k = 0
    while True:
        t_us = int(round(k * US / cfg.kinect_hz))
        if t_us >= t_end:
            break
        k += 1
        t = t_us / US
        for m in motions:
            if not m.present(t):
                continue
            pose = m.pose(t)
            if not in_fov(pose.center, cfg):
                continue
            joints = {}
            for name, pw in skeleton_joints_world(pose).items():
                s = to_sensor(pw, cfg.kinect_height, cfg.kinect_tilt) + rng.normal(0.0, cfg.joint_noise, 3)
                elev = math.atan2(s[1], max(s[2], 1e-6))
                conf = 1.0 if abs(elev) <= half_v else 0.3
                joints[name] = [_r(s[0]), _r(s[1]), _r(s[2]), conf]
            skeletons.append({"t": t_us, "id": m.a.id, "joints": {n: joints[n] for n in JOINTS}})

            head = to_sensor(skeleton_joints_world(pose)["head"], cfg.kinect_height, cfg.kinect_tilt)
            look = _wrap(pose.head_yaw - math.atan2(-pose.center[1], -pose.center[0]))
            depth = head[2]
            if abs(look) > cfg.face_cone or not cfg.face_depth[0] <= depth <= cfg.face_depth[1]:
                continue
            if rng.random() < cfg.face_miss:
                continue
            u = W / 2 - fx * head[0] / depth
            v = Hh / 2 - fx * head[1] / depth
            size = fx * cfg.face_size_m / depth
            box = [round(u - size / 2, 1), round(v - size / 2, 1), round(size, 1)]
            if box[0] < 0 or box[1] < 0 or box[0] + box[2] > W or box[1] + box[2] > Hh:
                continue
            faces.append({"t": t_us, "box": box, "image": [W, Hh]})

    sad, loc = [], []
    for t_us in range(0, t_end, cfg.sad_period_us):
        t = t_us / US
        talking = any(m.present(t) and m.pose(t).speaking for m in motions)
        if talking:
            speech = rng.random() >= cfg.sad_miss
        else:
            speech = rng.random() < cfg.sad_false_alarm
        sad.append({"t": t_us, "sad": int(speech), "conf": _r(rng.uniform(0.6, 1.0), 3)})
    beams = beam_set()
    for t_us in range(0, t_end, cfg.loc_period_us):
        t = t_us / US
        speakers = [m for m in motions if m.present(t) and m.pose(t).speaking]
        if not speakers:
            continue
        c = speakers[0].pose(t).center
        bearing = math.atan2(c[1], c[0])
        ang = bearing + rng.normal(0.0, cfg.angle_noise)
        loc.append({
            "t": t_us, "beam": _r(nearest_beam(ang, beams), 6), "angle": _r(ang, 4),
            "conf": _r(rng.uniform(0.5, 0.95), 3), "energy": _r(1.0 / (1.0 + math.hypot(*c)), 4),
        })

    return Recording(script, cfg, scans, skeletons, faces, sad, loc, timeline_events(script), truth)


def _us(t: float) -> int:
    return int(round(t * US))


def timeline_events(script: ScenarioScript) -> list[dict]:
    names = {"approach": ("approach_start", "approach_end"), "interact": ("touch_first", "touch_last"),
             "depart": ("depart_start", "depart_end")}
    ev = []
    for a in script.agents:
        ev.append({"t": _us(a.t_enter), "kind": "enter", "who": a.id})
        ev.append({"t": _us(a.t_exit), "kind": "exit", "who": a.id})
        for i in a.intents:
            if i.kind in names:
                s, e = names[i.kind]
                ev.append({"t": _us(i.start), "kind": s, "who": a.id})
                ev.append({"t": _us(i.end), "kind": e, "who": a.id})
    order = ("exit", "approach_end", "touch_last", "depart_end", "enter", "approach_start", "touch_first", "depart_start")
    return sorted(ev, key=lambda e: (e["t"], e["who"], order.index(e["kind"])))


# -- builtin scenarios ------------------------------------------------------

LEAD_IN = 3.0
TAIL = 2.0


class _Path:
    """Accumulates timed waypoints at given walking speeds."""

    def __init__(self, start: tuple[float, float], t0: float):
        self.w = [(t0, float(start[0]), float(start[1]))]

    @property
    def t(self) -> float:
        return self.w[-1][0]

    @property
    def pos(self) -> tuple[float, float]:
        return self.w[-1][1], self.w[-1][2]

    def walk(self, *points, speed: float) -> "_Path":
        for p in points:
            x0, y0 = self.pos
            d = math.hypot(p[0] - x0, p[1] - y0)
            self.w.append((round(self.t + d / speed, 3), float(p[0]), float(p[1])))
        return self

    def wait(self, dt: float) -> "_Path":
        x, y = self.pos
        self.w.append((round(self.t + dt, 3), x, y))
        return self


def _jit(rng, p, s=0.15):
    return (p[0] + float(rng.uniform(-s, s)), p[1] + float(rng.uniform(-s, s)))


# Near-robot corridors, each passing within 1 m of the origin.
_PASS_ROUTES = {
    ("A", "B"): [(-0.3, -0.95), (0.70, -0.05)],
    ("A", "C"): [(-0.3, -0.95), (0.35, -0.80)],
    ("B", "C"): [(0.85, 0.30), (0.85, -0.30)],
    ("B", "A"): [(0.70, 0.05), (-0.3, -0.95)],
    ("C", "A"): [(0.35, -0.80), (-0.3, -0.95)],
    ("C", "B"): [(0.85, -0.30), (0.85, 0.30)],
}
_FRONT_SPOTS = ((2.6, 0.9), (2.8, -0.6), (2.4, 0.2), (3.0, 0.4), (2.5, -1.1))


def pass_by(rng: np.random.Generator | int = 0, name: str = "pass_by") -> ScenarioScript:
    """Cross the room between two doors, passing near the robot without interacting."""
    rng = np.random.default_rng(rng)
    doors = list(DOORS)
    src = doors[rng.integers(3)]
    dst = [d for d in doors if d != src][rng.integers(2)]
    speed = float(rng.uniform(0.6, 1.1))
    path = _Path(DOORS[src], LEAD_IN)
    if rng.random() < 0.7:
        # Loiter in the front area first, then pass the robot on the way out.
        if src == "A":
            path.walk(_jit(rng, (-0.3, -1.2), 0.1), (0.9, -1.6), speed=speed)
        spot = _FRONT_SPOTS[rng.integers(len(_FRONT_SPOTS))]
        path.walk(_jit(rng, spot), speed=speed).wait(float(rng.uniform(0.5, 2.0)))
    path.walk(*[_jit(rng, p, 0.1) for p in _PASS_ROUTES[(src, dst)]], DOORS[dst], speed=speed)
    speech = ()
    if rng.random() < 0.3:
        s = float(rng.uniform(LEAD_IN, path.t - 1.0))
        speech = ((round(s, 3), round(min(path.t - 0.1, s + rng.uniform(0.8, 2.5)), 3)),)
    t_exit = path.t
    agent = AgentScript(1, tuple(path.w), (Intent("wander", LEAD_IN, t_exit),), speech,
                        float(rng.uniform(0.27, 0.33)), float(rng.uniform(0.5, 0.7)))
    return ScenarioScript(name, math.ceil((t_exit + TAIL) / 0.08) * 0.08, (agent,))


def approach_interact_leave(rng: np.random.Generator | int = 0, name: str = "approach_interact_leave") -> ScenarioScript:
    """Enter, linger, walk straight to the tablet, play, step away, leave."""
    rng = np.random.default_rng(rng)
    door = list(DOORS)[rng.integers(3)]
    speed = float(rng.uniform(0.8, 1.2))
    path = _Path(DOORS[door], LEAD_IN)
    if door == "A":
        path.walk(_jit(rng, (-0.3, -1.2), 0.1), (0.9, -1.6), speed=speed)
    if rng.random() < 0.75:
        spot = _jit(rng, _FRONT_SPOTS[rng.integers(len(_FRONT_SPOTS))])
    else:
        spot = _jit(rng, ((1.1, 1.7), (1.1, -1.7))[rng.integers(2)], 0.2)
    path.walk(spot, speed=speed).wait(float(rng.uniform(1.0, 2.5)))
    t_approach = path.t
    target = _jit(rng, TABLET_SPOT, 0.05)
    path.walk(target, speed=float(rng.uniform(0.6, 1.0)))
    t_first = round(path.t + 0.4, 3)
    t_last = round(t_first + float(rng.uniform(5.0, 9.0)), 3)
    path.wait(t_last - path.t)
    away = _jit(rng, ((1.4, 1.2), (1.4, -1.2), (0.3, -1.4))[rng.integers(3)], 0.15)
    path.walk(away, speed=speed)
    t_depart_end = path.t
    exit_door = list(DOORS)[rng.integers(3)]
    if exit_door == "A":
        path.walk((-0.3, -1.2), speed=speed)
    path.walk(DOORS[exit_door], speed=speed)
    t_exit = path.t

    speech = []
    if rng.random() < 0.6:
        s = t_approach + float(rng.uniform(0.2, 1.0))
        speech.append((round(s, 3), round(min(t_first, s + rng.uniform(0.8, 1.6)), 3)))
    s = t_first + float(rng.uniform(0.5, 2.0))
    speech.append((round(s, 3), round(s + rng.uniform(0.5, 1.5), 3)))
    intents = (
        Intent("wander", LEAD_IN, t_approach),
        Intent("approach", t_approach, t_first),
        Intent("interact", t_first, t_last),
        Intent("depart", t_last, t_depart_end),
        Intent("wander", t_depart_end, t_exit),
    )
    agent = AgentScript(1, tuple(path.w), intents, tuple(speech),
                        float(rng.uniform(0.27, 0.33)), float(rng.uniform(0.5, 0.7)))
    return ScenarioScript(name, math.ceil((t_exit + TAIL) / 0.08) * 0.08, (agent,))


def cards_multiuser(rng: np.random.Generator | int = 0, name: str = "cards_multiuser") -> ScenarioScript:
    """Three players at the card table; one is called to the robot mid-game."""
    rng = np.random.default_rng(rng)
    seats = ((2.5, 1.5), (3.0, 1.9), (3.1, 1.0))
    agents = []
    caller = int(rng.integers(3))
    t_end = 0.0
    for i, seat in enumerate(seats):
        speed = float(rng.uniform(0.8, 1.1))
        path = _Path(DOORS["B"], LEAD_IN + 2.5 * i)
        path.walk(_jit(rng, seat, 0.05), speed=speed)
        intents, speech = [], []
        if i == caller:
            path.wait(float(rng.uniform(6.0, 9.0)))
            t_app = path.t
            intents.append(Intent("wander", path.w[0][0], t_app))
            path.walk(TABLET_SPOT, speed=0.8)
            t_first = round(path.t + 0.4, 3)
            t_last = round(t_first + float(rng.uniform(5.0, 8.0)), 3)
            path.wait(t_last - path.t)
            path.walk((1.4, 1.0), speed=speed)
            t_dep = path.t
            intents += [Intent("approach", t_app, t_first), Intent("interact", t_first, t_last),
                        Intent("depart", t_last, t_dep)]
            path.walk(_jit(rng, seat, 0.05), speed=speed).wait(4.0)
            intents.append(Intent("wander", t_dep, path.t + 3.0))
            speech.append((round(t_app + 0.3, 3), round(t_app + 1.3, 3)))
        agents.append((path, intents, speech))
        t_end = max(t_end, path.t)
    t_exit = round(t_end + 3.0, 3)
    out = []
    for i, (path, intents, speech) in enumerate(agents):
        path.wait(t_exit - path.t)
        if not intents:
            intents = [Intent("wander", path.w[0][0], t_exit)]
        else:
            last = intents[-1]
            intents[-1] = Intent(last.kind, last.start, t_exit)
        talk = list(speech)
        s = float(rng.uniform(path.w[0][0] + 5.0, t_exit - 2.0))
        talk.append((round(s, 3), round(s + 1.0, 3)))
        talk.sort()
        out.append(AgentScript(i + 1, tuple(path.w), tuple(intents), tuple(talk)))
    return ScenarioScript(name, math.ceil((t_exit + 0.08) / 0.08) * 0.08, tuple(out))


def _arc(path: _Path, radius: float, a0: float, a1: float, speed: float, n: int = 40) -> None:
    pts = []
    for k in range(1, n + 1):
        a = math.radians(a0 + (a1 - a0) * k / n)
        pts.append((radius * math.cos(a), radius * math.sin(a)))
    path.walk(*pts, speed=speed)


def orbit_walk(rng: np.random.Generator | int = 0, name: str = "orbit_walk", laps: int = 2) -> ScenarioScript:
    """Walk back and forth along arcs around the robot.

    Walking across the scanner's line of sight lines the feet up along the
    ray, so the far foot is hidden twice per stride.
    """
    rng = np.random.default_rng(rng)
    speed = float(rng.uniform(0.7, 0.9))
    r = float(rng.uniform(1.9, 2.1))
    path = _Path((r * math.cos(math.radians(-100)), r * math.sin(math.radians(-100))), LEAD_IN)
    span = (-100.0, 95.0)
    for lap in range(2 * laps):
        a0, a1 = span if lap % 2 == 0 else span[::-1]
        radius = r if lap % 2 == 0 else r - float(rng.uniform(0.3, 0.5))
        if lap:
            a = math.radians(a0)
            path.walk((radius * math.cos(a), radius * math.sin(a)), speed=speed)
        _arc(path, radius, a0, a1, speed)
    agent = AgentScript(1, tuple(path.w), (Intent("wander", LEAD_IN, path.t),), (),
                        float(rng.uniform(0.28, 0.32)), float(rng.uniform(0.55, 0.65)))
    return ScenarioScript(name, math.ceil((path.t + TAIL) / 0.08) * 0.08, (agent,))


BUILTIN = {
    "pass_by": pass_by,
    "approach_interact_leave": approach_interact_leave,
    "cards_multiuser": cards_multiuser,
}


def builtin_scenarios() -> dict:
    return dict(BUILTIN)


def engagement_suite(n_pass: int = 20, n_approach: int = 20, seed: int = 0) -> list[ScenarioScript]:
    """Seeded mix of pass-by and approach recordings."""
    ss = np.random.SeedSequence(seed)
    kids = ss.spawn(n_pass + n_approach)
    out = [pass_by(np.random.default_rng(kids[i]), f"pass_by_{i:02d}") for i in range(n_pass)]
    out += [
        approach_interact_leave(np.random.default_rng(kids[n_pass + i]), f"approach_{i:02d}")
        for i in range(n_approach)
    ]
    return out


def min_robot_distance(script: ScenarioScript, step: float = 0.04) -> dict[int, float]:
    out = {}
    for a in script.agents:
        m = AgentMotion(a, SensorConfig())
        ts = np.arange(a.t_enter, a.t_exit, step)
        out[a.id] = min(float(np.hypot(*m.pose(t).center)) for t in ts)
    return out


def with_seed(cfg: SensorConfig, seed: int) -> SensorConfig:
    return replace(cfg, seed=seed)
