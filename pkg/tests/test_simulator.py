import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from engage import pipeline as P
from engage import simulator as S
from engage.fusion import AnnotationTimeline, TimelineEvent
from engage.laser_tracking import leg_space

QUIET = S.SensorConfig(seed=0, range_noise=0.0)


def _timeline(rec):
    return AnnotationTimeline(TimelineEvent(e["t"], e["kind"], e["who"]) for e in rec.timeline)


def test_empty_script_is_walls_only():
    rec = S.simulate(S.ScenarioScript("empty", 4.0), QUIET)
    assert len(rec.scans) == 50
    walls = S._wall_ranges(QUIET.laser.angles, S.ROOM_POLYGON, QUIET.max_range)
    assert all(np.allclose(s.ranges, np.round(walls, 4)) for s in rec.scans)
    assert rec.skeletons == rec.faces == rec.localization == [] and rec.timeline == []
    assert all(r["sad"] == 0 for r in rec.sad)
    tl = _timeline(rec)
    assert {tl.label_at(t).value for t in range(0, rec.t_end, 80_000)} == {"noOne"}


def _ray_disc_oracle(theta, cx, cy, r):
    # Solve |s * (cos, sin) - c| = r for the smallest positive s.
    ux, uy = math.cos(theta), math.sin(theta)
    b = ux * cx + uy * cy
    disc = b * b - (cx * cx + cy * cy - r * r)
    if disc < 0:
        return math.inf
    s = b - math.sqrt(disc)
    return s if s > 0 else math.inf


def test_ranges_and_occlusion_match_ray_casting_oracle():
    script = S.orbit_walk(0)
    rec = S.simulate(script, QUIET)
    angles = QUIET.laser.angles
    walls = S._wall_ranges(angles, script.room, QUIET.max_range)
    occluded = 0
    for scan, truth in list(zip(rec.scans, rec.truth))[40:400:7]:
        if not truth["agents"]:
            continue
        feet = truth["agents"][0]["feet"]
        t = scan.t / 1e6
        exact = S.AgentMotion(script.agents[0], QUIET).pose(t).feet
        counts = [0, 0]
        for b, theta in enumerate(angles):
            hits = [_ray_disc_oracle(theta, f[0], f[1], QUIET.foot_radius) for f in exact]
            best = min(hits + [walls[b]])
            assert scan.ranges[b] == pytest.approx(best, abs=1e-4)
            for i, h in enumerate(hits):
                if h == best and h < walls[b]:
                    counts[i] += 1
        assert counts == truth["agents"][0]["visible_beams"]
        np.testing.assert_allclose(np.array(feet), np.array(exact), atol=1e-4)
        occluded += min(counts) < 2 <= max(counts)
    assert occluded > 0


def test_side_by_side_feet_on_radial_walk_stay_visible():
    # Walking straight at the scanner keeps the feet side by side across the ray.
    w = ((0.0, 3.0, 0.0), (4.0, 0.8, 0.0))
    rec = S.simulate(S.ScenarioScript("radial", 4.0, (S.AgentScript(1, w),)), QUIET)
    for truth in rec.truth:
        if truth["agents"]:
            assert min(truth["agents"][0]["visible_beams"]) >= 2


def test_agent_at_forty_degrees_has_no_skeleton():
    b = math.radians(40)
    p = (2.0 * math.cos(b), 2.0 * math.sin(b))
    w = ((0.0, *p), (3.0, *p))
    rec = S.simulate(S.ScenarioScript("side", 3.0, (S.AgentScript(1, w),)), QUIET)
    assert rec.skeletons == [] and rec.faces == []


@pytest.mark.parametrize("name", sorted(S.BUILTIN))
def test_fov_is_exact(name):
    seen = 0
    for seed in range(3):
        seen += _check_fov(S.BUILTIN[name](seed), S.SensorConfig(seed=seed))
    assert seen


def _check_fov(script, cfg):
    rec = S.simulate(script, cfg)
    motions = {a.id: S.AgentMotion(a, cfg) for a in script.agents}
    for r in rec.skeletons:
        c = motions[r["id"]].pose(r["t"] / 1e6).center
        assert c[0] > 0 and abs(math.degrees(math.atan2(c[1], c[0]))) <= 30.0 + 1e-9
    faces_t = {r["t"] for r in rec.faces}
    assert faces_t <= {r["t"] for r in rec.skeletons}
    return len(rec.skeletons)


def test_determinism():
    script = S.approach_interact_leave(4)
    a, b = S.simulate(script, S.SensorConfig(seed=4)), S.simulate(script, S.SensorConfig(seed=4))
    assert all(np.array_equal(x.ranges, y.ranges) for x, y in zip(a.scans, b.scans))
    assert a.skeletons == b.skeletons and a.faces == b.faces and a.sad == b.sad
    c = S.simulate(script, S.SensorConfig(seed=5))
    assert not all(np.array_equal(x.ranges, y.ranges) for x, y in zip(a.scans, c.scans))


def test_gait_leg_space():
    ok = total = 0
    for gen in (S.pass_by, S.approach_interact_leave):
        for seed in range(10):
            agent = gen(seed).agents[0]
            m = S.AgentMotion(agent, S.SensorConfig())
            poses = [m.pose(t) for t in np.arange(agent.t_enter, agent.t_exit, 0.08)]
            inst = [leg_space(p.feet, (math.cos(p.heading), math.sin(p.heading))) for p in poses if p.moving]
            assert all(abs(v - agent.leg_space) <= 0.02 for v in inst)

            # Pairer-style windows: one direction per window, taken from the centre
            # displacement. Only straight walking counts (heading within 10 degrees).
            for i in range(len(poses) - 6):
                win = poses[i:i + 6]
                if not all(p.moving for p in win):
                    continue
                if max(abs(S._wrap(p.heading - win[0].heading)) for p in win) > math.radians(10):
                    continue
                d = win[-1].center - win[0].center
                mean = float(np.mean([leg_space(p.feet, d) for p in win]))
                total += 1
                # Scripts draw L in [0.27, 0.33]; the window band is centred on it.
                ok += abs(mean - agent.leg_space) <= 0.02
    assert total > 500 and ok / total >= 0.95


def test_default_gait_window_band():
    w = ((0.0, 3.0, 1.5), (6.0, 3.0, -2.0))
    agent = S.AgentScript(1, w)
    m = S.AgentMotion(agent, S.SensorConfig())
    poses = [m.pose(t) for t in np.arange(0.2, 5.8, 0.08)]
    for i in range(len(poses) - 6):
        win = poses[i:i + 6]
        d = win[-1].center - win[0].center
        assert 0.28 <= float(np.mean([leg_space(p.feet, d) for p in win])) <= 0.32


def test_script_validation():
    with pytest.raises(ValueError, match="outside room geometry"):
        S.simulate(S.ScenarioScript("bad", 2.0, (S.AgentScript(1, ((0, -2.0, 1.0), (1, 0.5, 0.5))),)))
    overlapping = (S.Intent("approach", 0.0, 1.0), S.Intent("interact", 0.5, 1.5))
    with pytest.raises(ValueError, match="overlap"):
        S.validate_script(S.ScenarioScript("x", 2.0, (S.AgentScript(1, ((0, 1, 0), (2, 2, 0)), overlapping),)))
    with pytest.raises(ValueError):
        S.validate_script(S.ScenarioScript("x", 2.0, (S.AgentScript(1, ((0, 1, 0),)),)))


def test_script_json_round_trip(tmp_path):
    script = S.cards_multiuser(1)
    script.save(tmp_path / "s.json")
    assert S.ScenarioScript.load(tmp_path / "s.json") == script


def test_builtins_registry():
    assert set(S.builtin_scenarios()) == {"pass_by", "approach_interact_leave", "cards_multiuser"}
    for gen in S.builtin_scenarios().values():
        S.validate_script(gen(0))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(sorted(S.BUILTIN) + ["orbit_walk"]))
def test_generated_scripts_always_valid(seed, name):
    gen = S.orbit_walk if name == "orbit_walk" else S.BUILTIN[name]
    S.validate_script(gen(np.random.default_rng(seed)))


def test_pass_by_never_interacts():
    for seed in range(5):
        rec = S.simulate(S.pass_by(seed), S.SensorConfig(seed=seed))
        kinds = {e["kind"] for e in rec.timeline}
        assert "touch_first" not in kinds and "approach_start" not in kinds
        tl = _timeline(rec)
        labels = {tl.label_at(t).value for t in range(0, rec.t_end, 80_000)}
        assert labels == {"noOne", "someone"}
        assert min(S.min_robot_distance(rec.script).values()) < 1.0


def test_approach_label_order():
    rec = S.simulate(S.approach_interact_leave(0), S.SensorConfig(seed=0))
    tl = _timeline(rec)
    seq = [tl.label_at(t).value for t in range(0, rec.t_end, 80_000)]
    runs = [v for i, v in enumerate(seq) if i == 0 or seq[i - 1] != v]
    assert runs == ["noOne", "someone", "wantInteraction", "interaction", "leaveInteraction", "someone", "noOne"]


def test_cards_has_three_concurrent_agents():
    script = S.cards_multiuser(0)
    motions = [S.AgentMotion(a, S.SensorConfig()) for a in script.agents]
    ts = np.arange(0, script.duration, 0.08)
    assert max(sum(m.present(t) for m in motions) for t in ts) >= 3
    rec = S.simulate(script, S.SensorConfig(seed=0))
    assert sum(e["kind"] == "touch_first" for e in rec.timeline) == 1


def test_speech_drives_audio_streams():
    script = S.approach_interact_leave(1)
    rec = S.simulate(script, S.SensorConfig(seed=1))
    (agent,) = script.agents
    for r in rec.localization:
        t = r["t"] / 1e6
        assert any(s <= t < e for s, e in agent.speech)
    speaking = [r["sad"] for r in rec.sad if any(s <= r["t"] / 1e6 < e for s, e in agent.speech)]
    assert np.mean(speaking) > 0.85


def test_streams_round_trip(tmp_path):
    rec = S.simulate(S.pass_by(3), S.SensorConfig(seed=3))
    P.save_streams(rec, tmp_path)
    back = P.load_streams(tmp_path)
    assert back.skeletons == rec.skeletons and back.timeline == rec.timeline


def test_sensor_tilt_is_a_rotation():
    p = np.array([2.0, 0.4, 1.7])
    flat = S.to_sensor(p, 1.2)
    assert flat.tolist() == pytest.approx([0.4, 0.5, 2.0])
    up = S.to_sensor(p, 1.2, math.radians(10))
    assert np.linalg.norm(up) == pytest.approx(np.linalg.norm(flat), abs=1e-12)
    # Pitching the sensor up lowers a point's elevation in the sensor view.
    assert math.atan2(up[1], up[2]) == pytest.approx(math.atan2(0.5, 2.0) - math.radians(10), abs=1e-12)
