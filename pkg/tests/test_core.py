import numpy as np
import pytest
from hypothesis import given, strategies as st

from engage.core import (
    CHANNELS, JOINTS, SPATIAL_FEATURES, Edition, FeatureManifest, FeatureVector, Label3, Label5,
    SyncedFrame, manifest, neutral_vector, read_fused_csv, read_manifest, relabel_to_3,
    validate_frame, write_fused_csv, write_manifest,
)

SCHEGLOFF = {f"{s}Pose_{c}" for s in ("stance", "hip", "torso", "shoulder") for c in ("x", "y", "z", "rot")}
SCHEGLOFF |= {"hipTorque", "torsoTorque", "shoulderTorque"}


def test_selected_32_composition():
    m = manifest(Edition.SELECTED_32)
    ids = set(m.ids)
    assert len(m) == 32 and len(ids) == 32
    assert set(SPATIAL_FEATURES) <= ids
    assert {"beam", "angle", "sad_event", "source_confidence"} <= ids
    assert SCHEGLOFF <= ids and len(SCHEGLOFF) == 19
    assert {"skl_dist", "face_x", "face_y", "face_size"} <= ids
    assert m.ids[:2] == ("shoulderPose_rot", "cible_dx")


def test_full_99_extends_selected():
    full = manifest(99)
    assert len(full) == 99
    assert full.ids[:32] == manifest(32).ids
    for j in JOINTS:
        for suffix in ("x", "y", "z", "conf"):
            assert f"{j}_{suffix}" in full


def test_neutral_vector_selected():
    m = manifest(32)
    v = neutral_vector(Edition.SELECTED_32)
    for fid in ("cible_x", "cible_dx", "cible_dist", "sad_event"):
        assert v.values[m.index(fid)] == 0.0
    assert not any(v.presence.values())


def test_neutral_vector_full_matches_manifest_file(tmp_path):
    path = tmp_path / "m.tsv"
    write_manifest(manifest(99), path)
    neutrals = [float(line.split("\t")[4]) for line in path.read_text().splitlines() if not line.startswith("#")]
    np.testing.assert_array_equal(neutral_vector(99).values, neutrals)


@pytest.mark.parametrize("edition", [32, 99])
def test_manifest_round_trip(tmp_path, edition):
    m = manifest(edition)
    write_manifest(m, tmp_path / "m.tsv")
    back = read_manifest(tmp_path / "m.tsv")
    assert back == m
    assert back.features == m.features


def test_manifest_rejects_wrong_count():
    text = manifest(32).to_text().splitlines()
    with pytest.raises(ValueError):
        FeatureManifest.from_text("\n".join(text[:-1]))


def test_manifest_rejects_duplicates():
    m = manifest(32)
    with pytest.raises(ValueError, match="duplicate"):
        FeatureManifest(Edition.SELECTED_32, m.features[:31] + m.features[:1])


def test_relabel_examples():
    assert relabel_to_3(Label5.LEAVE_INTERACTION) is Label3.SOMEONE
    assert relabel_to_3(Label5.INTERACTION) is None
    assert relabel_to_3(Label5.NO_ONE) is Label3.NO_ONE
    assert relabel_to_3(Label5.WANT_INTERACTION) is Label3.WANT_INTERACTION


@given(st.sampled_from(list(Label5)))
def test_relabel_total_and_idempotent(label):
    r = relabel_to_3(label)
    if r is not None:
        assert relabel_to_3(Label5(r.value)) is r


def _frame(values, presence=None, t=0, label=Label5.NO_ONE):
    presence = {c: False for c in CHANNELS} if presence is None else presence
    return SyncedFrame(t, FeatureVector(values, presence), label)


def test_validate_frame_examples():
    m = manifest(32)
    assert validate_frame(_frame(np.zeros(32)), m) == []
    assert validate_frame(_frame(np.zeros(31)), m)[0].startswith("length mismatch")
    v = np.zeros(32)
    v[m.index("cible_dist")] = 2.1
    assert validate_frame(_frame(v), m) == ["neutral violation: cible_dist"]
    assert validate_frame(_frame(np.zeros(32), t=40_000), m) == ["tick misaligned: t=40000"]
    v = np.zeros(32)
    v[0] = np.nan
    assert "non-finite" in validate_frame(_frame(v, {c: True for c in CHANNELS}), m)[0]


def test_feature_vector_is_immutable():
    fv = FeatureVector(np.zeros(3), {})
    with pytest.raises(ValueError):
        fv.values[0] = 1.0


def test_fused_csv_round_trip(tmp_path):
    m = manifest(32)
    rng = np.random.default_rng(0)
    frames = [
        _frame(rng.normal(size=32), {c: True for c in CHANNELS}, t=k * 80_000, label=lab)
        for k, lab in enumerate([Label5.NO_ONE, Label5.SOMEONE, Label5.INTERACTION])
    ]
    path = tmp_path / "fused.csv"
    write_fused_csv(path, frames, m, header="seed=1 config_hash=abc")
    text = path.read_text().splitlines()
    assert text[0] == "# seed=1 config_hash=abc"
    assert text[1].split(",") == ["t", *m.ids, "label"]
    ds = read_fused_csv(path)
    np.testing.assert_array_equal(ds.X, np.array([f.features.values for f in frames]))
    assert ds.labels == ["noOne", "someone", "interaction"]
    assert ds.t.tolist() == [0, 80_000, 160_000]
    np.testing.assert_array_equal(ds.columns(["cible_x"])[:, 0], ds.X[:, m.index("cible_x")])


def test_restrict_keeps_order():
    m = manifest(32).restrict(["cible_y", "cible_x"])
    assert m.ids == ("cible_y", "cible_x") and m.index("cible_x") == 1
