import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from engage.selection import (
    MrmrRanking, discretize, discretize_matrix, mrmr_rank, mrmr_scores, mutual_information, rank_dataset,
)
from oracles import discretize_oracle, mi_counts, mi_exact, mrmr_oracle


def test_discretize_examples():
    assert discretize([4.0, 4.0, 4.0])[0].tolist() == [1, 1, 1]
    bins, (lo, hi) = discretize([-3.0, 0.0, 3.0])
    assert bins.tolist() == [0, 1, 2]
    assert (lo, hi) == pytest.approx((-math.sqrt(6), math.sqrt(6)))


def test_discretize_normal_proportions():
    x = np.random.default_rng(0).standard_normal(10_000)
    props = np.bincount(discretize(x)[0], minlength=3) / x.size
    np.testing.assert_allclose(props, [0.16, 0.68, 0.16], atol=0.02)


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
def test_discretize_matches_oracle(xs):
    assert discretize(xs)[0].tolist() == discretize_oracle(xs)


def test_mi_examples():
    x = [0, 0, 1, 1]
    assert mutual_information(x, [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(x, x) == pytest.approx(1.0, abs=1e-12)
    # counts [[2, 1], [1, 2]] over 6 samples
    a = [0, 0, 0, 1, 1, 1]
    b = [0, 0, 1, 0, 1, 1]
    assert mutual_information(a, b) == pytest.approx(float(mi_exact(a, b)), abs=1e-15)
    assert mutual_information(a, b) == pytest.approx(0.0817, abs=5e-5)


def test_mi_rejects_mismatch():
    with pytest.raises(ValueError):
        mutual_information([0, 1], [0])


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4)), min_size=1, max_size=80))
def test_mi_properties(pairs):
    x = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    ixy = mutual_information(x, y)
    assert ixy >= 0
    assert ixy == pytest.approx(mutual_information(y, x), abs=1e-12)
    assert ixy == pytest.approx(mi_counts(x, y), abs=1e-12)
    hx = -sum(c / len(x) * math.log2(c / len(x)) for c in np.unique(x, return_counts=True)[1])
    assert mutual_information(x, x) == pytest.approx(hx, abs=1e-12)


def test_single_candidate_is_rank_one():
    r = mrmr_rank(np.array([[0], [1], [2]]), [0, 1, 1], names=["only"])
    assert r.features == ("only",)


def test_label_copy_leaves_noisy_and_independent_tied():
    # With x1 equal to the label, I(x;label) == I(x;x1) for every other x, so
    # both remaining candidates score exactly zero and the lower index wins.
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, 1000)
    flip = rng.random(1000) < 0.1
    x1 = y.copy()
    x2 = np.where(flip, 1 - y, y)
    x3 = rng.integers(0, 2, 1000)
    D = np.column_stack([x1, x2, x3])
    sel, tables = mrmr_oracle([D[:, j].tolist() for j in range(3)], y.tolist(), 2)
    r = mrmr_rank(D, y, 2, "mid", ["x1", "x2", "x3"])
    assert r.features[0] == "x1" and sel[0] == 0
    assert tables[1][1] == tables[1][2] == 0
    assert r.features[1] == "x2" and sel[1] == 1
    assert r.scores[1] == pytest.approx(0.0, abs=1e-12)


def test_mid_penalizes_noisy_copy_of_selected_feature():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, 1000)
    x1 = np.where(rng.random(1000) < 0.05, 1 - y, y)
    x2 = np.where(rng.random(1000) < 0.1, 1 - x1, x1)
    x3 = np.where(rng.random(1000) < 0.3, 1 - y, y)
    D = np.column_stack([x1, x2, x3])
    sel, tables = mrmr_oracle([D[:, j].tolist() for j in range(3)], y.tolist(), 2)
    assert tables[1][1] < 0
    assert mrmr_rank(D, y, 2, "mid", ["x1", "x2", "x3"]).features == ("x1", "x3") and sel == [0, 2]


def _instance(rng, n=300, n_feat=10):
    C = int(rng.integers(2, 6))
    y = rng.integers(0, C, n)
    cols = []
    for j in range(n_feat):
        kind = rng.integers(4)
        if kind == 0:
            cols.append(y + rng.normal(0, rng.uniform(0.2, 2.0), n))
        elif kind == 1 and cols:
            cols.append(cols[int(rng.integers(len(cols)))].copy())  # exact duplicate
        elif kind == 2:
            cols.append(rng.normal(size=n))
        else:
            cols.append((y % 2) * rng.uniform(0.5, 2) + rng.normal(0, 1, n))
    return np.column_stack(cols), y


@pytest.mark.parametrize("scheme", ["mid", "miq"])
def test_greedy_steps_match_oracle(scheme):
    rng = np.random.default_rng(2024)
    for _ in range(10):
        X, y = _instance(rng)
        D = discretize_matrix(X)
        cols = [discretize_oracle(X[:, j]) for j in range(X.shape[1])]
        assert D.T.tolist() == cols
        sel, tables = mrmr_oracle(cols, y.tolist(), 6, scheme)
        r = mrmr_rank(D, y, 6, scheme)
        assert [int(f[1:]) for f in r.features] == sel
        for s, table in zip(r.scores, tables):
            assert s == pytest.approx(float(max(table.values())), rel=1e-12, abs=1e-12)


def test_scores_reject_unknown_scheme():
    with pytest.raises(ValueError):
        mrmr_scores(np.array([0.1, 0.2]), np.zeros((2, 2)), [0], "max")


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_ranking_permutation_stable(seed):
    rng = np.random.default_rng(seed)
    X, y = _instance(rng, n=120, n_feat=6)
    perm = rng.permutation(len(y))
    names = [f"f{j}" for j in range(6)]
    assert rank_dataset(X, y, names).features == rank_dataset(X[perm], y[perm], names).features


def test_duplicates_not_both_in_top_half():
    rng = np.random.default_rng(5)
    y = rng.integers(0, 3, 600)
    a = y + rng.normal(0, 0.5, 600)
    b = (y == 1) + rng.normal(0, 0.5, 600)
    noise = rng.normal(size=(600, 3))
    X = np.column_stack([a, a, b, noise])
    top = rank_dataset(X, y, [f"f{j}" for j in range(6)]).features[:3]
    assert not {"f0", "f1"} <= set(top)


def test_ranking_text_round_trip(tmp_path):
    r = MrmrRanking(("a", "b"), (0.5, -0.1), "mid")
    r.write(tmp_path / "r.tsv", "seed=1")
    text = (tmp_path / "r.tsv").read_text()
    assert text.splitlines()[1] == "1\ta\t0.5"
    assert MrmrRanking.from_text(text) == r
