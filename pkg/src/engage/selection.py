"""Minimum-redundancy maximum-relevance feature ranking over discretized features."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

MIQ_EPS = 1e-12


def discretize(column: Sequence[float]) -> tuple[np.ndarray, tuple[float, float]]:
    """Three states split at mean -/+ one (population) standard deviation."""
    x = np.asarray(column, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two samples to discretize")
    mu = float(x.mean())
    sd = float(x.std())
    lo, hi = mu - sd, mu + sd
    if sd == 0.0:
        return np.ones(x.size, dtype=np.int64), (lo, hi)
    out = np.ones(x.size, dtype=np.int64)
    out[x < lo] = 0
    out[x > hi] = 2
    return out, (lo, hi)


def discretize_matrix(X: np.ndarray) -> np.ndarray:
    return np.column_stack([discretize(X[:, j])[0] for j in range(X.shape[1])]) if X.shape[1] else X.astype(np.int64)


def mutual_information(x: Sequence[int], y: Sequence[int]) -> float:
    """Empirical mutual information in bits between two discrete sequences."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    n = x.size
    if n == 0:
        raise ValueError("empty input")
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    nx, ny = xi.max() + 1, yi.max() + 1
    joint = np.bincount(xi * ny + yi, minlength=nx * ny).reshape(nx, ny)
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    terms = []
    for a, b in zip(*np.nonzero(joint)):
        c = int(joint[a, b])
        terms.append(c * math.log2(n * c / (int(px[a]) * int(py[b]))))
    # fsum is order independent, so equal tables give bit-identical scores.
    return max(0.0, math.fsum(terms) / n)


@dataclass(frozen=True)
class MrmrRanking:
    features: tuple[str, ...]
    scores: tuple[float, ...]
    scheme: str

    def top(self, k: int) -> tuple[str, ...]:
        return self.features[:k]

    def to_text(self, header: str | None = None) -> str:
        lines = [f"# {header}"] if header else []
        lines += [f"{i + 1}\t{f}\t{s!r}" for i, (f, s) in enumerate(zip(self.features, self.scores))]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, scheme: str = "mid") -> "MrmrRanking":
        feats, scores = [], []
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            rank, fid, score = line.split("\t")
            if int(rank) != len(feats) + 1:
                raise ValueError(f"ranking out of order at {fid!r}")
            feats.append(fid)
            scores.append(float(score))
        return cls(tuple(feats), tuple(scores), scheme)

    def write(self, path: str | Path, header: str | None = None) -> None:
        Path(path).write_text(self.to_text(header))


def mrmr_scores(relevance: np.ndarray, redundancy: np.ndarray, selected: Sequence[int], scheme: str) -> dict[int, float]:
    """Criterion value for every unselected feature given the selected set."""
    out = {}
    for j in range(len(relevance)):
        if j in selected:
            continue
        rel = float(relevance[j])
        if not selected:
            out[j] = rel
            continue
        red = math.fsum(float(redundancy[j, s]) for s in selected) / len(selected)
        if scheme == "mid":
            out[j] = rel - red
        elif scheme == "miq":
            out[j] = rel / (red if red > 0 else MIQ_EPS)
        else:
            raise ValueError(f"unknown MRMR scheme {scheme!r}")
    return out


def mrmr_rank(
    D: np.ndarray,
    labels: Sequence,
    k: int | None = None,
    scheme: str = "mid",
    names: Sequence[str] | None = None,
) -> MrmrRanking:
    """Greedy forward selection on an already-discretized matrix ``D``.

    Ties are broken by the lower feature index.
    """
    D = np.asarray(D)
    n_feat = D.shape[1]
    k = n_feat if k is None else k
    if not 0 < k <= n_feat:
        raise ValueError(f"K={k} must be in [1, {n_feat}]")
    names = [f"f{j}" for j in range(n_feat)] if names is None else list(names)
    _, y = np.unique(np.asarray(labels), return_inverse=True)

    relevance = np.array([mutual_information(D[:, j], y) for j in range(n_feat)])
    redundancy = np.full((n_feat, n_feat), np.nan)

    selected: list[int] = []
    scores: list[float] = []
    while len(selected) < k:
        if selected:
            s = selected[-1]
            for j in range(n_feat):
                if np.isnan(redundancy[j, s]):
                    redundancy[j, s] = redundancy[s, j] = mutual_information(D[:, j], D[:, s])
        cand = mrmr_scores(relevance, redundancy, selected, scheme)
        best = max(cand, key=lambda j: (cand[j], -j))
        selected.append(best)
        scores.append(cand[best])
    return MrmrRanking(tuple(names[j] for j in selected), tuple(scores), scheme)


def rank_dataset(X: np.ndarray, labels: Sequence, names: Sequence[str], k: int | None = None, scheme: str = "mid") -> MrmrRanking:
    return mrmr_rank(discretize_matrix(np.asarray(X, dtype=float)), labels, k, scheme, names)
