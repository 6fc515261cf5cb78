"""Classifiers (one-vs-rest linear SVM, one-hidden-layer MLP), stratified
k-fold planning and per-class precision/recall."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

MODEL_FORMAT = 1


# -- folds ------------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    k: int
    folds: tuple[np.ndarray, ...]
    aside: np.ndarray
    classes: tuple
    per_class_fold_size: dict
    per_class_aside: dict

    def split(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.folds[i]
        train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return train, test

    def sizes(self, i: int = 0) -> tuple[int, int, int]:
        train, test = self.split(i)
        return len(train), len(test), len(self.aside)


def stratified_kfold(labels: Sequence, k: int, seed: int = 0, scheme: str = "truncate") -> FoldPlan:
    """Per class: shuffle with ``seed``, then deal indices round-robin into ``k`` folds.

    ``truncate`` first cuts each class to the largest multiple of ``k`` and sets
    the remainder aside, so every fold holds the same count of each class.
    ``deal`` keeps every index and continues the round-robin across classes,
    so fold sizes differ by at most one overall.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()), key=str)
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(k)]
    aside: list[int] = []
    fold_size, per_aside = {}, {}
    offset = 0
    for c in classes:
        idx = np.flatnonzero(labels == c)
        if len(idx) < k:
            raise ValueError(f"class {c!r} has {len(idx)} samples, fewer than k={k}")
        idx = idx[rng.permutation(len(idx))]
        if scheme == "truncate":
            keep = (len(idx) // k) * k
            aside.extend(idx[keep:].tolist())
            idx = idx[:keep]
            start = 0
        elif scheme == "deal":
            start = offset
        else:
            raise ValueError(f"unknown fold scheme {scheme!r}")
        for n, i in enumerate(idx):
            buckets[(start + n) % k].append(int(i))
        offset = (start + len(idx)) % k
        fold_size[c] = len(idx) // k
        per_aside[c] = int(len(np.flatnonzero(labels == c)) - len(idx))
    folds = tuple(np.array(sorted(b), dtype=np.int64) for b in buckets)
    return FoldPlan(k, folds, np.array(sorted(aside), dtype=np.int64), tuple(classes), fold_size, per_aside)


# -- standardization --------------------------------------------------------

@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        if len(X) == 0:
            raise ValueError("cannot fit a standardizer on an empty set")
        return cls(X.mean(axis=0), np.maximum(X.std(axis=0), 1e-12))

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std


# -- models -----------------------------------------------------------------

def _check_classes(y: np.ndarray) -> list:
    classes = sorted(set(np.asarray(y).tolist()), key=str)
    if len(classes) < 2:
        raise ValueError("training set holds a single class")
    return classes


@dataclass(frozen=True)
class SvmConfig:
    lam: float = 1e-4
    epochs: int = 20
    class_weight: bool = False


@dataclass
class SvmModel:
    classes: list
    W: np.ndarray  # (n_classes, n_features + 1), last column is the bias
    scaler: Standardizer
    config: SvmConfig
    seed: int

    def scores(self, X: np.ndarray) -> np.ndarray:
        Z = self.scaler.apply(X)
        return Z @ self.W[:, :-1].T + self.W[:, -1]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array(self.classes, dtype=object)[np.argmax(self.scores(X), axis=1)]


def train_svm(X: np.ndarray, y: Sequence, config: SvmConfig = SvmConfig(), seed: int = 0) -> SvmModel:
    """One-vs-rest hinge loss, L2 regularized, Pegasos stochastic subgradient steps."""
    y = np.asarray(y, dtype=object)
    classes = _check_classes(y)
    scaler = Standardizer.fit(X)
    Z = np.hstack([scaler.apply(X), np.ones((len(X), 1))])
    n, d = Z.shape
    C = len(classes)
    Y = np.where(y[:, None] == np.array(classes, dtype=object)[None, :], 1.0, -1.0)
    if config.class_weight:
        pos = (Y > 0).sum(axis=0)
        wpos = n / (2.0 * np.maximum(pos, 1))
        wneg = n / (2.0 * np.maximum(n - pos, 1))
        weights = np.where(Y > 0, wpos, wneg)
    else:
        weights = np.ones_like(Y)

    lam = config.lam
    radius = 1.0 / math.sqrt(lam)
    W = np.zeros((C, d))
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(config.epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            z = Z[i]
            yi = Y[i]
            viol = yi * (W @ z) < 1.0
            W *= 1.0 - eta * lam
            if viol.any():
                W[viol] += (eta * (yi[viol] * weights[i, viol]))[:, None] * z[None, :]
            norms = np.sqrt((W * W).sum(axis=1))
            over = norms > radius
            if over.any():
                W[over] *= (radius / norms[over])[:, None]
    return SvmModel(classes, W, scaler, config, seed)


def _sigmoid(a: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def softmax(a: np.ndarray) -> np.ndarray:
    a = a - a.max(axis=-1, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class MlpConfig:
    hidden: int | None = None
    lr: float = 0.3
    momentum: float = 0.2
    epochs: int = 500
    batch_size: int = 32


@dataclass
class MlpModel:
    classes: list
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    scaler: Standardizer
    config: MlpConfig
    seed: int

    def forward_z(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h = _sigmoid(Z @ self.W1 + self.b1)
        return h, softmax(h @ self.W2 + self.b2)

    def proba(self, X: np.ndarray) -> np.ndarray:
        return self.forward_z(self.scaler.apply(X))[1]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array(self.classes, dtype=object)[np.argmax(self.proba(X), axis=1)]


def mlp_loss_and_grads(params: dict, Z: np.ndarray, T: np.ndarray) -> tuple[float, dict]:
    """Mean cross-entropy and its gradients for one batch (``T`` one-hot)."""
    W1, b1, W2, b2 = params["W1"], params["b1"], params["W2"], params["b2"]
    h = _sigmoid(Z @ W1 + b1)
    p = softmax(h @ W2 + b2)
    n = len(Z)
    loss = -float(np.sum(T * np.log(np.clip(p, 1e-300, None)))) / n
    d_out = (p - T) / n
    d_h = (d_out @ W2.T) * h * (1 - h)
    grads = {"W2": h.T @ d_out, "b2": d_out.sum(axis=0), "W1": Z.T @ d_h, "b1": d_h.sum(axis=0)}
    return loss, grads


def default_hidden(n_features: int, n_classes: int) -> int:
    return math.ceil((n_features + n_classes) / 2)


def train_mlp(X: np.ndarray, y: Sequence, config: MlpConfig = MlpConfig(), seed: int = 0) -> MlpModel:
    """Backpropagation with momentum on softmax cross-entropy, sigmoid hidden layer."""
    y = np.asarray(y, dtype=object)
    classes = _check_classes(y)
    scaler = Standardizer.fit(X)
    Z = scaler.apply(X)
    n, d = Z.shape
    C = len(classes)
    H = config.hidden or default_hidden(d, C)
    T = (y[:, None] == np.array(classes, dtype=object)[None, :]).astype(float)

    rng = np.random.default_rng(seed)
    params = {
        "W1": rng.uniform(-1, 1, (d, H)) * math.sqrt(6.0 / (d + H)),
        "b1": np.zeros(H),
        "W2": rng.uniform(-1, 1, (H, C)) * math.sqrt(6.0 / (H + C)),
        "b2": np.zeros(C),
    }
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    bs = max(1, min(config.batch_size, n))
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for s in range(0, n, bs):
            idx = order[s:s + bs]
            _, g = mlp_loss_and_grads(params, Z[idx], T[idx])
            for k in params:
                velocity[k] = config.momentum * velocity[k] - config.lr * g[k]
                params[k] = params[k] + velocity[k]
    return MlpModel(classes, params["W1"], params["b1"], params["W2"], params["b2"], scaler, config, seed)


# -- persistence ------------------------------------------------------------

def model_to_dict(model: SvmModel | MlpModel, header: dict | None = None) -> dict:
    base = {
        "format": MODEL_FORMAT,
        "kind": "svm" if isinstance(model, SvmModel) else "mlp",
        "classes": list(model.classes),
        "seed": model.seed,
        "config": asdict(model.config),
        "scaler": {"mean": model.scaler.mean.tolist(), "std": model.scaler.std.tolist()},
    }
    if header:
        base["header"] = header
    if isinstance(model, SvmModel):
        base["W"] = model.W.tolist()
    else:
        base.update(W1=model.W1.tolist(), b1=model.b1.tolist(), W2=model.W2.tolist(), b2=model.b2.tolist())
    return base


def save_model(model, path: str | Path, header: dict | None = None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, header), sort_keys=True) + "\n")


def load_model(path: str | Path) -> SvmModel | MlpModel:
    d = json.loads(Path(path).read_text())
    if d.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {d.get('format')!r}")
    scaler = Standardizer(np.array(d["scaler"]["mean"]), np.array(d["scaler"]["std"]))
    if d["kind"] == "svm":
        return SvmModel(d["classes"], np.array(d["W"]), scaler, SvmConfig(**d["config"]), d["seed"])
    return MlpModel(
        d["classes"], np.array(d["W1"]), np.array(d["b1"]), np.array(d["W2"]), np.array(d["b2"]),
        scaler, MlpConfig(**d["config"]), d["seed"],
    )


# -- metrics ----------------------------------------------------------------

@dataclass(frozen=True)
class Metrics:
    classes: tuple
    confusion: np.ndarray  # rows = true class, columns = predicted class

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    @property
    def precision(self) -> np.ndarray:
        tp = np.diag(self.confusion).astype(float)
        col = self.confusion.sum(axis=0)
        return np.divide(tp, col, out=np.zeros_like(tp), where=col > 0)

    @property
    def recall(self) -> np.ndarray:
        tp = np.diag(self.confusion).astype(float)
        row = self.confusion.sum(axis=1)
        return np.divide(tp, row, out=np.zeros_like(tp), where=row > 0)

    def of(self, cls) -> tuple[float, float]:
        i = list(self.classes).index(cls)
        return float(self.precision[i]), float(self.recall[i])

    @property
    def macro_precision(self) -> float:
        return float(self.precision.mean())

    @property
    def macro_recall(self) -> float:
        return float(self.recall.mean())

    def __add__(self, other: "Metrics") -> "Metrics":
        if tuple(self.classes) != tuple(other.classes):
            raise ValueError("cannot pool metrics over different class sets")
        return Metrics(self.classes, self.confusion + other.confusion)


def confusion_metrics(y_true: Sequence, y_pred: Sequence, classes: Sequence) -> Metrics:
    pos = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for a, b in zip(y_true, y_pred):
        cm[pos[a], pos[b]] += 1
    return Metrics(tuple(classes), cm)


def evaluate(model, X: np.ndarray, y: Sequence, classes: Sequence | None = None) -> Metrics:
    if len(y) == 0:
        raise ValueError("empty test set")
    classes = list(model.classes) if classes is None else list(classes)
    return confusion_metrics(list(y), model.predict(X).tolist(), classes)


@dataclass
class CrossValidation:
    metrics: Metrics
    fold_metrics: list = field(default_factory=list)
    plan: FoldPlan | None = None


def cross_validate(
    X: np.ndarray,
    y: Sequence,
    trainer: Callable[[np.ndarray, np.ndarray, int], object],
    k: int = 10,
    seed: int = 0,
    classes: Sequence | None = None,
) -> CrossValidation:
    """Stratified k-fold; metrics pool every test-fold prediction."""
    y = np.asarray(y, dtype=object)
    classes = sorted(set(y.tolist()), key=str) if classes is None else list(classes)
    plan = stratified_kfold(y, k, seed)
    fold_metrics = []
    for i in range(k):
        tr, te = plan.split(i)
        model = trainer(X[tr], y[tr], seed + i)
        fold_metrics.append(evaluate(model, X[te], y[te], classes))
    pooled = fold_metrics[0]
    for fm in fold_metrics[1:]:
        pooled = pooled + fm
    return CrossValidation(pooled, fold_metrics, plan)


def svm_trainer(config: SvmConfig = SvmConfig()):
    return lambda X, y, seed: train_svm(X, y, config, seed)


def mlp_trainer(config: MlpConfig = MlpConfig()):
    return lambda X, y, seed: train_mlp(X, y, config, seed)
