"""Logistic-regression synonymy discriminator and threshold calibration."""

from __future__ import annotations

import json
import logging
from fractions import Fraction
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..knowledge_base import KnowledgeBase
from .data import LabeledPair
from .features import DEFAULT_PATTERN_BUCKETS, extract_features, feature_matrix, feature_names

logger = logging.getLogger(__name__)


class DegenerateDataError(ValueError):
    pass


class UnattainablePrecision(ValueError):
    """No threshold reaches the requested precision."""


@dataclass(frozen=True)
class TrainHyper:
    learning_rate: float = 0.5
    epochs: int = 400
    batch: Optional[int] = None
    l2: float = 1e-4
    seed: int = 0


@dataclass
class ClassifierModel:
    feature_names: tuple[str, ...]
    weights: np.ndarray
    bias: float = 0.0
    thresholds: dict[float, float] = field(default_factory=dict)
    pattern_buckets: int = DEFAULT_PATTERN_BUCKETS
    loss_history: list[float] = field(default_factory=list, repr=False)

    @classmethod
    def zeros(cls, pattern_buckets: int = DEFAULT_PATTERN_BUCKETS) -> "ClassifierModel":
        names = feature_names(pattern_buckets)
        return cls(names, np.zeros(len(names)), 0.0, {}, pattern_buckets)

    def decision(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision(X))

    def score_pairs(self, pairs: Sequence[LabeledPair], kb: KnowledgeBase) -> np.ndarray:
        return self.predict_proba(feature_matrix(pairs, kb, self.pattern_buckets))

    def save(self, path: str | Path) -> None:
        payload = {
            "feature_names": list(self.feature_names),
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "pattern_buckets": self.pattern_buckets,
            "thresholds": {repr(k): v for k, v in sorted(self.thresholds.items())},
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "ClassifierModel":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(tuple(d["feature_names"]), np.asarray(d["weights"], dtype=float), float(d["bias"]),
                   {float(k): float(v) for k, v in d.get("thresholds", {}).items()},
                   int(d.get("pattern_buckets", DEFAULT_PATTERN_BUCKETS)))


def sigmoid(z):
    # split by sign to avoid overflow in exp
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float = 0.0) -> float:
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w, w))


def logistic_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                  l2: float = 0.0) -> tuple[np.ndarray, float]:
    r = sigmoid(X @ w + b) - y
    return X.T @ r / len(y) + l2 * w, float(np.mean(r))


def fit_logistic(X: np.ndarray, y: np.ndarray, hyper: TrainHyper = TrainHyper(),
                 pattern_buckets: int = DEFAULT_PATTERN_BUCKETS) -> ClassifierModel:
    y = np.asarray(y, dtype=float)
    if len(np.unique(y)) < 2:
        raise DegenerateDataError("training data must contain both labels")
    model = ClassifierModel.zeros(pattern_buckets)
    if X.shape[1] != len(model.weights):
        raise ValueError(f"expected {len(model.weights)} features, got {X.shape[1]}")
    w, b = model.weights, 0.0
    rng = np.random.default_rng(hyper.seed)
    n = len(y)
    history = [logistic_loss(w, b, X, y, hyper.l2)]
    for _ in range(hyper.epochs):
        if hyper.batch is None or hyper.batch >= n:
            gw, gb = logistic_grad(w, b, X, y, hyper.l2)
            w = w - hyper.learning_rate * gw
            b -= hyper.learning_rate * gb
        else:
            order = rng.permutation(n)
            for s in range(0, n, hyper.batch):
                idx = order[s:s + hyper.batch]
                gw, gb = logistic_grad(w, b, X[idx], y[idx], hyper.l2)
                w = w - hyper.learning_rate * gw
                b -= hyper.learning_rate * gb
        history.append(logistic_loss(w, b, X, y, hyper.l2))
    model.weights, model.bias, model.loss_history = w, b, history
    return model


def train_classifier(pairs: Sequence[LabeledPair], kb: KnowledgeBase, hyper: TrainHyper = TrainHyper(),
                     pattern_buckets: int = DEFAULT_PATTERN_BUCKETS) -> ClassifierModel:
    X = feature_matrix(pairs, kb, pattern_buckets)
    y = np.array([p.label for p in pairs], dtype=float)
    return fit_logistic(X, y, hyper, pattern_buckets)


def predict_score(model: ClassifierModel, query, keyword, kb: KnowledgeBase) -> float:
    x = extract_features(query, keyword, kb, model.pattern_buckets).values
    return float(sigmoid(np.array([x @ model.weights + model.bias]))[0])


def threshold_at_precision(scores: Sequence[float], labels: Sequence[int],
                           target: float) -> tuple[float, float, float]:
    """Smallest threshold t with precision(score >= t) >= target.

    Returns (threshold, precision, recall). Raises UnattainablePrecision if
    no threshold qualifies.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n_pos = int(labels.sum())
    order = np.argsort(-scores, kind="stable")
    s_sorted, l_sorted = scores[order], labels[order]
    # the target is read as the decimal it was written as, so 7/10 meets 0.7
    goal = Fraction(repr(float(target)))
    tp = fp = 0
    best = None
    i = 0
    while i < len(s_sorted):
        j = i
        while j < len(s_sorted) and s_sorted[j] == s_sorted[i]:
            tp += int(l_sorted[j])
            fp += 1 - int(l_sorted[j])
            j += 1
        if tp > 0 and Fraction(tp, tp + fp) >= goal:
            best = (float(s_sorted[i]), tp / (tp + fp), tp / n_pos)
        i = j
    if best is None:
        raise UnattainablePrecision(f"precision {target} is not attainable")
    return best


def calibrate_threshold(model: ClassifierModel, dev: Sequence[LabeledPair], kb: KnowledgeBase,
                        precision_target: float) -> Optional[float]:
    """Store and return the calibrated threshold; None when unattainable."""
    scores = model.score_pairs(dev, kb)
    labels = [p.label for p in dev]
    try:
        t, _, _ = threshold_at_precision(scores, labels, precision_target)
    except UnattainablePrecision:
        return None
    model.thresholds[precision_target] = t
    return t
