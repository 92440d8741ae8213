"""Occupation link classifier: concatenated triple features and a small MLP
trained with mini-batch gradient descent on binary cross-entropy."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import derived_rng
from .kge import EmbeddingTable
from .splitter import OccupationSplit

log = logging.getLogger(__name__)

DEFAULT_HIDDEN_UNITS = 100
DEFAULT_LEARNING_RATE = 0.01
DEFAULT_BATCH_SIZE = 32
DEFAULT_MAX_EPOCHS = 300
EARLY_STOP_TOL = 1e-5
EARLY_STOP_PATIENCE = 10


@dataclass(frozen=True)
class SampleVector:
    """One classification sample: concatenated triple embedding + label."""

    features: np.ndarray
    label: int
    entity: str
    group: str


@dataclass(frozen=True)
class PredictionRecord:
    entity: str
    group: str
    label: int
    predicted: int
    score: float
    partition: str  # "train" or "test"


@dataclass(frozen=True)
class OccupationPredictions:
    occupation: str
    records: tuple[PredictionRecord, ...]

    def test_records(self) -> tuple[PredictionRecord, ...]:
        return tuple(r for r in self.records if r.partition == "test")


@dataclass
class MlpModel:
    """One-hidden-layer network: rectified-linear hidden, logistic output.

    Inputs are standardized with the moments of the training partition."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    threshold: float = 0.5
    seed: int = 0

    def scores(self, features: np.ndarray) -> np.ndarray:
        x = (features - self.feature_mean) / self.feature_scale
        hidden = np.maximum(x @ self.w1 + self.b1, 0.0)
        z = hidden @ self.w2 + self.b2
        return _sigmoid(z[:, 0])

    def predict(self, features: np.ndarray) -> np.ndarray:
        return (self.scores(features) >= self.threshold).astype(int)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def assemble_features(
    table: EmbeddingTable, split: OccupationSplit, occupation_relation: str
) -> list[SampleVector]:
    """Concatenate (human, relation, occupation) vectors for every hidden
    positive (label 1) and negative (label 0) of the split."""
    rel_vec = table.relation_vector(occupation_relation)
    occ_vec = table.entity_vector(split.occupation.raw)
    samples: list[SampleVector] = []
    for entities, label in ((split.hidden_positives, 1), (split.negatives, 0)):
        for e in entities:
            features = np.concatenate([table.entity_vector(e.raw), rel_vec, occ_vec])
            samples.append(
                SampleVector(
                    features=features,
                    label=label,
                    entity=e.raw,
                    group=split.groups[e.raw],
                )
            )
    return samples


def stratified_split(
    samples: Sequence[SampleVector], split_ratio: float, rng: np.random.Generator
) -> tuple[list[int], list[int]]:
    """Train/test indices; the test share of each (label, group) cell stays
    within one sample of its exact proportion and the overall test size is
    round((1 - ratio) * n)."""
    if not 0 < split_ratio < 1:
        raise ValueError("split_ratio must be in (0, 1)")
    cells: dict[tuple[int, str], list[int]] = {}
    for i, s in enumerate(samples):
        cells.setdefault((s.label, s.group), []).append(i)
    n_test = round((1 - split_ratio) * len(samples))
    keys = sorted(cells)
    quotas = {k: n_test * len(cells[k]) / len(samples) for k in keys}
    alloc = {k: math.floor(quotas[k]) for k in keys}
    leftover = n_test - sum(alloc.values())
    for k in sorted(keys, key=lambda k: (-(quotas[k] - alloc[k]), k)):
        if leftover <= 0:
            break
        if alloc[k] < len(cells[k]):
            alloc[k] += 1
            leftover -= 1
    train_idx: list[int] = []
    test_idx: list[int] = []
    for k in keys:
        members = np.array(cells[k])
        order = rng.permutation(len(members))
        take = alloc[k]
        test_idx.extend(members[order[:take]].tolist())
        train_idx.extend(members[order[take:]].tolist())
    return sorted(train_idx), sorted(test_idx)


def mlp_loss_and_gradients(
    w1: np.ndarray,
    b1: np.ndarray,
    w2: np.ndarray,
    b2: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Mean binary cross-entropy and gradients for all four parameters."""
    pre = features @ w1 + b1
    hidden = np.maximum(pre, 0.0)
    z = (hidden @ w2 + b2)[:, 0]
    # stable BCE from logits: log(1 + e^z) - y*z
    loss = float(np.mean(np.logaddexp(0.0, z) - labels * z))
    n = features.shape[0]
    dz = (_sigmoid(z) - labels)[:, None] / n
    g_w2 = hidden.T @ dz
    g_b2 = dz.sum(axis=0)
    d_hidden = dz @ w2.T
    d_hidden[pre <= 0] = 0.0
    g_w1 = features.T @ d_hidden
    g_b1 = d_hidden.sum(axis=0)
    return loss, g_w1, g_b1, g_w2, g_b2


def train_mlp(
    samples: Sequence[SampleVector],
    split_ratio: float = 0.8,
    seed: int = 0,
    hidden_units: int = DEFAULT_HIDDEN_UNITS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    batch_size: int = DEFAULT_BATCH_SIZE,
    max_epochs: int = DEFAULT_MAX_EPOCHS,
    occupation: str = "",
    threshold: float = 0.5,
) -> tuple[MlpModel, OccupationPredictions]:
    """Fit the classifier on a stratified train split and emit predictions
    for every sample.

    Training stops early once the epoch loss has improved by less than
    1e-5 for ten consecutive epochs. Deterministic given the seed.
    """
    if not samples:
        raise ValueError("no samples to train on")
    rng = derived_rng(seed)
    train_idx, test_idx = stratified_split(samples, split_ratio, rng)
    features = np.stack([s.features for s in samples])
    labels = np.array([s.label for s in samples], dtype=float)
    feature_mean = features[train_idx].mean(axis=0)
    feature_scale = np.maximum(features[train_idx].std(axis=0), 1e-9)
    scaled = (features - feature_mean) / feature_scale
    x_train, y_train = scaled[train_idx], labels[train_idx]
    for label in (0, 1):
        if (y_train == label).sum() < 2:
            raise ValueError(f"training partition has fewer than 2 samples of label {label}")
    groups = {s.group for s in samples}
    for g in sorted(groups):
        if not any(samples[i].group == g for i in test_idx):
            log.warning("occupation %s: test partition has no %r samples", occupation, g)
    dim_in = features.shape[1]
    limit1 = np.sqrt(6.0 / (dim_in + hidden_units))
    limit2 = np.sqrt(6.0 / (hidden_units + 1))
    w1 = rng.uniform(-limit1, limit1, size=(dim_in, hidden_units))
    b1 = np.zeros(hidden_units)
    w2 = rng.uniform(-limit2, limit2, size=(hidden_units, 1))
    b2 = np.zeros(1)
    best = np.inf
    patience = 0
    n = x_train.shape[0]
    for _ in range(max_epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start : start + batch_size]
            loss, g_w1, g_b1, g_w2, g_b2 = mlp_loss_and_gradients(
                w1, b1, w2, b2, x_train[idx], y_train[idx]
            )
            epoch_loss += loss * idx.shape[0]
            w1 -= learning_rate * g_w1
            b1 -= learning_rate * g_b1
            w2 -= learning_rate * g_w2
            b2 -= learning_rate * g_b2
        epoch_loss /= n
        if best - epoch_loss < EARLY_STOP_TOL:
            patience += 1
            if patience >= EARLY_STOP_PATIENCE:
                break
        else:
            patience = 0
        best = min(best, epoch_loss)
    model = MlpModel(
        w1=w1,
        b1=b1,
        w2=w2,
        b2=b2,
        feature_mean=feature_mean,
        feature_scale=feature_scale,
        threshold=threshold,
        seed=seed,
    )
    scores = model.scores(features)
    predicted = (scores >= threshold).astype(int)
    partition = np.empty(len(samples), dtype=object)
    partition[train_idx] = "train"
    partition[test_idx] = "test"
    records = tuple(
        PredictionRecord(
            entity=s.entity,
            group=s.group,
            label=s.label,
            predicted=int(predicted[i]),
            score=float(scores[i]),
            partition=str(partition[i]),
        )
        for i, s in enumerate(samples)
    )
    return model, OccupationPredictions(occupation=occupation, records=records)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    f1: float | None
    auc: float | None


def exact_auc(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Probability a random positive outscores a random negative, ties 1/2,
    by exhaustive pair counting."""
    pos = np.asarray(pos_scores, dtype=float)[:, None]
    neg = np.asarray(neg_scores, dtype=float)[None, :]
    wins = (pos > neg).sum() + 0.5 * (pos == neg).sum()
    return float(wins / (pos.shape[0] * neg.shape[1]))


def summarize_metrics(predictions: OccupationPredictions) -> Metrics:
    """Accuracy, F1 on the positive label, and exact AUC over the test set;
    F1/AUC are None when the test set is single-class."""
    test = predictions.test_records()
    if not test:
        raise ValueError("empty test partition")
    labels = np.array([r.label for r in test])
    preds = np.array([r.predicted for r in test])
    scores = np.array([r.score for r in test])
    accuracy = float((labels == preds).mean())
    if labels.min() == labels.max():
        return Metrics(accuracy=accuracy, f1=None, auc=None)
    tp = int(((labels == 1) & (preds == 1)).sum())
    fp = int(((labels == 0) & (preds == 1)).sum())
    fn = int(((labels == 1) & (preds == 0)).sum())
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    auc = exact_auc(scores[labels == 1], scores[labels == 0])
    return Metrics(accuracy=accuracy, f1=float(f1), auc=auc)


def write_predictions_csv(
    path: str | Path, predictions: Iterable[OccupationPredictions]
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["occupation", "entity", "group", "label", "pred", "score"])
        for p in predictions:
            for r in p.records:
                writer.writerow(
                    [p.occupation, r.entity, r.group, r.label, r.predicted, repr(r.score)]
                )
