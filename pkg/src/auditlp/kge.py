"""Knowledge-graph embedding learning from scratch: TransE and DistMult
trained with negative sampling, softmax negative log-likelihood and SGD,
plus ranking evaluation (MRR, Hits@n)."""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import KnowledgeGraph, derived_rng

EMBEDDING_HEADER = "auditlp-emb v1"
HITS_LEVELS = (5, 10, 20)


class Model(Enum):
    TRANSE = "transe"
    DISTMULT = "distmult"


class Norm(Enum):
    L1 = 1
    L2 = 2


class Protocol(Enum):
    RAW = "raw"
    FILTERED = "filtered"


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class KgeConfig:
    model: Model = Model.TRANSE
    dim: int = 100
    neg_samples: int = 10
    epochs: int = 200
    learning_rate: float = 0.1
    batch_size: int = 128
    norm: Norm = Norm.L1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        if self.neg_samples < 1:
            raise ValueError("neg_samples must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


@dataclass(frozen=True)
class EmbeddingTable:
    """Learned vectors plus the id tables they are row-aligned with."""

    entity_ids: tuple[str, ...]
    relation_ids: tuple[str, ...]
    entity_vectors: np.ndarray
    relation_vectors: np.ndarray
    config: KgeConfig | None
    final_loss: float
    loss_history: tuple[float, ...] = ()
    _entity_rows: dict[str, int] = field(default_factory=dict, repr=False)
    _relation_rows: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.entity_vectors.shape[0] != len(self.entity_ids):
            raise ValueError("entity vector rows do not match the id table")
        if self.relation_vectors.shape[0] != len(self.relation_ids):
            raise ValueError("relation vector rows do not match the id table")
        if not np.isfinite(self.entity_vectors).all() or not np.isfinite(
            self.relation_vectors
        ).all():
            raise ValueError("embedding contains non-finite components")
        self._entity_rows.update({raw: i for i, raw in enumerate(self.entity_ids)})
        self._relation_rows.update({raw: i for i, raw in enumerate(self.relation_ids)})

    @property
    def dim(self) -> int:
        return self.entity_vectors.shape[1]

    def entity_row(self, raw: str) -> int:
        try:
            return self._entity_rows[raw]
        except KeyError:
            raise KeyError(f"no embedding for entity {raw!r}") from None

    def relation_row(self, raw: str) -> int:
        try:
            return self._relation_rows[raw]
        except KeyError:
            raise KeyError(f"no embedding for relation {raw!r}") from None

    def entity_vector(self, raw: str) -> np.ndarray:
        return self.entity_vectors[self.entity_row(raw)]

    def relation_vector(self, raw: str) -> np.ndarray:
        return self.relation_vectors[self.relation_row(raw)]


@dataclass(frozen=True)
class RankingReport:
    mrr: float
    hits_at: dict[int, float]
    evaluated_triples: int

    def __post_init__(self) -> None:
        if not 0 < self.mrr <= 1:
            raise ValueError(f"mrr must lie in (0, 1], got {self.mrr}")
        levels = sorted(self.hits_at)
        for lo, hi in zip(levels, levels[1:]):
            if self.hits_at[lo] > self.hits_at[hi] + 1e-12:
                raise ValueError("hits@n must be monotone in n")


def score_transe(
    h_vec: np.ndarray, r_vec: np.ndarray, t_vec: np.ndarray, norm: Norm = Norm.L1
) -> float:
    """Negative p-norm of h + r - t; larger means more plausible."""
    h_vec, r_vec, t_vec = (np.asarray(v, dtype=float) for v in (h_vec, r_vec, t_vec))
    if not h_vec.shape == r_vec.shape == t_vec.shape:
        raise ValueError("score_transe requires three vectors of equal dimension")
    d = h_vec + r_vec - t_vec
    if norm is Norm.L1:
        return float(-np.abs(d).sum())
    return float(-np.sqrt((d * d).sum()))


def score_distmult(h_vec: np.ndarray, r_vec: np.ndarray, t_vec: np.ndarray) -> float:
    """Trilinear product sum_i h_i * r_i * t_i; symmetric in h and t."""
    h_vec, r_vec, t_vec = (np.asarray(v, dtype=float) for v in (h_vec, r_vec, t_vec))
    if not h_vec.shape == r_vec.shape == t_vec.shape:
        raise ValueError("score_distmult requires three vectors of equal dimension")
    return float((h_vec * r_vec * t_vec).sum())


def _candidate_scores(
    entity_vectors: np.ndarray,
    relation_vectors: np.ndarray,
    cand_h: np.ndarray,
    rel: np.ndarray,
    cand_t: np.ndarray,
    model: Model,
    norm: Norm,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Scores for a (batch, candidates) grid; also returns the TransE
    difference tensor needed by the backward pass."""
    r = relation_vectors[rel][:, None, :]
    if model is Model.TRANSE:
        d = entity_vectors[cand_h]
        d += r
        d -= entity_vectors[cand_t]
        if norm is Norm.L1:
            return -np.abs(d).sum(axis=-1), d
        return -np.sqrt((d * d).sum(axis=-1)), d
    h = entity_vectors[cand_h]
    h *= r
    h *= entity_vectors[cand_t]
    return h.sum(axis=-1), None


def nll_loss_and_gradients(
    entity_vectors: np.ndarray,
    relation_vectors: np.ndarray,
    heads: np.ndarray,
    relations: np.ndarray,
    cand_heads: np.ndarray,
    cand_tails: np.ndarray,
    model: Model,
    norm: Norm = Norm.L1,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean softmax cross-entropy of the true candidate (column 0) against
    its corruptions, with dense gradients for both parameter matrices.

    ``cand_heads``/``cand_tails`` have shape (batch, 1 + negatives); the
    first column is the uncorrupted triple. Gradients are averaged over the
    batch, accumulating over repeated rows.
    """
    scores, d = _candidate_scores(
        entity_vectors, relation_vectors, cand_heads, relations, cand_tails, model, norm
    )
    m = scores.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(scores - m).sum(axis=1, keepdims=True))
    losses = lse[:, 0] - scores[:, 0]
    loss = float(losses.mean())
    batch = scores.shape[0]
    d_scores = np.exp(scores - lse)
    d_scores[:, 0] -= 1.0
    d_scores /= batch
    ent_grad = np.zeros_like(entity_vectors)
    rel_grad = np.zeros_like(relation_vectors)
    if model is Model.TRANSE:
        assert d is not None
        if norm is Norm.L1:
            g_d = -np.sign(d) * d_scores[..., None]
        else:
            n = np.sqrt((d * d).sum(axis=-1, keepdims=True))
            n = np.maximum(n, 1e-12)
            g_d = -(d / n) * d_scores[..., None]
        np.add.at(ent_grad, cand_heads.ravel(), g_d.reshape(-1, g_d.shape[-1]))
        np.add.at(ent_grad, cand_tails.ravel(), -g_d.reshape(-1, g_d.shape[-1]))
        np.add.at(rel_grad, relations, g_d.sum(axis=1))
    else:
        r = relation_vectors[relations][:, None, :]
        h = entity_vectors[cand_heads]
        t = entity_vectors[cand_tails]
        g_h = d_scores[..., None] * r * t
        g_t = d_scores[..., None] * r * h
        g_r = (d_scores[..., None] * h * t).sum(axis=1)
        np.add.at(ent_grad, cand_heads.ravel(), g_h.reshape(-1, g_h.shape[-1]))
        np.add.at(ent_grad, cand_tails.ravel(), g_t.reshape(-1, g_t.shape[-1]))
        np.add.at(rel_grad, relations, g_r)
    return loss, ent_grad, rel_grad


def _segment_add(target: np.ndarray, rows: np.ndarray, values: np.ndarray) -> np.ndarray:
    """target[rows] += values with repeated rows accumulated; returns the
    unique rows touched. Faster than ufunc.at for wide value matrices."""
    order = np.argsort(rows, kind="stable")
    sorted_rows = rows[order]
    sorted_values = values[order]
    starts = np.flatnonzero(np.r_[True, np.diff(sorted_rows) > 0])
    sums = np.add.reduceat(sorted_values, starts, axis=0)
    unique_rows = sorted_rows[starts]
    target[unique_rows] += sums
    return unique_rows


def _sgd_step(
    entity_vectors: np.ndarray,
    relation_vectors: np.ndarray,
    relations: np.ndarray,
    cand_heads: np.ndarray,
    cand_tails: np.ndarray,
    model: Model,
    norm: Norm,
    learning_rate: float,
) -> tuple[float, np.ndarray]:
    """One in-place SGD update on the batch; equivalent to applying the
    gradients of ``nll_loss_and_gradients`` but touching only active rows.
    Returns (batch mean loss, touched entity rows)."""
    scores, d = _candidate_scores(
        entity_vectors, relation_vectors, cand_heads, relations, cand_tails, model, norm
    )
    m = scores.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(scores - m).sum(axis=1, keepdims=True))
    loss = float((lse[:, 0] - scores[:, 0]).mean())
    d_scores = np.exp(scores - lse)
    d_scores[:, 0] -= 1.0
    d_scores *= -learning_rate / scores.shape[0]
    dim = entity_vectors.shape[1]
    if model is Model.TRANSE:
        assert d is not None
        if norm is Norm.L1:
            g_d = np.sign(d, out=d)
        else:
            n = np.sqrt((d * d).sum(axis=-1, keepdims=True))
            g_d = np.divide(d, np.maximum(n, 1e-12), out=d)
        g_d *= -d_scores[..., None]
        flat = g_d.reshape(-1, dim)
        rows = np.concatenate([cand_heads.ravel(), cand_tails.ravel()])
        values = np.concatenate([flat, -flat])
        touched = _segment_add(entity_vectors, rows, values)
        _segment_add(relation_vectors, relations, g_d.sum(axis=1))
    else:
        r = relation_vectors[relations][:, None, :]
        h = entity_vectors[cand_heads]
        t = entity_vectors[cand_tails]
        w = d_scores[..., None]
        g_h = (w * r * t).reshape(-1, dim)
        g_t = (w * r * h).reshape(-1, dim)
        g_r = (w * h * t).sum(axis=1)
        rows = np.concatenate([cand_heads.ravel(), cand_tails.ravel()])
        values = np.concatenate([g_h, g_t])
        touched = _segment_add(entity_vectors, rows, values)
        _segment_add(relation_vectors, relations, g_r)
    return loss, touched


def _corrupt(
    rng: np.random.Generator,
    heads: np.ndarray,
    tails: np.ndarray,
    entity_count: int,
    neg_samples: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Candidate grids: column 0 is the true triple, the rest replace the
    tail or the head (fair coin per corruption) with a uniform entity."""
    batch = heads.shape[0]
    random_entities = rng.integers(0, entity_count, size=(batch, neg_samples))
    corrupt_tail = rng.random(size=(batch, neg_samples)) < 0.5
    cand_h = np.where(corrupt_tail, heads[:, None], random_entities)
    cand_t = np.where(corrupt_tail, random_entities, tails[:, None])
    cand_h = np.concatenate([heads[:, None], cand_h], axis=1)
    cand_t = np.concatenate([tails[:, None], cand_t], axis=1)
    return cand_h, cand_t


def _normalize_rows(matrix: np.ndarray, rows: np.ndarray) -> None:
    norms = np.sqrt((matrix[rows] ** 2).sum(axis=1, keepdims=True))
    norms = np.maximum(norms, 1e-12)
    matrix[rows] = matrix[rows] / norms


def train(
    training_graph: KnowledgeGraph,
    config: KgeConfig,
    workers: int = 1,
    dtype: np.dtype | str = np.float64,
) -> EmbeddingTable:
    """Learn embeddings for the graph.

    Vectors start uniform in [-6/sqrt(dim), +6/sqrt(dim)]. Every step scores
    a batch of positives against ``neg_samples`` corruptions each and applies
    one SGD update; TransE entity rows touched by the step are rescaled to
    unit length afterwards. With ``workers == 1`` the result is a pure
    function of (graph, config, dtype); with more workers, sub-batch
    gradients are applied in completion order and runs may differ.
    """
    if len(training_graph) == 0:
        raise ValueError("cannot train on an empty graph")
    rng = derived_rng(config.seed)
    dim = config.dim
    bound = 6.0 / np.sqrt(dim)
    n_entities = training_graph.entity_count
    n_relations = training_graph.relation_count
    ent = rng.uniform(-bound, bound, size=(n_entities, dim)).astype(dtype)
    rel = rng.uniform(-bound, bound, size=(n_relations, dim)).astype(dtype)
    if config.model is Model.TRANSE:
        _normalize_rows(ent, np.arange(n_entities))
    heads = np.fromiter((t.head for t in training_graph.triples), dtype=np.int64)
    rels = np.fromiter((t.relation for t in training_graph.triples), dtype=np.int64)
    tails = np.fromiter((t.tail for t in training_graph.triples), dtype=np.int64)
    n = heads.shape[0]
    loss_history: list[float] = []
    pool = (
        concurrent.futures.ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    )
    try:
        for epoch in range(config.epochs):
            perm = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, config.batch_size):
                idx = perm[start : start + config.batch_size]
                b_h, b_r, b_t = heads[idx], rels[idx], tails[idx]
                cand_h, cand_t = _corrupt(rng, b_h, b_t, n_entities, config.neg_samples)
                if pool is None:
                    loss, touched = _sgd_step(
                        ent,
                        rel,
                        b_r,
                        cand_h,
                        cand_t,
                        config.model,
                        config.norm,
                        config.learning_rate,
                    )
                    if not np.isfinite(loss):
                        raise TrainingDiverged("diverged; reduce learning rate")
                    epoch_loss += loss * idx.shape[0]
                    if config.model is Model.TRANSE:
                        _normalize_rows(ent, touched)
                else:
                    parts = [
                        p for p in np.array_split(np.arange(idx.shape[0]), workers) if p.size
                    ]
                    futures = {
                        pool.submit(
                            nll_loss_and_gradients,
                            ent,
                            rel,
                            b_h[p],
                            b_r[p],
                            cand_h[p],
                            cand_t[p],
                            config.model,
                            config.norm,
                        ): p
                        for p in parts
                    }
                    for fut in concurrent.futures.as_completed(futures):
                        loss, ent_grad, rel_grad = fut.result()
                        p = futures[fut]
                        if not np.isfinite(loss):
                            raise TrainingDiverged("diverged; reduce learning rate")
                        epoch_loss += loss * p.size
                        scale = config.learning_rate * (p.size / idx.shape[0])
                        ent -= scale * ent_grad
                        rel -= scale * rel_grad
                        if config.model is Model.TRANSE:
                            u_h, u_t = cand_h[p], cand_t[p]
                            touched = np.unique(np.concatenate([u_h.ravel(), u_t.ravel()]))
                            _normalize_rows(ent, touched)
            loss_history.append(epoch_loss / n)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    return EmbeddingTable(
        entity_ids=tuple(training_graph.entities),
        relation_ids=tuple(training_graph.relations),
        entity_vectors=ent.astype(np.float64),
        relation_vectors=rel.astype(np.float64),
        config=config,
        final_loss=loss_history[-1],
        loss_history=tuple(loss_history),
    )


def _all_tail_scores(
    table: EmbeddingTable, h_row: int, r_row: int, model: Model, norm: Norm
) -> np.ndarray:
    h = table.entity_vectors[h_row]
    r = table.relation_vectors[r_row]
    if model is Model.TRANSE:
        d = (h + r)[None, :] - table.entity_vectors
        if norm is Norm.L1:
            return -np.abs(d).sum(axis=1)
        return -np.sqrt((d * d).sum(axis=1))
    return table.entity_vectors @ (h * r)


def evaluate_ranking(
    table: EmbeddingTable,
    test_triples: Sequence[tuple[str, str, str]],
    all_triples: Iterable[tuple[str, str, str]],
    protocol: Protocol = Protocol.FILTERED,
) -> RankingReport:
    """Rank each test triple's true tail against every entity.

    The filtered protocol drops other tails known true from ``all_triples``
    before ranking. Ties take the mean rank of the tied block.
    """
    if not test_triples:
        raise ValueError("cannot evaluate an empty test set")
    if table.config is None:
        raise ValueError("embedding table carries no model configuration")
    model, norm = table.config.model, table.config.norm
    known: dict[tuple[int, int], set[int]] = {}
    if protocol is Protocol.FILTERED:
        for h_raw, r_raw, t_raw in all_triples:
            try:
                key = (table.entity_row(h_raw), table.relation_row(r_raw))
                known.setdefault(key, set()).add(table.entity_row(t_raw))
            except KeyError:
                continue
    ranks = np.empty(len(test_triples))
    for i, (h_raw, r_raw, t_raw) in enumerate(test_triples):
        h_row = table.entity_row(h_raw)
        r_row = table.relation_row(r_raw)
        t_row = table.entity_row(t_raw)
        scores = _all_tail_scores(table, h_row, r_row, model, norm)
        mask = np.ones(scores.shape[0], dtype=bool)
        if protocol is Protocol.FILTERED:
            for other in known.get((h_row, r_row), ()):
                if other != t_row:
                    mask[other] = False
        s_true = scores[t_row]
        pool = scores[mask]
        greater = int((pool > s_true).sum())
        tied = int((pool == s_true).sum())
        ranks[i] = greater + (tied + 1) / 2.0
    return RankingReport(
        mrr=float((1.0 / ranks).mean()),
        hits_at={k: float((ranks <= k).mean()) for k in HITS_LEVELS},
        evaluated_triples=len(test_triples),
    )


def save_embeddings(path: str | Path, table: EmbeddingTable) -> None:
    """Text format: header line with dim and table sizes, then one line per
    vector (entities first). Floats use shortest round-trip notation."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"{EMBEDDING_HEADER} {table.dim} {len(table.entity_ids)} {len(table.relation_ids)}\n"
        )
        for ids, vectors in (
            (table.entity_ids, table.entity_vectors),
            (table.relation_ids, table.relation_vectors),
        ):
            for raw, vec in zip(ids, vectors):
                if any(c.isspace() for c in raw):
                    raise ValueError(f"identifier {raw!r} contains whitespace")
                fh.write(raw + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def load_embeddings(path: str | Path, config: KgeConfig | None = None) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if header[:2] != EMBEDDING_HEADER.split() or len(header) != 5:
            raise ValueError(f"{path}: not a recognized embedding file")
        dim, n_entities, n_relations = (int(v) for v in header[2:])
        entity_ids: list[str] = []
        relation_ids: list[str] = []
        ent = np.empty((n_entities, dim))
        rel = np.empty((n_relations, dim))
        for ids, vectors, count in (
            (entity_ids, ent, n_entities),
            (relation_ids, rel, n_relations),
        ):
            for i in range(count):
                parts = fh.readline().split()
                if len(parts) != dim + 1:
                    raise ValueError(f"{path}: vector line {i} has {len(parts) - 1} components")
                ids.append(parts[0])
                vectors[i] = [float(v) for v in parts[1:]]
    return EmbeddingTable(
        entity_ids=tuple(entity_ids),
        relation_ids=tuple(relation_ids),
        entity_vectors=ent,
        relation_vectors=rel,
        config=config,
        final_loss=float("nan"),
    )
