"""Macro analysis across geographies: per-geography bias-profile vectors,
spectral clustering with an elbow-selected cluster count, cluster-level
country-attribute summaries, and opposite-bias occupation tables."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .fairness import (
    CONDITION_ORDER,
    NEUTRAL_BAND,
    GroupRates,
    OccupationAudit,
)
from .core import derived_rng

ATTRIBUTE_COLUMNS = ("acd", "gdp", "gini", "hdi", "gendergap", "individualism")
KMEANS_RESTARTS = 5
KMEANS_MAX_ITER = 200


@dataclass(frozen=True)
class GeographyVector:
    """Counts of occupations per categorization condition, one entry per
    condition in ``CONDITION_ORDER``."""

    geography: str
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.counts) != len(CONDITION_ORDER):
            raise ValueError(f"expected {len(CONDITION_ORDER)} entries")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")


@dataclass(frozen=True)
class ClusterModel:
    """Clustering of geographies in the bias-profile space."""

    k: int
    assignment: dict[str, int]
    embedding: dict[str, tuple[float, ...]]
    inertia_curve: dict[int, float]
    unmerged_assignment: dict[str, int]
    seed: int

    def members(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = {c: [] for c in range(self.k)}
        for geo, c in sorted(self.assignment.items()):
            out[c].append(geo)
        return out


@dataclass(frozen=True)
class ClusterSummary:
    cluster: int
    members: tuple[str, ...]
    means: dict[str, float]
    intra_similarity: float
    singleton: bool


@dataclass(frozen=True)
class OppositeBiasTable:
    """Occupations falling in opposite bias categories across two clusters.

    Rows pair the raw (unthresholded) rate conditions: a TPR gap favoring
    one group in the first cluster and the other group in the second, and
    likewise for FPR gaps under near-equal TPR.
    """

    cluster_pair: tuple[int, int]
    tpr_a_then_b: tuple[str, ...]
    tpr_b_then_a: tuple[str, ...]
    fpr_a_then_b: tuple[str, ...]
    fpr_b_then_a: tuple[str, ...]


def geography_vector(geography: str, audits: Iterable[OccupationAudit]) -> GeographyVector:
    """Tally which categorization condition fired for each occupation;
    unclassified occupations contribute nothing."""
    counts = [0] * len(CONDITION_ORDER)
    for audit in audits:
        if audit.label.condition is not None:
            counts[CONDITION_ORDER.index(audit.label.condition)] += 1
    return GeographyVector(geography=geography, counts=tuple(counts))


def vector_from_report(report: dict) -> GeographyVector:
    """Rebuild a geography's count vector from a stored audit report."""
    counts = [0] * len(CONDITION_ORDER)
    values = [c.value for c in CONDITION_ORDER]
    for o in report["occupations"]:
        cond = o.get("condition")
        if cond is not None:
            counts[values.index(cond)] += 1
    return GeographyVector(geography=report["geography"], counts=tuple(counts))


def _kmeans(
    points: np.ndarray, k: int, rng: np.random.Generator
) -> tuple[np.ndarray, float]:
    """Seeded k-means with a few restarts; returns labels and inertia."""
    n = points.shape[0]
    best_labels = np.zeros(n, dtype=int)
    best_inertia = np.inf
    for _ in range(KMEANS_RESTARTS):
        centers = points[rng.choice(n, size=k, replace=False)].copy()
        labels = np.zeros(n, dtype=int)
        for iteration in range(KMEANS_MAX_ITER):
            dists = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_labels = dists.argmin(axis=1)
            if iteration > 0 and (new_labels == labels).all():
                break
            labels = new_labels
            for c in range(k):
                mask = labels == c
                if mask.any():
                    centers[c] = points[mask].mean(axis=0)
                else:
                    centers[c] = points[rng.integers(n)]
        inertia = float(((points - centers[labels]) ** 2).sum())
        if inertia < best_inertia - 1e-12:
            best_inertia = inertia
            best_labels = labels.copy()
    return best_labels, best_inertia


def _canonical_labels(order: Sequence[str], assignment: dict[str, int]) -> dict[str, int]:
    """Relabel clusters 0..k-1 by first appearance in ``order``."""
    mapping: dict[int, int] = {}
    out: dict[str, int] = {}
    for geo in order:
        c = assignment[geo]
        if c not in mapping:
            mapping[c] = len(mapping)
        out[geo] = mapping[c]
    return out


def spectral_cluster(
    vectors: Sequence[GeographyVector], k_max: int, seed: int = 0
) -> ClusterModel:
    """Cluster geographies by the shape of their bias profiles.

    The affinity is the cosine similarity of the normalized count vectors,
    clipped at zero. Geographies are embedded with the leading eigenvectors
    of the symmetric normalized Laplacian; k-means inertia is recorded for
    every candidate k and the elbow (maximum curvature of the curve, ties
    to the smaller k) picks the cluster count. A final agglomerative pass
    merges centroids closer than half the median inter-centroid distance.
    """
    if len(vectors) < 2:
        raise ValueError("need at least 2 geographies to cluster")
    if k_max > len(vectors):
        raise ValueError("k_max cannot exceed the number of geographies")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    order = [v.geography for v in vectors]
    if len(set(order)) != len(order):
        raise ValueError("duplicate geography codes")
    counts = np.array([v.counts for v in vectors], dtype=float)
    n = counts.shape[0]
    norms = np.sqrt((counts**2).sum(axis=1, keepdims=True))
    unit = np.divide(counts, norms, out=np.zeros_like(counts), where=norms > 0)
    if np.allclose(counts, counts[0]):
        assignment = {geo: 0 for geo in order}
        embedding = {geo: (0.0,) for geo in order}
        return ClusterModel(
            k=1,
            assignment=assignment,
            embedding=embedding,
            inertia_curve={1: 0.0},
            unmerged_assignment=dict(assignment),
            seed=seed,
        )
    affinity = np.clip(unit @ unit.T, 0.0, None)
    degree = affinity.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(np.maximum(degree, 1e-12))
    laplacian = np.eye(n) - inv_sqrt[:, None] * affinity * inv_sqrt[None, :]
    eigvals, eigvecs = np.linalg.eigh(laplacian)
    dim = min(k_max, n)
    basis = eigvecs[:, :dim]
    row_norm = np.sqrt((basis**2).sum(axis=1, keepdims=True))
    basis = np.divide(basis, row_norm, out=basis.copy(), where=row_norm > 1e-12)
    inertia_curve: dict[int, float] = {}
    labels_by_k: dict[int, np.ndarray] = {}
    center = basis.mean(axis=0)
    inertia_curve[1] = float(((basis - center) ** 2).sum())
    labels_by_k[1] = np.zeros(n, dtype=int)
    for k in range(2, k_max + 1):
        labels, inertia = _kmeans(basis, k, derived_rng(seed, k))
        inertia_curve[k] = inertia
        labels_by_k[k] = labels
    ks = sorted(inertia_curve)
    if len(ks) >= 3:
        curvature = {
            k: inertia_curve[k - 1] - 2 * inertia_curve[k] + inertia_curve[k + 1]
            for k in ks[1:-1]
        }
        chosen = min(curvature, key=lambda k: (-curvature[k], k))
    else:
        # with only k in {1, 2} available, split only on a strong drop
        chosen = 2 if k_max >= 2 and inertia_curve[2] <= 0.5 * inertia_curve[1] else 1
    labels = labels_by_k[chosen]
    unmerged = _canonical_labels(order, {geo: int(labels[i]) for i, geo in enumerate(order)})
    merged_labels = _merge_close_centroids(basis, labels)
    assignment = _canonical_labels(
        order, {geo: int(merged_labels[i]) for i, geo in enumerate(order)}
    )
    return ClusterModel(
        k=len(set(assignment.values())),
        assignment=assignment,
        embedding={geo: tuple(float(x) for x in basis[i]) for i, geo in enumerate(order)},
        inertia_curve=inertia_curve,
        unmerged_assignment=unmerged,
        seed=seed,
    )


def _merge_close_centroids(points: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """One agglomerative pass: repeatedly merge the closest centroid pair
    while it sits below half the median of the initial pairwise distances."""
    labels = labels.copy()
    clusters = sorted(set(labels.tolist()))
    if len(clusters) < 2:
        return labels
    centroids = {c: points[labels == c].mean(axis=0) for c in clusters}
    dists = [
        float(np.linalg.norm(centroids[a] - centroids[b]))
        for i, a in enumerate(clusters)
        for b in clusters[i + 1 :]
    ]
    threshold = float(np.median(dists)) / 2.0
    while len(clusters) > 1:
        best: tuple[float, int, int] | None = None
        for i, a in enumerate(clusters):
            for b in clusters[i + 1 :]:
                d = float(np.linalg.norm(centroids[a] - centroids[b]))
                if best is None or d < best[0]:
                    best = (d, a, b)
        assert best is not None
        d, a, b = best
        if d >= threshold:
            break
        labels[labels == b] = a
        clusters.remove(b)
        centroids[a] = points[labels == a].mean(axis=0)
        del centroids[b]
    return labels


def load_country_attributes(path: str | Path | None = None) -> dict[str, dict[str, float]]:
    """Country attribute table, keyed by geography code. Without a path the
    copy shipped with the package is used."""
    if path is None:
        source = resources.files("auditlp.data").joinpath("country_attributes.csv")
        text = source.read_text(encoding="utf-8")
        rows = list(csv.DictReader(text.splitlines()))
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    table: dict[str, dict[str, float]] = {}
    for row in rows:
        missing = [c for c in ATTRIBUTE_COLUMNS if c not in row or row[c] == ""]
        if "geography" not in row or missing:
            raise ValueError(f"attribute row missing columns {missing}: {row}")
        table[row["geography"]] = {c: float(row[c]) for c in ATTRIBUTE_COLUMNS}
    return table


def cluster_attribute_summary(
    model: ClusterModel, attrs: Mapping[str, Mapping[str, float]]
) -> list[ClusterSummary]:
    """Arithmetic attribute means per cluster plus the mean pairwise cosine
    similarity of min-max normalized attribute vectors (singletons report
    similarity 1.0 and are flagged)."""
    for geo in model.assignment:
        if geo not in attrs:
            raise ValueError(f"no attribute row for geography {geo!r}")
    geos = sorted(model.assignment)
    matrix = np.array([[attrs[g][c] for c in ATTRIBUTE_COLUMNS] for g in geos])
    lo, hi = matrix.min(axis=0), matrix.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    scaled = (matrix - lo) / span
    summaries: list[ClusterSummary] = []
    for cluster, members in sorted(model.members().items()):
        rows = [geos.index(g) for g in members]
        means = {
            c: float(np.mean([attrs[g][c] for g in members])) for c in ATTRIBUTE_COLUMNS
        }
        if len(members) == 1:
            similarity, singleton = 1.0, True
        else:
            sims = []
            for i, a in enumerate(rows):
                for b in rows[i + 1 :]:
                    va, vb = scaled[a], scaled[b]
                    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
                    sims.append(
                        float(va @ vb / (na * nb)) if na > 0 and nb > 0 else 0.0
                    )
            similarity, singleton = float(np.mean(sims)), False
        summaries.append(
            ClusterSummary(
                cluster=cluster,
                members=tuple(members),
                means=means,
                intra_similarity=similarity,
                singleton=singleton,
            )
        )
    return summaries


def _raw_conditions(rates: GroupRates) -> tuple[bool, bool, bool, bool]:
    """Unthresholded conditions (TPR favors A, FPR favors A under near-equal
    TPR, TPR favors B, FPR favors B under near-equal TPR)."""
    d_tpr = rates.tpr_gap()
    d_fpr = rates.fpr_gap()
    assert d_tpr is not None and d_fpr is not None
    near = abs(d_tpr) < NEUTRAL_BAND
    return (d_tpr > 0, near and d_fpr > 0, d_tpr < 0, near and d_fpr < 0)


def opposite_bias(
    cluster_rates: Mapping[int, Mapping[str, GroupRates]],
    cluster_pair: tuple[int, int],
) -> OppositeBiasTable:
    """Occupations categorized oppositely in the two clusters, judged on
    rates pooled per cluster. Occupations lacking defined pooled rates in
    either cluster are skipped."""
    c1, c2 = cluster_pair
    rows: tuple[list[str], list[str], list[str], list[str]] = ([], [], [], [])
    shared = sorted(set(cluster_rates[c1]) & set(cluster_rates[c2]))
    for occ in shared:
        r1, r2 = cluster_rates[c1][occ], cluster_rates[c2][occ]
        if not (r1.defined() and r2.defined()):
            continue
        a1 = _raw_conditions(r1)
        a2 = _raw_conditions(r2)
        if a1[0] and a2[2]:
            rows[0].append(occ)
        if a1[2] and a2[0]:
            rows[1].append(occ)
        if a1[1] and a2[3]:
            rows[2].append(occ)
        if a1[3] and a2[1]:
            rows[3].append(occ)
    return OppositeBiasTable(
        cluster_pair=cluster_pair,
        tpr_a_then_b=tuple(rows[0]),
        tpr_b_then_a=tuple(rows[1]),
        fpr_a_then_b=tuple(rows[2]),
        fpr_b_then_a=tuple(rows[3]),
    )


def macro_report(
    vectors: Sequence[GeographyVector],
    model: ClusterModel,
    summaries: Sequence[ClusterSummary],
    table: OppositeBiasTable | None,
    attribute_value: str,
) -> dict:
    return {
        "schema": "auditlp-report v1",
        "kind": "macro",
        "attribute": attribute_value,
        "conditions": [c.value for c in CONDITION_ORDER],
        "vectors": {v.geography: list(v.counts) for v in vectors},
        "chosen_k": model.k,
        "inertia_curve": {str(k): v for k, v in sorted(model.inertia_curve.items())},
        "assignment": dict(sorted(model.assignment.items())),
        "unmerged_assignment": dict(sorted(model.unmerged_assignment.items())),
        "seed": model.seed,
        "clusters": [
            {
                "cluster": s.cluster,
                "members": list(s.members),
                "means": s.means,
                "intra_similarity": s.intra_similarity,
                "singleton": s.singleton,
            }
            for s in summaries
        ],
        "opposite_bias": None
        if table is None
        else {
            "cluster_pair": list(table.cluster_pair),
            "tpr_a_then_b": list(table.tpr_a_then_b),
            "tpr_b_then_a": list(table.tpr_b_then_a),
            "fpr_a_then_b": list(table.fpr_a_then_b),
            "fpr_b_then_a": list(table.fpr_b_then_a),
        },
    }


def write_macro_report(path: str | Path, report: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
