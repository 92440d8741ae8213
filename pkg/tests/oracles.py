"""Independent brute-force implementations used to check the production
code. These deliberately share no code with the package internals."""

from __future__ import annotations

import itertools
import math

import numpy as np


def apportion_by_ratio_distortion(counts: tuple[int, int], total: int) -> tuple[int, int]:
    """Exhaustive two-group apportionment: minimize the L1 distortion between
    hidden shares and holder shares; ties prefer giving more to the smaller
    group (to the first group when sizes are equal). A group with at least
    two members never ends at zero while the other holds more than one."""
    x = counts[0] + counts[1]
    smaller = 0 if counts[0] <= counts[1] else 1
    best = None
    for a in range(0, min(counts[0], total) + 1):
        b = total - a
        if b < 0 or b > counts[1]:
            continue
        distortion = abs(a / total - counts[0] / x) + abs(b / total - counts[1] / x)
        key = (round(distortion, 12), -(a, b)[smaller])
        if best is None or key < best[0]:
            best = (key, (a, b))
    assert best is not None
    alloc = list(best[1])
    for g in range(2):
        other = 1 - g
        if counts[g] >= 2 and alloc[g] == 0 and alloc[other] > 1:
            alloc[g] += 1
            alloc[other] -= 1
    return (alloc[0], alloc[1])


def brute_force_rank(scores: np.ndarray, true_index: int, allowed: np.ndarray) -> float:
    """Mean-tie rank of the true candidate among the allowed candidates."""
    s_true = scores[true_index]
    pool = scores[allowed]
    greater = sum(1 for s in pool if s > s_true)
    tied = sum(1 for s in pool if s == s_true)
    return greater + (tied + 1) / 2.0


def brute_force_ranking(
    score_fn,
    test_triples,
    all_triples,
    n_entities: int,
    filtered: bool,
) -> tuple[float, dict[int, float]]:
    """(MRR, hits@{5,10,20}) by scoring every entity as tail, one by one."""
    known: dict[tuple[int, int], set[int]] = {}
    for h, r, t in all_triples:
        known.setdefault((h, r), set()).add(t)
    ranks = []
    for h, r, t in test_triples:
        scores = np.array([score_fn(h, r, cand) for cand in range(n_entities)])
        if filtered:
            allowed = np.array(
                [c for c in range(n_entities) if c == t or c not in known.get((h, r), set())]
            )
        else:
            allowed = np.arange(n_entities)
        ranks.append(brute_force_rank(scores, t, allowed))
    ranks_arr = np.array(ranks)
    return (
        float((1.0 / ranks_arr).mean()),
        {k: float((ranks_arr <= k).mean()) for k in (5, 10, 20)},
    )


def auc_by_rank_statistic(pos_scores, neg_scores) -> float:
    """Mann-Whitney AUC via mid-ranks, an independent formulation of the
    pair-counting definition."""
    pos = list(map(float, pos_scores))
    neg = list(map(float, neg_scores))
    combined = sorted(pos + neg)
    mid_rank = {}
    i = 0
    while i < len(combined):
        j = i
        while j < len(combined) and combined[j] == combined[i]:
            j += 1
        rank = (i + 1 + j) / 2.0
        mid_rank[combined[i]] = rank
        i = j
    rank_sum = sum(mid_rank[s] for s in pos)
    n_pos, n_neg = len(pos), len(neg)
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def central_difference(fn, params: np.ndarray, index: tuple, step: float = 1e-5) -> float:
    """Two-sided difference quotient of ``fn`` along one coordinate."""
    plus = params.copy()
    minus = params.copy()
    plus[index] += step
    minus[index] -= step
    return (fn(plus) - fn(minus)) / (2.0 * step)


NEUTRAL_BAND = 0.01


def rule_table_label(
    tpr_a: float, tpr_b: float, fpr_a: float, fpr_b: float, t1: float, t2: float
) -> int:
    """Independently coded categorization table.

    Returns the condition index (0: TPR favors A, 1: FPR favors A,
    2: TPR favors B, 3: FPR favors B, 4: balanced) or -1 for unclassified.
    Written as a flat truth table rather than a cascade.
    """
    tpr_gap = tpr_a - tpr_b
    fpr_gap = fpr_a - fpr_b
    tpr_near = -NEUTRAL_BAND < tpr_gap < NEUTRAL_BAND
    fpr_near = -NEUTRAL_BAND < fpr_gap < NEUTRAL_BAND
    if tpr_near and fpr_near:
        return 4
    if tpr_gap >= t1:
        return 0
    if tpr_gap <= -t1:
        return 2
    if tpr_near and fpr_gap >= t2:
        return 1
    if tpr_near and fpr_gap <= -t2:
        return 3
    return -1


def rule_table_label_grid(
    tpr_a: np.ndarray,
    tpr_b: np.ndarray,
    fpr_a: np.ndarray,
    fpr_b: np.ndarray,
    t1: float,
    t2: float,
) -> np.ndarray:
    """Vectorized form of ``rule_table_label`` with explicit masking instead
    of a priority select."""
    tpr_gap = tpr_a - tpr_b
    fpr_gap = fpr_a - fpr_b
    tpr_near = (tpr_gap > -NEUTRAL_BAND) & (tpr_gap < NEUTRAL_BAND)
    fpr_near = (fpr_gap > -NEUTRAL_BAND) & (fpr_gap < NEUTRAL_BAND)
    out = np.full(tpr_gap.shape, -1, dtype=np.int8)
    remaining = np.ones(tpr_gap.shape, dtype=bool)
    balanced = tpr_near & fpr_near
    out[balanced] = 4
    remaining &= ~balanced
    hit = remaining & (tpr_gap >= t1)
    out[hit] = 0
    remaining &= ~hit
    hit = remaining & (tpr_gap <= -t1)
    out[hit] = 2
    remaining &= ~hit
    hit = remaining & tpr_near & (fpr_gap >= t2)
    out[hit] = 1
    remaining &= ~hit
    hit = remaining & tpr_near & (fpr_gap <= -t2)
    out[hit] = 3
    return out


def min_wcss_partition(points: np.ndarray, k: int) -> tuple[float, tuple[int, ...]]:
    """Exhaustive minimum within-cluster-sum-of-squares partition of up to
    roughly a dozen points into exactly ``k`` non-empty clusters."""
    n = points.shape[0]
    best_cost = math.inf
    best_labels: tuple[int, ...] = ()
    for labels in itertools.product(range(k), repeat=n):
        if len(set(labels)) != k:
            continue
        arr = np.array(labels)
        cost = 0.0
        for c in range(k):
            members = points[arr == c]
            cost += float(((members - members.mean(axis=0)) ** 2).sum())
        if cost < best_cost - 1e-12:
            best_cost = cost
            best_labels = labels
    return best_cost, best_labels


def same_partition(labels_a, labels_b) -> bool:
    """True when two labelings induce the same partition (up to renaming)."""
    groups_a: dict[int, set] = {}
    groups_b: dict[int, set] = {}
    for i, (a, b) in enumerate(zip(labels_a, labels_b)):
        groups_a.setdefault(a, set()).add(i)
        groups_b.setdefault(b, set()).add(i)
    return set(frozenset(g) for g in groups_a.values()) == set(
        frozenset(g) for g in groups_b.values()
    )
