"""Fairness machinery: group-conditional TPR/FPR, equal-opportunity and
equalized-odds gaps, data-driven gap thresholds, and the per-occupation bias
categorization."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Attribute
from .linkclf import Metrics, OccupationPredictions

NEUTRAL_BAND = 0.01
THRESHOLD_FLOOR = 0.01


@dataclass(frozen=True)
class GroupRates:
    """Per-group TPR/FPR with the confusion cells they derive from.

    Rates are None when their denominator is zero. ``confusion`` maps each
    group to (tp, fn, fp, tn), which lets rates be pooled exactly across
    geographies later.
    """

    attribute: Attribute
    tpr: dict[str, float | None]
    fpr: dict[str, float | None]
    support: dict[str, tuple[int, int]]
    confusion: dict[str, tuple[int, int, int, int]]

    def tpr_gap(self) -> float | None:
        """Signed TPR difference, group A minus group B."""
        a, b = self.attribute.group_names
        if self.tpr[a] is None or self.tpr[b] is None:
            return None
        return self.tpr[a] - self.tpr[b]

    def fpr_gap(self) -> float | None:
        a, b = self.attribute.group_names
        if self.fpr[a] is None or self.fpr[b] is None:
            return None
        return self.fpr[a] - self.fpr[b]

    def defined(self) -> bool:
        return self.tpr_gap() is not None and self.fpr_gap() is not None


class BiasKind(Enum):
    GROUP_A_BIASED = "group_a_biased"
    GROUP_B_BIASED = "group_b_biased"
    NEUTRAL = "neutral"
    UNCLASSIFIED = "unclassified"


class BiasCondition(Enum):
    """The five categorization conditions; enum order fixes the position of
    each condition in geography count vectors."""

    TPR_FAVORS_A = "tpr_favors_a"
    FPR_FAVORS_A = "fpr_favors_a"
    TPR_FAVORS_B = "tpr_favors_b"
    FPR_FAVORS_B = "fpr_favors_b"
    BALANCED = "balanced"


CONDITION_ORDER = tuple(BiasCondition)

_CONDITION_KIND = {
    BiasCondition.TPR_FAVORS_A: BiasKind.GROUP_A_BIASED,
    BiasCondition.FPR_FAVORS_A: BiasKind.GROUP_A_BIASED,
    BiasCondition.TPR_FAVORS_B: BiasKind.GROUP_B_BIASED,
    BiasCondition.FPR_FAVORS_B: BiasKind.GROUP_B_BIASED,
    BiasCondition.BALANCED: BiasKind.NEUTRAL,
}


@dataclass(frozen=True)
class BiasLabel:
    kind: BiasKind
    condition: BiasCondition | None

    def __post_init__(self) -> None:
        if self.condition is not None and _CONDITION_KIND[self.condition] is not self.kind:
            raise ValueError(f"condition {self.condition} cannot yield kind {self.kind}")
        if self.condition is None and self.kind is not BiasKind.UNCLASSIFIED:
            raise ValueError("only unclassified labels lack a condition")


@dataclass(frozen=True)
class BiasThresholds:
    """Gap thresholds t1 (TPR) and t2 (FPR), floored at 0.01.

    For gender they sit at mean minus one standard deviation of the absolute
    per-occupation gaps; for age at mean plus one standard deviation. The
    standard deviation is the population one.
    """

    t1: float
    t2: float
    attribute: Attribute
    source_stats: tuple[float, float, float, float]  # (mu_tpr, sigma_tpr, mu_fpr, sigma_fpr)

    def __post_init__(self) -> None:
        if self.t1 < THRESHOLD_FLOOR or self.t2 < THRESHOLD_FLOOR:
            raise ValueError("thresholds must respect the 0.01 floor")


@dataclass(frozen=True)
class OccupationAudit:
    occupation: str
    rates: GroupRates
    metrics: Metrics
    label: BiasLabel


def group_rates(predictions: OccupationPredictions, attribute: Attribute) -> GroupRates:
    """Confusion cells and rates per attribute group over the test set."""
    group_a, group_b = attribute.group_names
    cells = {group_a: [0, 0, 0, 0], group_b: [0, 0, 0, 0]}  # tp, fn, fp, tn
    for r in predictions.test_records():
        if r.group not in cells:
            continue
        c = cells[r.group]
        if r.label == 1:
            if r.predicted == 1:
                c[0] += 1
            else:
                c[1] += 1
        else:
            if r.predicted == 1:
                c[2] += 1
            else:
                c[3] += 1
    tpr: dict[str, float | None] = {}
    fpr: dict[str, float | None] = {}
    support: dict[str, tuple[int, int]] = {}
    confusion: dict[str, tuple[int, int, int, int]] = {}
    for g, (tp, fn, fp, tn) in cells.items():
        tpr[g] = tp / (tp + fn) if tp + fn else None
        fpr[g] = fp / (fp + tn) if fp + tn else None
        support[g] = (tp + fn, fp + tn)
        confusion[g] = (tp, fn, fp, tn)
    return GroupRates(attribute=attribute, tpr=tpr, fpr=fpr, support=support, confusion=confusion)


def pool_group_rates(rates_list: Sequence[GroupRates]) -> GroupRates:
    """Micro-pool several rate records by summing their confusion cells."""
    if not rates_list:
        raise ValueError("nothing to pool")
    attribute = rates_list[0].attribute
    if any(r.attribute is not attribute for r in rates_list):
        raise ValueError("cannot pool rates across attributes")
    groups = attribute.group_names
    cells = {g: np.zeros(4, dtype=int) for g in groups}
    for r in rates_list:
        for g in groups:
            cells[g] += np.array(r.confusion[g])
    tpr: dict[str, float | None] = {}
    fpr: dict[str, float | None] = {}
    support: dict[str, tuple[int, int]] = {}
    confusion: dict[str, tuple[int, int, int, int]] = {}
    for g, (tp, fn, fp, tn) in ((g, tuple(int(v) for v in cells[g])) for g in groups):
        tpr[g] = tp / (tp + fn) if tp + fn else None
        fpr[g] = fp / (fp + tn) if fp + tn else None
        support[g] = (tp + fn, fp + tn)
        confusion[g] = (tp, fn, fp, tn)
    return GroupRates(attribute=attribute, tpr=tpr, fpr=fpr, support=support, confusion=confusion)


def equal_opportunity_gap(rates: GroupRates) -> float | None:
    """Absolute TPR difference between the groups, None when undefined."""
    gap = rates.tpr_gap()
    return None if gap is None else abs(gap)


def equalized_odds_gap(rates: GroupRates) -> float | None:
    """Worst of the absolute TPR and FPR differences, None when undefined."""
    tpr_gap, fpr_gap = rates.tpr_gap(), rates.fpr_gap()
    if tpr_gap is None or fpr_gap is None:
        return None
    return max(abs(tpr_gap), abs(fpr_gap))


def compute_thresholds(
    rates_list: Sequence[GroupRates], attribute: Attribute
) -> BiasThresholds:
    """Thresholds from the distribution of absolute gaps across occupations:
    mean-minus-sigma for gender, mean-plus-sigma for age, floored at 0.01."""
    tpr_diffs = [abs(g) for r in rates_list if (g := r.tpr_gap()) is not None]
    fpr_diffs = [abs(g) for r in rates_list if (g := r.fpr_gap()) is not None]
    if len(tpr_diffs) < 2 or len(fpr_diffs) < 2:
        raise ValueError("need at least 2 occupations with defined rates")
    mu_t, sd_t = float(np.mean(tpr_diffs)), float(np.std(tpr_diffs))
    mu_f, sd_f = float(np.mean(fpr_diffs)), float(np.std(fpr_diffs))
    if attribute is Attribute.GENDER:
        t1, t2 = mu_t - sd_t, mu_f - sd_f
    else:
        t1, t2 = mu_t + sd_t, mu_f + sd_f
    return BiasThresholds(
        t1=max(t1, THRESHOLD_FLOOR),
        t2=max(t2, THRESHOLD_FLOOR),
        attribute=attribute,
        source_stats=(mu_t, sd_t, mu_f, sd_f),
    )


def _categorize_values(
    tpr_a: float, tpr_b: float, fpr_a: float, fpr_b: float, t1: float, t2: float
) -> BiasCondition | None:
    """Decision cascade over defined rates; None means unclassified.

    Balance is checked first; TPR gaps dominate FPR gaps; FPR gaps only
    matter while the TPR gap sits inside the near-equality band.
    """
    d_tpr = tpr_a - tpr_b
    d_fpr = fpr_a - fpr_b
    if abs(d_tpr) < NEUTRAL_BAND and abs(d_fpr) < NEUTRAL_BAND:
        return BiasCondition.BALANCED
    if d_tpr >= t1:
        return BiasCondition.TPR_FAVORS_A
    if -d_tpr >= t1:
        return BiasCondition.TPR_FAVORS_B
    if abs(d_tpr) < NEUTRAL_BAND:
        if d_fpr >= t2:
            return BiasCondition.FPR_FAVORS_A
        if -d_fpr >= t2:
            return BiasCondition.FPR_FAVORS_B
    return None


def categorize(rates: GroupRates, thresholds: BiasThresholds) -> BiasLabel:
    """Assign exactly one of the four labels to an occupation's rates;
    undefined rates land in unclassified."""
    a, b = rates.attribute.group_names
    values = (rates.tpr[a], rates.tpr[b], rates.fpr[a], rates.fpr[b])
    if any(v is None for v in values):
        return BiasLabel(kind=BiasKind.UNCLASSIFIED, condition=None)
    condition = _categorize_values(*values, thresholds.t1, thresholds.t2)
    if condition is None:
        return BiasLabel(kind=BiasKind.UNCLASSIFIED, condition=None)
    return BiasLabel(kind=_CONDITION_KIND[condition], condition=condition)


def categorize_batch(
    tpr_a: np.ndarray,
    tpr_b: np.ndarray,
    fpr_a: np.ndarray,
    fpr_b: np.ndarray,
    t1: float,
    t2: float,
) -> np.ndarray:
    """Vectorized twin of the scalar cascade.

    Returns condition codes: the index into ``CONDITION_ORDER`` for labeled
    entries and -1 for unclassified ones.
    """
    d_tpr = np.asarray(tpr_a, dtype=float) - np.asarray(tpr_b, dtype=float)
    d_fpr = np.asarray(fpr_a, dtype=float) - np.asarray(fpr_b, dtype=float)
    near_tpr = np.abs(d_tpr) < NEUTRAL_BAND
    balanced = near_tpr & (np.abs(d_fpr) < NEUTRAL_BAND)
    codes = np.select(
        [
            balanced,
            d_tpr >= t1,
            -d_tpr >= t1,
            near_tpr & (d_fpr >= t2),
            near_tpr & (-d_fpr >= t2),
        ],
        [
            CONDITION_ORDER.index(BiasCondition.BALANCED),
            CONDITION_ORDER.index(BiasCondition.TPR_FAVORS_A),
            CONDITION_ORDER.index(BiasCondition.TPR_FAVORS_B),
            CONDITION_ORDER.index(BiasCondition.FPR_FAVORS_A),
            CONDITION_ORDER.index(BiasCondition.FPR_FAVORS_B),
        ],
        default=-1,
    )
    return codes


def bias_label_name(kind: BiasKind, attribute: Attribute) -> str:
    """Human-readable label, e.g. male_biased or age_neutral."""
    a, b = attribute.group_names
    if kind is BiasKind.GROUP_A_BIASED:
        return f"{a}_biased"
    if kind is BiasKind.GROUP_B_BIASED:
        return f"{b}_biased"
    if kind is BiasKind.NEUTRAL:
        return f"{attribute.value}_neutral"
    return "unclassified"


def _rates_to_json(rates: GroupRates) -> dict:
    return {
        "tpr": rates.tpr,
        "fpr": rates.fpr,
        "support": {g: list(v) for g, v in rates.support.items()},
        "confusion": {g: list(v) for g, v in rates.confusion.items()},
    }


def _rates_from_json(data: dict, attribute: Attribute) -> GroupRates:
    return GroupRates(
        attribute=attribute,
        tpr=dict(data["tpr"]),
        fpr=dict(data["fpr"]),
        support={g: tuple(v) for g, v in data["support"].items()},
        confusion={g: tuple(v) for g, v in data["confusion"].items()},
    )


def audit_report(
    geography: str,
    attribute: Attribute,
    thresholds: BiasThresholds,
    audits: Iterable[OccupationAudit],
    reference_year: int,
) -> dict:
    """JSON-ready audit: thresholds, per-occupation rates, metrics, labels
    and the condition that fired."""
    return {
        "schema": "auditlp-report v1",
        "kind": "audit",
        "geography": geography,
        "attribute": attribute.value,
        "reference_year": reference_year,
        "thresholds": {
            "t1": thresholds.t1,
            "t2": thresholds.t2,
            "mu_tpr": thresholds.source_stats[0],
            "sigma_tpr": thresholds.source_stats[1],
            "mu_fpr": thresholds.source_stats[2],
            "sigma_fpr": thresholds.source_stats[3],
        },
        "occupations": [
            {
                "occupation": a.occupation,
                "rates": _rates_to_json(a.rates),
                "metrics": {
                    "accuracy": a.metrics.accuracy,
                    "f1": a.metrics.f1,
                    "auc": a.metrics.auc,
                },
                "label": bias_label_name(a.label.kind, attribute),
                "kind": a.label.kind.value,
                "condition": a.label.condition.value if a.label.condition else None,
            }
            for a in audits
        ],
    }


def write_audit_report(path: str | Path, report: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_audit_report(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        report = json.load(fh)
    if report.get("schema") != "auditlp-report v1" or report.get("kind") != "audit":
        raise ValueError(f"{path}: not an audit report")
    return report


def audit_rates_from_report(report: dict) -> dict[str, GroupRates]:
    """Per-occupation rate records reconstructed from an audit report."""
    attribute = Attribute(report["attribute"])
    return {
        o["occupation"]: _rates_from_json(o["rates"], attribute)
        for o in report["occupations"]
    }
