"""Edge hiding: pick auditable occupations, remove a stratified share of
their occupation edges, and draw matching negative samples."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .core import (
    Attribute,
    EntityId,
    GeoDataset,
    KnowledgeGraph,
    derived_rng,
    intern_triples,
)

log = logging.getLogger(__name__)

DEFAULT_HIDE_FRACTION = 0.5
MIN_HOLDERS_PER_GROUP = 2

# stream tags so hiding and negative sampling draw independent sequences
_HIDE_STREAM = 0
_NEGATIVE_STREAM = 1


@dataclass(frozen=True)
class OccupationSplit:
    """Hidden/retained holders and negatives for one occupation.

    ``groups`` records the attribute group of every entity referenced by the
    split, so later stages do not need the dataset at hand.
    """

    occupation: EntityId
    hidden_positives: tuple[EntityId, ...]
    retained_positives: tuple[EntityId, ...]
    negatives: tuple[EntityId, ...]
    attribute: Attribute
    groups: dict[str, str] = field(default_factory=dict)
    negative_shortfall: int = 0

    def __post_init__(self) -> None:
        hidden = {e.raw for e in self.hidden_positives}
        retained = {e.raw for e in self.retained_positives}
        negatives = {e.raw for e in self.negatives}
        if hidden & retained:
            raise ValueError("hidden and retained holders overlap")
        if negatives & (hidden | retained):
            raise ValueError("negatives overlap the occupation's holders")
        # an empty negative list marks a split whose negatives are pending
        if (
            self.negatives
            and self.negative_shortfall == 0
            and len(self.negatives) != len(self.hidden_positives)
        ):
            raise ValueError("negatives must match hidden positives in count")


@dataclass(frozen=True)
class FilteredDataset:
    """Base dataset plus the training graph with hidden edges removed."""

    base: GeoDataset
    training_graph: KnowledgeGraph
    splits: tuple[OccupationSplit, ...]
    attribute: Attribute
    fraction: float
    seed: int


def _holders_by_group(
    dataset: GeoDataset, occupation: int, attribute: Attribute
) -> dict[str, list[int]]:
    """Holders of the occupation with a known attribute group, in the order
    their occupation triples appear in the graph."""
    group_a, group_b = attribute.group_names
    holders: dict[str, list[int]] = {group_a: [], group_b: []}
    for t in dataset.graph.triples_of_relation(dataset.occupation_relation):
        if t.tail != occupation:
            continue
        group = dataset.human_group(t.head, attribute)
        if group is not None:
            holders[group].append(t.head)
    return holders


def eligible_occupations(dataset: GeoDataset, attribute: Attribute) -> list[EntityId]:
    """Occupations with at least two known-group holders in each group."""
    seen: list[int] = []
    seen_set: set[int] = set()
    for t in dataset.graph.triples_of_relation(dataset.occupation_relation):
        if t.tail not in seen_set:
            seen_set.add(t.tail)
            seen.append(t.tail)
    result = []
    for occ in seen:
        holders = _holders_by_group(dataset, occ, attribute)
        if all(len(v) >= MIN_HOLDERS_PER_GROUP for v in holders.values()):
            result.append(dataset.graph.entity_id(occ))
    return result


def apportion_hidden(
    counts: tuple[int, int], total_hidden: int
) -> tuple[int, int]:
    """Split ``total_hidden`` across two groups by largest remainder so the
    hidden share tracks the holder share.

    Equal remainders break toward the smaller group. A group holding at
    least two members never ends with zero hidden; the deficit is taken from
    the other group.
    """
    x = counts[0] + counts[1]
    if total_hidden > x:
        raise ValueError("cannot hide more members than there are holders")
    quotas = [total_hidden * c / x for c in counts]
    alloc = [math.floor(q) for q in quotas]
    leftover = total_hidden - sum(alloc)
    remainders = [q - a for q, a in zip(quotas, alloc)]
    order = sorted(
        range(2),
        key=lambda g: (-remainders[g], counts[g], g),
    )
    for g in order[:leftover]:
        alloc[g] += 1
    for g in range(2):
        other = 1 - g
        if counts[g] >= MIN_HOLDERS_PER_GROUP and alloc[g] == 0 and alloc[other] > 1:
            alloc[g] += 1
            alloc[other] -= 1
    return (alloc[0], alloc[1])


def hide_edges(
    dataset: GeoDataset,
    occupation: EntityId,
    fraction: float,
    seed: int,
    attribute: Attribute,
) -> OccupationSplit:
    """Select ``round(fraction * holders)`` holders to hide, stratified over
    the two attribute groups, uniformly at random within each group."""
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    group_a, group_b = attribute.group_names
    holders = _holders_by_group(dataset, occupation.index, attribute)
    counts = (len(holders[group_a]), len(holders[group_b]))
    x = counts[0] + counts[1]
    if min(counts) < MIN_HOLDERS_PER_GROUP:
        raise ValueError(f"occupation {occupation.raw} is not eligible for {attribute.value}")
    n_hide = round(fraction * x)
    # every eligible group must lose at least one edge, so the floor is 2
    n_hide = max(n_hide, 2)
    quotas = apportion_hidden(counts, n_hide)
    rng = derived_rng(seed, occupation.index, _HIDE_STREAM)
    hidden: list[int] = []
    retained: list[int] = []
    for group, quota in zip((group_a, group_b), quotas):
        members = holders[group]
        chosen = set(rng.choice(len(members), size=quota, replace=False).tolist())
        hidden.extend(members[i] for i in range(len(members)) if i in chosen)
        retained.extend(members[i] for i in range(len(members)) if i not in chosen)
    hidden.sort()
    retained.sort()
    groups = {
        dataset.graph.entities.raw_of(h): dataset.human_group(h, attribute)
        for h in hidden + retained
    }
    return OccupationSplit(
        occupation=occupation,
        hidden_positives=tuple(dataset.graph.entity_id(h) for h in hidden),
        retained_positives=tuple(dataset.graph.entity_id(h) for h in retained),
        negatives=(),
        attribute=attribute,
        groups=groups,
        negative_shortfall=0,
    )


def sample_negatives(
    dataset: GeoDataset,
    occupation: EntityId,
    count: int,
    seed: int,
    attribute: Attribute,
) -> list[EntityId]:
    """Uniform sample of known-group humans that do not hold the occupation.

    When fewer candidates exist than requested, all of them are returned and
    a shortfall warning is logged.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    candidates = sorted(
        h
        for h in dataset.humans
        if dataset.human_group(h, attribute) is not None
        and not dataset.graph.has_triple(h, dataset.occupation_relation, occupation.index)
    )
    rng = derived_rng(seed, occupation.index, _NEGATIVE_STREAM)
    if len(candidates) < count:
        log.warning(
            "occupation %s: only %d negative candidates for %d requested",
            occupation.raw,
            len(candidates),
            count,
        )
        chosen = list(range(len(candidates)))
    else:
        chosen = sorted(rng.choice(len(candidates), size=count, replace=False).tolist())
    return [dataset.graph.entity_id(candidates[i]) for i in chosen]


def build_filtered_dataset(
    dataset: GeoDataset,
    attribute: Attribute,
    fraction: float = DEFAULT_HIDE_FRACTION,
    seed: int = 0,
) -> FilteredDataset:
    """Hide edges and draw negatives for every eligible occupation; the
    training graph is the base graph minus exactly the hidden triples."""
    occupations = eligible_occupations(dataset, attribute)
    if not occupations:
        raise ValueError(f"no eligible occupations for attribute {attribute.value}")
    occ_rel_raw = dataset.graph.relations.raw_of(dataset.occupation_relation)
    splits: list[OccupationSplit] = []
    hidden_raw: set[tuple[str, str, str]] = set()
    for occ in occupations:
        split = hide_edges(dataset, occ, fraction, seed, attribute)
        negatives = sample_negatives(
            dataset, occ, len(split.hidden_positives), seed, attribute
        )
        groups = dict(split.groups)
        shortfall = len(split.hidden_positives) - len(negatives)
        for neg in negatives:
            groups[neg.raw] = dataset.human_group(neg.index, attribute)
        split = OccupationSplit(
            occupation=split.occupation,
            hidden_positives=split.hidden_positives,
            retained_positives=split.retained_positives,
            negatives=tuple(negatives),
            attribute=attribute,
            groups=groups,
            negative_shortfall=shortfall,
        )
        splits.append(split)
        for h in split.hidden_positives:
            hidden_raw.add((h.raw, occ_rel_raw, occ.raw))
    remaining = [
        raw for raw in dataset.graph.iter_raw_triples() if raw not in hidden_raw
    ]
    training_graph = intern_triples(remaining, extra_relations=[occ_rel_raw])
    return FilteredDataset(
        base=dataset,
        training_graph=training_graph,
        splits=tuple(splits),
        attribute=attribute,
        fraction=fraction,
        seed=seed,
    )


def split_manifest(filtered: FilteredDataset) -> dict:
    """JSON-ready record of the split for reproducibility and later stages."""
    return {
        "schema": "auditlp-report v1",
        "kind": "split-manifest",
        "geography": filtered.base.geography,
        "attribute": filtered.attribute.value,
        "fraction": filtered.fraction,
        "seed": filtered.seed,
        "occupation_relation": filtered.base.graph.relations.raw_of(
            filtered.base.occupation_relation
        ),
        "reference_year": filtered.base.reference_year,
        "splits": [
            {
                "occupation": s.occupation.raw,
                "hidden": [e.raw for e in s.hidden_positives],
                "retained": [e.raw for e in s.retained_positives],
                "negatives": [e.raw for e in s.negatives],
                "groups": dict(sorted(s.groups.items())),
                "negative_shortfall": s.negative_shortfall,
            }
            for s in filtered.splits
        ],
    }


def write_split_manifest(path: str | Path, filtered: FilteredDataset) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(split_manifest(filtered), fh, indent=2, sort_keys=True)
        fh.write("\n")
