"""Synthetic geography corpora with planted group-occupation bias, used to
validate the audit pipeline against known ground truth at desk scale."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .core import (
    Attribute,
    DEFAULT_REFERENCE_YEAR,
    GeoDataset,
    OLD_RANGE,
    YOUNG_RANGE,
    derived_rng,
    intern_triples,
)
from .ingest import FilterRules, build_geo_dataset, write_tsv3

GUILD_RELATION = "PGUILD"
BACKGROUND_HUBS_PER_GROUP = 3
# membership probability of an occupation's guild: holders sit at
# BASE +/- GAIN * beta depending on their group, non-holders at the noise floor
GUILD_BASE = 0.85
GUILD_GAIN = 0.45
GUILD_NOISE = 0.03
HUB_FIDELITY = 0.9


class Expectation(Enum):
    GROUP_A_BIASED = "group_a_biased"
    GROUP_B_BIASED = "group_b_biased"
    NEUTRAL = "neutral"
    UNCONSTRAINED = "unconstrained"


def expected_label(beta: float) -> Expectation:
    if beta >= 0.5:
        return Expectation.GROUP_A_BIASED
    if beta <= -0.5:
        return Expectation.GROUP_B_BIASED
    if beta == 0.0:
        return Expectation.NEUTRAL
    return Expectation.UNCONSTRAINED


def default_bias_profile(occupations: int) -> tuple[float, ...]:
    """Round-robin of strongly group-A-skewed, group-B-skewed, and balanced
    occupations."""
    pattern = (0.8, -0.8, 0.0)
    return tuple(pattern[i % 3] for i in range(occupations))


@dataclass(frozen=True)
class SynthConfig:
    geographies: int = 4
    humans_per_geography: int = 2000
    occupations: int = 20
    group_ratio: float = 0.5
    bias_profile: tuple[float, ...] = ()
    attribute: Attribute = Attribute.GENDER
    background_relations: int = 2
    avg_occupations_per_human: float = 2.0
    reference_year: int = DEFAULT_REFERENCE_YEAR
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.bias_profile:
            object.__setattr__(self, "bias_profile", default_bias_profile(self.occupations))
        object.__setattr__(self, "bias_profile", tuple(self.bias_profile))
        if len(self.bias_profile) != self.occupations:
            raise ValueError("bias_profile must carry one entry per occupation")
        if any(not -1.0 <= b <= 1.0 for b in self.bias_profile):
            raise ValueError("bias entries must lie in [-1, 1]")
        if not 0 < self.group_ratio < 1:
            raise ValueError("group_ratio must be in (0, 1)")
        if self.geographies < 1 or self.humans_per_geography < 10 or self.occupations < 1:
            raise ValueError("corpus dimensions too small")

    @classmethod
    def from_json(cls, path: str | Path) -> SynthConfig:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if "attribute" in data:
            data["attribute"] = Attribute(data["attribute"])
        if "bias_profile" in data:
            data["bias_profile"] = tuple(data["bias_profile"])
        return cls(**data)


@dataclass(frozen=True)
class GroundTruth:
    attribute: Attribute
    betas: dict[str, float]
    expected: dict[str, Expectation]
    geography_targets: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema": "auditlp-report v1",
            "kind": "ground-truth",
            "attribute": self.attribute.value,
            "occupations": {
                occ: {"beta": self.betas[occ], "expected": self.expected[occ].value}
                for occ in sorted(self.betas)
            },
            "geography_targets": dict(sorted(self.geography_targets.items())),
        }


def geography_code(index: int) -> str:
    return f"G{index:02d}"


def occupation_id(index: int) -> str:
    return f"OCC{index:02d}"


def synth_rules(land_entity: str) -> FilterRules:
    return FilterRules(geography_targets=(land_entity,))


def sample_holder_groups(
    rng, pool_a: int, pool_b: int, n_holders: int, beta: float
) -> tuple[int, int]:
    """Draw a holder composition with group-A probability (1 + beta) / 2.

    Balanced occupations are guaranteed at least two holders per group so
    they stay auditable; skewed ones may legitimately end one-sided.
    """
    p_a = (1.0 + beta) / 2.0
    for _ in range(200):
        n_a = int(rng.binomial(n_holders, p_a))
        n_a = min(max(n_a, 0), pool_a)
        n_b = n_holders - n_a
        if n_b < 0 or n_b > pool_b:
            continue
        if beta == 0.0 and (n_a < 2 or n_b < 2):
            continue
        return n_a, n_b
    n_a = min(max(round(n_holders * p_a), 2), pool_a)
    return n_a, min(n_holders - n_a, pool_b)


def _generate_geography(
    config: SynthConfig, geo_index: int
) -> tuple[str, list[tuple[str, str, str]], list[tuple[str, str, int]]]:
    """Raw triples and (entity, gender, birth_year) rows for one geography."""
    rng = derived_rng(config.seed, geo_index)
    code = geography_code(geo_index)
    land = f"{code}LAND"
    rules = synth_rules(land)
    n = config.humans_per_geography
    humans = [f"{code}H{i:05d}" for i in range(n)]
    in_group_a = rng.random(n) < config.group_ratio
    other_split = rng.random(n) < 0.5
    if config.attribute is Attribute.GENDER:
        is_male = in_group_a
        is_young = other_split
    else:
        is_young = in_group_a
        is_male = other_split
    ages = [
        int(rng.integers(YOUNG_RANGE[0], YOUNG_RANGE[1] + 1))
        if is_young[i]
        else int(rng.integers(OLD_RANGE[0], OLD_RANGE[1] + 1))
        for i in range(n)
    ]
    triples: list[tuple[str, str, str]] = []
    attr_rows: list[tuple[str, str, int]] = []
    for i, h in enumerate(humans):
        gender_entity = rules.male_entity if is_male[i] else rules.female_entity
        birth = config.reference_year - ages[i]
        triples.append((h, rules.instance_of_relation, rules.human_class))
        triples.append((h, rules.citizenship_relation, land))
        triples.append((h, rules.gender_relation, gender_entity))
        triples.append((h, rules.birth_relation, str(birth)))
        attr_rows.append((h, "male" if is_male[i] else "female", birth))
    pool_a = [i for i in range(n) if in_group_a[i]]
    pool_b = [i for i in range(n) if not in_group_a[i]]
    base_holders = n * config.avg_occupations_per_human / config.occupations
    holder_sets: list[set[int]] = []
    for j, beta in enumerate(config.bias_profile):
        occ = occupation_id(j)
        n_holders = max(4, round(base_holders * rng.uniform(0.85, 1.15)))
        n_holders = min(n_holders, n)
        n_a, n_b = sample_holder_groups(rng, len(pool_a), len(pool_b), n_holders, beta)
        chosen_a = rng.choice(len(pool_a), size=n_a, replace=False) if n_a else []
        chosen_b = rng.choice(len(pool_b), size=n_b, replace=False) if n_b else []
        holders = sorted(
            [pool_a[i] for i in chosen_a] + [pool_b[i] for i in chosen_b]
        )
        holder_sets.append(set(holders))
        for i in holders:
            triples.append((humans[i], rules.occupation_relation, occ))
    # guild edges: correlated with holding and, proportionally to beta, with
    # the holder's group, so embeddings can carry the planted signal
    for j, beta in enumerate(config.bias_profile):
        guild = f"{code}GUILD{j:02d}"
        p_a = min(max(GUILD_BASE + GUILD_GAIN * beta, GUILD_NOISE), 0.98)
        p_b = min(max(GUILD_BASE - GUILD_GAIN * beta, GUILD_NOISE), 0.98)
        draws = rng.random(n)
        for i in range(n):
            if i in holder_sets[j]:
                p = p_a if in_group_a[i] else p_b
            else:
                p = GUILD_NOISE
            if draws[i] < p:
                triples.append((humans[i], GUILD_RELATION, guild))
    # shared hub entities whose membership leans toward one group, giving the
    # embedding a group signal beyond the explicit attribute edge
    for b in range(config.background_relations):
        relation = f"PBG{b}"
        hubs_a = [f"{code}B{b}A{i}" for i in range(BACKGROUND_HUBS_PER_GROUP)]
        hubs_b = [f"{code}B{b}B{i}" for i in range(BACKGROUND_HUBS_PER_GROUP)]
        own = rng.random(n) < HUB_FIDELITY
        picks = rng.integers(0, BACKGROUND_HUBS_PER_GROUP, size=n)
        for i in range(n):
            own_pool, other_pool = (
                (hubs_a, hubs_b) if in_group_a[i] else (hubs_b, hubs_a)
            )
            hub = own_pool[picks[i]] if own[i] else other_pool[picks[i]]
            triples.append((humans[i], relation, hub))
    return code, triples, attr_rows


def ground_truth(config: SynthConfig) -> GroundTruth:
    betas = {occupation_id(j): beta for j, beta in enumerate(config.bias_profile)}
    return GroundTruth(
        attribute=config.attribute,
        betas=betas,
        expected={occ: expected_label(beta) for occ, beta in betas.items()},
        geography_targets={
            geography_code(g): f"{geography_code(g)}LAND" for g in range(config.geographies)
        },
    )


def generate(config: SynthConfig) -> tuple[dict[str, GeoDataset], GroundTruth]:
    """Build in-memory geography datasets through the regular ingest path."""
    datasets: dict[str, GeoDataset] = {}
    for g in range(config.geographies):
        code, triples, _ = _generate_geography(config, g)
        graph = intern_triples(triples)
        datasets[code] = build_geo_dataset(
            graph, synth_rules(f"{code}LAND"), code, config.reference_year
        )
    return datasets, ground_truth(config)


def write_corpus(out_dir: str | Path, config: SynthConfig) -> list[Path]:
    """Emit per-geography TSV3 triple files, an attribute override CSV, and
    the ground-truth manifest; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    attr_path = out / "attributes.csv"
    all_rows: list[tuple[str, str, int]] = []
    for g in range(config.geographies):
        code, triples, attr_rows = _generate_geography(config, g)
        path = out / f"{code}.tsv"
        write_tsv3(path, triples)
        written.append(path)
        all_rows.extend(attr_rows)
    with open(attr_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("entity,gender,birth_year\n")
        for entity, gender, birth in all_rows:
            fh.write(f"{entity},{gender},{birth}\n")
    written.append(attr_path)
    truth_path = out / "ground_truth.json"
    with open(truth_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(ground_truth(config).to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(truth_path)
    return written
