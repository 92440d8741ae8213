"""Triple-file ingestion: parse TSV edge files, pick out the human entities
of a geography, and assemble a dataset with their sensitive attributes."""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .core import (
    AgeGroup,
    EntityMeta,
    Gender,
    GeoDataset,
    KnowledgeGraph,
    derive_age_group,
    intern_triples,
)

log = logging.getLogger(__name__)

_YEAR_RE = re.compile(r"^[+-]?(\d{4})")


class ParseError(ValueError):
    """Malformed input file; message carries the offending line number."""


class TripleFormat(Enum):
    TSV3 = "tsv3"
    KGTK = "kgtk"


@dataclass(frozen=True)
class FilterRules:
    """Vocabulary for carving a geography dataset out of a raw edge dump.

    Every identifier is configurable so synthetic corpora can reuse the
    pipeline; the defaults are the Wikidata vocabulary.
    """

    geography_targets: tuple[str, ...]
    instance_of_relation: str = "P31"
    human_class: str = "Q5"
    citizenship_relation: str = "P27"
    gender_relation: str = "P21"
    birth_relation: str = "P569"
    occupation_relation: str = "P106"
    male_entity: str = "Q6581097"
    female_entity: str = "Q6581072"

    def __post_init__(self) -> None:
        object.__setattr__(self, "geography_targets", tuple(self.geography_targets))
        if not self.geography_targets:
            raise ValueError("geography_targets must name at least one entity")
        for name in (
            "instance_of_relation",
            "human_class",
            "citizenship_relation",
            "gender_relation",
            "birth_relation",
            "occupation_relation",
            "male_entity",
            "female_entity",
        ):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if any(not t for t in self.geography_targets):
            raise ValueError("geography_targets entries must be non-empty")

    @classmethod
    def from_json(cls, path: str | Path) -> FilterRules:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        data["geography_targets"] = tuple(data["geography_targets"])
        return cls(**data)

    def to_json(self) -> dict:
        return {
            "geography_targets": list(self.geography_targets),
            "instance_of_relation": self.instance_of_relation,
            "human_class": self.human_class,
            "citizenship_relation": self.citizenship_relation,
            "gender_relation": self.gender_relation,
            "birth_relation": self.birth_relation,
            "occupation_relation": self.occupation_relation,
            "male_entity": self.male_entity,
            "female_entity": self.female_entity,
        }


def parse_triple_file(path: str | Path, fmt: TripleFormat) -> Iterator[tuple[str, str, str]]:
    """Stream raw triples from a TSV file.

    TSV3 rows are ``head TAB relation TAB tail``; KGTK-style files carry a
    header naming at least ``node1``, ``label`` and ``node2`` columns and may
    have extra columns. Lines starting with '#' are skipped. Memory use is
    bounded: one line at a time.
    """
    if fmt is TripleFormat.TSV3:
        yield from _parse_tsv3(path)
    elif fmt is TripleFormat.KGTK:
        yield from _parse_kgtk(path)
    else:  # pragma: no cover - enum is closed
        raise ParseError(f"unknown triple file format: {fmt!r}")


def _parse_tsv3(path: str | Path) -> Iterator[tuple[str, str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 columns, got {len(fields)}")
            yield (fields[0], fields[1], fields[2])


def _parse_kgtk(path: str | Path) -> Iterator[tuple[str, str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        header: list[str] | None = None
        columns: tuple[int, int, int] | None = None
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if header is None:
                header = fields
                try:
                    columns = (
                        header.index("node1"),
                        header.index("label"),
                        header.index("node2"),
                    )
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: header lacks node1/label/node2") from exc
                continue
            assert columns is not None
            if len(fields) < len(header):
                raise ParseError(
                    f"{path}:{lineno}: expected {len(header)} columns, got {len(fields)}"
                )
            yield (fields[columns[0]], fields[columns[1]], fields[columns[2]])


def write_tsv3(path: str | Path, triples: Iterable[tuple[str, str, str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for h, r, t in triples:
            fh.write(f"{h}\t{r}\t{t}\n")


def extract_humans(graph: KnowledgeGraph, rules: FilterRules) -> set[int]:
    """Entities that are instances of the human class and citizens of one of
    the target geographies. Missing vocabulary yields an empty set."""
    instance_rel = graph.relations.get(rules.instance_of_relation)
    citizen_rel = graph.relations.get(rules.citizenship_relation)
    human_cls = graph.entities.get(rules.human_class)
    targets = {
        idx for t in rules.geography_targets if (idx := graph.entities.get(t)) is not None
    }
    if instance_rel is None or citizen_rel is None or human_cls is None or not targets:
        return set()
    humans: set[int] = set()
    for triple in graph.triples_of_relation(instance_rel):
        if triple.tail != human_cls:
            continue
        for out in graph.outgoing(triple.head):
            if out.relation == citizen_rel and out.tail in targets:
                humans.add(triple.head)
                break
    return humans


def parse_birth_year(raw: str) -> int | None:
    """Leading 4-digit year of a date literal ("YYYY", "YYYY-MM-DD", ISO)."""
    m = _YEAR_RE.match(raw)
    return int(m.group(1)) if m else None


def read_attribute_overrides(path: str | Path) -> dict[str, tuple[Gender | None, int | None]]:
    """Load an ``entity,gender,birth_year`` CSV that supersedes graph-derived
    attributes; empty cells leave the corresponding attribute untouched."""
    overrides: dict[str, tuple[Gender | None, int | None]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"entity", "gender", "birth_year"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ParseError(f"{path}: header must contain {sorted(required)}")
        for row in reader:
            gender: Gender | None = None
            if row["gender"]:
                gender = Gender(row["gender"].strip().lower())
            birth = int(row["birth_year"]) if row["birth_year"] else None
            overrides[row["entity"]] = (gender, birth)
    return overrides


def extract_attributes(
    graph: KnowledgeGraph,
    humans: Iterable[int],
    rules: FilterRules,
    reference_year: int,
    geography: str = "",
    overrides: dict[str, tuple[Gender | None, int | None]] | None = None,
) -> dict[int, EntityMeta]:
    """Read gender and birth year off each human's outgoing edges.

    Conflicting gender statements demote the entity to unknown gender; for
    several birth statements the first in triple order wins. Both cases are
    logged. A birth year after the reference year excludes the entity from
    age audits instead of failing the whole extraction.
    """
    gender_rel = graph.relations.get(rules.gender_relation)
    birth_rel = graph.relations.get(rules.birth_relation)
    male = graph.entities.get(rules.male_entity)
    female = graph.entities.get(rules.female_entity)
    meta: dict[int, EntityMeta] = {}
    for human in humans:
        raw = graph.entities.raw_of(human)
        genders: set[Gender] = set()
        birth_year: int | None = None
        for triple in graph.outgoing(human):
            if triple.relation == gender_rel:
                if triple.tail == male:
                    genders.add(Gender.MALE)
                elif triple.tail == female:
                    genders.add(Gender.FEMALE)
            elif triple.relation == birth_rel:
                year = parse_birth_year(graph.entities.raw_of(triple.tail))
                if year is None:
                    continue
                if birth_year is None:
                    birth_year = year
                elif year != birth_year:
                    log.warning("%s: multiple birth years; keeping %d", raw, birth_year)
        if len(genders) == 1:
            gender = genders.pop()
        else:
            if len(genders) > 1:
                log.warning("%s: conflicting gender statements; marking unknown", raw)
            gender = Gender.UNKNOWN
        if overrides and raw in overrides:
            o_gender, o_birth = overrides[raw]
            if o_gender is not None:
                gender = o_gender
            if o_birth is not None:
                birth_year = o_birth
        age_years: int | None = None
        if birth_year is not None:
            try:
                age_group = derive_age_group(birth_year, reference_year)
                age_years = reference_year - birth_year
            except ValueError:
                log.warning("%s: birth year %d after reference year; excluded", raw, birth_year)
                age_group = AgeGroup.EXCLUDED
        else:
            age_group = AgeGroup.EXCLUDED
        meta[human] = EntityMeta(
            entity=graph.entity_id(human),
            gender=gender,
            birth_year=birth_year,
            age_years=age_years,
            age_group=age_group,
            geography=geography,
        )
    return meta


def build_geo_dataset(
    graph: KnowledgeGraph,
    rules: FilterRules,
    geography_code: str,
    reference_year: int,
    overrides: dict[str, tuple[Gender | None, int | None]] | None = None,
) -> GeoDataset:
    """Restrict a graph to the outgoing edges of the geography's humans and
    attach their attribute records."""
    humans = extract_humans(graph, rules)
    if not humans:
        raise ValueError(f"empty geography: no humans matched rules for {geography_code!r}")
    kept = [graph.raw_triple(t) for t in graph.triples if t.head in humans]
    sub = intern_triples(kept, extra_relations=[rules.occupation_relation])
    human_indices = frozenset(sub.entities.index_of(graph.entities.raw_of(h)) for h in humans)
    meta = extract_attributes(
        sub, sorted(human_indices), rules, reference_year, geography_code, overrides
    )
    return GeoDataset(
        geography=geography_code,
        graph=sub,
        humans=human_indices,
        meta=meta,
        occupation_relation=sub.relations.index_of(rules.occupation_relation),
        reference_year=reference_year,
    )


def dataset_stats(dataset: GeoDataset) -> dict:
    """Counts of humans by group and distinct occupations, for reporting."""
    genders = {g.value: 0 for g in Gender}
    ages = {a.value: 0 for a in AgeGroup}
    occupations: set[int] = set()
    for h in dataset.humans:
        m = dataset.meta[h]
        genders[m.gender.value] += 1
        ages[m.age_group.value] += 1
    for t in dataset.graph.triples_of_relation(dataset.occupation_relation):
        occupations.add(t.tail)
    return {
        "geography": dataset.geography,
        "reference_year": dataset.reference_year,
        "humans": len(dataset.humans),
        "triples": len(dataset.graph),
        "entities": dataset.graph.entity_count,
        "relations": dataset.graph.relation_count,
        "gender_counts": genders,
        "age_counts": ages,
        "occupations": len(occupations),
    }
