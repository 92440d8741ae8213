"""Core data model: interned triples, the knowledge graph container, and
sensitive-attribute records shared by the rest of the toolkit."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, NamedTuple

import numpy as np

YOUNG_RANGE = (19, 45)
OLD_RANGE = (60, 90)
DEFAULT_REFERENCE_YEAR = 2024


class Gender(Enum):
    MALE = "male"
    FEMALE = "female"
    UNKNOWN = "unknown"


class AgeGroup(Enum):
    YOUNG = "young"
    OLD = "old"
    EXCLUDED = "excluded"


class Attribute(Enum):
    """Sensitive attribute an audit conditions on."""

    GENDER = "gender"
    AGE = "age"

    @property
    def group_names(self) -> tuple[str, str]:
        """(group A, group B) names: male/female or young/old."""
        if self is Attribute.GENDER:
            return (Gender.MALE.value, Gender.FEMALE.value)
        return (AgeGroup.YOUNG.value, AgeGroup.OLD.value)


def derive_age_group(birth_year: int, reference_year: int) -> AgeGroup:
    """Map a birth year to young (19-45), old (60-90) or excluded.

    The gap between the bands keeps the two cohorts clearly separated;
    anyone outside both bands is excluded from age audits.
    """
    if birth_year > reference_year:
        raise ValueError(
            f"future birth date: birth year {birth_year} is after reference year {reference_year}"
        )
    age = reference_year - birth_year
    if YOUNG_RANGE[0] <= age <= YOUNG_RANGE[1]:
        return AgeGroup.YOUNG
    if OLD_RANGE[0] <= age <= OLD_RANGE[1]:
        return AgeGroup.OLD
    return AgeGroup.EXCLUDED


class EntityId(NamedTuple):
    """Interned entity identifier: raw string paired with its dense index."""

    raw: str
    index: int


class RelationId(NamedTuple):
    """Interned relation identifier; index space is separate from entities."""

    raw: str
    index: int


class Triple(NamedTuple):
    """A directed edge, stored as dense indices into the owning graph."""

    head: int
    relation: int
    tail: int


class Interner:
    """Bijective mapping between raw identifier strings and dense indices."""

    __slots__ = ("_index_of", "_raw_of")

    def __init__(self) -> None:
        self._index_of: dict[str, int] = {}
        self._raw_of: list[str] = []

    def intern(self, raw: str) -> int:
        idx = self._index_of.get(raw)
        if idx is None:
            idx = len(self._raw_of)
            self._index_of[raw] = idx
            self._raw_of.append(raw)
        return idx

    def index_of(self, raw: str) -> int:
        return self._index_of[raw]

    def get(self, raw: str) -> int | None:
        return self._index_of.get(raw)

    def raw_of(self, index: int) -> str:
        return self._raw_of[index]

    def __len__(self) -> int:
        return len(self._raw_of)

    def __contains__(self, raw: str) -> bool:
        return raw in self._index_of

    def __iter__(self) -> Iterator[str]:
        return iter(self._raw_of)


class KnowledgeGraph:
    """Immutable triple store with dense identifiers and per-entity indexes.

    Triples are deduplicated and kept in first-occurrence order. ``out_index``
    maps every entity index to the positions of triples it heads;
    ``relation_index`` maps every relation index to the positions of its
    triples. Safe for concurrent reads once built.
    """

    __slots__ = ("triples", "entities", "relations", "out_index", "relation_index", "_triple_set")

    def __init__(
        self,
        triples: tuple[Triple, ...],
        entities: Interner,
        relations: Interner,
    ) -> None:
        self.triples = triples
        self.entities = entities
        self.relations = relations
        out_index: list[list[int]] = [[] for _ in range(len(entities))]
        relation_index: list[list[int]] = [[] for _ in range(len(relations))]
        for pos, t in enumerate(triples):
            out_index[t.head].append(pos)
            relation_index[t.relation].append(pos)
        self.out_index: tuple[tuple[int, ...], ...] = tuple(tuple(v) for v in out_index)
        self.relation_index: tuple[tuple[int, ...], ...] = tuple(tuple(v) for v in relation_index)
        self._triple_set = frozenset(triples)

    @property
    def entity_count(self) -> int:
        return len(self.entities)

    @property
    def relation_count(self) -> int:
        return len(self.relations)

    def __len__(self) -> int:
        return len(self.triples)

    def has_triple(self, head: int, relation: int, tail: int) -> bool:
        return Triple(head, relation, tail) in self._triple_set

    def outgoing(self, entity_index: int) -> Iterator[Triple]:
        for pos in self.out_index[entity_index]:
            yield self.triples[pos]

    def triples_of_relation(self, relation_index: int) -> Iterator[Triple]:
        for pos in self.relation_index[relation_index]:
            yield self.triples[pos]

    def entity_id(self, index: int) -> EntityId:
        return EntityId(self.entities.raw_of(index), index)

    def relation_id(self, index: int) -> RelationId:
        return RelationId(self.relations.raw_of(index), index)

    def raw_triple(self, triple: Triple) -> tuple[str, str, str]:
        return (
            self.entities.raw_of(triple.head),
            self.relations.raw_of(triple.relation),
            self.entities.raw_of(triple.tail),
        )

    def iter_raw_triples(self) -> Iterator[tuple[str, str, str]]:
        for t in self.triples:
            yield self.raw_triple(t)


def intern_triples(
    raw_triples: Iterable[tuple[str, str, str]],
    extra_entities: Iterable[str] = (),
    extra_relations: Iterable[str] = (),
) -> KnowledgeGraph:
    """Build a graph from raw string triples.

    Duplicates are silently dropped (set semantics); the surviving order is
    the first occurrence order of the input. ``extra_entities`` and
    ``extra_relations`` are interned even when no triple mentions them, so
    callers can guarantee a vocabulary item is addressable.
    """
    entities = Interner()
    relations = Interner()
    triples: list[Triple] = []
    seen: set[Triple] = set()
    for lineno, raw in enumerate(raw_triples, start=1):
        if len(raw) != 3:
            raise ValueError(f"triple {lineno}: expected 3 fields, got {len(raw)}")
        head, relation, tail = raw
        if not head or not relation or not tail:
            raise ValueError(f"triple {lineno}: empty field in ({head!r}, {relation!r}, {tail!r})")
        t = Triple(entities.intern(head), relations.intern(relation), entities.intern(tail))
        if t not in seen:
            seen.add(t)
            triples.append(t)
    for raw_e in extra_entities:
        entities.intern(raw_e)
    for raw_r in extra_relations:
        relations.intern(raw_r)
    return KnowledgeGraph(tuple(triples), entities, relations)


@dataclass(frozen=True)
class EntityMeta:
    """Sensitive attributes of one human entity."""

    entity: EntityId
    gender: Gender
    birth_year: int | None
    age_years: int | None
    age_group: AgeGroup
    geography: str

    def group(self, attribute: Attribute) -> str | None:
        """Group name under ``attribute``, or None when unknown/excluded."""
        if attribute is Attribute.GENDER:
            return None if self.gender is Gender.UNKNOWN else self.gender.value
        return None if self.age_group is AgeGroup.EXCLUDED else self.age_group.value


@dataclass(frozen=True)
class GeoDataset:
    """One geography's graph restricted to human-headed triples, plus the
    attribute records of those humans."""

    geography: str
    graph: KnowledgeGraph
    humans: frozenset[int]
    meta: dict[int, EntityMeta]
    occupation_relation: int
    reference_year: int

    def __post_init__(self) -> None:
        missing = self.humans - self.meta.keys()
        if missing:
            raise ValueError(f"humans without attribute records: {sorted(missing)[:5]}")
        if not all(0 <= h < self.graph.entity_count for h in self.humans):
            raise ValueError("human index outside the graph's entity table")

    def human_group(self, entity_index: int, attribute: Attribute) -> str | None:
        meta = self.meta.get(entity_index)
        return None if meta is None else meta.group(attribute)


def derived_rng(*parts: int) -> np.random.Generator:
    """Deterministic generator from a tuple of integer stream identifiers."""
    entropy = [p & 0xFFFFFFFFFFFFFFFF for p in parts]
    return np.random.default_rng(np.random.SeedSequence(entropy))
