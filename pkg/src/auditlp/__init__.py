"""Bias audit toolkit for occupation link prediction on knowledge graphs."""

from .core import (
    AgeGroup,
    Attribute,
    EntityId,
    EntityMeta,
    Gender,
    GeoDataset,
    KnowledgeGraph,
    RelationId,
    Triple,
    derive_age_group,
    intern_triples,
)
from .ingest import FilterRules, TripleFormat, build_geo_dataset, parse_triple_file
from .splitter import FilteredDataset, OccupationSplit, build_filtered_dataset
from .kge import EmbeddingTable, KgeConfig, Model, Norm, Protocol, RankingReport
from .linkclf import MlpModel, OccupationPredictions, SampleVector
from .fairness import (
    BiasCondition,
    BiasKind,
    BiasLabel,
    BiasThresholds,
    GroupRates,
    OccupationAudit,
)
from .macro import ClusterModel, GeographyVector, OppositeBiasTable
from .synthgen import GroundTruth, SynthConfig

__version__ = "0.1.0"

__all__ = [
    "AgeGroup",
    "Attribute",
    "BiasCondition",
    "BiasKind",
    "BiasLabel",
    "BiasThresholds",
    "ClusterModel",
    "EmbeddingTable",
    "EntityId",
    "EntityMeta",
    "FilterRules",
    "FilteredDataset",
    "Gender",
    "GeoDataset",
    "GeographyVector",
    "GroundTruth",
    "GroupRates",
    "KgeConfig",
    "KnowledgeGraph",
    "MlpModel",
    "Model",
    "Norm",
    "OccupationAudit",
    "OccupationPredictions",
    "OccupationSplit",
    "OppositeBiasTable",
    "Protocol",
    "RankingReport",
    "RelationId",
    "SampleVector",
    "SynthConfig",
    "Triple",
    "build_filtered_dataset",
    "build_geo_dataset",
    "derive_age_group",
    "intern_triples",
    "parse_triple_file",
]
