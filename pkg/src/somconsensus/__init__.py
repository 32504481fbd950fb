"""Consensus clustering from an ensemble of self-organizing maps.

Pipeline: locally linear embedding, many seeded SOMs filtered by intra-subject
consistency, a co-association matrix, spectral clustering with silhouette-based
choice of k, and a per-subject majority label.
"""

__version__ = "0.1.0"

from .consensus import (
    CoAssociationMatrix,
    ConsensusResult,
    co_association,
    kmeans,
    map_to_subjects,
    select_partition,
    spectral_partition,
)
from .dataset import SampleMatrix, SyntheticSpec, generate_synthetic, load_csv, write_csv
from .ensemble import PartitionSet, filter_partitions, run_ensemble
from .lle import Embedding, embed, knn_graph, lle, reconstruction_weights
from .metrics import ValidityReport, calinski_harabasz, davies_bouldin, ics, silhouette
from .partition import Partition
from .pipeline import PipelineConfig, RunReport, run_pipeline, stability_study
from .som import SomConfig, SomModel, best_matching_unit, partition_from_som, train_som

__all__ = [
    "CoAssociationMatrix", "ConsensusResult", "co_association", "kmeans", "map_to_subjects",
    "select_partition", "spectral_partition",
    "SampleMatrix", "SyntheticSpec", "generate_synthetic", "load_csv", "write_csv",
    "PartitionSet", "filter_partitions", "run_ensemble",
    "Embedding", "embed", "knn_graph", "lle", "reconstruction_weights",
    "ValidityReport", "calinski_harabasz", "davies_bouldin", "ics", "silhouette",
    "Partition",
    "PipelineConfig", "RunReport", "run_pipeline", "stability_study",
    "SomConfig", "SomModel", "best_matching_unit", "partition_from_som", "train_som",
]
