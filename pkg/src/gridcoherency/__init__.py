"""Coherency detection and network islanding from bus voltage-angle traces."""

from .coherency import (
    IntegrityIndices,
    SimilarityMatrix,
    complex_pearson,
    group_coherency_index,
    group_separation_index,
    similarity_matrix,
)
from .hdbscan import HdbscanParams, Partition, cluster_buses
from .partition import GridTopology, IslandReport, cutset, enforce_island_connectivity
from .spectrum import BandSpec, FeatureMatrix, build_feature_matrix, dft
from .timeseries import (
    AngleTraceSet,
    SamplingMeta,
    WindowSpec,
    angular_velocity,
    load_angle_csv,
    sliding_windows,
    variation_index,
    write_angle_csv,
)

__version__ = "0.1.0"
