"""Photo/video album organization by face identity.

Groups precomputed face records into identity clusters, refines the clusters
under real-album constraints, tags each identity with fused gender, age, and
born-year estimates, and scores partitions against ground truth.
"""

from .fusion import (
    EXPECTED_VALUE,
    PRODUCT_RULE,
    SIMPLE_VOTING,
    FusionStrategy,
    expected_age,
    fuse_age,
    fuse_born_year,
    fuse_class_product,
    fuse_class_voting,
)
from .hac import (
    LINKAGE_KINDS,
    CondensedDistanceMatrix,
    Dendrogram,
    Merge,
    cut,
    linkage,
    pairwise_distances,
)
from .metrics import (
    EvaluationReport,
    adjusted_mutual_information,
    adjusted_rand_index,
    age_range_accuracy,
    bcubed,
    evaluate,
    homogeneity_completeness,
)
from .pipeline import (
    AlbumReport,
    ClusterAttributes,
    IdentityCluster,
    PipelineConfig,
    PipelineError,
    expanded_partition,
    report_to_json,
    run_pipeline,
    tune_cut_threshold,
)
from .rank_order import (
    NeighborTable,
    build_neighbor_table,
    rank_order_cluster,
    rank_order_distance,
    rank_order_matrix,
)
from .records import (
    Dataset,
    DatasetError,
    FaceObservation,
    Partition,
    load_dataset,
    load_partition,
    save_dataset,
    save_partition,
)
from .refine import (
    RefineConfig,
    filter_date_span,
    filter_small,
    refine,
    split_same_photo,
)
from .synth import generate_synthetic_album
from .tracks import TrackRecord, cluster_clip, merge_into_gallery, sample_frames

__version__ = "0.1.0"

__all__ = [
    "AlbumReport",
    "ClusterAttributes",
    "CondensedDistanceMatrix",
    "Dataset",
    "DatasetError",
    "Dendrogram",
    "EvaluationReport",
    "EXPECTED_VALUE",
    "FaceObservation",
    "FusionStrategy",
    "IdentityCluster",
    "LINKAGE_KINDS",
    "Merge",
    "NeighborTable",
    "Partition",
    "PipelineConfig",
    "PipelineError",
    "PRODUCT_RULE",
    "RefineConfig",
    "SIMPLE_VOTING",
    "TrackRecord",
    "adjusted_mutual_information",
    "adjusted_rand_index",
    "age_range_accuracy",
    "bcubed",
    "build_neighbor_table",
    "cluster_clip",
    "cut",
    "evaluate",
    "expanded_partition",
    "expected_age",
    "filter_date_span",
    "filter_small",
    "fuse_age",
    "fuse_born_year",
    "fuse_class_product",
    "fuse_class_voting",
    "generate_synthetic_album",
    "homogeneity_completeness",
    "linkage",
    "load_dataset",
    "load_partition",
    "merge_into_gallery",
    "pairwise_distances",
    "rank_order_cluster",
    "rank_order_distance",
    "rank_order_matrix",
    "refine",
    "report_to_json",
    "run_pipeline",
    "sample_frames",
    "save_dataset",
    "save_partition",
    "split_same_photo",
    "tune_cut_threshold",
]
