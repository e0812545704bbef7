"""Numerical laboratory for spectral open-world representation learning on
explicit augmentation graphs: graph construction, spectral embeddings, the
five-term contrastive objective, clustering measures, and the label
perturbation analysis."""

from .clustering import (
    ClusterScores,
    KMeansConfig,
    Partition,
    cluster_scores,
    error_ratio,
    evaluation_scores,
    hungarian_accuracy,
    intra_inter,
    kmeans_measure,
    partition_from_groups,
    partition_from_labels,
    seeded_kmeans,
)
from .errors import (
    AssumptionError,
    ConfigError,
    ConvergenceError,
    DegenerateGapError,
    DegenerateInterError,
    DegenerateNormalizerError,
    EmptyClusterError,
    InvalidWorldError,
    NegativeEigenvalueError,
    NumericError,
    RegimeError,
    RepeatedEigenvalueError,
    SorlLabError,
    UnknownClassError,
    ZeroDegreeError,
)
from .graph import (
    AdjacencyBundle,
    AugmentationWorld,
    build_label_vector,
    build_unlabeled_adjacency,
    bundle_from_world,
    compose_adjacency,
    load_world,
    make_world,
    save_world,
    world_from_json,
    world_to_json,
)
from .objective import (
    FeatureMap,
    equivalence_offsets,
    matrix_form_offsets,
    norm_constant,
    offset_constant_direct,
    population_weights,
    sorl_grad,
    sorl_loss,
    sorl_terms,
    sorl_terms_from_gram,
    train_sorl,
)
from .perturbation import (
    AssumptionReport,
    ClasswiseBound,
    PerturbationSetup,
    analytic_derivative,
    check_assumptions,
    class_connections,
    classwise_bound,
    classwise_terms,
    delta_kms,
    eigenvalue_derivatives,
    kms_at,
    leading_term,
    make_setup,
    perturbed_embedding,
    perturbed_matrix,
    setup_from_world,
    sweep,
    upsilon_sign_report,
)
from .spectral import (
    OptimizerConfig,
    SpectralEmbedding,
    decompose_matrix,
    eig_descending,
    embedding,
    feature_matrix,
    lowrank_loss,
    minimize_lowrank,
    rank_k_truncation,
    simclr_effective_matrix,
    sin_distance,
    topk_decompose,
)
from .toy import (
    BlockWorldParams,
    ToyParams,
    build_toy,
    closed_form_labeled,
    closed_form_unlabeled,
    labeled_fourth_closed_form,
    regime_triples,
    spectra_bound_report,
    synth_block_world,
    toy_bundle,
    toy_params_from_ratios,
)

__version__ = "0.1.0"
