"""Deterministic zero-shot learning with ridge-coded class prototypes.

The pipeline re-scores class attributes, synthesizes a handful of
prototypes per unseen class by ridge-coding attributes against the seen
classes, and trains a semantically regularized contrastive classifier on
the real-plus-synthetic training set. Everything is seeded and
reproducible bit for bit.
"""

from .bundle import load_bundle, save_bundle
from .classifier import (
    ContrastiveClassifier,
    TrainConfig,
    encode_semantics,
    fuse,
    gradient_check,
    init_classifier,
    load_model,
    loss_seen,
    loss_unseen,
    save_model,
    score,
    total_loss,
    train,
)
from .datatypes import AttributeMatrix, FeatureDataset, PrototypeSet, TrainingSet
from .errors import (
    BundleFormatError,
    ConfigError,
    DataError,
    NumericalError,
    PipelineError,
    StageError,
)
from .evaluate import (
    EvalReport,
    evaluate_model,
    harmonic_mean,
    kmeans_subclusters,
    per_class_top1,
    predict_czsl,
    predict_gzsl,
    prototype_alignment,
)
from .msas import MsasConfig, rescore_attributes
from .pipeline import RunConfig, load_run_config, run_pipeline, run_sweep
from .similarity import (
    SimilarityMatrix,
    build_similarity_matrix,
    normalize_similarity,
    solve_similarity_row,
)
from .synthesis import (
    ClassMeans,
    SparseCode,
    augment_training_set,
    compute_seen_means,
    generate_prototype_set,
    load_prototypes,
    ridge_code,
    save_prototypes,
    synthesize_prototype,
)
from .synthetic import make_synthetic_world

__version__ = "0.1.0"

__all__ = [
    "AttributeMatrix",
    "BundleFormatError",
    "ClassMeans",
    "ConfigError",
    "ContrastiveClassifier",
    "DataError",
    "EvalReport",
    "FeatureDataset",
    "MsasConfig",
    "NumericalError",
    "PipelineError",
    "PrototypeSet",
    "RunConfig",
    "SimilarityMatrix",
    "SparseCode",
    "StageError",
    "TrainConfig",
    "TrainingSet",
    "augment_training_set",
    "build_similarity_matrix",
    "compute_seen_means",
    "encode_semantics",
    "evaluate_model",
    "fuse",
    "generate_prototype_set",
    "gradient_check",
    "harmonic_mean",
    "init_classifier",
    "kmeans_subclusters",
    "load_bundle",
    "load_model",
    "load_prototypes",
    "load_run_config",
    "loss_seen",
    "loss_unseen",
    "make_synthetic_world",
    "normalize_similarity",
    "per_class_top1",
    "predict_czsl",
    "predict_gzsl",
    "prototype_alignment",
    "rescore_attributes",
    "ridge_code",
    "run_pipeline",
    "run_sweep",
    "save_bundle",
    "save_model",
    "save_prototypes",
    "score",
    "solve_similarity_row",
    "synthesize_prototype",
    "total_loss",
    "train",
]
