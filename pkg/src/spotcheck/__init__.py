"""Cell-level error detection for relational data.

Train a classifier over multi-context representations of cells (format
models, value statistics, constraint violations, learned embeddings), with
scarce error labels amplified by a learned noisy-channel augmentation model.
"""

from .benchmark import ERROR_KINDS, InjectionSpec, generate_benchmark, inject_errors
from .channel import (
    AugConfig,
    ConditionalPolicy,
    EmpiricalPolicy,
    LabeledPair,
    NoisyChannel,
    Transformation,
    apply,
    augment,
    build_phi,
    conditional_policy,
    empirical_policy,
    learn_transformations,
    similarity,
    synthetic_error_target,
    weak_label_cells,
    weak_label_pairs,
)
from .constraints import (
    AttrRef,
    DCParseError,
    DenialConstraint,
    Predicate,
    ViolationIndex,
    count_violations,
    load_constraints,
    parse_dc,
)
from .data import (
    CellRef,
    ConfigError,
    DataError,
    Dataset,
    LabeledCell,
    Schema,
    SplitSpec,
    TrainingSet,
    label_of,
    load_csv,
    load_ground_truth,
    save_csv,
    save_ground_truth,
    split,
)
from .detector import CellPrediction, Detector, DetectorConfig
from .embeddings import (
    GRANULARITIES,
    EmbeddingConfig,
    EmbeddingModel,
    cosine_similarity,
    fit_embeddings,
    train_sgns,
)
from .features import (
    FeaturePipeline,
    FeatureVector,
    NGramFormatModel,
    fit_cooccurrence,
    fit_format_models,
    fit_value_frequencies,
    ngrams,
    symbolic_form,
)
from .harness import (
    SUITES,
    Aggregate,
    EvalReport,
    SeedContext,
    SuiteConfig,
    SuiteResult,
    aggregate,
    build_contexts,
    evaluate,
    run_experiment,
)
from .neural import Calibrator, NeuralModel, TrainConfig, calibrate, train_model

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # data
    "CellRef", "Schema", "Dataset", "LabeledCell", "TrainingSet", "SplitSpec",
    "DataError", "ConfigError", "label_of", "split",
    "load_csv", "save_csv", "load_ground_truth", "save_ground_truth",
    # constraints
    "AttrRef", "Predicate", "DenialConstraint", "DCParseError", "ViolationIndex",
    "parse_dc", "load_constraints", "count_violations",
    # channel
    "Transformation", "LabeledPair", "NoisyChannel", "EmpiricalPolicy",
    "ConditionalPolicy", "AugConfig", "similarity", "learn_transformations",
    "build_phi", "empirical_policy", "conditional_policy", "apply", "augment",
    "synthetic_error_target", "weak_label_cells", "weak_label_pairs",
    # embeddings
    "GRANULARITIES", "EmbeddingConfig", "EmbeddingModel", "train_sgns",
    "fit_embeddings", "cosine_similarity",
    # features
    "NGramFormatModel", "FeatureVector", "FeaturePipeline", "ngrams",
    "symbolic_form", "fit_format_models", "fit_value_frequencies",
    "fit_cooccurrence",
    # neural
    "NeuralModel", "TrainConfig", "Calibrator", "train_model", "calibrate",
    # detector
    "Detector", "DetectorConfig", "CellPrediction",
    # benchmark
    "generate_benchmark", "inject_errors", "InjectionSpec", "ERROR_KINDS",
    # harness
    "SUITES", "EvalReport", "Aggregate", "SuiteConfig", "SeedContext",
    "SuiteResult", "aggregate", "evaluate", "build_contexts", "run_experiment",
]
