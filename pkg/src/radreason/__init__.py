"""Zero-shot character recognition by radical decomposition and
knowledge-graph reasoning, with a simulated extractor, synthetic data
generation, detector loss reference math, and an evaluation harness."""

from .ckg import (
    CharacterEntry,
    CharacterKnowledgeGraph,
    ValidationReport,
    add_character,
    ckg_stats,
    load_ckg,
    read_ckg,
    save_ckg,
    search_rad,
    search_str,
    validate_ckg,
    write_ckg,
)
from .errors import RecognizerError
from .evaluation import (
    ExperimentConfig,
    MetricsReport,
    RecognitionResult,
    SplitSpec,
    cat_avg,
    compare_strategies,
    run_experiment,
    split_zero_shot,
    top_n_accuracy,
)
from .grid_losses import (
    GridPrediction,
    GridShape,
    GridTarget,
    LossBreakdown,
    loss_confidence,
    loss_coordinates,
    loss_radical_class,
    loss_structure,
    loss_total,
)
from .reasoner import (
    CharacterCandidate,
    RankedPredictions,
    ReasonerParams,
    brute_force_reason,
    char_reason,
    fuse_confidence,
    reason,
)
from .simulate import (
    NoiseModel,
    SimulatedSample,
    expected_hard_match_accuracy,
    hard_match_recognize,
    run_monte_carlo,
    simulate_predictions,
)
from .softlabel import (
    BoundingBox,
    PredictionSet,
    RadicalDetection,
    RadicalMapping,
    StructurePrediction,
    enumerate_mappings,
    mapping_confidence,
    normalize_predictions,
)
from .streams import Stream
from .synth import (
    CANONICAL_TEMPLATES,
    GlyphBox,
    LayoutTemplate,
    SynthParams,
    generate_synthetic_ckg,
    layout_for_structure,
    splice_raster,
)

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "CANONICAL_TEMPLATES",
    "CharacterCandidate",
    "CharacterEntry",
    "CharacterKnowledgeGraph",
    "ExperimentConfig",
    "GlyphBox",
    "GridPrediction",
    "GridShape",
    "GridTarget",
    "LayoutTemplate",
    "LossBreakdown",
    "MetricsReport",
    "NoiseModel",
    "PredictionSet",
    "RadicalDetection",
    "RadicalMapping",
    "RankedPredictions",
    "ReasonerParams",
    "RecognitionResult",
    "RecognizerError",
    "SimulatedSample",
    "SplitSpec",
    "Stream",
    "StructurePrediction",
    "SynthParams",
    "ValidationReport",
    "add_character",
    "brute_force_reason",
    "cat_avg",
    "char_reason",
    "ckg_stats",
    "compare_strategies",
    "enumerate_mappings",
    "expected_hard_match_accuracy",
    "fuse_confidence",
    "generate_synthetic_ckg",
    "hard_match_recognize",
    "layout_for_structure",
    "load_ckg",
    "loss_confidence",
    "loss_coordinates",
    "loss_radical_class",
    "loss_structure",
    "loss_total",
    "mapping_confidence",
    "normalize_predictions",
    "read_ckg",
    "reason",
    "run_experiment",
    "run_monte_carlo",
    "save_ckg",
    "search_rad",
    "search_str",
    "simulate_predictions",
    "splice_raster",
    "split_zero_shot",
    "top_n_accuracy",
    "validate_ckg",
    "write_ckg",
]
