"""Context-preserving token aggregation toolkit.

Groups token embeddings by scheduled iterative bipartite matching (plus
spherical k-means and block-downsampling baselines), aligns morphed online
and target tokens with a size-weighted cosine loss carrying analytic
gradients, and measures spatial consistency of per-token predictions.
"""

from .bench import GroupingVariant, TimingSummary, bench_variant, default_schedule
from .errors import (
    BadMagicError,
    BadVersionError,
    DegenerateNormError,
    DimensionMismatchError,
    DtmError,
    EmptyMatrixError,
    GridMismatchError,
    IndivisibleGridError,
    InputError,
    InvalidRangeError,
    NonFiniteError,
    NumericError,
    ScheduleMismatchError,
    TensorFormatError,
    TooFewTokensError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
)
from .loss import (
    DistanceKind,
    LossReport,
    cosine_distance,
    dtm_loss,
    dtm_loss_grad,
    grad_cosine_distance,
    objective,
)
from .matching import NORM_EPS, SplitRule, bipartite_step, cosine_similarity, nearest_by_cosine
from .metrics import (
    ConsistencyReport,
    agreement_count,
    consistency_report,
    ensemble_predict,
    mean_reference_cosine,
    tokenwise_predict,
    validate_class_embeddings,
)
from .morphing import (
    IntermediateMean,
    MorphConfig,
    apply,
    downsample_grouping,
    expand,
    kmeans_grouping,
    morph,
)
from .render import PALETTE, render_group_map
from .rng import Rng
from .scheduler import SchedulerConfig, constant_counts, sample_schedule, sample_schedules
from .tensorio import read_tensor, write_tensor
from .types import (
    MorphingMatrix,
    MorphSchedule,
    StepMatching,
    TokenMatrix,
    validate_token_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "BadMagicError",
    "BadVersionError",
    "ConsistencyReport",
    "DegenerateNormError",
    "DimensionMismatchError",
    "DistanceKind",
    "DtmError",
    "EmptyMatrixError",
    "GridMismatchError",
    "GroupingVariant",
    "IndivisibleGridError",
    "InputError",
    "IntermediateMean",
    "InvalidRangeError",
    "LossReport",
    "MorphConfig",
    "MorphSchedule",
    "MorphingMatrix",
    "NORM_EPS",
    "NonFiniteError",
    "NumericError",
    "PALETTE",
    "Rng",
    "ScheduleMismatchError",
    "SchedulerConfig",
    "SplitRule",
    "StepMatching",
    "TensorFormatError",
    "TimingSummary",
    "TokenMatrix",
    "TooFewTokensError",
    "TruncatedPayloadError",
    "UnsupportedDtypeError",
    "agreement_count",
    "apply",
    "bench_variant",
    "bipartite_step",
    "consistency_report",
    "constant_counts",
    "cosine_distance",
    "cosine_similarity",
    "default_schedule",
    "downsample_grouping",
    "dtm_loss",
    "dtm_loss_grad",
    "ensemble_predict",
    "expand",
    "grad_cosine_distance",
    "kmeans_grouping",
    "mean_reference_cosine",
    "morph",
    "nearest_by_cosine",
    "objective",
    "read_tensor",
    "render_group_map",
    "sample_schedule",
    "sample_schedules",
    "tokenwise_predict",
    "validate_class_embeddings",
    "validate_token_matrix",
    "write_tensor",
]
