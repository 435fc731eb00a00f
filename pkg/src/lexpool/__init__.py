"""Opinion-pool fusion of multiple-choice solver modules.

Solver modules emit a probability distribution over the choices of each
question; a trained merging rule (mixture, logarithmic, or product) fuses
them into one distribution. The package also ships offline lexical solvers,
evaluation metrics with exact binomial confidence intervals, and a CLI for
reproducible experiments.
"""

from .core import (
    ForecastSet,
    LexpoolError,
    QuestionInstance,
    Term,
    ValidationReport,
    answer_key,
    argmax_choice,
    normalize_scores,
    validate_forecast_set,
)
from .evaluate import (
    EvaluationReport,
    PenaltyPolicy,
    SyntheticSpec,
    accuracy,
    binomial_ci,
    build_report,
    generate_synthetic,
    mean_likelihood,
    penalty_score,
    render_report,
    train_test_split,
)
from .merge import (
    RULES,
    W_MAX,
    WeightVector,
    floor_distribution,
    merge,
    merge_logarithmic,
    merge_mixture,
    merge_product,
)
from .train import (
    HillClimbConfig,
    TrainedWeights,
    grid_search_oracle,
    hill_climb,
    log_likelihood,
)

__version__ = "0.1.0"

__all__ = [
    "EvaluationReport",
    "ForecastSet",
    "HillClimbConfig",
    "LexpoolError",
    "PenaltyPolicy",
    "QuestionInstance",
    "RULES",
    "SyntheticSpec",
    "Term",
    "TrainedWeights",
    "ValidationReport",
    "W_MAX",
    "WeightVector",
    "accuracy",
    "answer_key",
    "argmax_choice",
    "binomial_ci",
    "build_report",
    "floor_distribution",
    "generate_synthetic",
    "grid_search_oracle",
    "hill_climb",
    "log_likelihood",
    "mean_likelihood",
    "merge",
    "merge_logarithmic",
    "merge_mixture",
    "merge_product",
    "normalize_scores",
    "penalty_score",
    "render_report",
    "train_test_split",
    "validate_forecast_set",
]
