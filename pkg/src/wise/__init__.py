"""WISE: workload/machine index scores for utilization data."""

from wise.errors import ConfigError, DataError, ScenarioError, ScoringError, ValidationSetupError, WiseError
from wise.scoring import (
    ClassificationThresholds,
    MachineScoreReport,
    ResourceReading,
    ResourceScoreDetail,
    ResourceSpec,
    classify,
    penalty,
    score_exp,
    score_fleet,
    score_tanh,
    wise_scores,
    z_score,
)

__version__ = "0.1.0"

__all__ = [
    "ClassificationThresholds",
    "ConfigError",
    "DataError",
    "MachineScoreReport",
    "ResourceReading",
    "ResourceScoreDetail",
    "ResourceSpec",
    "ScenarioError",
    "ScoringError",
    "ValidationSetupError",
    "WiseError",
    "classify",
    "penalty",
    "score_exp",
    "score_fleet",
    "score_tanh",
    "wise_scores",
    "z_score",
]
