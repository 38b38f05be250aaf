from .dataset import (
    LabeledSample,
    LabelHierarchy,
    Dataset,
    SyntheticSpec,
    ZeroShotSplit,
    SplitConfig,
)
from .embedding import EmbeddingSet, QuadrupletIdx, QuadrupletBatch
from .params import HyperParams, StrategyKind, MiningStrategy, Objective, TrainConfig
from .report import EvalReport, EpochMetrics
from .experiment import ExperimentConfig, GradCheckConfig, CompareConfig

__all__ = [
    'LabeledSample',
    'LabelHierarchy',
    'Dataset',
    'SyntheticSpec',
    'ZeroShotSplit',
    'SplitConfig',
    'EmbeddingSet',
    'QuadrupletIdx',
    'QuadrupletBatch',
    'HyperParams',
    'StrategyKind',
    'MiningStrategy',
    'Objective',
    'TrainConfig',
    'EvalReport',
    'EpochMetrics',
    'ExperimentConfig',
    'GradCheckConfig',
    'CompareConfig',
]
