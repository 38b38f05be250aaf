from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, Field, root_validator, validator

from app.core.config import settings
from .dataset import SplitConfig, SyntheticSpec
from .params import HyperParams, StrategyKind, TrainConfig


class GradCheckConfig(BaseModel):
    """Shape of the seeded instance the gradcheck command verifies."""
    threshold: float = Field(settings.GRADCHECK_THRESHOLD, gt=0)
    step: float = Field(settings.GRADCHECK_STEP, gt=0)
    input_dim: int = Field(4, ge=1)
    hidden_sizes: List[int] = Field(default_factory=lambda: [5])
    embedding_dim: int = Field(3, ge=1)
    k1: int = Field(2, ge=2)
    fines_per_coarse: int = Field(2, ge=2)
    batch_size: int = Field(4, ge=1)
    min_kink_margin: float = Field(1e-3, ge=0, description="Reject instances closer than this to a kink")


class CompareConfig(BaseModel):
    """Budget of the strategy comparison."""
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_items=1)
    strategies: List[StrategyKind] = Field(
        default_factory=lambda: [StrategyKind.RANDOM, StrategyKind.METHOD1, StrategyKind.METHOD2],
        min_items=1,
    )
    include_triplet_global: bool = Field(False, description="Add the triplet + global baseline row")


class ExperimentConfig(BaseModel):
    """
    One JSON document configuring every command.

    Exactly one data source may be given; with none, the default synthetic
    benchmark is used.
    """
    synthetic: Optional[SyntheticSpec] = None
    dataset_path: Optional[Path] = None
    embeddings_path: Optional[Path] = None
    split: SplitConfig = Field(default_factory=SplitConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    hyper: HyperParams = Field(default_factory=HyperParams)
    eval_ks: List[int] = Field(default_factory=lambda: [1, 2, 4, 8], min_items=1)
    output_dir: Optional[Path] = None
    seed: int = 0
    method: Optional[str] = Field(None, description="Label of the eval row; default the strategy name")
    audit_count: int = Field(32, ge=1)
    gradcheck: GradCheckConfig = Field(default_factory=GradCheckConfig)
    compare: CompareConfig = Field(default_factory=CompareConfig)

    class Config:
        extra = "forbid"

    @validator('eval_ks')
    def positive_ks(cls, v):
        if any(k < 1 for k in v):
            raise ValueError("every K must be >= 1")
        return v

    @root_validator(skip_on_failure=True)
    def one_source(cls, values):
        given = [k for k in ('synthetic', 'dataset_path', 'embeddings_path') if values.get(k) is not None]
        if len(given) > 1:
            raise ValueError(f"exactly one data source allowed, got {given}")
        if not given:
            values['synthetic'] = SyntheticSpec()
        return values

    def resolved_train(self, seed: Optional[int] = None) -> TrainConfig:
        """TrainConfig with this experiment's hyper-parameters, seed and Ks applied."""
        seed = self.seed if seed is None else seed
        return self.train.copy(update={
            "hyper": self.hyper,
            "seed": seed,
            "strategy": self.train.strategy.copy(update={"rng_seed": seed}),
            "eval_ks": list(self.eval_ks),
        })

    def method_label(self) -> str:
        return self.method or self.train.strategy.kind.value
