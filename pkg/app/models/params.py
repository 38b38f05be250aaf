from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, root_validator


class HyperParams(BaseModel):
    """Margins and weights of the loss functions; defaults are the published ones."""
    m1: float = Field(0.7, gt=0, description="Joint-loss margin between P+ and P-")
    m2: float = Field(0.3, gt=0, description="Joint-loss margin between P- and N")
    t1: float = Field(0.7, ge=0, description="Global-loss margin")
    t2: float = Field(0.3, ge=0, description="Global-loss margin")
    lambda_c1: float = Field(0.08, ge=0, description="Coarse classification weight")
    lambda_c2: float = Field(0.25, ge=0, description="Fine classification weight")
    lambda_g1: float = Field(1.0, ge=0, description="Weight of the first global hinge")
    lambda_g2: float = Field(1.0, ge=0, description="Weight of the second global hinge")
    eta: float = Field(1.0, ge=0, description="Weight of the global loss in the combined loss")
    alpha: float = Field(0.5, gt=0, description="Contrastive-loss margin")
    m_trip: float = Field(0.5, ge=0, description="Triplet-loss margin")

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def ordered_margins(cls, values):
        if not values['m1'] > values['m2'] > 0:
            raise ValueError(
                f"margins must satisfy m1 > m2 > 0, got m1={values['m1']}, m2={values['m2']}"
            )
        return values


class StrategyKind(str, Enum):
    RANDOM = "random"
    METHOD1 = "method1"
    METHOD2 = "method2"


class MiningStrategy(BaseModel):
    kind: StrategyKind = StrategyKind.METHOD2
    rng_seed: int = 0

    class Config:
        allow_mutation = False


class Objective(str, Enum):
    COMBINED = "combined"
    TRIPLET_GLOBAL = "triplet_global"


class TrainConfig(BaseModel):
    """Everything the trainer needs besides the data."""
    learning_rate: float = Field(0.0003, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    epochs: int = Field(10, ge=0)
    batch_size: int = Field(32, ge=1)
    batches_per_epoch: Optional[int] = Field(
        None, ge=1, description="Default: ceil(N_train / batch_size)"
    )
    embedding_dim: int = Field(32, ge=1, description="k; the published network uses 1024")
    hidden_sizes: List[int] = Field(default_factory=lambda: [64])
    snapshot_refresh_every: int = Field(1, ge=1, description="Epochs between embedding refreshes")
    seed: int = 0
    strategy: MiningStrategy = Field(default_factory=MiningStrategy)
    hyper: HyperParams = Field(default_factory=HyperParams)
    objective: Objective = Objective.COMBINED
    normalize_embeddings: bool = False
    classify_all_streams: bool = False
    eval_every: int = Field(0, ge=0, description="Evaluate the held-out set every n epochs; 0 disables")
    eval_ks: List[int] = Field(default_factory=lambda: [1, 2, 4, 8])

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def positive_widths(cls, values):
        if any(h < 1 for h in values['hidden_sizes']):
            raise ValueError("hidden layer widths must be >= 1")
        if not values['eval_ks'] or any(k < 1 for k in values['eval_ks']):
            raise ValueError("eval_ks must be a non-empty list of positive integers")
        return values
