from typing import Dict, Optional

from pydantic import BaseModel, Field, root_validator


class EvalReport(BaseModel):
    """Retrieval and clustering quality of one embedding set."""
    recall_at: Dict[int, float] = Field(..., description="K -> Recall@K in [0, 1]")
    nmi: float = Field(..., ge=0, le=1)
    n_queries: int = Field(..., ge=1)

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def monotone_recall(cls, values):
        recalls = [values['recall_at'][k] for k in sorted(values['recall_at'])]
        if any(not 0.0 <= r <= 1.0 for r in recalls):
            raise ValueError("recall values must lie in [0, 1]")
        if any(b < a for a, b in zip(recalls, recalls[1:])):
            raise ValueError(f"recall must be nondecreasing in K, got {recalls}")
        return values


class EpochMetrics(BaseModel):
    """One row of the training log."""
    epoch: int
    loss: float = Field(..., description="Mean combined loss over the epoch's batches")
    probe_loss: float = Field(..., description="Loss on the fixed probe batch after the epoch")
    singular: int = Field(0, description="Distance-gradient singularities hit during the epoch")
    recall_at_1: Optional[float] = None
    nmi: Optional[float] = None

    class Config:
        allow_mutation = False
