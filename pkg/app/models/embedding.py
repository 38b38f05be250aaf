from typing import List

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class EmbeddingSet(BaseModel):
    """
    Immutable snapshot of N embeddings with their labels.

    Mining and evaluation only ever read from a snapshot; the arrays are
    flagged read-only so a snapshot can be shared freely.
    """
    embeddings: np.ndarray = Field(..., description="N x k float64 matrix")
    coarse: np.ndarray = Field(..., description="N coarse labels")
    fine: np.ndarray = Field(..., description="N fine labels")
    ids: np.ndarray = Field(..., description="N sample ids, row order")
    snapshot_id: int = Field(0, description="Which encoder state produced the rows")

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False

    @validator('embeddings', pre=True)
    def as_matrix(cls, v):
        arr = np.array(v, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"embeddings must be a non-empty N x k matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embeddings must be finite")
        return _frozen(arr)

    @validator('coarse', 'fine', 'ids', pre=True)
    def as_labels(cls, v):
        arr = np.array(v, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("label arrays must be one-dimensional")
        return _frozen(arr)

    @root_validator(skip_on_failure=True)
    def aligned(cls, values):
        n = values['embeddings'].shape[0]
        for name in ('coarse', 'fine', 'ids'):
            if values[name].shape[0] != n:
                raise ValueError(f"{name} has {values[name].shape[0]} entries, expected {n}")
        return values

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingSet):
            return NotImplemented
        return (
            self.snapshot_id == other.snapshot_id
            and np.array_equal(self.embeddings, other.embeddings)
            and np.array_equal(self.coarse, other.coarse)
            and np.array_equal(self.fine, other.fine)
            and np.array_equal(self.ids, other.ids)
        )

    def scaled(self, c: float) -> "EmbeddingSet":
        """Same labels, embeddings multiplied by ``c``."""
        return EmbeddingSet(
            embeddings=self.embeddings * c,
            coarse=self.coarse,
            fine=self.fine,
            ids=self.ids,
            snapshot_id=self.snapshot_id,
        )


class QuadrupletIdx(BaseModel):
    """Row indices (R, P+, P-, N) into one EmbeddingSet."""
    r: int = Field(..., ge=0, description="Reference")
    pp: int = Field(..., ge=0, description="Positive-positive: same fine class as r")
    pm: int = Field(..., ge=0, description="Positive-negative: same coarse, other fine class")
    n: int = Field(..., ge=0, description="Negative: other coarse class")

    class Config:
        allow_mutation = False

    def as_tuple(self):
        return (self.r, self.pp, self.pm, self.n)

    def violations(self, s: EmbeddingSet) -> List[str]:
        """Hierarchy constraints this quadruplet breaks against ``s``; empty if valid."""
        size = len(s)
        if any(i >= size for i in self.as_tuple()):
            return [f"index out of range for a set of {size}"]
        problems = []
        if self.pp == self.r:
            problems.append("pp equals r")
        if s.fine[self.pp] != s.fine[self.r]:
            problems.append("pp does not share r's fine class")
        if s.coarse[self.pm] != s.coarse[self.r]:
            problems.append("pm does not share r's coarse class")
        if s.fine[self.pm] == s.fine[self.r]:
            problems.append("pm shares r's fine class")
        if s.coarse[self.n] == s.coarse[self.r]:
            problems.append("n shares r's coarse class")
        return problems

    def is_valid(self, s: EmbeddingSet) -> bool:
        return not self.violations(s)


class QuadrupletBatch(BaseModel):
    """Quadruplets mined from one snapshot."""
    quads: List[QuadrupletIdx]
    source: int = Field(..., description="snapshot_id of the EmbeddingSet mined from")

    class Config:
        allow_mutation = False

    def __len__(self) -> int:
        return len(self.quads)

    def as_array(self) -> np.ndarray:
        """B x 4 integer matrix, columns r, pp, pm, n."""
        return np.array([q.as_tuple() for q in self.quads], dtype=np.int64).reshape(-1, 4)
