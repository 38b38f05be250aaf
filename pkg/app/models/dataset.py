from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator


class LabeledSample(BaseModel):
    """One raw input vector with its coarse and fine labels."""
    id: int = Field(..., ge=0, description="Sample id, unique within a dataset")
    x: List[float] = Field(..., min_items=1, description="Input features")
    coarse: int = Field(..., ge=0, description="Coarse-class id in [0, k1)")
    fine: int = Field(..., ge=0, description="Fine-class id in [0, k2)")

    class Config:
        allow_mutation = False

    @validator('x')
    def finite_features(cls, v):
        if not all(np.isfinite(v)):
            raise ValueError("features must be finite")
        return v


class LabelHierarchy(BaseModel):
    """Two-level label tree: every fine class has exactly one coarse parent."""
    k1: int = Field(..., ge=2, description="Number of coarse classes")
    k2: int = Field(..., ge=2, description="Number of fine classes")
    parent: Dict[int, int] = Field(..., description="Fine id -> coarse id")

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def check_tree(cls, values):
        k1, k2, parent = values['k1'], values['k2'], values['parent']
        if k2 < k1:
            raise ValueError(f"k2 ({k2}) must be >= k1 ({k1})")
        if set(parent) != set(range(k2)):
            raise ValueError(f"parent map must cover fine ids 0..{k2 - 1} exactly")
        bad = {f: c for f, c in parent.items() if not 0 <= c < k1}
        if bad:
            raise ValueError(f"parent map points outside [0, {k1}): {bad}")
        return values

    def coarse_of(self, fine: int) -> int:
        return self.parent[fine]

    def fines_of(self, coarse: int) -> List[int]:
        return sorted(f for f, c in self.parent.items() if c == coarse)


class Dataset(BaseModel):
    """Labelled samples plus the hierarchy they are drawn from."""
    samples: List[LabeledSample] = Field(..., min_items=1)
    hierarchy: LabelHierarchy

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def check_consistency(cls, values):
        samples, hierarchy = values['samples'], values['hierarchy']
        n = len(samples[0].x)
        seen = set()
        for s in samples:
            if len(s.x) != n:
                raise ValueError(f"sample {s.id} has {len(s.x)} features, expected {n}")
            if s.id in seen:
                raise ValueError(f"duplicate sample id {s.id}")
            seen.add(s.id)
            if s.fine not in hierarchy.parent:
                raise ValueError(f"sample {s.id}: fine id {s.fine} missing from hierarchy")
            if hierarchy.parent[s.fine] != s.coarse:
                raise ValueError(
                    f"sample {s.id}: fine {s.fine} belongs to coarse "
                    f"{hierarchy.parent[s.fine]}, not {s.coarse}"
                )
        return values

    @property
    def input_dim(self) -> int:
        return len(self.samples[0].x)

    def __len__(self) -> int:
        return len(self.samples)

    def features(self) -> np.ndarray:
        return np.array([s.x for s in self.samples], dtype=np.float64)

    def coarse_labels(self) -> np.ndarray:
        return np.array([s.coarse for s in self.samples], dtype=np.int64)

    def fine_labels(self) -> np.ndarray:
        return np.array([s.fine for s in self.samples], dtype=np.int64)

    def ids(self) -> np.ndarray:
        return np.array([s.id for s in self.samples], dtype=np.int64)

    def fine_ids(self) -> List[int]:
        """Distinct fine ids present in the samples, ascending."""
        return sorted({s.fine for s in self.samples})


class SyntheticSpec(BaseModel):
    """Parameters of the Gaussian hierarchical generator."""
    k1: int = Field(8, ge=2, description="Number of coarse classes")
    fines_per_coarse: int = Field(4, ge=1)
    samples_per_fine: int = Field(40, ge=1)
    input_dim: int = Field(32, ge=1, description="n, length of every input vector")
    signal_dim: Optional[int] = Field(
        8, ge=1, description="Class centres vary only in the first signal_dim coordinates; None for all n"
    )
    coarse_center_scale: float = Field(3.0, gt=0)
    fine_center_scale: float = Field(1.5, gt=0)
    noise_scale: float = Field(1.5, ge=0, description="0 collapses each fine class to a point")
    seed: int = 0

    @property
    def k2(self) -> int:
        return self.k1 * self.fines_per_coarse


class ZeroShotSplit(BaseModel):
    """Fine classes seen in training versus classes held out for testing."""
    train_fine: List[int]
    test_fine: List[int]

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def disjoint(cls, values):
        shared = set(values['train_fine']) & set(values['test_fine'])
        if shared:
            raise ValueError(f"train and test share fine classes {sorted(shared)}")
        return values


class SplitConfig(BaseModel):
    """How an experiment derives its zero-shot split."""
    train_count: Optional[int] = Field(
        None, ge=1, description="Leading fine classes used for training; default half of k2"
    )
    fine_order: Optional[List[int]] = Field(
        None, description="Order of fine ids; default ascending"
    )
