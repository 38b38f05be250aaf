import json
from pathlib import Path

import numpy as np
import pytest

from app.data import generate_synthetic
from app.models.dataset import SyntheticSpec
from app.models.embedding import EmbeddingSet


@pytest.fixture
def six_points() -> EmbeddingSet:
    """
    Hand-checked mining fixture.

    row  point  coarse fine
    0    (0,0)  0      0     reference
    1    (3,0)  0      0
    2    (1,0)  0      0
    3    (0,3)  0      1
    4    (2,0)  1      2     hardest negative of row 0
    5    (0,5)  1      2
    """
    return EmbeddingSet(
        embeddings=[[0, 0], [3, 0], [1, 0], [0, 3], [2, 0], [0, 5]],
        coarse=[0, 0, 0, 0, 1, 1],
        fine=[0, 0, 0, 1, 2, 2],
        ids=[0, 1, 2, 3, 4, 5],
    )


@pytest.fixture
def tiny_dataset():
    """40 samples: 2 coarse x 2 fine x 10."""
    return generate_synthetic(SyntheticSpec(k1=2, fines_per_coarse=2, samples_per_fine=10, input_dim=4, seed=0,
                                            coarse_center_scale=4.0, fine_center_scale=2.0, noise_scale=1.0))


@pytest.fixture
def separated_set() -> EmbeddingSet:
    """Four tight, far apart fine classes of five points each."""
    rng = np.random.default_rng(3)
    centers = np.array([[0.0, 0.0], [50.0, 0.0], [0.0, 50.0], [50.0, 50.0]])
    points = np.concatenate([c + 0.1 * rng.standard_normal((5, 2)) for c in centers])
    fine = np.repeat(np.arange(4), 5)
    return EmbeddingSet(embeddings=points, coarse=fine // 2, fine=fine, ids=np.arange(20))


@pytest.fixture
def small_experiment() -> dict:
    """A config small enough to train in well under a second."""
    return {
        "synthetic": {"k1": 4, "fines_per_coarse": 2, "samples_per_fine": 8, "input_dim": 4, "seed": 1,
                      "coarse_center_scale": 4.0, "fine_center_scale": 2.0, "noise_scale": 1.0},
        "train": {
            "epochs": 2,
            "batch_size": 8,
            "hidden_sizes": [8],
            "embedding_dim": 4,
            "learning_rate": 0.001,
        },
        "eval_ks": [1, 2, 4, 8],
        "gradcheck": {"input_dim": 4, "hidden_sizes": [5], "embedding_dim": 3},
        "compare": {"seeds": [0, 1]},
    }


@pytest.fixture
def write_config(tmp_path):
    def _write(config: dict, name: str = "experiment.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(config, indent=2), encoding="utf-8")
        return path
    return _write
