"""
Quadruplet mining over an embedding snapshot.

The hardest negative is searched globally over the snapshot. Positives are
then chosen by one of two rules relative to the sphere of radius D(R,N)
around the reference, or uniformly at random for the baseline. Every
argmin/argmax breaks ties towards the smallest row index; distances are
compared through the snapped keys of ``snap_distances``.
"""
import logging
from typing import Optional, Tuple

import numpy as np

from app.core.errors import DegenerateDatasetError
from app.core.geometry import pairwise_distances, snap_distances
from app.models.embedding import EmbeddingSet, QuadrupletBatch, QuadrupletIdx
from app.models.params import MiningStrategy, StrategyKind

logger = logging.getLogger(__name__)

RETRY_FACTOR = 10


class QuadrupletMiner:
    """Mining operations bound to one snapshot and its distance matrix."""

    def __init__(self, snapshot: EmbeddingSet, distances: Optional[np.ndarray] = None):
        """
        Args:
            snapshot: Embeddings and labels to mine from
            distances: Precomputed pairwise distances of the snapshot, if any
        """
        self.snapshot = snapshot
        self.distances = pairwise_distances(snapshot) if distances is None else distances
        # ranking keys: ties survive any uniform rescaling of the snapshot
        self.keys = snap_distances(self.distances)
        self._rows = np.arange(len(snapshot))

    def _check_index(self, i: int) -> None:
        if not 0 <= i < len(self.snapshot):
            raise IndexError(f"row {i} outside a snapshot of {len(self.snapshot)}")

    def _labels(self, r: int) -> Tuple[int, int]:
        return int(self.snapshot.coarse[r]), int(self.snapshot.fine[r])

    def positive_pool(self, r: int) -> np.ndarray:
        """Rows sharing r's fine class, r excluded."""
        s = self.snapshot
        return self._rows[(s.fine == s.fine[r]) & (self._rows != r)]

    def positive_negative_pool(self, r: int) -> np.ndarray:
        """Rows sharing r's coarse class but not its fine class."""
        s = self.snapshot
        return self._rows[(s.coarse == s.coarse[r]) & (s.fine != s.fine[r])]

    def negative_pool(self, r: int) -> np.ndarray:
        """Rows from any other coarse class."""
        s = self.snapshot
        return self._rows[s.coarse != s.coarse[r]]

    def _pools(self, r: int) -> Tuple[np.ndarray, np.ndarray]:
        pp_pool = self.positive_pool(r)
        if pp_pool.size == 0:
            raise DegenerateDatasetError(
                f"reference row {r} has no other sample of its fine class", *self._labels(r)
            )
        pm_pool = self.positive_negative_pool(r)
        if pm_pool.size == 0:
            raise DegenerateDatasetError(
                f"reference row {r} has no sample of a sibling fine class", *self._labels(r)
            )
        return pp_pool, pm_pool

    def hardest_negative(self, r: int) -> int:
        """Closest row of a different coarse class."""
        self._check_index(r)
        pool = self.negative_pool(r)
        if pool.size == 0:
            raise DegenerateDatasetError(
                f"reference row {r} has no sample of another coarse class", *self._labels(r)
            )
        return int(pool[np.argmin(self.keys[r, pool])])

    def _farthest_from_reference(self, r: int, pool: np.ndarray) -> int:
        return int(pool[np.argmax(self.keys[r, pool])])

    def _pick_method1(self, r: int, n: int, pool: np.ndarray) -> int:
        k_r = self.keys[r, pool]
        outside = pool[k_r > self.keys[r, n]]
        if outside.size == 0:
            return self._farthest_from_reference(r, pool)
        return int(outside[np.argmin(self.keys[n, outside])])

    def _pick_method2(self, r: int, n: int, pool: np.ndarray) -> int:
        k_r = self.keys[r, pool]
        mask = k_r > self.keys[r, n]
        if not mask.any():
            return self._farthest_from_reference(r, pool)
        outside = pool[mask]
        return int(outside[np.argmin(k_r[mask])])

    def positives_method1(self, r: int, n: int) -> Tuple[int, int]:
        """
        Positives outside the sphere of radius D(R,N), closest to the negative.

        Falls back to the pool member farthest from r when no candidate lies
        strictly outside the sphere.
        """
        self._check_index(r)
        self._check_index(n)
        pp_pool, pm_pool = self._pools(r)
        return self._pick_method1(r, n, pp_pool), self._pick_method1(r, n, pm_pool)

    def positives_method2(self, r: int, n: int) -> Tuple[int, int]:
        """
        Positives closest to r strictly outside the sphere of radius D(R,N).

        Falls back to the farthest pool member inside the sphere.
        """
        self._check_index(r)
        self._check_index(n)
        pp_pool, pm_pool = self._pools(r)
        return self._pick_method2(r, n, pp_pool), self._pick_method2(r, n, pm_pool)

    def random_quadruplet(self, r: int, rng: np.random.Generator) -> QuadrupletIdx:
        """P+, P- and N drawn uniformly from their pools."""
        self._check_index(r)
        pp_pool, pm_pool = self._pools(r)
        n_pool = self.negative_pool(r)
        if n_pool.size == 0:
            raise DegenerateDatasetError(
                f"reference row {r} has no sample of another coarse class", *self._labels(r)
            )
        return QuadrupletIdx(
            r=r,
            pp=int(pp_pool[rng.integers(pp_pool.size)]),
            pm=int(pm_pool[rng.integers(pm_pool.size)]),
            n=int(n_pool[rng.integers(n_pool.size)]),
        )

    def quadruplet(self, r: int, kind: StrategyKind, rng: np.random.Generator) -> QuadrupletIdx:
        """Apply one strategy to one reference."""
        if kind == StrategyKind.RANDOM:
            return self.random_quadruplet(r, rng)
        n = self.hardest_negative(r)
        if kind == StrategyKind.METHOD1:
            pp, pm = self.positives_method1(r, n)
        else:
            pp, pm = self.positives_method2(r, n)
        return QuadrupletIdx(r=r, pp=pp, pm=pm, n=n)

    def _reference_stream(self, b: int, rng: np.random.Generator, used: set):
        size = len(self.snapshot)
        if b <= size:
            # fresh passes skip rows already in the batch
            while True:
                yield from (int(i) for i in rng.permutation(size) if int(i) not in used)
        else:
            while True:
                yield int(rng.integers(size))

    def batch(self, b: int, strategy: MiningStrategy, rng: np.random.Generator) -> QuadrupletBatch:
        """
        Mine ``b`` quadruplets.

        References are drawn without replacement when b <= N and with
        replacement otherwise. A reference whose pools are empty is replaced
        by the next draw, reshuffling the unused rows whenever a pass runs
        out; after RETRY_FACTOR * b such failures the snapshot is declared
        degenerate.
        """
        if b < 1:
            raise ValueError(f"batch size must be >= 1, got {b}")
        quads = []
        used: set = set()
        failures = 0
        last_error: Optional[DegenerateDatasetError] = None
        for r in self._reference_stream(b, rng, used):
            try:
                quads.append(self.quadruplet(r, strategy.kind, rng))
                used.add(r)
                if len(quads) == b:
                    break
            except DegenerateDatasetError as e:
                failures += 1
                last_error = e
                logger.debug("resampling reference %d: %s", r, e)
                if failures > RETRY_FACTOR * b:
                    break
        if len(quads) < b:
            raise DegenerateDatasetError(
                f"could only mine {len(quads)} of {b} quadruplets after {failures} rejected references",
                getattr(last_error, "coarse", None),
                getattr(last_error, "fine", None),
            )
        return QuadrupletBatch(quads=quads, source=self.snapshot.snapshot_id)


def select_hardest_negative(r: int, s: EmbeddingSet) -> int:
    return QuadrupletMiner(s).hardest_negative(r)


def select_positives_method1(r: int, n: int, s: EmbeddingSet) -> Tuple[int, int]:
    return QuadrupletMiner(s).positives_method1(r, n)


def select_positives_method2(r: int, n: int, s: EmbeddingSet) -> Tuple[int, int]:
    return QuadrupletMiner(s).positives_method2(r, n)


def select_random_quadruplet(r: int, s: EmbeddingSet, rng: np.random.Generator) -> QuadrupletIdx:
    return QuadrupletMiner(s).random_quadruplet(r, rng)


def build_quadruplet_batch(
    s: EmbeddingSet,
    b: int,
    strategy: MiningStrategy,
    rng: np.random.Generator,
    miner: Optional[QuadrupletMiner] = None,
) -> QuadrupletBatch:
    """Mine a batch from ``s``; pass ``miner`` to reuse its distance matrix."""
    return (miner or QuadrupletMiner(s)).batch(b, strategy, rng)
