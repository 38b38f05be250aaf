import math

import numpy as np
import pytest

from app.core import DegenerateDatasetError
from app.ml.mining import (
    QuadrupletMiner,
    build_quadruplet_batch,
    select_hardest_negative,
    select_positives_method1,
    select_positives_method2,
    select_random_quadruplet,
)
from app.models import MiningStrategy, StrategyKind
from app.models.embedding import EmbeddingSet


# ---------------------------------------------------------------------------
# Exhaustive-scan oracle
# ---------------------------------------------------------------------------

def _dist(s: EmbeddingSet, i: int, j: int) -> float:
    return math.sqrt(sum((float(a) - float(b)) ** 2 for a, b in zip(s.embeddings[i], s.embeddings[j])))


def _argbest(candidates, key, better):
    best = None
    for j in candidates:
        if best is None or better(key(j), key(best)):
            best = j
    return best


def oracle_negative(s, r):
    pool = [j for j in range(len(s)) if s.coarse[j] != s.coarse[r]]
    return _argbest(pool, lambda j: _dist(s, r, j), lambda a, b: a < b)


def _oracle_pools(s, r):
    pp = [j for j in range(len(s)) if s.fine[j] == s.fine[r] and j != r]
    pm = [j for j in range(len(s)) if s.coarse[j] == s.coarse[r] and s.fine[j] != s.fine[r]]
    return pp, pm


def _oracle_pick(s, r, n, pool, method):
    radius = _dist(s, r, n)
    outside = [j for j in pool if _dist(s, r, j) > radius]
    if not outside:
        return _argbest(pool, lambda j: _dist(s, r, j), lambda a, b: a > b)
    anchor = n if method == 1 else r
    return _argbest(outside, lambda j: _dist(s, anchor, j), lambda a, b: a < b)


def oracle_positives(s, r, n, method):
    pp_pool, pm_pool = _oracle_pools(s, r)
    return _oracle_pick(s, r, n, pp_pool, method), _oracle_pick(s, r, n, pm_pool, method)


def random_embedding_set(seed: int, grid: bool = False) -> EmbeddingSet:
    """At least 4 coarse x 3 fine classes; ``grid`` puts points on a small integer lattice to force ties."""
    rng = np.random.default_rng(seed)
    k1 = int(rng.integers(4, 7))
    fpc = int(rng.integers(3, 5))
    n = int(rng.integers(60, 200))
    k = int(rng.integers(2, 17))
    fine = rng.integers(0, k1 * fpc, size=n)
    if grid:
        x = rng.integers(0, 3, size=(n, min(k, 3))).astype(float)
    else:
        x = rng.standard_normal((n, k))
    return EmbeddingSet(embeddings=x, coarse=fine // fpc, fine=fine, ids=np.arange(n))


SEEDS = list(range(12))


class TestFixture:
    def test_hardest_negative(self, six_points):
        assert select_hardest_negative(0, six_points) == 4

    def test_single_negative(self):
        s = EmbeddingSet(embeddings=[[0.0], [1.0], [7.0]], coarse=[0, 0, 1], fine=[0, 1, 2], ids=[0, 1, 2])
        assert select_hardest_negative(0, s) == 2

    def test_equidistant_negatives_pick_smaller_index(self):
        s = EmbeddingSet(embeddings=[[0.0], [-2.0], [2.0]], coarse=[0, 1, 1], fine=[0, 1, 1], ids=[0, 1, 2])
        assert select_hardest_negative(0, s) == 1

    def test_method1(self, six_points):
        assert select_positives_method1(0, 4, six_points) == (1, 3)

    def test_method1_fallback_is_farthest_from_reference(self):
        s = EmbeddingSet(
            embeddings=[[0, 0], [1, 0], [0.5, 0], [0, 1], [2, 0]],
            coarse=[0, 0, 0, 0, 1],
            fine=[0, 0, 0, 1, 2],
            ids=[0, 1, 2, 3, 4],
        )
        assert select_positives_method1(0, 4, s) == (1, 3)

    def test_method2(self, six_points):
        assert select_positives_method2(0, 4, six_points) == (1, 3)

    def test_method2_inside_fallback(self):
        s = EmbeddingSet(
            embeddings=[[0, 0], [1, 0], [0, 3], [2, 0]],
            coarse=[0, 0, 0, 1],
            fine=[0, 0, 1, 2],
            ids=[0, 1, 2, 3],
        )
        assert select_positives_method2(0, 3, s) == (1, 2)

    def test_boundary_counts_as_inside(self):
        s = EmbeddingSet(
            embeddings=[[0, 0], [2, 0], [0, 3], [0, 2], [0, -2]],
            coarse=[0, 0, 0, 0, 1],
            fine=[0, 0, 1, 0, 2],
            ids=[0, 1, 2, 3, 4],
        )
        # both fine-mates sit exactly on the sphere, so the fallback applies
        assert select_positives_method2(0, 4, s)[0] == 1

    def test_random_forced_choice(self):
        s = EmbeddingSet(embeddings=[[0.0], [1.0], [2.0], [3.0]], coarse=[0, 0, 0, 1], fine=[0, 0, 1, 2],
                         ids=[0, 1, 2, 3])
        q = select_random_quadruplet(0, s, np.random.default_rng(0))
        assert q.as_tuple() == (0, 1, 2, 3)

    def test_random_is_uniform_over_pools(self):
        s = EmbeddingSet(
            embeddings=np.arange(13, dtype=float)[:, None],
            coarse=[0] * 9 + [1] * 4,
            fine=[0] * 5 + [1] * 4 + [2] * 4,
            ids=np.arange(13),
        )
        miner = QuadrupletMiner(s)
        rng = np.random.default_rng(123)
        draws = 10_000
        counts = {"pp": {}, "pm": {}, "n": {}}
        for _ in range(draws):
            q = miner.random_quadruplet(0, rng)
            for name in counts:
                v = getattr(q, name)
                counts[name][v] = counts[name].get(v, 0) + 1
        sigma = math.sqrt(draws * 0.25 * 0.75)
        for name, pool in (("pp", {1, 2, 3, 4}), ("pm", {5, 6, 7, 8}), ("n", {9, 10, 11, 12})):
            assert set(counts[name]) == pool
            for c in counts[name].values():
                assert abs(c - draws / 4) <= 5 * sigma

    @pytest.mark.parametrize("r, message", [(3, "fine class"), (4, "sibling fine class")])
    def test_degenerate_references(self, six_points, r, message):
        with pytest.raises(DegenerateDatasetError, match=message):
            QuadrupletMiner(six_points).quadruplet(r, StrategyKind.METHOD2, np.random.default_rng(0))

    def test_no_negative(self):
        s = EmbeddingSet(embeddings=[[0.0], [1.0], [2.0]], coarse=[0, 0, 0], fine=[0, 0, 1], ids=[0, 1, 2])
        with pytest.raises(DegenerateDatasetError):
            select_hardest_negative(0, s)


class TestOracleEquivalence:
    @pytest.mark.parametrize("grid", [False, True])
    @pytest.mark.parametrize("seed", SEEDS)
    def test_strategies_match_exhaustive_scan(self, seed, grid):
        s = random_embedding_set(seed, grid)
        miner = QuadrupletMiner(s)
        refs = np.random.default_rng(seed + 100).choice(len(s), size=25, replace=False)
        for r in map(int, refs):
            n = oracle_negative(s, r)
            assert miner.hardest_negative(r) == n
            pp_pool, pm_pool = _oracle_pools(s, r)
            if not pp_pool or not pm_pool:
                with pytest.raises(DegenerateDatasetError):
                    miner.positives_method1(r, n)
                continue
            assert miner.positives_method1(r, n) == oracle_positives(s, r, n, method=1)
            assert miner.positives_method2(r, n) == oracle_positives(s, r, n, method=2)

    @pytest.mark.parametrize("seed", SEEDS[:5])
    def test_method2_outside_or_farthest(self, seed):
        s = random_embedding_set(seed)
        miner = QuadrupletMiner(s)
        d = miner.distances
        for r in range(0, len(s), 7):
            try:
                q = miner.quadruplet(r, StrategyKind.METHOD2, np.random.default_rng(0))
            except DegenerateDatasetError:
                continue
            for member, pool in ((q.pp, miner.positive_pool(r)), (q.pm, miner.positive_negative_pool(r))):
                assert d[r, member] > d[r, q.n] or d[r, member] == d[r, pool].max()

    @pytest.mark.parametrize("c", [0.3, 3.7, 1e-3, 2.0])
    @pytest.mark.parametrize("grid", [False, True])
    @pytest.mark.parametrize("seed", SEEDS[:4])
    def test_selection_is_scale_invariant(self, seed, grid, c):
        s = random_embedding_set(seed, grid)
        base, scaled = QuadrupletMiner(s), QuadrupletMiner(s.scaled(c))
        for r in range(len(s)):
            for kind in (StrategyKind.METHOD1, StrategyKind.METHOD2):
                try:
                    expected = base.quadruplet(r, kind, np.random.default_rng(0))
                except DegenerateDatasetError:
                    continue
                assert scaled.quadruplet(r, kind, np.random.default_rng(0)) == expected

    def test_tied_positives_survive_rescaling(self):
        # rows 1 and 2 are both 0.5 from the negative, up to rounding of 0.3 and 0.4
        s = EmbeddingSet(
            embeddings=[[0.0, 0.0], [0.5, 0.4], [0.2, 0.5], [0.2, 0.0], [0.0, 0.3], [0.3, 0.6]],
            coarse=[0, 0, 0, 1, 0, 0], fine=[0, 0, 0, 2, 1, 1], ids=range(6),
        )
        for c in (1.0, 0.3, 3.7, 1e-3):
            miner = QuadrupletMiner(s.scaled(c))
            n = miner.hardest_negative(0)
            assert n == 3
            assert miner.positives_method1(0, n)[0] == 1
            assert miner.positives_method2(0, n)[0] == 2


class TestBatch:
    def test_single_quadruplet_on_fixture(self, six_points):
        strategy = MiningStrategy(kind=StrategyKind.METHOD2)
        expected = {0: (0, 1, 3, 4), 1: (1, 2, 3, 4), 2: (2, 1, 3, 4)}
        drawn = set()
        for seed in range(40):
            batch = build_quadruplet_batch(six_points, 1, strategy, np.random.default_rng(seed))
            q = batch.quads[0]
            assert q.as_tuple() == expected[q.r]
            drawn.add(q.r)
        assert 0 in drawn

    @pytest.mark.parametrize("kind", list(StrategyKind))
    def test_every_quadruplet_is_valid(self, kind):
        s = random_embedding_set(7)
        batch = build_quadruplet_batch(s, 32, MiningStrategy(kind=kind), np.random.default_rng(1))
        assert len(batch) == 32
        assert all(q.is_valid(s) for q in batch.quads)

    def test_references_distinct_when_batch_fits(self):
        s = random_embedding_set(2)
        batch = build_quadruplet_batch(s, 40, MiningStrategy(), np.random.default_rng(3))
        refs = [q.r for q in batch.quads]
        assert len(set(refs)) == len(refs)

    def test_oversized_batch_draws_with_replacement(self, six_points):
        batch = build_quadruplet_batch(six_points, 20, MiningStrategy(kind=StrategyKind.RANDOM),
                                       np.random.default_rng(0))
        assert len(batch) == 20
        assert {q.r for q in batch.quads} <= {0, 1, 2}

    @pytest.mark.parametrize("kind", list(StrategyKind))
    def test_same_seed_same_batches(self, kind):
        s = random_embedding_set(5)
        strategy = MiningStrategy(kind=kind)
        rng_a, rng_b = np.random.default_rng(9), np.random.default_rng(9)
        for _ in range(3):
            a = build_quadruplet_batch(s, 16, strategy, rng_a)
            b = build_quadruplet_batch(s, 16, strategy, rng_b)
            assert np.array_equal(a.as_array(), b.as_array())

    def test_retry_budget_exhausted(self):
        s = EmbeddingSet(embeddings=[[0.0], [1.0], [2.0], [3.0]], coarse=[0, 0, 1, 1], fine=[0, 1, 2, 3],
                         ids=[0, 1, 2, 3])
        with pytest.raises(DegenerateDatasetError):
            build_quadruplet_batch(s, 2, MiningStrategy(), np.random.default_rng(0))

    def test_retry_budget_outlasts_one_pass(self, six_points):
        # three usable references, so the fourth slot burns the whole budget
        with pytest.raises(DegenerateDatasetError, match="3 of 4 quadruplets after 41 rejected"):
            build_quadruplet_batch(six_points, 4, MiningStrategy(), np.random.default_rng(0))

    def test_batch_of_every_row(self):
        usable = EmbeddingSet(embeddings=np.arange(16, dtype=float).reshape(8, 2),
                              coarse=[0, 0, 0, 0, 1, 1, 1, 1], fine=[0, 0, 1, 1, 2, 2, 3, 3], ids=range(8))
        batch = build_quadruplet_batch(usable, 8, MiningStrategy(kind=StrategyKind.RANDOM),
                                       np.random.default_rng(0))
        assert sorted(q.r for q in batch.quads) == list(range(8))

    def test_batch_records_snapshot(self, six_points):
        batch = build_quadruplet_batch(six_points, 2, MiningStrategy(), np.random.default_rng(0))
        assert batch.source == six_points.snapshot_id
