import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from app.core.errors import NonFiniteLossError
from app.ml.encoder import (
    EncoderParams,
    QuadrupletInputs,
    backward,
    batch_loss,
    embed,
    init_params,
    sgd_momentum_step,
)
from app.ml.metrics import evaluate
from app.ml.mining import QuadrupletMiner
from app.models.dataset import Dataset
from app.models.embedding import EmbeddingSet
from app.models.params import MiningStrategy, StrategyKind, TrainConfig
from app.models.report import EpochMetrics

logger = logging.getLogger(__name__)

PROBE_SEED_OFFSET = 7919


@dataclass
class TrainResult:
    params: EncoderParams
    history: List[EpochMetrics] = field(default_factory=list)
    initial_probe_loss: float = 0.0

    @property
    def final_probe_loss(self) -> float:
        return self.history[-1].probe_loss if self.history else self.initial_probe_loss


def initial_params(dataset: Dataset, cfg: TrainConfig) -> EncoderParams:
    h = dataset.hierarchy
    return init_params(dataset.input_dim, cfg.hidden_sizes, cfg.embedding_dim, h.k1, h.k2, cfg.seed)


def embed_dataset(
    params: EncoderParams,
    dataset: Dataset,
    normalize: bool = False,
    snapshot_id: int = 0,
) -> EmbeddingSet:
    """Snapshot of every sample of ``dataset`` under ``params``."""
    return EmbeddingSet(
        embeddings=embed(params, dataset.features(), normalize),
        coarse=dataset.coarse_labels(),
        fine=dataset.fine_labels(),
        ids=dataset.ids(),
        snapshot_id=snapshot_id,
    )


class Trainer:
    """
    Runs the mining / forward / backward / step loop for one configuration.

    The embedding snapshot used for mining is recomputed every
    ``snapshot_refresh_every`` epochs. A fixed random-strategy probe batch,
    mined once from the raw inputs, tracks descent independently of the
    mining strategy.
    """

    def __init__(
        self,
        dataset: Dataset,
        cfg: TrainConfig,
        eval_set: Optional[Dataset] = None,
        on_epoch: Optional[Callable[[EpochMetrics], None]] = None,
    ):
        self.dataset = dataset
        self.cfg = cfg
        self.eval_set = eval_set
        self.on_epoch = on_epoch
        self._x = dataset.features()
        self._coarse = dataset.coarse_labels()
        self._fine = dataset.fine_labels()

    def _inputs(self, idx: np.ndarray) -> QuadrupletInputs:
        return QuadrupletInputs.gather(self._x, self._coarse, self._fine, idx)

    def _probe_batch(self) -> QuadrupletInputs:
        raw = EmbeddingSet(
            embeddings=self._x, coarse=self._coarse, fine=self._fine, ids=self.dataset.ids()
        )
        strategy = MiningStrategy(kind=StrategyKind.RANDOM, rng_seed=self.cfg.seed + PROBE_SEED_OFFSET)
        rng = np.random.default_rng(strategy.rng_seed)
        size = min(self.cfg.batch_size, len(self.dataset))
        return self._inputs(QuadrupletMiner(raw).batch(size, strategy, rng).as_array())

    def _loss(self, params: EncoderParams, batch: QuadrupletInputs) -> float:
        cfg = self.cfg
        return batch_loss(
            params, batch, cfg.hyper, cfg.objective, cfg.normalize_embeddings, cfg.classify_all_streams
        )

    def steps_per_epoch(self) -> int:
        if self.cfg.batches_per_epoch is not None:
            return self.cfg.batches_per_epoch
        return math.ceil(len(self.dataset) / self.cfg.batch_size)

    def run(self, params: Optional[EncoderParams] = None) -> TrainResult:
        cfg = self.cfg
        params = params or initial_params(self.dataset, cfg)
        velocity = np.zeros(len(params))
        rng = np.random.default_rng(cfg.strategy.rng_seed)
        probe = self._probe_batch()
        result = TrainResult(params=params, initial_probe_loss=self._loss(params, probe))
        miner: Optional[QuadrupletMiner] = None

        for epoch in range(cfg.epochs):
            if epoch % cfg.snapshot_refresh_every == 0 or miner is None:
                snapshot = embed_dataset(params, self.dataset, cfg.normalize_embeddings, epoch)
                miner = QuadrupletMiner(snapshot)

            losses = []
            singular = 0
            for step in range(self.steps_per_epoch()):
                quads = miner.batch(cfg.batch_size, cfg.strategy, rng)
                out = backward(
                    params,
                    self._inputs(quads.as_array()),
                    cfg.hyper,
                    cfg.objective,
                    cfg.normalize_embeddings,
                    cfg.classify_all_streams,
                )
                if not np.isfinite(out.loss) or not np.all(np.isfinite(out.grad)):
                    raise NonFiniteLossError(epoch, step, out.loss)
                theta, velocity = sgd_momentum_step(
                    params.theta, out.grad, velocity, cfg.learning_rate, cfg.momentum
                )
                if not np.all(np.isfinite(theta)):
                    raise NonFiniteLossError(epoch, step, out.loss)
                params = params.replace(theta)
                losses.append(out.loss)
                singular += out.singular

            metrics = self._epoch_metrics(epoch, params, probe, losses, singular)
            result.history.append(metrics)
            logger.info(
                "epoch %d: loss=%.6f probe=%.6f%s",
                epoch, metrics.loss, metrics.probe_loss,
                "" if metrics.recall_at_1 is None
                else f" R@1={metrics.recall_at_1:.4f} NMI={metrics.nmi:.4f}",
            )
            if self.on_epoch is not None:
                self.on_epoch(metrics)

        result.params = params
        return result

    def _epoch_metrics(
        self,
        epoch: int,
        params: EncoderParams,
        probe: QuadrupletInputs,
        losses: List[float],
        singular: int,
    ) -> EpochMetrics:
        cfg = self.cfg
        recall_at_1 = nmi_value = None
        if self.eval_set is not None and cfg.eval_every and (epoch + 1) % cfg.eval_every == 0:
            snapshot = embed_dataset(params, self.eval_set, cfg.normalize_embeddings, epoch)
            report = evaluate(snapshot, [1], seed=cfg.seed)
            recall_at_1, nmi_value = report.recall_at[1], report.nmi
        return EpochMetrics(
            epoch=epoch,
            loss=float(np.mean(losses)),
            probe_loss=self._loss(params, probe),
            singular=singular,
            recall_at_1=recall_at_1,
            nmi=nmi_value,
        )


def train(
    dataset: Dataset,
    cfg: TrainConfig,
    eval_set: Optional[Dataset] = None,
    on_epoch: Optional[Callable[[EpochMetrics], None]] = None,
) -> TrainResult:
    """Train an encoder on ``dataset``; deterministic given ``cfg``."""
    return Trainer(dataset, cfg, eval_set, on_epoch).run()
