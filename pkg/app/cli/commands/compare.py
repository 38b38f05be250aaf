import argparse
import csv
import logging
from typing import Dict, List, Tuple

import numpy as np

from app.cli.common import (
    EXIT_OK,
    add_common_flags,
    echo_config,
    load_config,
    load_source_dataset,
    run_directory,
    zero_shot,
)
from app.ml.metrics import evaluate
from app.ml.trainer import embed_dataset, train
from app.models.experiment import ExperimentConfig
from app.models.params import Objective, StrategyKind, TrainConfig
from app.models.report import EvalReport

logger = logging.getLogger(__name__)

TRIPLET_GLOBAL_LABEL = "triplet_global"


def register(subparsers) -> None:
    parser = subparsers.add_parser("compare", help="Train every mining strategy over several seeds")
    add_common_flags(parser)
    parser.set_defaults(handler=run)


def _variants(config: ExperimentConfig, seed: int) -> List[Tuple[str, TrainConfig]]:
    base = config.resolved_train(seed)
    variants = []
    for kind in config.compare.strategies:
        variants.append((kind.value, base.copy(update={
            "strategy": base.strategy.copy(update={"kind": kind}),
            "objective": Objective.COMBINED,
        })))
    if config.compare.include_triplet_global:
        variants.append((TRIPLET_GLOBAL_LABEL, base.copy(update={
            "strategy": base.strategy.copy(update={"kind": StrategyKind.RANDOM}),
            "objective": Objective.TRIPLET_GLOBAL,
        })))
    return variants


def _row(label: str, seed: str, values: List[float]) -> List[str]:
    return [label, seed] + [f"{v:.6f}" for v in values]


def run(args: argparse.Namespace) -> int:
    """
    Train each variant once per seed on the same split and evaluate the held-out classes.

    compare.csv gets one row per (variant, seed) followed by one mean row per variant.
    """
    config = load_config(args)
    dataset = load_source_dataset(config)
    _, train_set, test_set = zero_shot(config, dataset)
    ks = config.eval_ks

    scores: Dict[str, List[List[float]]] = {}
    rows = []
    for seed in config.compare.seeds:
        for label, cfg in _variants(config, seed):
            result = train(train_set, cfg)
            report: EvalReport = evaluate(
                embed_dataset(result.params, test_set, cfg.normalize_embeddings), ks, seed=seed
            )
            values = [report.recall_at[k] for k in ks] + [report.nmi]
            scores.setdefault(label, []).append(values)
            rows.append(_row(label, str(seed), values))
            logger.info("compare %s seed %d: R@%d=%.4f NMI=%.4f", label, seed, ks[0], values[0], values[-1])

    means = {label: np.mean(np.array(v), axis=0).tolist() for label, v in scores.items()}
    rows += [_row(label, "mean", m) for label, m in means.items()]

    run_dir = run_directory(config, "compare")
    echo_config(run_dir, config, args)
    path = run_dir.root / "compare.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "seed"] + [f"R@{k}" for k in ks] + ["NMI"])
        w.writerows(rows)
    for label, m in means.items():
        print(",".join(_row(label, "mean", m)))
    return EXIT_OK
