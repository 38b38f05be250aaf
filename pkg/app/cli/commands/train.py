import argparse
import logging

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
from app.storage import append_eval_rows, eval_row, save_checkpoint, write_metrics_csv

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Train the encoder on the zero-shot training split")
    add_common_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    """
    Train on the training classes, then evaluate the held-out classes.

    Writes config echo, metrics.csv, checkpoint.json and one eval.csv row.
    """
    config = load_config(args)
    dataset = load_source_dataset(config)
    _, train_set, test_set = zero_shot(config, dataset)
    cfg = config.resolved_train()

    run_dir = run_directory(config, "train")
    echo_config(run_dir, config, args)
    result = train(train_set, cfg, eval_set=test_set if cfg.eval_every else None)
    write_metrics_csv(result.history, run_dir.metrics_path)
    save_checkpoint(result.params, cfg, run_dir.checkpoint_path)

    report = evaluate(
        embed_dataset(result.params, test_set, cfg.normalize_embeddings),
        config.eval_ks,
        seed=config.seed,
    )
    row = eval_row(config.method_label(), report, config.eval_ks)
    append_eval_rows([row], config.eval_ks, run_dir.eval_path)
    print(
        f"trained {cfg.epochs} epochs ({cfg.strategy.kind.value}); "
        f"probe loss {result.initial_probe_loss:.6f} -> {result.final_probe_loss:.6f}"
    )
    print(",".join(row))
    return EXIT_OK
