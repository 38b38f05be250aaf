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
from app.core.errors import ConfigurationError
from app.ml.metrics import evaluate
from app.ml.trainer import embed_dataset
from app.storage import append_eval_rows, eval_row, load_checkpoint, load_embeddings

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Recall@K and NMI of an embedding set")
    add_common_flags(parser)
    parser.add_argument("--embeddings", default=None, help="Embedding file to evaluate")
    parser.add_argument("--checkpoint", default=None, help="Checkpoint to embed the configured dataset with")
    parser.add_argument(
        "--split", choices=("test", "train", "all"), default="test",
        help="Which part of the dataset to embed with --checkpoint",
    )
    parser.add_argument("--method", default=None, help="Row label; default from the config")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    """Append one ``method, R@K..., NMI`` row to eval.csv in the run directory."""
    config = load_config(args)
    embeddings_path = args.embeddings or config.embeddings_path
    if embeddings_path is not None:
        snapshot = load_embeddings(embeddings_path)
    elif args.checkpoint is not None:
        ckpt = load_checkpoint(args.checkpoint)
        dataset = load_source_dataset(config)
        if args.split != "all":
            _, train_set, test_set = zero_shot(config, dataset)
            dataset = test_set if args.split == "test" else train_set
        snapshot = embed_dataset(ckpt.params(), dataset, ckpt.config.normalize_embeddings)
    else:
        raise ConfigurationError("eval needs --embeddings, an embeddings_path config, or --checkpoint")

    report = evaluate(snapshot, config.eval_ks, seed=config.seed)
    run_dir = run_directory(config, "eval")
    echo_config(run_dir, config, args)
    row = eval_row(args.method or config.method_label(), report, config.eval_ks)
    append_eval_rows([row], config.eval_ks, run_dir.eval_path)
    print(",".join(row))
    return EXIT_OK
