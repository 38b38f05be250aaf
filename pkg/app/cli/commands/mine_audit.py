import argparse
import logging

import numpy as np

from app.cli.common import EXIT_OK, add_common_flags, echo_config, load_config, load_source_dataset, run_directory
from app.core.errors import ConfigurationError, DegenerateDatasetError
from app.ml.mining import QuadrupletMiner
from app.ml.trainer import embed_dataset
from app.models.embedding import EmbeddingSet
from app.models.params import StrategyKind
from app.storage import load_checkpoint, load_embeddings, quadruplet_record, write_quadruplet_dump

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("mine-audit", help="Dump mined quadruplets with their distances")
    add_common_flags(parser)
    parser.add_argument("--strategy", choices=[k.value for k in StrategyKind], default=None)
    parser.add_argument("--count", type=int, default=None, help="Number of references to mine")
    parser.add_argument("--checkpoint", default=None, help="Mine in this encoder's embedding space")
    parser.set_defaults(handler=run)


def _snapshot(args: argparse.Namespace, config) -> EmbeddingSet:
    if config.embeddings_path is not None:
        return load_embeddings(config.embeddings_path)
    dataset = load_source_dataset(config)
    if args.checkpoint is not None:
        ckpt = load_checkpoint(args.checkpoint)
        return embed_dataset(ckpt.params(), dataset, ckpt.config.normalize_embeddings)
    return EmbeddingSet(
        embeddings=dataset.features(),
        coarse=dataset.coarse_labels(),
        fine=dataset.fine_labels(),
        ids=dataset.ids(),
    )


def run(args: argparse.Namespace) -> int:
    """
    Mine ``count`` quadruplets from uniformly drawn references.

    References that cannot form a quadruplet are written as comment records
    instead of aborting the dump.
    """
    config = load_config(args)
    kind = StrategyKind(args.strategy) if args.strategy else config.train.strategy.kind
    count = config.audit_count if args.count is None else args.count
    if count < 1:
        raise ConfigurationError(f"--count must be >= 1, got {count}")
    snapshot = _snapshot(args, config)
    miner = QuadrupletMiner(snapshot)
    rng = np.random.default_rng(config.seed)

    lines = []
    degenerate = 0
    for _ in range(count):
        r = int(rng.integers(len(snapshot)))
        try:
            q = miner.quadruplet(r, kind, rng)
        except DegenerateDatasetError as e:
            degenerate += 1
            lines.append(f"# degenerate r={snapshot.ids[r]}: {e}")
            continue
        problems = q.violations(snapshot)
        if problems:
            raise DegenerateDatasetError(f"mined an invalid quadruplet {q.as_tuple()}: {problems}")
        lines.append(quadruplet_record(q, snapshot, miner.distances))

    run_dir = run_directory(config, "mine-audit")
    echo_config(run_dir, config, args)
    write_quadruplet_dump(lines, kind.value, run_dir.dump_path)
    print(f"wrote {count - degenerate} quadruplets ({degenerate} degenerate references) to {run_dir.dump_path}")
    return EXIT_OK
