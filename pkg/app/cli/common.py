"""Helpers shared by the subcommands: config loading, data sources, exit codes."""
import argparse
import logging
from pathlib import Path
from typing import Tuple

from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import ConfigurationError, DatasetValidationError
from app.data import apply_split, generate_synthetic, split_zero_shot
from app.models.dataset import Dataset, ZeroShotSplit
from app.models.experiment import ExperimentConfig
from app.storage import RunDirectory, load_dataset

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Parse --config (if any) and apply the --seed / --out overrides."""
    try:
        config = ExperimentConfig.parse_file(args.config) if args.config else ExperimentConfig()
    except ValidationError:
        raise
    except ValueError as e:
        # undecodable bytes or broken JSON
        raise ConfigurationError(f"cannot read config {args.config}: {e}") from None
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.out is not None:
        update["output_dir"] = Path(args.out)
    return config.copy(update=update) if update else config


def run_directory(config: ExperimentConfig, command: str) -> RunDirectory:
    root = config.output_dir or Path(settings.OUTPUT_DIR) / command
    return RunDirectory(root).ensure()


def echo_config(run: RunDirectory, config: ExperimentConfig, args: argparse.Namespace) -> None:
    run.echo_config(config.json(indent=2), source=args.config)


def load_source_dataset(config: ExperimentConfig) -> Dataset:
    """The raw dataset of a synthetic or dataset-file source."""
    if config.embeddings_path is not None:
        raise ConfigurationError("this command needs raw samples; the config names an embeddings file")
    if config.dataset_path is not None:
        return load_dataset(config.dataset_path)
    return generate_synthetic(config.synthetic)


def zero_shot(config: ExperimentConfig, dataset: Dataset) -> Tuple[ZeroShotSplit, Dataset, Dataset]:
    """Split by fine class and check that nothing leaks between the halves."""
    split = split_zero_shot(dataset, config.split.fine_order, config.split.train_count)
    train_set, test_set = apply_split(dataset, split)
    leaked = set(train_set.fine_ids()) & set(test_set.fine_ids())
    if leaked:
        raise DatasetValidationError(f"zero-shot split leaks fine classes {sorted(leaked)}")
    logger.info(
        "zero-shot split: %d train classes (%d samples), %d test classes (%d samples)",
        len(split.train_fine), len(train_set), len(split.test_fine), len(test_set),
    )
    return split, train_set, test_set


def add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="JSON experiment config")
    parser.add_argument("--out", type=Path, default=None, help="Output directory of this run")
    parser.add_argument("--seed", type=int, default=None, help="Override the config seed")