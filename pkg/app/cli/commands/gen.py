import argparse
import logging

from app.cli.common import EXIT_OK, add_common_flags, echo_config, load_config, run_directory
from app.core.errors import ConfigurationError
from app.data import generate_synthetic
from app.storage import load_dataset, save_dataset

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen", help="Generate a synthetic hierarchical dataset")
    add_common_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    """Generate the configured synthetic dataset and write it to the run directory."""
    config = load_config(args)
    if config.synthetic is None:
        raise ConfigurationError("gen needs a synthetic data source")
    dataset = generate_synthetic(config.synthetic)
    run_dir = run_directory(config, "gen")
    echo_config(run_dir, config, args)
    save_dataset(dataset, run_dir.dataset_path)
    if load_dataset(run_dir.dataset_path) != dataset:
        raise ConfigurationError(f"{run_dir.dataset_path} does not reload to the generated dataset")

    h = dataset.hierarchy
    print(
        f"wrote {len(dataset)} samples, {h.k1} coarse / {h.k2} fine classes, "
        f"n={dataset.input_dim} to {run_dir.dataset_path}"
    )
    return EXIT_OK
