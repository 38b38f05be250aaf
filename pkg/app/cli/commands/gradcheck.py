import argparse
import logging
from typing import Tuple

import numpy as np

from app.cli.common import EXIT_FAILED, EXIT_OK, add_common_flags, echo_config, load_config, run_directory
from app.core.errors import ConfigurationError
from app.data import generate_synthetic
from app.ml.encoder import EncoderParams, QuadrupletInputs, grad_check, init_params, kink_margin
from app.ml.mining import QuadrupletMiner
from app.models.dataset import SyntheticSpec
from app.models.embedding import EmbeddingSet
from app.models.experiment import GradCheckConfig
from app.models.params import HyperParams, MiningStrategy, Objective, StrategyKind

logger = logging.getLogger(__name__)

MAX_INSTANCE_ATTEMPTS = 50


def register(subparsers) -> None:
    parser = subparsers.add_parser("gradcheck", help="Compare analytic gradients with finite differences")
    add_common_flags(parser)
    parser.add_argument("--threshold", type=float, default=None, help="Max tolerated relative error")
    parser.add_argument(
        "--inject-fault", action="store_true",
        help="Double the largest analytic gradient coordinate; the check must then fail",
    )
    parser.set_defaults(handler=run)


def gradcheck_instance(
    gc: GradCheckConfig,
    hyper: HyperParams,
    seed: int,
    objective: Objective = Objective.COMBINED,
    normalize: bool = False,
) -> Tuple[EncoderParams, QuadrupletInputs, int]:
    """
    A small seeded (params, batch) pair kept away from every kink.

    Seeds ``seed, seed+1, ...`` are tried until the kink margin reaches
    ``gc.min_kink_margin``; the seed actually used is returned.
    """
    for attempt in range(MAX_INSTANCE_ATTEMPTS):
        s = seed + attempt
        dataset = generate_synthetic(SyntheticSpec(
            k1=gc.k1,
            fines_per_coarse=gc.fines_per_coarse,
            samples_per_fine=3,
            input_dim=gc.input_dim,
            coarse_center_scale=4.0,
            fine_center_scale=2.0,
            noise_scale=1.0,
            seed=s,
        ))
        raw = EmbeddingSet(
            embeddings=dataset.features(),
            coarse=dataset.coarse_labels(),
            fine=dataset.fine_labels(),
            ids=dataset.ids(),
        )
        rng = np.random.default_rng(s)
        idx = QuadrupletMiner(raw).batch(
            gc.batch_size, MiningStrategy(kind=StrategyKind.RANDOM, rng_seed=s), rng
        ).as_array()
        batch = QuadrupletInputs.gather(raw.embeddings, raw.coarse, raw.fine, idx)
        h = dataset.hierarchy
        params = init_params(gc.input_dim, gc.hidden_sizes, gc.embedding_dim, h.k1, h.k2, s)
        if kink_margin(params, batch, hyper, objective, normalize) >= gc.min_kink_margin:
            return params, batch, s
        logger.debug("seed %d too close to a kink, retrying", s)
    raise ConfigurationError(
        f"no instance with kink margin >= {gc.min_kink_margin} in {MAX_INSTANCE_ATTEMPTS} seeds"
    )


def _double_largest(grad: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(grad)))
    grad[i] = 2.0 * grad[i] if grad[i] != 0 else 1.0
    return grad


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    gc = config.gradcheck
    threshold = args.threshold if args.threshold is not None else gc.threshold
    cfg = config.resolved_train()
    params, batch, used_seed = gradcheck_instance(
        gc, config.hyper, config.seed, cfg.objective, cfg.normalize_embeddings
    )
    result = grad_check(
        params,
        batch,
        config.hyper,
        step=gc.step,
        objective=cfg.objective,
        normalize=cfg.normalize_embeddings,
        classify_all_streams=cfg.classify_all_streams,
        corrupt=_double_largest if args.inject_fault else None,
    )
    run_dir = run_directory(config, "gradcheck")
    echo_config(run_dir, config, args)

    passed = result.max_rel_error <= threshold
    print(
        f"{'PASS' if passed else 'FAIL'} max relative error {result.max_rel_error:.3e} "
        f"(threshold {threshold:.1e}) over {result.coords_checked} coordinates, seed {used_seed}; "
        f"worst {result.worst_name} [{result.worst_index}] "
        f"analytic={result.analytic:.9e} numeric={result.numeric:.9e}"
    )
    if not passed:
        logger.error("gradient check failed at %s[%d]", result.worst_name, result.worst_index)
        return EXIT_FAILED
    return EXIT_OK
