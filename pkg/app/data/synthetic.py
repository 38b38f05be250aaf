import logging

import numpy as np

from app.models.dataset import Dataset, LabeledSample, LabelHierarchy, SyntheticSpec

logger = logging.getLogger(__name__)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """
    Gaussian hierarchy: coarse centres, fine centres scattered around them,
    samples scattered around their fine centre.

    Centres live in the first ``signal_dim`` coordinates; the noise is
    isotropic over all ``input_dim`` of them. Fine ids are numbered coarse
    by coarse, so fine f belongs to coarse f // fines_per_coarse.
    Deterministic given ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.input_dim
    signal = np.zeros(n)
    signal[:n if spec.signal_dim is None else min(spec.signal_dim, n)] = 1.0
    coarse_centers = rng.normal(size=(spec.k1, n)) * spec.coarse_center_scale * signal

    parent = {}
    samples = []
    for c in range(spec.k1):
        for j in range(spec.fines_per_coarse):
            fine = c * spec.fines_per_coarse + j
            parent[fine] = c
            center = coarse_centers[c] + rng.normal(size=n) * spec.fine_center_scale * signal
            points = center + rng.normal(size=(spec.samples_per_fine, n)) * spec.noise_scale
            for x in points:
                samples.append(LabeledSample(id=len(samples), x=x.tolist(), coarse=c, fine=fine))

    hierarchy = LabelHierarchy(k1=spec.k1, k2=spec.k2, parent=parent)
    logger.debug("generated %d samples over %d fine classes", len(samples), spec.k2)
    return Dataset(samples=samples, hierarchy=hierarchy)
