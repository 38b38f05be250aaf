from typing import Optional, Sequence, Tuple

from app.core.errors import ConfigurationError
from app.models.dataset import Dataset, ZeroShotSplit


def split_zero_shot(
    dataset: Dataset,
    ordered_fine_ids: Optional[Sequence[int]] = None,
    train_count: Optional[int] = None,
) -> ZeroShotSplit:
    """
    Leading ``train_count`` fine classes train, the rest are held out.

    Args:
        dataset: Source of the label hierarchy
        ordered_fine_ids: Every fine id of the hierarchy exactly once; ascending by default
        train_count: Number of training classes, 1 <= train_count < k2; half of k2 by default

    Returns:
        ZeroShotSplit: disjoint train/test fine-class lists
    """
    k2 = dataset.hierarchy.k2
    order = list(range(k2)) if ordered_fine_ids is None else [int(f) for f in ordered_fine_ids]
    if sorted(order) != list(range(k2)):
        raise ConfigurationError(f"fine order must list every fine id 0..{k2 - 1} exactly once")
    if train_count is None:
        train_count = k2 // 2
    if not 1 <= train_count < k2:
        raise ConfigurationError(f"train_count must be in [1, {k2 - 1}], got {train_count}")
    return ZeroShotSplit(train_fine=order[:train_count], test_fine=order[train_count:])


def subset(dataset: Dataset, fine_ids: Sequence[int]) -> Dataset:
    """Samples whose fine class is in ``fine_ids``; the hierarchy is kept whole."""
    keep = set(fine_ids)
    samples = [s for s in dataset.samples if s.fine in keep]
    if not samples:
        raise ConfigurationError(f"no samples carry fine ids {sorted(keep)}")
    return Dataset(samples=samples, hierarchy=dataset.hierarchy)


def apply_split(dataset: Dataset, split: ZeroShotSplit) -> Tuple[Dataset, Dataset]:
    """(train, test) datasets of a zero-shot split."""
    return subset(dataset, split.train_fine), subset(dataset, split.test_fine)
