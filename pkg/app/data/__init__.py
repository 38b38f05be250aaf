from .synthetic import generate_synthetic
from .splits import split_zero_shot, subset, apply_split

__all__ = ['generate_synthetic', 'split_zero_shot', 'subset', 'apply_split']
