from .config import settings
from .errors import (
    QuadMetricError,
    MalformedInputError,
    ConfigurationError,
    DegenerateDatasetError,
    DataFormatError,
    DatasetValidationError,
    EmptyDatasetError,
    InsufficientDataError,
    NonFiniteLossError,
)
from .geometry import l2_distance, distance_matrix, pairwise_distances, snap_distances

__all__ = [
    'settings',
    'QuadMetricError',
    'MalformedInputError',
    'ConfigurationError',
    'DegenerateDatasetError',
    'DataFormatError',
    'DatasetValidationError',
    'EmptyDatasetError',
    'InsufficientDataError',
    'NonFiniteLossError',
    'l2_distance',
    'distance_matrix',
    'pairwise_distances',
    'snap_distances',
]
