"""
Utility functions for SPDRF
Contains metrics, pace reports, gradient checking and file helpers
"""

from .metrics import Metrics, compute_metrics, mae, cs
from .report import PaceRecord, PaceReport, WorstCase
from .gradcheck import numerical_gradient, relative_error
from .io_utils import atomic_write

__all__ = [
    'Metrics',
    'compute_metrics',
    'mae',
    'cs',
    'PaceRecord',
    'PaceReport',
    'WorstCase',
    'numerical_gradient',
    'relative_error',
    'atomic_write',
]
