"""
Gradient Checking
Central finite-difference oracle for verifying analytic gradients
"""

from typing import Callable

import numpy as np

DEFAULT_STEP = 1e-5


def numerical_gradient(func: Callable[[], float], x: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Central differences of func() with respect to every entry of x.

    x is perturbed in place and restored; func must read the current x.
    """
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    grad_flat = grad.reshape(-1)
    for j in range(flat.size):
        original = flat[j]
        flat[j] = original + step
        f_plus = func()
        flat[j] = original - step
        f_minus = func()
        flat[j] = original
        grad_flat[j] = (f_plus - f_minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, tiny: float = 1e-12) -> float:
    """||a - n|| / max(||a||, ||n||); 0 when both vanish"""
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if scale < tiny:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)
