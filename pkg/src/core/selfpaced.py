"""
Self-Paced Module
Capped likelihoods, selection variables and the lambda/epsilon pace thresholds
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np

from src.core.forest import DENSITY_FLOOR
from src.errors import EmptySelectionError, InvalidConfigError, ShapeMismatchError

# Added to -log(q) so the boundary sample itself passes log p + lambda > 0
LAMBDA_MARGIN = 1e-9


@dataclass
class SelectionState:
    """Binary selection variables plus the thresholds that produced them"""
    v: np.ndarray
    lam: float
    epsilon: float
    pace_index: int = 0
    excluded: np.ndarray = field(default=None)

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=bool)
        if self.excluded is None:
            self.excluded = np.zeros_like(self.v)
        self.excluded = np.asarray(self.excluded, dtype=bool)

    @property
    def selected_count(self) -> int:
        return int(self.v.sum())

    @property
    def excluded_count(self) -> int:
        return int(self.excluded.sum())

    @classmethod
    def all_selected(cls, n: int) -> 'SelectionState':
        return cls(v=np.ones(n, dtype=bool), lam=math.inf, epsilon=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'v': [int(x) for x in self.v],
            'excluded': [int(x) for x in self.excluded],
            'lambda': float(self.lam),
            'epsilon': float(self.epsilon),
            'pace_index': int(self.pace_index),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SelectionState':
        return cls(
            v=np.asarray(data['v'], dtype=bool),
            lam=float(data['lambda']),
            epsilon=float(data['epsilon']),
            pace_index=int(data['pace_index']),
            excluded=np.asarray(data['excluded'], dtype=bool),
        )


def capped_likelihood(p, epsilon: float):
    """p if p > epsilon, else 0 (the p == epsilon boundary is capped)"""
    p = np.asarray(p, dtype=np.float64)
    capped = np.where(p > epsilon, p, 0.0)
    return float(capped) if capped.ndim == 0 else capped


def select(log_likelihoods: np.ndarray, likelihoods: np.ndarray, lam: float, epsilon: float) -> np.ndarray:
    """v_i = 1 iff p_i > epsilon and log p_i + lambda > 0"""
    log_likelihoods = np.asarray(log_likelihoods, dtype=np.float64)
    likelihoods = np.asarray(likelihoods, dtype=np.float64)
    if log_likelihoods.shape != likelihoods.shape:
        raise ShapeMismatchError(
            f"Got {log_likelihoods.shape} log-likelihoods for {likelihoods.shape} likelihoods"
        )
    return (likelihoods > epsilon) & (log_likelihoods + lam > 0)


def _order_statistic(sorted_values: np.ndarray, fraction: float) -> float:
    """Value at rank ceil(fraction * N) (1-based) of an ascending array"""
    rank = max(1, math.ceil(fraction * sorted_values.size - 1e-9))
    return float(sorted_values[min(rank, sorted_values.size) - 1])


def schedule_thresholds(likelihoods: np.ndarray, target_fraction: float,
                        exclude_fraction: float) -> Tuple[float, float]:
    """Quantile-based (lambda, epsilon) for one pace.

    epsilon is the exclude_fraction quantile of the likelihoods (0 when
    exclude_fraction is 0); lambda = -log q + LAMBDA_MARGIN with q the
    likelihood of the ceil(target_fraction * N)-th most likely sample, so
    select() keeps that many samples on distinct likelihoods.
    """
    values = np.asarray(likelihoods, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptySelectionError("Cannot schedule thresholds without likelihoods")
    if not 0.0 < target_fraction <= 1.0:
        raise InvalidConfigError(f"target_fraction must be in (0, 1]: {target_fraction}")
    if not 0.0 <= exclude_fraction < 1.0:
        raise InvalidConfigError(f"exclude_fraction must be in [0, 1): {exclude_fraction}")

    ascending = np.sort(values)
    epsilon = _order_statistic(ascending, exclude_fraction) if exclude_fraction > 0 else 0.0

    keep = max(1, math.ceil(target_fraction * values.size - 1e-9))
    q = float(ascending[values.size - keep])
    lam = -math.log(max(q, DENSITY_FLOOR)) + LAMBDA_MARGIN
    return lam, epsilon


def update_selection(log_likelihoods: np.ndarray, likelihoods: np.ndarray, lam: float,
                     epsilon: float, pace_index: int = 0) -> SelectionState:
    """Select under fixed thresholds and record which samples the cap excludes"""
    v = select(log_likelihoods, likelihoods, lam, epsilon)
    excluded = np.asarray(likelihoods, dtype=np.float64) <= epsilon
    return SelectionState(v=v, lam=lam, epsilon=epsilon, pace_index=pace_index, excluded=excluded)
