"""
Evaluation Metrics
Mean absolute error and cumulative score CS(L)
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable

import numpy as np

from src.errors import ShapeMismatchError

CS_LEVELS = tuple(range(1, 11))


def _paired(predictions, truths):
    predictions = np.asarray(predictions, dtype=np.float64).ravel()
    truths = np.asarray(truths, dtype=np.float64).ravel()
    if predictions.shape != truths.shape:
        raise ShapeMismatchError(f"{predictions.shape[0]} predictions for {truths.shape[0]} truths")
    if predictions.size == 0:
        raise ShapeMismatchError("Metrics need at least one prediction")
    return predictions, truths


def mae(predictions, truths) -> float:
    """Mean absolute error"""
    predictions, truths = _paired(predictions, truths)
    return float(np.mean(np.abs(predictions - truths)))


def cs(predictions, truths, level: float) -> float:
    """Cumulative score: percentage of predictions with |prediction - truth| <= level"""
    predictions, truths = _paired(predictions, truths)
    return float(100.0 * np.count_nonzero(np.abs(predictions - truths) <= level) / predictions.size)


@dataclass
class Metrics:
    """MAE plus CS at each error level"""
    mae: float
    cs: Dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, float]:
        out = {'mae': self.mae}
        for level in sorted(self.cs):
            out[f"cs_{level}"] = self.cs[level]
        return out


def compute_metrics(predictions, truths, levels: Iterable[int] = CS_LEVELS) -> Metrics:
    return Metrics(
        mae=mae(predictions, truths),
        cs={int(level): cs(predictions, truths, level) for level in levels},
    )
