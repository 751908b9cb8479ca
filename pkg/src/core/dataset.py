"""
Dataset Module
Tabular regression datasets: CSV ingestion, normalization statistics
and the synthetic noisy-regression benchmark generator
"""

import os
import re
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import SyntheticSpec
from src.errors import BadHeaderError, EmptyDatasetError, ParseError, ShapeMismatchError, NonFiniteInputError
from src.utils.io_utils import atomic_write

FEATURE_COLUMN = re.compile(r"^f(\d+)$")


@dataclass
class Sample:
    """One input-output pair"""
    x: np.ndarray
    t: float
    id: int
    is_outlier: Optional[bool] = None


@dataclass
class NormalizationStats:
    """Per-feature and target mean/std used to standardize a dataset"""
    feature_mean: np.ndarray
    feature_std: np.ndarray
    target_mean: float
    target_std: float

    @classmethod
    def from_arrays(cls, features: np.ndarray, targets: np.ndarray) -> 'NormalizationStats':
        feature_std = features.std(axis=0)
        target_std = float(targets.std())
        return cls(
            feature_mean=features.mean(axis=0),
            feature_std=np.where(feature_std > 0, feature_std, 1.0),
            target_mean=float(targets.mean()),
            target_std=target_std if target_std > 0 else 1.0,
        )

    def normalize_features(self, features: np.ndarray) -> np.ndarray:
        return (features - self.feature_mean) / self.feature_std

    def normalize_targets(self, targets: np.ndarray) -> np.ndarray:
        return (targets - self.target_mean) / self.target_std

    def denormalize_targets(self, targets: np.ndarray) -> np.ndarray:
        return targets * self.target_std + self.target_mean

    def to_dict(self) -> Dict[str, Any]:
        return {
            'feature_mean': [float(v) for v in self.feature_mean],
            'feature_std': [float(v) for v in self.feature_std],
            'target_mean': float(self.target_mean),
            'target_std': float(self.target_std),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'NormalizationStats':
        return cls(
            feature_mean=np.asarray(data['feature_mean'], dtype=np.float64),
            feature_std=np.asarray(data['feature_std'], dtype=np.float64),
            target_mean=float(data['target_mean']),
            target_std=float(data['target_std']),
        )


class Dataset:
    """Feature matrix, targets, unique ids and normalization stats"""

    def __init__(self, features: np.ndarray, targets: np.ndarray,
                 ids: Optional[np.ndarray] = None, is_outlier: Optional[np.ndarray] = None,
                 stats: Optional[NormalizationStats] = None):
        self.features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        self.targets = np.asarray(targets, dtype=np.float64).ravel()
        n = self.targets.shape[0]
        if n == 0:
            raise EmptyDatasetError("Dataset has no samples")
        if self.features.shape[0] != n:
            raise ShapeMismatchError(f"{self.features.shape[0]} feature rows for {n} targets")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.targets))):
            raise NonFiniteInputError("Dataset contains NaN or infinite values")

        self.ids = np.arange(n, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
        if self.ids.shape != (n,) or np.unique(self.ids).size != n:
            raise ShapeMismatchError("Sample ids must be unique, one per sample")
        self.is_outlier = None if is_outlier is None else np.asarray(is_outlier, dtype=bool)
        self.stats = stats or NormalizationStats.from_arrays(self.features, self.targets)

    def __len__(self) -> int:
        return self.targets.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def samples(self) -> List[Sample]:
        flags = self.is_outlier if self.is_outlier is not None else [None] * len(self)
        return [
            Sample(x=self.features[i], t=float(self.targets[i]), id=int(self.ids[i]),
                   is_outlier=None if flags[i] is None else bool(flags[i]))
            for i in range(len(self))
        ]

    def normalized(self, stats: Optional[NormalizationStats] = None) -> Tuple[np.ndarray, np.ndarray]:
        """(features, targets) standardized with the given (default: own) stats"""
        stats = stats or self.stats
        if stats.feature_mean.shape[0] != self.feature_dim:
            raise ShapeMismatchError(
                f"Normalization expects {stats.feature_mean.shape[0]} features, dataset has {self.feature_dim}"
            )
        return stats.normalize_features(self.features), stats.normalize_targets(self.targets)

    def to_frame(self, target_column: str = "t") -> pd.DataFrame:
        frame = pd.DataFrame({'id': self.ids})
        for j in range(self.feature_dim):
            frame[f"f{j}"] = self.features[:, j]
        frame[target_column] = self.targets
        if self.is_outlier is not None:
            frame['is_outlier'] = self.is_outlier.astype(int)
        return frame


# ===== CSV I/O =====

def _numeric_column(frame: pd.DataFrame, column: str, dtype=np.float64) -> np.ndarray:
    """Parse one string column, reporting the first unparseable cell"""
    raw = frame[column]
    parsed = pd.to_numeric(raw, errors='coerce')
    bad = parsed.isna() | ~np.isfinite(parsed.to_numpy(dtype=np.float64, na_value=np.nan))
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(
            f"Non-numeric value '{raw.iloc[row]}' in column '{column}' at data row {row + 1}",
            row=row + 1, column=column,
        )
    values = raw.to_numpy(dtype=str).astype(np.float64)
    if dtype is np.float64:
        return values
    fractional = values != np.round(values)
    if fractional.any():
        row = int(np.flatnonzero(fractional)[0])
        raise ParseError(
            f"Non-integer value '{raw.iloc[row]}' in column '{column}' at data row {row + 1}",
            row=row + 1, column=column,
        )
    return values.astype(dtype)


def load_csv(path: str, target_column: str = "t") -> Dataset:
    """Load a dataset CSV: header f0..f{d-1}, target column, optional id / is_outlier"""
    if not os.path.exists(path):
        raise FileNotFoundError(f"File not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=True,
                            encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise EmptyDatasetError(f"Dataset file {path} is empty")

    columns = [str(c).strip() for c in frame.columns]
    frame.columns = columns
    feature_indices = sorted(int(m.group(1)) for m in map(FEATURE_COLUMN.match, columns) if m)
    if target_column not in columns:
        raise BadHeaderError(f"Missing target column '{target_column}' in header of {path}")
    if not feature_indices or feature_indices != list(range(len(feature_indices))):
        raise BadHeaderError(f"Header of {path} must name feature columns f0..f{{d-1}}")
    known = {f"f{j}" for j in feature_indices} | {target_column, 'id', 'is_outlier'}
    unknown = [c for c in columns if c not in known]
    if unknown:
        raise BadHeaderError(f"Unexpected columns in header of {path}: {unknown}")
    if frame.empty:
        raise EmptyDatasetError(f"Dataset file {path} has a header but no rows")

    features = np.column_stack([_numeric_column(frame, f"f{j}") for j in feature_indices])
    targets = _numeric_column(frame, target_column)
    ids = _numeric_column(frame, 'id', np.int64) if 'id' in columns else None
    is_outlier = _numeric_column(frame, 'is_outlier', np.int64) if 'is_outlier' in columns else None
    return Dataset(features, targets, ids=ids, is_outlier=is_outlier)


def write_csv(dataset: Dataset, path: str, target_column: str = "t"):
    """Write a dataset in the CSV format load_csv reads (atomically)"""
    frame = dataset.to_frame(target_column)
    with atomic_write(path) as fh:
        frame.to_csv(fh, index=False)


# ===== SYNTHETIC BENCHMARK =====
#
# Target functions on x in [-1, 1]^d, in age-like units (roughly 15..75):
#   sinusoid_linear: 45 + 15 sin(pi x0) + 10 mean(x1..x_{d-1})
#   piecewise_ramp:  45 + 20 clip(2 x0, -1, 1) + 8 |x1|        (x1 term dropped when d = 1)
#   radial_bump:     25 + 40 exp(-2 |x|^2 / d)

def _sinusoid_linear(x: np.ndarray) -> np.ndarray:
    linear = x[:, 1:].mean(axis=1) if x.shape[1] > 1 else 0.0
    return 45.0 + 15.0 * np.sin(np.pi * x[:, 0]) + 10.0 * linear


def _piecewise_ramp(x: np.ndarray) -> np.ndarray:
    bend = 8.0 * np.abs(x[:, 1]) if x.shape[1] > 1 else 0.0
    return 45.0 + 20.0 * np.clip(2.0 * x[:, 0], -1.0, 1.0) + bend


def _radial_bump(x: np.ndarray) -> np.ndarray:
    return 25.0 + 40.0 * np.exp(-2.0 * np.sum(x ** 2, axis=1) / x.shape[1])


TARGET_FUNCTION_TABLE: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    'sinusoid_linear': _sinusoid_linear,
    'piecewise_ramp': _piecewise_ramp,
    'radial_bump': _radial_bump,
}


def target_function(name: str) -> Callable[[np.ndarray], np.ndarray]:
    return TARGET_FUNCTION_TABLE[name]


def synth_generate(spec: SyntheticSpec) -> Tuple[Dataset, Dataset]:
    """Seeded train/test draw; outliers are injected into the train split only"""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    g = TARGET_FUNCTION_TABLE[spec.target_function]
    n_total = spec.n_samples + spec.n_test

    x = rng.uniform(-1.0, 1.0, size=(n_total, spec.feature_dim))
    t = g(x) + rng.normal(0.0, spec.noise_std, size=n_total)

    n_outliers = int(round(spec.outlier_fraction * spec.n_samples))
    outlier_idx = rng.choice(spec.n_samples, size=n_outliers, replace=False)
    signs = rng.choice(np.array([-1.0, 1.0]), size=n_outliers)
    is_outlier = np.zeros(spec.n_samples, dtype=bool)
    is_outlier[outlier_idx] = True
    t[outlier_idx] += signs * spec.outlier_shift

    ids = np.arange(n_total, dtype=np.int64)
    train = Dataset(x[:spec.n_samples], t[:spec.n_samples], ids=ids[:spec.n_samples], is_outlier=is_outlier)
    test = Dataset(x[spec.n_samples:], t[spec.n_samples:], ids=ids[spec.n_samples:],
                   is_outlier=np.zeros(spec.n_test, dtype=bool))
    return train, test
