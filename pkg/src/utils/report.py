"""
Pace Report Utilities
Per-pace training records, their CSV form and an aligned table view
"""

import math
import os
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional

import pandas as pd

from src.errors import BadHeaderError, EmptyDatasetError
from src.utils.io_utils import atomic_write
from src.utils.metrics import CS_LEVELS

PACE_REPORT_COLUMNS = (
    ['pace_index', 'lambda', 'epsilon', 'selected_count', 'excluded_count', 'train_mae', 'test_mae']
    + [f"cs_{level}" for level in CS_LEVELS]
    + ['seconds']
)
WORST_CASE_COLUMNS = ['pace_index', 'rank', 'id', 'target', 'prediction', 'abs_error']


@dataclass
class WorstCase:
    """A selected training sample with one of the largest errors at the end of a pace"""
    id: int
    target: float
    prediction: float
    abs_error: float


@dataclass
class PaceRecord:
    """Outcome of one pace"""
    pace_index: int
    lam: float
    epsilon: float
    selected_count: int
    excluded_count: int
    train_mae: float
    test_mae: float = math.nan
    test_cs: Dict[int, float] = field(default_factory=dict)
    seconds: float = 0.0
    worst_cases: List[WorstCase] = field(default_factory=list)
    start_digest: str = ""
    end_digest: str = ""

    def to_row(self) -> Dict[str, float]:
        row = {
            'pace_index': self.pace_index,
            'lambda': self.lam,
            'epsilon': self.epsilon,
            'selected_count': self.selected_count,
            'excluded_count': self.excluded_count,
            'train_mae': self.train_mae,
            'test_mae': self.test_mae,
        }
        for level in CS_LEVELS:
            row[f"cs_{level}"] = self.test_cs.get(level, math.nan)
        row['seconds'] = self.seconds
        return row


class PaceReport:
    """Ordered collection of PaceRecords"""

    def __init__(self, records: Optional[List[PaceRecord]] = None):
        self.records: List[PaceRecord] = list(records or [])

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PaceRecord]:
        return iter(self.records)

    def __getitem__(self, index: int) -> PaceRecord:
        return self.records[index]

    def append(self, record: PaceRecord):
        self.records.append(record)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_row() for r in self.records], columns=PACE_REPORT_COLUMNS)

    def worst_cases_frame(self) -> pd.DataFrame:
        rows = [
            {'pace_index': r.pace_index, 'rank': rank, 'id': case.id, 'target': case.target,
             'prediction': case.prediction, 'abs_error': case.abs_error}
            for r in self.records
            for rank, case in enumerate(r.worst_cases, start=1)
        ]
        return pd.DataFrame(rows, columns=WORST_CASE_COLUMNS)

    def write_csv(self, path: str):
        with atomic_write(path) as fh:
            self.to_frame().to_csv(fh, index=False)

    def write_worst_cases(self, path: str):
        with atomic_write(path) as fh:
            self.worst_cases_frame().to_csv(fh, index=False)

    @classmethod
    def read_csv(cls, path: str) -> 'PaceReport':
        if not os.path.exists(path):
            raise FileNotFoundError(f"File not found: {path}")
        try:
            frame = pd.read_csv(path)
        except pd.errors.EmptyDataError:
            raise EmptyDatasetError(f"Pace report {path} is empty")
        if list(frame.columns) != PACE_REPORT_COLUMNS:
            raise BadHeaderError(f"Pace report {path} does not have the expected header")

        records = []
        for _, row in frame.iterrows():
            records.append(PaceRecord(
                pace_index=int(row['pace_index']),
                lam=float(row['lambda']),
                epsilon=float(row['epsilon']),
                selected_count=int(row['selected_count']),
                excluded_count=int(row['excluded_count']),
                train_mae=float(row['train_mae']),
                test_mae=float(row['test_mae']),
                test_cs={level: float(row[f"cs_{level}"]) for level in CS_LEVELS},
                seconds=float(row['seconds']),
            ))
        return cls(records)

    def format_table(self) -> str:
        """Aligned plain-text table, one row per pace"""
        frame = self.to_frame()
        return frame.to_string(index=False, float_format=lambda v: f"{v:.4g}", na_rep="-")
