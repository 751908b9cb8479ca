"""
Benchmark Module
Multi-seed comparison of the training modes on synthetic noisy data,
plus outlier-exclusion diagnostics
"""

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from config import MODES, SyntheticSpec, TrainConfig
from src.core.dataset import synth_generate
from src.core.selfpaced import SelectionState
from src.core.trainer import SPDRFTrainer
from src.errors import ShapeMismatchError
from src.utils.io_utils import atomic_write

BENCHMARK_COLUMNS = ['seed', 'mode', 'test_mae', 'first_pace_test_mae', 'final_pace_test_mae']


@dataclass
class ExclusionDiagnostics:
    """How well the capped likelihood singles out labelled outliers"""
    excluded_count: int
    outlier_count: int
    precision: float
    recall: float


def exclusion_diagnostics(selection: SelectionState, is_outlier: np.ndarray) -> ExclusionDiagnostics:
    """Fraction of excluded samples that are outliers, and of outliers that are excluded"""
    is_outlier = np.asarray(is_outlier, dtype=bool)
    if is_outlier.shape != selection.excluded.shape:
        raise ShapeMismatchError(
            f"{is_outlier.shape[0]} outlier labels for {selection.excluded.shape[0]} samples"
        )
    hits = int(np.count_nonzero(selection.excluded & is_outlier))
    excluded_count = selection.excluded_count
    outlier_count = int(is_outlier.sum())
    return ExclusionDiagnostics(
        excluded_count=excluded_count,
        outlier_count=outlier_count,
        precision=hits / excluded_count if excluded_count else math.nan,
        recall=hits / outlier_count if outlier_count else math.nan,
    )


@dataclass
class BenchmarkSummary:
    frame: pd.DataFrame
    medians: Dict[str, float]
    improvement: float
    capped_beats_spdrf: int
    first_pace_median: float
    final_pace_median: float

    def describe(self) -> str:
        lines = ["📊 Benchmark medians (clean test MAE):"]
        for mode, value in self.medians.items():
            lines.append(f"   {mode:<14} {value:.4f}")
        if not math.isnan(self.improvement):
            lines.append(f"   spdrf-capped vs drf-baseline: {self.improvement:+.2f}% improvement")
        seeds = self.frame['seed'].nunique()
        lines.append(f"   spdrf-capped <= spdrf on {self.capped_beats_spdrf}/{seeds} seeds")
        lines.append(f"   spdrf-capped pace MAE: first {self.first_pace_median:.4f} -> "
                     f"final {self.final_pace_median:.4f}")
        return "\n".join(lines)


def summarize(frame: pd.DataFrame) -> BenchmarkSummary:
    """Medians per mode, median improvement over the baseline, and per-seed wins"""
    medians = {mode: float(group['test_mae'].median())
               for mode, group in frame.groupby('mode', sort=False)}

    baseline = medians.get('drf-baseline', math.nan)
    capped = medians.get('spdrf-capped', math.nan)
    improvement = 100.0 * (baseline - capped) / baseline if baseline else math.nan

    by_seed = frame.pivot(index='seed', columns='mode', values='test_mae')
    if {'spdrf-capped', 'spdrf'} <= set(by_seed.columns):
        wins = int((by_seed['spdrf-capped'] <= by_seed['spdrf']).sum())
    else:
        wins = 0

    capped_rows = frame[frame['mode'] == 'spdrf-capped']
    return BenchmarkSummary(
        frame=frame,
        medians=medians,
        improvement=improvement,
        capped_beats_spdrf=wins,
        first_pace_median=float(capped_rows['first_pace_test_mae'].median()),
        final_pace_median=float(capped_rows['final_pace_test_mae'].median()),
    )


class BenchmarkRunner:
    """Trains every mode on freshly generated synthetic data for each seed"""

    def __init__(self, train_config: TrainConfig, synthetic: SyntheticSpec,
                 seeds: Sequence[int] = (0, 1, 2, 3, 4), modes: Sequence[str] = MODES,
                 verbose: bool = False):
        self.train_config = train_config
        self.synthetic = synthetic
        self.seeds = list(seeds)
        self.modes = list(modes)
        self.verbose = verbose
        self.frame: Optional[pd.DataFrame] = None

    def _config_for(self, mode: str, seed: int) -> TrainConfig:
        mode_config = self.train_config.for_mode(mode)
        mode_config.seed = seed
        mode_config.backbone.seed = seed
        mode_config.backbone.input_dim = self.synthetic.feature_dim
        return mode_config

    def run(self) -> BenchmarkSummary:
        rows: List[Dict[str, float]] = []
        for seed in tqdm(self.seeds, desc="Benchmark seeds", disable=not self.verbose):
            train_set, test_set = synth_generate(replace(self.synthetic, seed=seed))
            for mode in self.modes:
                trainer = SPDRFTrainer(self._config_for(mode, seed))
                _, report = trainer.train(train_set, test_set)
                rows.append({
                    'seed': seed,
                    'mode': mode,
                    'test_mae': report[-1].test_mae,
                    'first_pace_test_mae': report[0].test_mae,
                    'final_pace_test_mae': report[-1].test_mae,
                })
                if self.verbose:
                    print(f"🌲 seed {seed} {mode}: test MAE {report[-1].test_mae:.4f}")

        self.frame = pd.DataFrame(rows, columns=BENCHMARK_COLUMNS)
        return summarize(self.frame)

    def write_csv(self, path: str):
        if self.frame is None:
            raise RuntimeError("Benchmark has not been run yet")
        with atomic_write(path) as fh:
            self.frame.to_csv(fh, index=False)
