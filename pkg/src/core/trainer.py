"""
Trainer Module
Forest pretraining, the paced alternating optimization of backbone and
leaves, per-pace evaluation and checkpoint assembly
"""

import copy
import math
import os
import time
from typing import Optional, Tuple

import numpy as np
from tqdm import tqdm

from config import TrainConfig
from src.core import backbone
from src.core.backbone import BackboneParams
from src.core.checkpoint import Checkpoint, parameter_digest, save_checkpoint
from src.core.dataset import Dataset, NormalizationStats
from src.core.forest import ForestModel, grad_wrt_features, likelihoods, predict_mean, update_leaves
from src.core.selfpaced import SelectionState, schedule_thresholds, select, update_selection
from src.errors import EmptySelectionError, ShapeMismatchError
from src.utils.metrics import Metrics, compute_metrics, mae
from src.utils.report import PaceRecord, PaceReport, WorstCase


class SPDRFTrainer:
    """Owns all mutable training state for one run"""

    def __init__(self, train_config: TrainConfig, verbose: bool = False, debug: bool = False,
                 checkpoint_dir: Optional[str] = None):
        train_config.validate()
        self.config = train_config
        self.verbose = verbose
        self.debug = debug
        self.checkpoint_dir = checkpoint_dir

        # Mini-batch stream; backbone and forest draw from their own seeded streams
        self.rng = np.random.default_rng([train_config.seed, 2])

        self.params: Optional[BackboneParams] = None
        self.forest: Optional[ForestModel] = None
        self.selection: Optional[SelectionState] = None
        self.stats: Optional[NormalizationStats] = None
        self.step = 0
        self.pace_index = 0

        self._x = None
        self._t = None
        self._dataset: Optional[Dataset] = None

        if self.verbose:
            print(f"🌲 SPDRFTrainer initialized ({train_config.tree_count} trees, "
                  f"depth {train_config.tree_depth}, {len(train_config.pace)} paces)")

    # ===== STATE =====

    def initialize(self, dataset: Dataset):
        """Fresh backbone, forest and all-selected state for a training set"""
        if len(dataset) == 0:
            raise EmptySelectionError("Training split is empty")
        if dataset.feature_dim != self.config.backbone.input_dim:
            raise ShapeMismatchError(
                f"Backbone expects {self.config.backbone.input_dim} input features, "
                f"dataset has {dataset.feature_dim}"
            )
        self._dataset = dataset
        self.stats = dataset.stats
        self._x, self._t = dataset.normalized(self.stats)

        self.params = backbone.init(self.config.backbone)
        forest_rng = np.random.default_rng([self.config.seed, 1])
        self.forest = ForestModel.build(
            self.config.tree_count, self.config.tree_depth, self.config.backbone.output_dim,
            self._t, forest_rng, self.config.sigma2_floor,
        )
        self.selection = SelectionState.all_selected(len(dataset))
        self.step = 0
        self.pace_index = 0

    def restore(self, checkpoint: Checkpoint, dataset: Dataset):
        """Resume from a checkpoint on the dataset it was trained on"""
        if dataset.feature_dim != checkpoint.backbone.input_dim:
            raise ShapeMismatchError(
                f"Checkpoint expects {checkpoint.backbone.input_dim} input features, "
                f"dataset has {dataset.feature_dim}"
            )
        if checkpoint.selection.v.shape[0] != len(dataset):
            raise ShapeMismatchError("Checkpoint selection does not match the dataset size")
        self._dataset = dataset
        self.stats = checkpoint.normalization
        self._x, self._t = dataset.normalized(self.stats)
        self.params = checkpoint.backbone.copy()
        self.forest = checkpoint.forest.copy()
        self.selection = copy.deepcopy(checkpoint.selection)
        self.step = checkpoint.step
        self.pace_index = checkpoint.selection.pace_index
        self.rng.bit_generator.state = checkpoint.rng_state

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            train_config=copy.deepcopy(self.config),
            normalization=self.stats,
            backbone=self.params.copy(),
            forest=self.forest.copy(),
            selection=copy.deepcopy(self.selection),
            step=self.step,
            rng_state=self.rng.bit_generator.state,
        )

    def digest(self) -> str:
        return parameter_digest(self.params, self.forest)

    def features(self) -> np.ndarray:
        feats, _ = backbone.forward(self._x, self.params)
        return feats

    def sample_likelihoods(self) -> Tuple[np.ndarray, np.ndarray]:
        """(likelihoods, floored log-likelihoods) of every training sample"""
        return likelihoods(self._t, self.features(), self.forest)

    # ===== INNER OPTIMIZATION =====

    def _draw_batch(self) -> np.ndarray:
        n = self._t.shape[0]
        return self.rng.choice(n, size=min(self.config.batch_size, n), replace=False)

    def apply_batch(self, batch: np.ndarray, lam: float, epsilon: float, pace_step: int,
                    all_selected: bool = False) -> int:
        """One ascent step on the backbone over the selected members of a batch"""
        x_batch, t_batch = self._x[batch], self._t[batch]
        feats, cache = backbone.forward(x_batch, self.params)
        if all_selected:
            v = np.ones(len(batch), dtype=bool)
        else:
            p, log_p = likelihoods(t_batch, feats, self.forest)
            v = select(log_p, p, lam, epsilon)

        grad_features = grad_wrt_features(t_batch, feats, self.forest)
        grad_features = np.where(v[:, None], grad_features, 0.0) / len(batch)
        grads = backbone.backward(grad_features, cache, self.params)
        self.params = backbone.sgd_step(self.params, grads, self.config.learning_rate_at(pace_step))
        return int(v.sum())

    def refresh_leaves(self, lam: float, epsilon: float, all_selected: bool = False):
        """Re-rank the training set under fixed thresholds and refit the leaves on the selected set"""
        feats = self.features()
        if all_selected:
            self.selection = SelectionState.all_selected(self._t.shape[0])
            self.selection.pace_index = self.pace_index
        else:
            p, log_p = likelihoods(self._t, feats, self.forest)
            self.selection = update_selection(log_p, p, lam, epsilon, self.pace_index)
        if self.selection.selected_count == 0:
            raise EmptySelectionError(
                f"Pace {self.pace_index}: no samples pass lambda={lam:.4g}, epsilon={epsilon:.4g}"
            )
        self.forest = update_leaves(self._t, self.selection.v, feats, self.forest,
                                    self.config.leaf_em_iterations)

    def optimization_step(self, lam: float, epsilon: float, pace_step: int, all_selected: bool = False):
        batch = self._draw_batch()
        used = self.apply_batch(batch, lam, epsilon, pace_step, all_selected)
        self.step += 1
        if self.debug:
            print(f"step {self.step}: {used}/{len(batch)} batch samples selected")
        if self.step % self.config.leaf_update_period == 0:
            self.refresh_leaves(lam, epsilon, all_selected)

    # ===== PRETRAINING AND PACES =====

    def pretrain(self, dataset: Dataset) -> Tuple[BackboneParams, ForestModel]:
        """Plain forest training on all samples"""
        self.initialize(dataset)
        steps = range(self.config.pretrain_steps)
        for pace_step in tqdm(steps, desc="Pretraining", disable=not self.verbose, leave=False):
            self.optimization_step(math.inf, 0.0, pace_step, all_selected=True)
        if self.verbose:
            print(f"✅ Pretraining complete after {self.config.pretrain_steps} steps")
        return self.params, self.forest

    def run_pace(self, pace_index: int, fraction: float, test: Optional[Dataset] = None,
                 all_selected: bool = False) -> PaceRecord:
        started = time.perf_counter()
        start_digest = self.digest()
        self.pace_index = pace_index
        n = self._t.shape[0]

        if all_selected:
            lam, epsilon = math.inf, 0.0
            self.selection = SelectionState.all_selected(n)
            self.selection.pace_index = pace_index
        else:
            p, log_p = self.sample_likelihoods()
            lam, epsilon = schedule_thresholds(p, fraction, self.config.pace.exclude_fraction)
            if fraction >= 1.0:
                # a full pace admits every sample the cap does not exclude
                lam = math.inf
            self.selection = update_selection(log_p, p, lam, epsilon, pace_index)
        pace_selection = self.selection
        if pace_selection.selected_count == 0:
            raise EmptySelectionError(
                f"Pace {pace_index}: no samples pass lambda={lam:.4g}, epsilon={epsilon:.4g}"
            )

        if self.verbose:
            print(f"🌲 Pace {pace_index}/{len(self.config.pace)}: λ={lam:.4g}, ε={epsilon:.4g}, "
                  f"selected {pace_selection.selected_count}/{n}, "
                  f"excluded {pace_selection.excluded_count}")

        steps = range(self.config.steps_per_pace)
        for pace_step in tqdm(steps, desc=f"Pace {pace_index}", disable=not self.verbose, leave=False):
            self.optimization_step(lam, epsilon, pace_step, all_selected)

        record = self._pace_record(pace_index, lam, epsilon, pace_selection, test)
        record.start_digest = start_digest
        record.end_digest = self.digest()
        record.seconds = time.perf_counter() - started

        if self.checkpoint_dir:
            save_checkpoint(self.checkpoint(), os.path.join(self.checkpoint_dir, f"pace_{pace_index:02d}.json"))
        if self.verbose:
            test_part = "" if math.isnan(record.test_mae) else f", test MAE {record.test_mae:.3f}"
            print(f"📊 Pace {pace_index} done: train MAE {record.train_mae:.3f}{test_part} "
                  f"({record.seconds:.1f}s)")
        return record

    def _pace_record(self, pace_index: int, lam: float, epsilon: float,
                     pace_selection: SelectionState, test: Optional[Dataset]) -> PaceRecord:
        dataset = self._dataset
        predictions = self.stats.denormalize_targets(predict_mean(self.features(), self.forest))
        errors = np.abs(predictions - dataset.targets)

        selected = np.flatnonzero(pace_selection.v)
        order = selected[np.argsort(-errors[selected], kind="stable")][:self.config.worst_case_count]
        worst = [
            WorstCase(id=int(dataset.ids[i]), target=float(dataset.targets[i]),
                      prediction=float(predictions[i]), abs_error=float(errors[i]))
            for i in order
        ]

        record = PaceRecord(
            pace_index=pace_index,
            lam=lam,
            epsilon=epsilon,
            selected_count=pace_selection.selected_count,
            excluded_count=pace_selection.excluded_count,
            train_mae=mae(predictions, dataset.targets),
            worst_cases=worst,
        )
        if test is not None:
            metrics = evaluate_arrays(test, self.params, self.forest, self.stats)
            record.test_mae = metrics.mae
            record.test_cs = dict(metrics.cs)
        return record

    def train(self, dataset: Dataset, test: Optional[Dataset] = None) -> Tuple[Checkpoint, PaceReport]:
        """Pretrain, then one pace per schedule fraction; stops after the last fraction"""
        self.pretrain(dataset)
        report = PaceReport()
        for pace_index, fraction in enumerate(self.config.pace.fractions, start=1):
            report.append(self.run_pace(pace_index, fraction, test))
        return self.checkpoint(), report

    def train_drf(self, dataset: Dataset, test: Optional[Dataset] = None) -> Tuple[Checkpoint, PaceReport]:
        """Plain forest training: one pace over every sample, no thresholds"""
        self.pretrain(dataset)
        report = PaceReport([self.run_pace(1, 1.0, test, all_selected=True)])
        return self.checkpoint(), report


# ===== MODULE API =====

def pretrain(dataset: Dataset, config: TrainConfig, verbose: bool = False) -> Tuple[BackboneParams, ForestModel]:
    return SPDRFTrainer(config, verbose=verbose).pretrain(dataset)


def train(dataset: Dataset, config: TrainConfig, test: Optional[Dataset] = None,
          verbose: bool = False, checkpoint_dir: Optional[str] = None) -> Tuple[Checkpoint, PaceReport]:
    trainer = SPDRFTrainer(config, verbose=verbose, checkpoint_dir=checkpoint_dir)
    return trainer.train(dataset, test)


def predict_arrays(dataset: Dataset, params: BackboneParams, forest: ForestModel,
                   stats: NormalizationStats) -> np.ndarray:
    """Predicted targets in original units"""
    if dataset.feature_dim != params.input_dim:
        raise ShapeMismatchError(
            f"Model expects {params.input_dim} input features, dataset has {dataset.feature_dim}"
        )
    x = stats.normalize_features(dataset.features)
    feats, _ = backbone.forward(x, params)
    return stats.denormalize_targets(predict_mean(feats, forest))


def evaluate_arrays(dataset: Dataset, params: BackboneParams, forest: ForestModel,
                    stats: NormalizationStats) -> Metrics:
    return compute_metrics(predict_arrays(dataset, params, forest, stats), dataset.targets)


def predict(dataset: Dataset, checkpoint: Checkpoint) -> np.ndarray:
    return predict_arrays(dataset, checkpoint.backbone, checkpoint.forest, checkpoint.normalization)


def evaluate(dataset: Dataset, checkpoint: Checkpoint) -> Metrics:
    """MAE and CS(1..10) of a checkpoint on a dataset split"""
    return evaluate_arrays(dataset, checkpoint.backbone, checkpoint.forest, checkpoint.normalization)
