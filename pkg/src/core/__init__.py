# src/core/__init__.py
"""
Core functionality for SPDRF
Contains the forest, backbone, self-paced selection and training components
"""

from .forest import ForestModel, Tree, TreeTopology, LeafParams, LeafResponsibilityWarning
from .backbone import BackboneParams, BackboneGrads, ForwardCache
from .selfpaced import SelectionState, schedule_thresholds, select, update_selection
from .dataset import Dataset, NormalizationStats, Sample, load_csv, write_csv, synth_generate
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .trainer import SPDRFTrainer, pretrain, train, evaluate, predict
from .benchmark import BenchmarkRunner, BenchmarkSummary, exclusion_diagnostics

__all__ = [
    'ForestModel',
    'Tree',
    'TreeTopology',
    'LeafParams',
    'LeafResponsibilityWarning',
    'BackboneParams',
    'BackboneGrads',
    'ForwardCache',
    'SelectionState',
    'schedule_thresholds',
    'select',
    'update_selection',
    'Dataset',
    'NormalizationStats',
    'Sample',
    'load_csv',
    'write_csv',
    'synth_generate',
    'Checkpoint',
    'load_checkpoint',
    'save_checkpoint',
    'SPDRFTrainer',
    'pretrain',
    'train',
    'evaluate',
    'predict',
    'BenchmarkRunner',
    'BenchmarkSummary',
    'exclusion_diagnostics',
]
