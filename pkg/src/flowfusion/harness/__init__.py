"""Synthetic data, optimiser, training loop, checkpoints and the ablation ladder."""

from .ablation import LADDER, run_ablation_ladder
from .checkpoint import Checkpoint
from .data import Dataset, SyntheticDatasetConfig, generate_dataset
from .optim import Adam, AdamState, adam_step
from .training import DivergenceError, TrainConfig, TrainResult, evaluate, train
