"""Desk-scale learners: tabular Q-learning, DQN, and PPO over the env."""

from .checkpoint import CheckpointError, load_policy, save_policy
from .common import Policy, TrainingDiverged, TrainResult, obs_features
from .dqn import DqnConfig, DqnPolicy, ReplayBuffer, train_dqn
from .nn import Adam, Mlp, clip_grad_norm, gradcheck, mse_loss
from .ppo import PpoConfig, PpoPolicy, clipped_surrogate, compute_gae, train_ppo
from .qlearning import (
    QLearningConfig,
    QTable,
    QTablePolicy,
    discretize,
    q_update,
    train_qtable,
)

__all__ = [
    "Adam",
    "CheckpointError",
    "DqnConfig",
    "DqnPolicy",
    "Mlp",
    "Policy",
    "PpoConfig",
    "PpoPolicy",
    "QLearningConfig",
    "QTable",
    "QTablePolicy",
    "ReplayBuffer",
    "TrainResult",
    "TrainingDiverged",
    "clip_grad_norm",
    "clipped_surrogate",
    "compute_gae",
    "discretize",
    "gradcheck",
    "load_policy",
    "mse_loss",
    "obs_features",
    "q_update",
    "save_policy",
    "train_dqn",
    "train_ppo",
    "train_qtable",
]
