"""Self-contained deep Q-learning engine (numpy, explicit gradients).

Dueling noisy Q-networks with weight-normalized layers, double-Q
targets, prioritized sum-tree replay, Huber loss, RMSprop with momentum
and global-norm gradient clipping, schedules and binary checkpoints.
"""

from qfc.dqn.network import NetworkSpec, QNetwork, sample_noise, zero_noise
from qfc.dqn.replay import ReplayBuffer, SumTree, priority_and_weight
from qfc.dqn.loss import huber, td_loss
from qfc.dqn.optim import RMSPropState, clip_gradients, rmsprop_step
from qfc.dqn.checkpoint import load_checkpoint, save_checkpoint
from qfc.dqn.train import TrainConfig, train

__all__ = [
    "NetworkSpec",
    "QNetwork",
    "ReplayBuffer",
    "SumTree",
    "RMSPropState",
    "TrainConfig",
    "clip_gradients",
    "huber",
    "load_checkpoint",
    "priority_and_weight",
    "rmsprop_step",
    "sample_noise",
    "save_checkpoint",
    "td_loss",
    "train",
    "zero_noise",
]
