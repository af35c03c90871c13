"""Differentiable kernel set: tensors, layers, recurrent cells, Adam, checks."""

from .gradcheck import grad_check
from .kernels import BACKEND as CONV_BACKEND
from .layers import BatchNorm, ConfigError, ConvBlock, Dense, DeconvBlock, layer_forward
from .optim import Adam, GradientError, LrSchedule
from .recurrent import LSTMWeights, TreeCellWeights, lstm_step, tree_node_update
from .tensor import ShapeError, Tensor, softmax_normalize

__all__ = [
    "Adam",
    "BatchNorm",
    "ConfigError",
    "CONV_BACKEND",
    "ConvBlock",
    "DeconvBlock",
    "Dense",
    "GradientError",
    "LrSchedule",
    "LSTMWeights",
    "ShapeError",
    "Tensor",
    "TreeCellWeights",
    "grad_check",
    "layer_forward",
    "lstm_step",
    "softmax_normalize",
    "tree_node_update",
]
