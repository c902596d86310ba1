"""Minimal numerical engine: rank-5 layers with hand-written backward passes,
losses, optimizers and checkpoint I/O."""
from .checkpoint import load_checkpoint, save_checkpoint
from .functional import (batchnorm_backward, batchnorm_forward, conv3d_backward, conv3d_forward,
                         global_avg_pool_backward, global_avg_pool_forward, linear_backward,
                         linear_forward, maxpool3d_backward, maxpool3d_forward, relu_backward,
                         relu_forward, sigmoid_bce, softmax, softmax_cross_entropy)
from .layers import BatchNorm3d, Conv3d, GlobalAvgPool, Layer, Linear, MaxPool3d, ReLU, ResidualAdd
from .network import Network
from .optim import SGD, Adam, cosine_lr, make_optimizer

__all__ = [
    "Adam", "BatchNorm3d", "Conv3d", "GlobalAvgPool", "Layer", "Linear", "MaxPool3d", "Network",
    "ReLU", "ResidualAdd", "SGD", "batchnorm_backward", "batchnorm_forward", "conv3d_backward",
    "conv3d_forward", "cosine_lr", "global_avg_pool_backward", "global_avg_pool_forward",
    "linear_backward", "linear_forward", "load_checkpoint", "make_optimizer",
    "maxpool3d_backward", "maxpool3d_forward", "relu_backward", "relu_forward", "save_checkpoint",
    "sigmoid_bce", "softmax", "softmax_cross_entropy",
]
