from amclab.nn.tensor import (
    Tensor,
    matmul,
    add_bias,
    relu,
    sigmoid,
    tanh,
    reshape,
    scale_shift,
    dropout,
    conv2d,
    lstm,
    softmax,
    cross_entropy,
    mse,
)
from amclab.nn.layers import (
    LayerSpec,
    Network,
    build_network,
    infer_shapes,
)
from amclab.nn.optim import Adam
from amclab.nn.training import TrainConfig, TrainingDiverged, fit

__all__ = [
    "Tensor", "matmul", "add_bias", "relu", "sigmoid", "tanh", "reshape",
    "scale_shift", "dropout", "conv2d", "lstm", "softmax", "cross_entropy",
    "mse", "LayerSpec", "Network", "build_network", "infer_shapes",
    "Adam", "TrainConfig", "TrainingDiverged", "fit",
]
