"""Small NumPy neural-network engine with exact analytic gradients."""

from .checkpoint import load_checkpoint, read_ntf, save_checkpoint, write_ntf
from .layers import LayerSpec, conv, dense, flatten, maxpool2, relu
from .model import (
    ModelParams,
    backward,
    cnn_layers,
    forward,
    infer_shapes,
    init_model,
    mlp_layers,
    predict_proba,
    softmax,
    softmax_cross_entropy,
)
from .optim import OptimState, optimizer_step
from .training import TrainConfig, TrainResult, accuracy, train

__all__ = [
    "LayerSpec", "ModelParams", "OptimState", "TrainConfig", "TrainResult",
    "accuracy", "backward", "cnn_layers", "conv", "dense", "flatten", "forward",
    "infer_shapes", "init_model", "load_checkpoint", "maxpool2", "mlp_layers",
    "optimizer_step", "predict_proba", "read_ntf", "relu", "save_checkpoint",
    "softmax", "softmax_cross_entropy", "train", "write_ntf",
]
