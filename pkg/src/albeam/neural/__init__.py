from .engine import (Adam, AntiRectifier, BatchNorm2d, Conv2d, ConvBNAct,
                     DoubleConv, MaxPool2x2, TrainConfig, UpsampleNearest2x)
from .unet import UNet, UNetConfig, desk_unet_config, full_unet_config
from .head import (ApodWeights, StepResult, beamform_head, head_backward,
                   head_forward, model_weights, mse_loss, train_step,
                   weighted_channel_sum)
from .checkpoint import (checkpoint_checksum, load_checkpoint,
                         save_checkpoint)

__all__ = [
    "Adam", "AntiRectifier", "ApodWeights", "BatchNorm2d", "Conv2d",
    "ConvBNAct", "DoubleConv", "MaxPool2x2", "StepResult", "TrainConfig",
    "UNet", "UNetConfig", "UpsampleNearest2x", "beamform_head",
    "checkpoint_checksum", "desk_unet_config", "full_unet_config",
    "head_backward", "head_forward", "load_checkpoint", "model_weights",
    "mse_loss", "save_checkpoint", "train_step", "weighted_channel_sum",
]
