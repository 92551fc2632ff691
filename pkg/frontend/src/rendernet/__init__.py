"""rendernet: learned renderer turning sparse RGB-D projections into RGB."""

from .adversarial import (
    FM_WEIGHT,
    N_SCALES,
    MultiScaleDiscriminator,
    PatchDiscriminator,
    discriminator_loss,
    gan_fm_loss,
)
from .baseline import nn_inpaint
from .errors import FormatError, ParameterError, StateError
from .evaluate import PSNR_CAP_DB, evaluate, lpips_arrays, psnr_db, psnr_files
from .model import RendererNet
from .perceptual import LEVEL_WEIGHTS, FeatureExtractor, lpips_distance, vgg_loss
from .train import (
    BATCH_SIZE,
    LR_STAGE1,
    LR_STAGE2,
    PairDataset,
    TrainState,
    load_renderer,
    predict,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "RendererNet", "FeatureExtractor", "MultiScaleDiscriminator", "PatchDiscriminator",
    "TrainState", "PairDataset",
    "vgg_loss", "lpips_distance", "gan_fm_loss", "discriminator_loss",
    "train", "predict", "load_renderer", "evaluate",
    "psnr_db", "psnr_files", "lpips_arrays", "nn_inpaint",
    "LEVEL_WEIGHTS", "FM_WEIGHT", "N_SCALES", "BATCH_SIZE", "LR_STAGE1", "LR_STAGE2",
    "PSNR_CAP_DB",
    "ParameterError", "FormatError", "StateError",
]
