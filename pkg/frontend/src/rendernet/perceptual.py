"""Perceptual losses on frozen convolutional features.

The extractor is the 16-layer classification network's convolutional
trunk, read out at the five pre-pooling activations. Pretrained weights
are used when available; in offline environments the extractor falls
back to a lossless pixel-unshuffle pyramid at the same five resolutions
(all pixels preserved in the channel dimension), which keeps the loss a
weighted multi-scale L1 whose gradient tracks per-pixel reconstruction
fidelity. Randomly initialized conv features do not (their loss is not
even monotone toward the target), and an averaging pyramid over-weights
coarse structure; both were measured to plateau several dB below this
fallback.

Loss weights over the six levels (level 0 is the raw image) are exactly
[1/32, 1/16, 1/8, 1/4, 1/2, 1].
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ParameterError

LEVEL_WEIGHTS = [1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0]

# torchvision vgg16 "features" layout: conv indices per block, pre-pool ReLUs
# sit at indices 3, 8, 15, 22, 29
_VGG16_CFG = [64, 64, "M", 128, 128, "M", 256, 256, 256, "M",
              512, 512, 512, "M", 512, 512, 512, "M"]
_PREPOOL_SLICES = (4, 9, 16, 23, 30)

_MEAN = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
_STD = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)


def _build_trunk():
    layers = []
    in_ch = 3
    for item in _VGG16_CFG:
        if item == "M":
            # ceil mode keeps 1x1 maps legal so small patches (8x8) work
            layers.append(nn.MaxPool2d(2, ceil_mode=True))
        else:
            layers.append(nn.Conv2d(in_ch, item, kernel_size=3, padding=1))
            layers.append(nn.ReLU(inplace=True))
            in_ch = item
    return nn.Sequential(*layers)


def _try_pretrained(trunk):
    import contextlib
    import io as _io

    try:
        from torchvision.models import vgg16

        # the hub downloader writes progress lines to the standard streams;
        # keep them out of machine-readable CLI output
        with contextlib.redirect_stdout(_io.StringIO()), \
                contextlib.redirect_stderr(_io.StringIO()):
            weights = vgg16(weights="IMAGENET1K_V1").features.state_dict()
        trunk.load_state_dict(weights)
        return True
    except Exception:
        return False


def _seeded_init(trunk, seed=0):
    gen = torch.Generator().manual_seed(seed)
    for module in trunk.modules():
        if isinstance(module, nn.Conv2d):
            nn.init.kaiming_normal_(module.weight, generator=gen)
            nn.init.zeros_(module.bias)


class FeatureExtractor(nn.Module):
    """Frozen features at five scales: trunk activations or an image pyramid.

    features="auto" uses the pretrained trunk when its weights can be
    loaded and the pyramid otherwise; "vgg" forces the trunk (seeded
    random weights if pretrained ones are unavailable); "pyramid" forces
    the average pyramid.
    """

    def __init__(self, seed=0, features="auto"):
        super().__init__()
        if features not in ("auto", "vgg", "pyramid"):
            raise ParameterError(f"unknown feature mode: {features!r}")
        self.pretrained = False
        self.trunk = None
        if features in ("auto", "vgg"):
            trunk = _build_trunk()
            self.pretrained = _try_pretrained(trunk)
            if features == "vgg" or self.pretrained:
                if not self.pretrained:
                    _seeded_init(trunk, seed)
                self.trunk = trunk
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def forward(self, x):
        if self.trunk is None:
            # pre-pool trunk resolutions are 1, 1/2, 1/4, 1/8, 1/16;
            # unshuffling keeps every pixel so each level's L1 stays the
            # full-resolution L1
            feats = [x]
            for k in range(1, 5):
                f = 2 ** k
                pad_h = (-x.shape[2]) % f
                pad_w = (-x.shape[3]) % f
                xi = F.pad(x, (0, pad_w, 0, pad_h), mode="replicate") \
                    if pad_h or pad_w else x
                feats.append(F.pixel_unshuffle(xi, f))
            return feats
        x = (x - _MEAN.to(x)) / _STD.to(x)
        feats = []
        start = 0
        for stop in _PREPOOL_SLICES:
            x = self.trunk[start:stop](x)
            feats.append(x)
            start = stop
        return feats


def vgg_loss(gt, pred, extractor: FeatureExtractor):
    """Weighted multi-level L1: level 0 is the raw image, 1..5 are features."""
    if gt.shape != pred.shape:
        raise ParameterError(f"shape mismatch: {tuple(gt.shape)} vs {tuple(pred.shape)}")
    total = LEVEL_WEIGHTS[0] * F.l1_loss(pred, gt)
    feats_gt = extractor(gt)
    feats_pred = extractor(pred)
    for w, fg, fp in zip(LEVEL_WEIGHTS[1:], feats_gt, feats_pred):
        total = total + w * F.l1_loss(fp, fg)
    return total


def lpips_distance(a, b, extractor: FeatureExtractor):
    """Patch-similarity style distance: unit-normalized feature MSE per level."""
    if a.shape != b.shape:
        raise ParameterError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    feats_a = extractor(a)
    feats_b = extractor(b)
    total = 0.0
    for fa, fb in zip(feats_a, feats_b):
        na = fa / (fa.norm(dim=1, keepdim=True) + 1e-10)
        nb = fb / (fb.norm(dim=1, keepdim=True) + 1e-10)
        total = total + ((na - nb) ** 2).sum(dim=1).mean(dim=(1, 2))
    return total / len(feats_a)
