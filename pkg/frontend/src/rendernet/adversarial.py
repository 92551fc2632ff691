"""Multi-scale patch discriminators and the stage-2 adversarial objective.

Three identical patch discriminators operate on the image at 1x, 1/2x and
1/4x scale. The generator objective is least-squares adversarial loss plus
a 0.1-weighted feature-matching term over the discriminators' intermediate
activations. Both are stage-2 only.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .errors import StateError

N_SCALES = 3
FM_WEIGHT = 0.1


class PatchDiscriminator(nn.Module):
    """Strided patch classifier with exposed intermediate activations."""

    def __init__(self, in_channels=3, base=64):
        super().__init__()
        ch = [base, base * 2, base * 4]
        self.blocks = nn.ModuleList([
            nn.Sequential(
                nn.Conv2d(in_channels, ch[0], 4, stride=2, padding=1),
                nn.LeakyReLU(0.2, inplace=True),
            ),
            nn.Sequential(
                nn.Conv2d(ch[0], ch[1], 4, stride=2, padding=1),
                nn.GroupNorm(1, ch[1]),
                nn.LeakyReLU(0.2, inplace=True),
            ),
            nn.Sequential(
                nn.Conv2d(ch[1], ch[2], 4, stride=1, padding=1),
                nn.GroupNorm(1, ch[2]),
                nn.LeakyReLU(0.2, inplace=True),
            ),
            nn.Conv2d(ch[2], 1, 4, stride=1, padding=1),
        ])

    def forward(self, x):
        feats = []
        for block in self.blocks:
            x = block(x)
            feats.append(x)
        return feats  # last entry is the patch logit map


class MultiScaleDiscriminator(nn.Module):
    def __init__(self, in_channels=3, base=64):
        super().__init__()
        self.scales = nn.ModuleList(
            PatchDiscriminator(in_channels, base) for _ in range(N_SCALES)
        )

    def pyramid(self, x):
        out = [x]
        for _ in range(N_SCALES - 1):
            out.append(F.avg_pool2d(out[-1], 2, count_include_pad=False))
        return out

    def forward(self, x):
        return [d(level) for d, level in zip(self.scales, self.pyramid(x))]


def gan_fm_loss(gt, pred, discriminators: MultiScaleDiscriminator, stage: int):
    """Generator-side adversarial + 0.1 feature-matching loss, stage 2 only."""
    if stage != 2:
        raise StateError(f"adversarial loss is stage-2 only, called in stage {stage}")
    real_feats = discriminators(gt)
    fake_feats = discriminators(pred)
    adv = 0.0
    fm = 0.0
    for real, fake in zip(real_feats, fake_feats):
        adv = adv + ((fake[-1] - 1.0) ** 2).mean()
        for fr, ff in zip(real[:-1], fake[:-1]):
            fm = fm + F.l1_loss(ff, fr.detach())
    return adv + FM_WEIGHT * fm


def discriminator_loss(gt, pred, discriminators: MultiScaleDiscriminator, stage: int):
    """Least-squares real/fake objective for the discriminator step."""
    if stage != 2:
        raise StateError(f"adversarial loss is stage-2 only, called in stage {stage}")
    loss = 0.0
    for real in discriminators(gt):
        loss = loss + ((real[-1] - 1.0) ** 2).mean()
    for fake in discriminators(pred.detach()):
        loss = loss + (fake[-1] ** 2).mean()
    return 0.5 * loss
