"""UNet generator mapping 4-channel projections to RGB images.

Four encoder stages (each preceded by 2x max-pool) and four decoder stages
(each preceded by bilinear 2x upsampling and skip concatenation), every
stage a double block of conv3x3 -> norm -> ReLU. Inputs are reflect-padded
to multiples of 16 and cropped back, so any spatial size is accepted; a
final sigmoid bounds outputs to [0, 1].

By default the projection's RGB channels are added to the head logits in
logit space, so an untrained net already reproduces the splatted colors
(and the white background) and training only has to learn corrections.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .errors import ParameterError

DOWNSAMPLE_FACTOR = 16  # four 2x pools


class DoubleConv(nn.Sequential):
    def __init__(self, in_ch, out_ch):
        super().__init__(
            nn.Conv2d(in_ch, out_ch, kernel_size=3, padding=1),
            nn.BatchNorm2d(out_ch),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_ch, out_ch, kernel_size=3, padding=1),
            nn.BatchNorm2d(out_ch),
            nn.ReLU(inplace=True),
        )


class RendererNet(nn.Module):
    def __init__(self, in_channels=4, out_channels=3, widths=(64, 128, 256, 512),
                 input_skip=True, skip_scale=0.3, head_gain=32.0,
                 output="sigmoid"):
        super().__init__()
        if len(widths) != 4:
            raise ParameterError("widths must list the four encoder stage widths")
        if output not in ("sigmoid", "clamp"):
            raise ParameterError(f"unknown output mode: {output!r}")
        self.input_skip = bool(input_skip) and in_channels >= out_channels
        self.skip_scale = float(skip_scale)
        self.head_gain = float(head_gain)
        self.output = output
        w0, w1, w2, w3 = widths
        self.stem = DoubleConv(in_channels, w0)
        self.pool = nn.MaxPool2d(2)
        self.enc = nn.ModuleList([
            DoubleConv(w0, w1),
            DoubleConv(w1, w2),
            DoubleConv(w2, w3),
            DoubleConv(w3, w3),
        ])
        self.dec = nn.ModuleList([
            DoubleConv(w3 + w3, w2),
            DoubleConv(w2 + w2, w1),
            DoubleConv(w1 + w1, w0),
            DoubleConv(w0 + w0, w0),
        ])
        self.head = nn.Conv2d(w0, out_channels, kernel_size=1)
        with torch.no_grad():
            # gain keeps the reachable logit range wide at a small step size
            # without inflating the initial output
            self.head.weight /= self.head_gain
            self.head.bias /= self.head_gain

    def forward(self, x):
        if x.ndim != 4:
            raise ParameterError("input must be (batch, channels, H, W)")
        h, w = x.shape[2], x.shape[3]
        pad_h = (-h) % DOWNSAMPLE_FACTOR
        pad_w = (-w) % DOWNSAMPLE_FACTOR
        if pad_h or pad_w:
            # reflect needs pad < size; fall back for tiny inputs
            mode = "reflect" if pad_h < h and pad_w < w else "replicate"
            x = F.pad(x, (0, pad_w, 0, pad_h), mode=mode)

        skips = [self.stem(x)]
        for stage in self.enc:
            skips.append(stage(self.pool(skips[-1])))

        y = skips.pop()
        for stage in self.dec:
            y = F.interpolate(y, scale_factor=2, mode="bilinear", align_corners=False)
            y = stage(torch.cat([y, skips.pop()], dim=1))
        logits = self.head_gain * self.head(y)
        if self.output == "clamp":
            # residual on the input colors; clamp saturates to [0, 1] with
            # unit gradient inside the range
            if self.input_skip:
                logits = logits + x[:, :logits.shape[1]]
            y = logits.clamp(0.0, 1.0)
        else:
            if self.input_skip:
                eps = 1e-3
                rgb = x[:, :logits.shape[1]].clamp(eps, 1.0 - eps)
                logits = logits + self.skip_scale * torch.log(rgb / (1.0 - rgb))
            y = torch.sigmoid(logits)
        return y[:, :, :h, :w]
