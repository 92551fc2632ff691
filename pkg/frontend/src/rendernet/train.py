"""Two-stage trainer.

Stage 1 minimizes the perceptual loss with Adam at 1e-4. Stage 2 restarts
Adam at 1e-5 and adds the multi-scale adversarial and feature-matching
terms with their own discriminator optimizer. Batch size 10, one
checkpoint per epoch, resumable, and deterministic for a fixed seed: the
batch order of epoch k depends only on (seed, k).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import io
from .adversarial import MultiScaleDiscriminator, discriminator_loss, gan_fm_loss
from .errors import ParameterError
from .model import RendererNet
from .perceptual import FeatureExtractor, vgg_loss

BATCH_SIZE = 10
LR_STAGE1 = 1e-4
LR_STAGE2 = 1e-5


@dataclass
class TrainState:
    stage: int
    epoch: int
    batch_size: int = BATCH_SIZE
    lr: float = LR_STAGE1


class PairDataset:
    """All (projection, ground truth) pairs of one split, held in memory."""

    def __init__(self, manifest_path, split="train"):
        manifest = io.load_manifest(manifest_path)
        self.inputs = []
        self.targets = []
        for proj_path, gt_path in io.manifest_pairs(manifest, manifest_path, split):
            proj, _ = io.load_rgbd(proj_path)
            gt = io.load_image(gt_path)
            self.inputs.append(torch.from_numpy(proj).permute(2, 0, 1))
            self.targets.append(torch.from_numpy(gt).permute(2, 0, 1))
        self.inputs = torch.stack(self.inputs)
        self.targets = torch.stack(self.targets)

    def __len__(self):
        return len(self.inputs)


def _epoch_order(n, seed, epoch):
    gen = torch.Generator().manual_seed(seed * 1_000_003 + epoch)
    return torch.randperm(n, generator=gen)


def save_checkpoint(path, model, optimizer, state: TrainState, history,
                    disc=None, disc_optimizer=None, widths=None, input_skip=True):
    payload = {
        "epoch": state.epoch,
        "stage": state.stage,
        "model": model.state_dict(),
        "optimizer": optimizer.state_dict(),
        "history": history,
        "widths": widths,
        "input_skip": input_skip,
    }
    if disc is not None:
        payload["disc"] = disc.state_dict()
        payload["disc_optimizer"] = disc_optimizer.state_dict()
    tmp = str(path) + ".tmp"
    torch.save(payload, tmp)
    Path(tmp).replace(path)


def load_renderer(checkpoint_path, device="cpu"):
    payload = torch.load(checkpoint_path, map_location=device, weights_only=True)
    widths = payload.get("widths") or (64, 128, 256, 512)
    model = RendererNet(widths=tuple(widths),
                        input_skip=payload.get("input_skip", True)).to(device)
    model.load_state_dict(payload["model"])
    model.eval()
    return model, payload


def train(
    manifest_path,
    out_dir,
    stage1_epochs=100,
    stage2_epochs=0,
    widths=(64, 128, 256, 512),
    seed=0,
    device="cpu",
    resume=None,
    extractor: FeatureExtractor | None = None,
    input_skip=True,
    keep_checkpoints=None,
):
    """Run the two-stage schedule; returns (model, history)."""
    if stage1_epochs < 0 or stage2_epochs < 0:
        raise ParameterError("epoch counts must be non-negative")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(seed)

    data = PairDataset(manifest_path)
    extractor = (extractor or FeatureExtractor()).to(device)
    model = RendererNet(widths=widths, input_skip=input_skip).to(device)
    optimizer = torch.optim.Adam(model.parameters(), lr=LR_STAGE1)
    disc = None
    disc_optimizer = None
    history = []
    start_epoch = 0
    resumed_stage = None

    if resume is not None:
        payload = torch.load(resume, map_location=device, weights_only=True)
        model.load_state_dict(payload["model"])
        start_epoch = payload["epoch"] + 1
        history = list(payload["history"])
        resumed_stage = payload["stage"]
        optimizer.load_state_dict(payload["optimizer"])
        if "disc" in payload:
            disc = MultiScaleDiscriminator().to(device)
            disc.load_state_dict(payload["disc"])
            disc_optimizer = torch.optim.Adam(disc.parameters(), lr=LR_STAGE2)
            disc_optimizer.load_state_dict(payload["disc_optimizer"])

    total_epochs = stage1_epochs + stage2_epochs
    current_stage = resumed_stage if resumed_stage is not None else 1

    for epoch in range(start_epoch, total_epochs):
        stage = 1 if epoch < stage1_epochs else 2
        if stage == 2 and current_stage != 2:
            # stage-2 handoff: fresh Adam at the lower rate, new critics
            optimizer = torch.optim.Adam(model.parameters(), lr=LR_STAGE2)
            disc = MultiScaleDiscriminator().to(device)
            disc_optimizer = torch.optim.Adam(disc.parameters(), lr=LR_STAGE2)
        current_stage = stage

        model.train()
        order = _epoch_order(len(data), seed, epoch)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, len(data), BATCH_SIZE):
            idx = order[lo:lo + BATCH_SIZE]
            x = data.inputs[idx].to(device)
            y = data.targets[idx].to(device)
            pred = model(x)
            loss = vgg_loss(y, pred, extractor)
            if stage == 2:
                loss = loss + gan_fm_loss(y, pred, disc, stage)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            if stage == 2:
                d_loss = discriminator_loss(y, pred, disc, stage)
                disc_optimizer.zero_grad(set_to_none=True)
                d_loss.backward()
                disc_optimizer.step()
            epoch_loss += float(loss.detach())
            n_batches += 1

        history.append({"epoch": epoch, "stage": stage, "loss": epoch_loss / n_batches})
        state = TrainState(stage=stage, epoch=epoch,
                           lr=LR_STAGE1 if stage == 1 else LR_STAGE2)
        save_checkpoint(out / f"epoch_{epoch:04d}.pt", model, optimizer, state,
                        history, disc, disc_optimizer, widths=list(widths),
                        input_skip=input_skip)
        save_checkpoint(out / "latest.pt", model, optimizer, state,
                        history, disc, disc_optimizer, widths=list(widths),
                        input_skip=input_skip)
        if keep_checkpoints is not None:
            stale = sorted(out.glob("epoch_*.pt"))[:-keep_checkpoints]
            for old in stale:
                old.unlink()

    model.eval()
    return model, history


@torch.no_grad()
def predict(model: nn.Module, projection: np.ndarray, device="cpu"):
    """(H, W, 4) projection array -> (H, W, 3) RGB array in [0, 1]."""
    x = torch.from_numpy(np.ascontiguousarray(projection, dtype=np.float32))
    x = x.permute(2, 0, 1).unsqueeze(0).to(device)
    was_training = model.training
    model.eval()
    y = model(x)[0].permute(1, 2, 0).cpu().numpy()
    if was_training:
        model.train()
    return y
