"""Test-split evaluation: PSNR and perceptual patch distance per entry."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from . import io
from .errors import ParameterError
from .perceptual import FeatureExtractor, lpips_distance
from .train import predict

PSNR_CAP_DB = 99.0


def psnr_db(a: np.ndarray, b: np.ndarray) -> float:
    """Peak-1.0 PSNR on [0,1] arrays, capped at 99 dB for identical inputs.

    Matches the geometry pipeline's metrics module bit for bit: float64
    MSE over all pixels and channels, 10*log10(1/mse).
    """
    if a.shape != b.shape:
        raise ParameterError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    return PSNR_CAP_DB if mse == 0.0 else float(10.0 * np.log10(1.0 / mse))


def psnr_files(path_a, path_b) -> float:
    return psnr_db(io.load_image(path_a), io.load_image(path_b))


@torch.no_grad()
def lpips_arrays(a: np.ndarray, b: np.ndarray, extractor: FeatureExtractor) -> float:
    ta = torch.from_numpy(np.ascontiguousarray(a, dtype=np.float32)).permute(2, 0, 1)[None]
    tb = torch.from_numpy(np.ascontiguousarray(b, dtype=np.float32)).permute(2, 0, 1)[None]
    return float(lpips_distance(ta, tb, extractor)[0])


def evaluate(manifest_path, model, out_dir=None, split="test",
             extractor: FeatureExtractor | None = None, device="cpu"):
    """Render every split entry and report per-entry and mean metrics."""
    manifest = io.load_manifest(manifest_path)
    pairs = io.manifest_pairs(manifest, manifest_path, split)
    extractor = (extractor or FeatureExtractor()).to(device)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    entries = []
    for proj_path, gt_path in pairs:
        proj, _ = io.load_rgbd(proj_path)
        gt = io.load_image(gt_path)
        pred = predict(model, proj, device=device)
        if out is not None:
            pred_path = out / (Path(proj_path).stem + "_pred.png")
            io.save_png(pred, pred_path)
            pred = io.load_png(pred_path)  # score what was actually written
        entries.append({
            "projection": str(proj_path),
            "ground_truth": str(gt_path),
            "psnr_db": psnr_db(gt, pred),
            "lpips": lpips_arrays(gt, pred, extractor),
        })

    report = {
        "mean": {
            "psnr_db": float(np.mean([e["psnr_db"] for e in entries])),
            "lpips": float(np.mean([e["lpips"] for e in entries])),
        },
        "entries": entries,
    }
    if out is not None:
        with open(out / "report.json", "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return report
