"""Image comparison metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .raster import RasterImage

PSNR_CAP_DB = 99.0


@dataclass(frozen=True)
class MetricReport:
    psnr_db: float
    mse: float
    n_pixels: int


def psnr(a: RasterImage, b: RasterImage, mask: np.ndarray | None = None) -> MetricReport:
    """PSNR in dB with peak 1.0; identical images are capped at 99 dB.

    An optional boolean mask restricts the comparison to selected pixels.
    """
    if (a.width, a.height) != (b.width, b.height):
        raise ParameterError("image dimensions must match")
    da = a.data.astype(np.float64)
    db = b.data.astype(np.float64)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (a.height, a.width):
            raise ParameterError("mask dimensions must match the images")
        if not mask.any():
            raise ParameterError("mask selects no pixels")
        da = da[mask]
        db = db[mask]
        n_pixels = int(mask.sum())
    else:
        n_pixels = a.width * a.height
    mse = float(np.mean((da - db) ** 2))
    value = PSNR_CAP_DB if mse == 0.0 else float(10.0 * np.log10(1.0 / mse))
    return MetricReport(psnr_db=value, mse=mse, n_pixels=n_pixels)


def report_line(path_a, path_b, report: MetricReport) -> str:
    """One JSON line per compared pair."""
    return json.dumps(
        {"pair": [str(path_a), str(path_b)], "psnr_db": report.psnr_db, "mse": report.mse}
    )
