"""Nearest-neighbor inpainting baseline.

Fills every background pixel of a sparse projection with the color of the
nearest splatted pixel. This is the non-learned reference the renderer
must beat on held-out views.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import distance_transform_edt


def nn_inpaint(projection: np.ndarray) -> np.ndarray:
    """(H, W, 4) projection -> (H, W, 3) RGB with gaps filled.

    Background pixels are those the splat left at (1, 1, 1, 1). If the
    projection is entirely background, it is returned as-is (white).
    """
    rgb = projection[..., :3].astype(np.float32)
    background = np.all(projection == 1.0, axis=2)
    if background.all():
        return rgb
    _, (iy, ix) = distance_transform_edt(background, return_indices=True)
    return rgb[iy, ix]
