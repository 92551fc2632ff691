"""Sparse RGB-D vertex splatting.

Every vertex is projected and written into the pixel its floored image
coordinates select; the front-most (minimum-depth) vertex wins a pixel,
with equal depths resolved to the lowest vertex index so the result is
independent of input order and thread count. All pixels start at the
background value (1, 1, 1, 1), which stays identifiable by depth after
normalization.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from .body_model import ColoredVertexSet
from .camera import Camera, project_points
from .errors import FormatError, ParameterError

RGBD_MAGIC = b"RGBD"
FLAG_DEPTH_NORMALIZED = 1

BACKGROUND = 1.0


@dataclass(frozen=True)
class ProjectionImage:
    """height x width x 4 float32 raster holding (R, G, B, depth)."""

    width: int
    height: int
    data: np.ndarray
    depth_normalized: bool = False

    def __post_init__(self):
        if self.data.shape != (self.height, self.width, 4):
            raise ParameterError("data must be (height, width, 4)")
        if self.data.dtype != np.float32:
            object.__setattr__(self, "data", self.data.astype(np.float32))

    def background_mask(self) -> np.ndarray:
        """True where a pixel still holds the untouched background value."""
        return np.all(self.data == BACKGROUND, axis=2)


def splat(verts: ColoredVertexSet, cam: Camera) -> ProjectionImage:
    """Project a colored vertex set into a fresh projection image.

    Behind-camera and out-of-bounds vertices are discarded. Depth is kept
    as metric camera-space z; see normalize_depth for the mapped variant.
    """
    h, w = cam.height, cam.width
    data = np.full((h, w, 4), BACKGROUND, dtype=np.float32)
    if len(verts) > 0:
        uv, depth, valid = project_points(verts.positions, cam)
        iu = np.full(len(verts), -1, dtype=np.int64)
        iv = np.full(len(verts), -1, dtype=np.int64)
        iu[valid] = np.floor(uv[valid, 0]).astype(np.int64)
        iv[valid] = np.floor(uv[valid, 1]).astype(np.int64)
        keep = valid & (iu >= 0) & (iu < w) & (iv >= 0) & (iv < h)
        idx = np.flatnonzero(keep)
        if idx.size:
            pix = iv[idx] * w + iu[idx]
            # depth-sort with index tie-break, then keep the first hit per pixel
            order = np.lexsort((idx, depth[idx]))
            pix_sorted = pix[order]
            uniq_pix, first = np.unique(pix_sorted, return_index=True)
            winners = idx[order[first]]
            flat = data.reshape(-1, 4)
            flat[uniq_pix, :3] = verts.colors[winners].astype(np.float32)
            flat[uniq_pix, 3] = depth[winners].astype(np.float32)
    return ProjectionImage(w, h, data)


def normalize_depth(img: ProjectionImage, d_min: float, d_max: float) -> ProjectionImage:
    """Map metric depth linearly onto [0, 1); background pixels keep 1."""
    if not d_min < d_max:
        raise ParameterError("d_min must be strictly less than d_max")
    data = img.data.copy()
    occupied = ~img.background_mask()
    scaled = (data[occupied, 3] - d_min) / (d_max - d_min)
    top = np.nextafter(np.float32(1.0), np.float32(0.0))
    data[occupied, 3] = np.clip(scaled, 0.0, top)
    return replace(img, data=data, depth_normalized=True)


# ---------------------------------------------------------------------------
# binary container: magic "RGBD", u8 version=1, u8 flags (bit0 set when the
# depth channel is normalized), u32 width, u32 height (little-endian), then
# height*width*4 float32 little-endian, row-major, channel-interleaved.


def save_rgbd(img: ProjectionImage, path) -> None:
    flags = FLAG_DEPTH_NORMALIZED if img.depth_normalized else 0
    with open(path, "wb") as fh:
        fh.write(RGBD_MAGIC)
        fh.write(struct.pack("<BBII", 1, flags, img.width, img.height))
        fh.write(np.ascontiguousarray(img.data, dtype="<f4").tobytes())


def load_rgbd(path) -> ProjectionImage:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != RGBD_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {RGBD_MAGIC!r}")
        version, flags, width, height = struct.unpack("<BBII", fh.read(10))
        if version != 1:
            raise FormatError(f"{path}: unsupported version {version}")
        raw = fh.read(height * width * 4 * 4)
        if len(raw) != height * width * 4 * 4:
            raise FormatError(f"{path}: truncated payload")
    data = np.frombuffer(raw, dtype="<f4").reshape(height, width, 4).copy()
    return ProjectionImage(width, height, data, bool(flags & FLAG_DEPTH_NORMALIZED))
