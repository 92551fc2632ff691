"""Classic z-buffer triangle rasterizer with per-vertex colors.

Coverage uses pixel centers with a top-left fill rule, color and depth are
interpolated perspective-correctly, and visibility is resolved with an
inverse-depth buffer. No anti-aliasing, no shading: shadeless vertex color
only.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .body_model import ColoredVertexSet
from .camera import Camera, project_points
from .errors import FormatError, ParameterError

IMGF_MAGIC = b"IMGF"


@dataclass(frozen=True)
class RasterImage:
    """height x width x 3 float32 RGB raster with values in [0, 1]."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != (self.height, self.width, 3):
            raise ParameterError("data must be (height, width, 3)")
        if self.data.dtype != np.float32:
            object.__setattr__(self, "data", self.data.astype(np.float32))


def _is_top_left(ax, ay, bx, by) -> bool:
    # edge a->b of a positively oriented triangle
    dx, dy = bx - ax, by - ay
    return (dy == 0.0 and dx > 0.0) or dy < 0.0


def rasterize(
    verts: ColoredVertexSet,
    faces: np.ndarray,
    cam: Camera,
    background=(1.0, 1.0, 1.0),
) -> RasterImage:
    """Render triangles with perspective-correct vertex-color interpolation.

    Degenerate (zero screen area) triangles and triangles with any vertex
    at or behind the near plane are skipped.
    """
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
        raise ParameterError("face indices out of range")
    h, w = cam.height, cam.width
    color = np.empty((h, w, 3), dtype=np.float64)
    color[:] = np.asarray(background, dtype=np.float64)
    zinv_buf = np.zeros((h, w), dtype=np.float64)

    if len(verts) and faces.size:
        uv, depth, valid = project_points(verts.positions, cam)
        for face in faces:
            if not valid[face].all():
                continue
            pts = uv[face]
            d = depth[face]
            cols = verts.colors[face]
            _fill_triangle(color, zinv_buf, pts, d, cols, w, h)

    return RasterImage(w, h, np.clip(color, 0.0, 1.0).astype(np.float32))


def _fill_triangle(color, zinv_buf, pts, d, cols, w, h):
    (x0, y0), (x1, y1), (x2, y2) = pts
    area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    if area == 0.0:
        return
    if area < 0.0:
        x1, y1, x2, y2 = x2, y2, x1, y1
        d = d[[0, 2, 1]]
        cols = cols[[0, 2, 1]]
        area = -area

    xmin = max(int(np.floor(min(x0, x1, x2) - 0.5)), 0)
    xmax = min(int(np.ceil(max(x0, x1, x2) - 0.5)), w - 1)
    ymin = max(int(np.floor(min(y0, y1, y2) - 0.5)), 0)
    ymax = min(int(np.ceil(max(y0, y1, y2) - 0.5)), h - 1)
    if xmin > xmax or ymin > ymax:
        return

    xs = np.arange(xmin, xmax + 1) + 0.5
    ys = np.arange(ymin, ymax + 1) + 0.5
    px, py = np.meshgrid(xs, ys)

    w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
    w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)

    inside = np.ones(px.shape, dtype=bool)
    for wv, a, b in ((w0, (x1, y1), (x2, y2)),
                     (w1, (x2, y2), (x0, y0)),
                     (w2, (x0, y0), (x1, y1))):
        if _is_top_left(a[0], a[1], b[0], b[1]):
            inside &= wv >= 0.0
        else:
            inside &= wv > 0.0
    if not inside.any():
        return

    b0 = w0[inside] / area
    b1 = w1[inside] / area
    b2 = w2[inside] / area
    zinv = b0 / d[0] + b1 / d[1] + b2 / d[2]

    yy, xx = np.nonzero(inside)
    yy = yy + ymin
    xx = xx + xmin
    nearer = zinv > zinv_buf[yy, xx]
    if not nearer.any():
        return
    yy, xx = yy[nearer], xx[nearer]
    b0, b1, b2, zinv = b0[nearer], b1[nearer], b2[nearer], zinv[nearer]
    interp = (
        np.outer(b0 / d[0], cols[0])
        + np.outer(b1 / d[1], cols[1])
        + np.outer(b2 / d[2], cols[2])
    ) / zinv[:, None]
    zinv_buf[yy, xx] = zinv
    color[yy, xx] = interp


# ---------------------------------------------------------------------------
# image file I/O


def save_png(img: RasterImage, path) -> None:
    """8-bit PNG; linear 0..1 -> 0..255 with round-half-up."""
    scaled = np.floor(np.clip(img.data, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(scaled, mode="RGB").save(path, format="PNG")


def load_png(path) -> RasterImage:
    with Image.open(path) as im:
        rgb = np.asarray(im.convert("RGB"), dtype=np.float32) / np.float32(255.0)
    return RasterImage(rgb.shape[1], rgb.shape[0], rgb)


def save_imgf(img: RasterImage, path) -> None:
    """Lossless float32 RGB container mirroring the RGBD layout."""
    with open(path, "wb") as fh:
        fh.write(IMGF_MAGIC)
        fh.write(struct.pack("<BBII", 1, 0, img.width, img.height))
        fh.write(np.ascontiguousarray(img.data, dtype="<f4").tobytes())


def load_imgf(path) -> RasterImage:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != IMGF_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {IMGF_MAGIC!r}")
        version, _flags, width, height = struct.unpack("<BBII", fh.read(10))
        if version != 1:
            raise FormatError(f"{path}: unsupported version {version}")
        raw = fh.read(height * width * 3 * 4)
        if len(raw) != height * width * 3 * 4:
            raise FormatError(f"{path}: truncated payload")
    data = np.frombuffer(raw, dtype="<f4").reshape(height, width, 3).copy()
    return RasterImage(width, height, data)


def load_image(path) -> RasterImage:
    """Dispatch on extension: .imgf for float32, anything else via PNG path."""
    if str(path).lower().endswith(".imgf"):
        return load_imgf(path)
    return load_png(path)
