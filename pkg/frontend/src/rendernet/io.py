"""Readers and writers for the renderer's on-disk interfaces.

The geometry pipeline emits "RGBD" projection files (4 interleaved f32
channels), "IMGF" float RGB images, 8-bit PNGs, camera JSON and a dataset
manifest JSON. This module implements those byte contracts directly; it
shares no code with the producer.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, ParameterError

RGBD_MAGIC = b"RGBD"
IMGF_MAGIC = b"IMGF"

_HEADER = struct.Struct("<BBII")  # version, flags, width, height


def _load_float_image(path, magic, channels):
    with open(path, "rb") as fh:
        got = fh.read(4)
        if got != magic:
            raise FormatError(
                f"{path}: bad magic {got!r}; the {magic.decode()} header contract "
                f"requires magic {magic!r}, u8 version 1, u8 flags, u32 width, u32 height"
            )
        version, flags, width, height = _HEADER.unpack(fh.read(_HEADER.size))
        if version != 1:
            raise FormatError(f"{path}: unsupported {magic.decode()} version {version}")
        expected = height * width * channels * 4
        raw = fh.read(expected)
        if len(raw) != expected:
            raise FormatError(f"{path}: truncated payload, expected {expected} bytes")
    data = np.frombuffer(raw, dtype="<f4").reshape(height, width, channels).copy()
    return data, bool(flags & 1)


def load_rgbd(path):
    """Projection file: (H, W, 4) float32 RGB + depth, plus normalized flag."""
    return _load_float_image(path, RGBD_MAGIC, 4)


def load_imgf(path):
    data, _ = _load_float_image(path, IMGF_MAGIC, 3)
    return data


def save_imgf(data, path):
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 3 or data.shape[2] != 3:
        raise ParameterError("imgf data must be (H, W, 3)")
    with open(path, "wb") as fh:
        fh.write(IMGF_MAGIC)
        fh.write(_HEADER.pack(1, 0, data.shape[1], data.shape[0]))
        fh.write(data.tobytes())


def load_png(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float32) / np.float32(255.0)


def save_png(data, path):
    scaled = np.floor(np.clip(data, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(scaled, mode="RGB").save(path, format="PNG")


def load_image(path):
    """RGB array from .png or .imgf by extension."""
    if str(path).lower().endswith(".imgf"):
        return load_imgf(path)
    return load_png(path)


def load_manifest(path):
    """Dataset manifest; verifies every referenced file exists."""
    path = Path(path)
    with open(path) as fh:
        manifest = json.load(fh)
    for key in ("entries", "split"):
        if key not in manifest:
            raise FormatError(f"{path}: manifest lacks {key!r}")
    for entry in manifest["entries"]:
        for key in ("projection_path", "ground_truth_path"):
            if not (path.parent / entry[key]).exists():
                raise FormatError(f"{path}: missing referenced file {entry[key]}")
    return manifest


def manifest_pairs(manifest, manifest_path, split):
    """(projection_path, ground_truth_path) for entries in one split."""
    base = Path(manifest_path).parent
    wanted = {sid for sid, name in manifest["split"].items() if name == split}
    pairs = [
        (base / e["projection_path"], base / e["ground_truth_path"])
        for e in manifest["entries"]
        if e["subject_id"] in wanted
    ]
    if not pairs:
        raise ParameterError(f"split {split!r} selects no entries")
    return pairs
