"""Pinhole camera: world-to-image projection with metric depth.

Image coordinates follow the standard convention: u is the horizontal
pixel column, v the vertical pixel row. Points at or behind the near
plane are reported via a validity mask rather than raised as errors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

EPS_NEAR = 1e-6


@dataclass(frozen=True)
class Camera:
    K: np.ndarray  # (3, 3) intrinsics, zero skew by default
    R: np.ndarray  # (3, 3) world-to-camera rotation
    t: np.ndarray  # (3,) translation, meters
    width: int
    height: int

    def __post_init__(self):
        K = np.asarray(self.K, dtype=np.float64)
        R = np.asarray(self.R, dtype=np.float64)
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if K.shape != (3, 3) or R.shape != (3, 3):
            raise ParameterError("K and R must be 3x3")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-6:
            raise ParameterError("R must be orthonormal")
        if np.linalg.det(R) <= 0:
            raise ParameterError("R must have positive determinant")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ParameterError("focal lengths must be positive")
        if np.max(np.abs(K[2] - (0.0, 0.0, 1.0))) > 0:
            raise ParameterError("bottom row of K must be (0, 0, 1)")
        if self.width < 1 or self.height < 1:
            raise ParameterError("image dimensions must be >= 1")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)


def project_points(points: np.ndarray, cam: Camera):
    """Project (N, 3) world points.

    Returns (uv, depth, valid): pixel coordinates (N, 2), camera-space
    depth in meters (N,), and a mask that is False at or behind the near
    plane. uv entries for invalid points are NaN.
    """
    points = np.asarray(points, dtype=np.float64)
    flat = points.reshape(-1, 3)
    if not np.all(np.isfinite(flat)):
        raise ParameterError("points must be finite")
    cam_pts = flat @ cam.R.T + cam.t
    depth = cam_pts[:, 2]
    valid = depth > EPS_NEAR
    uv = np.full((flat.shape[0], 2), np.nan)
    safe = np.where(valid, depth, 1.0)
    h = cam_pts @ cam.K.T
    uv[valid, 0] = (h[:, 0] / safe)[valid]
    uv[valid, 1] = (h[:, 1] / safe)[valid]
    return uv, depth, valid


def project(x, cam: Camera):
    """Project a single world point; None marks a behind-camera point."""
    uv, depth, valid = project_points(np.asarray(x, dtype=np.float64).reshape(1, 3), cam)
    if not valid[0]:
        return None
    return float(uv[0, 0]), float(uv[0, 1]), float(depth[0])


def unproject(u, v, d, cam: Camera) -> np.ndarray:
    """Invert project: pixel (u, v) at depth d back to a world point."""
    ray = np.linalg.solve(cam.K, np.array([u, v, 1.0], dtype=np.float64))
    cam_pt = ray * float(d)
    return cam.R.T @ (cam_pt - cam.t)


def look_at(eye, target, up, fx, fy, cx, cy, width, height) -> Camera:
    """Build a camera at eye whose optical axis passes through target."""
    eye = np.asarray(eye, dtype=np.float64).reshape(3)
    target = np.asarray(target, dtype=np.float64).reshape(3)
    up = np.asarray(up, dtype=np.float64).reshape(3)
    forward = target - eye
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ParameterError("eye and target coincide")
    z = forward / norm
    x = np.cross(up, z)
    xnorm = np.linalg.norm(x)
    if xnorm < 1e-9:
        raise ParameterError("up vector is parallel to the view direction")
    x = x / xnorm
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    t = -R @ eye
    K = np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])
    return Camera(K, R, t, int(width), int(height))


def save_camera(cam: Camera, path) -> None:
    payload = {
        "K": cam.K.tolist(),
        "R": cam.R.tolist(),
        "t": cam.t.tolist(),
        "width": cam.width,
        "height": cam.height,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_camera(path) -> Camera:
    with open(path) as fh:
        payload = json.load(fh)
    try:
        return Camera(
            np.asarray(payload["K"], dtype=np.float64),
            np.asarray(payload["R"], dtype=np.float64),
            np.asarray(payload["t"], dtype=np.float64),
            int(payload["width"]),
            int(payload["height"]),
        )
    except KeyError as exc:
        raise ParameterError(f"{path}: missing camera field {exc}") from exc
