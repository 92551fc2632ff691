"""Paired training-data generation.

Synthetic subjects are procedural capsule humanoids at desk scale
(roughly 0.3 m tall) so the default 0.1-0.7 m depth range applies.
Ground truth is the z-buffer raster of the same colored vertices; the
paired input is the depth-normalized RGB-D splat. Everything is
deterministic from the config, including across worker counts.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import body_model as bm
from .body_model import BodyModel, ColoredVertexSet
from .camera import Camera, look_at, save_camera
from .errors import ParameterError
from .raster import RasterImage, rasterize, save_png
from .splat import normalize_depth, save_rgbd, splat

_SCALE = 0.17  # unit-height skeleton -> desk-scale meters

# (parent, unit-scale rest position)
_SKELETON = [
    (-1, (0.00, 1.00, 0.00)),   # pelvis
    (0, (0.00, 1.20, 0.00)),    # spine
    (1, (0.00, 1.40, 0.00)),    # chest
    (2, (0.00, 1.62, 0.00)),    # head
    (2, (0.18, 1.42, 0.00)),    # left shoulder
    (4, (0.45, 1.40, 0.00)),    # left elbow
    (5, (0.70, 1.38, 0.00)),    # left wrist
    (2, (-0.18, 1.42, 0.00)),   # right shoulder
    (7, (-0.45, 1.40, 0.00)),   # right elbow
    (8, (-0.70, 1.38, 0.00)),   # right wrist
    (0, (0.10, 0.95, 0.00)),    # left hip
    (10, (0.11, 0.52, 0.00)),   # left knee
    (11, (0.12, 0.08, 0.00)),   # left ankle
    (0, (-0.10, 0.95, 0.00)),   # right hip
    (13, (-0.11, 0.52, 0.00)),  # right knee
    (14, (-0.12, 0.08, 0.00)),  # right ankle
]

_BONE_RADIUS = {1: 0.10, 2: 0.10, 3: 0.09, 4: 0.05, 5: 0.045, 6: 0.04,
                7: 0.05, 8: 0.045, 9: 0.04, 10: 0.07, 11: 0.06, 12: 0.05,
                13: 0.07, 14: 0.06, 15: 0.05}

_RINGS = 5
_SEGMENTS = 10


def _capsule(p0, p1, radius, rng):
    """Closed tube between two points: ring stack plus two pole caps."""
    axis = p1 - p0
    length = np.linalg.norm(axis)
    n = axis / length
    ref = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(n, ref)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)

    verts = []
    for t in np.linspace(0.0, 1.0, _RINGS):
        center = p0 + t * axis
        for k in range(_SEGMENTS):
            ang = 2.0 * np.pi * k / _SEGMENTS
            verts.append(center + radius * (np.cos(ang) * u + np.sin(ang) * v))
    bottom = len(verts)
    verts.append(p0 - radius * n)
    top = len(verts)
    verts.append(p1 + radius * n)

    faces = []
    for r in range(_RINGS - 1):
        for k in range(_SEGMENTS):
            a = r * _SEGMENTS + k
            b = r * _SEGMENTS + (k + 1) % _SEGMENTS
            c = a + _SEGMENTS
            d = b + _SEGMENTS
            faces.append((a, b, c))
            faces.append((b, d, c))
    for k in range(_SEGMENTS):
        faces.append((bottom, (k + 1) % _SEGMENTS, k))
        base = (_RINGS - 1) * _SEGMENTS
        faces.append((top, base + k, base + (k + 1) % _SEGMENTS))
    return np.asarray(verts), np.asarray(faces, dtype=np.int64)


def synth_subject(seed: int) -> tuple[BodyModel, ColoredVertexSet]:
    """Deterministic procedural humanoid with seeded proportions and colors."""
    rng = np.random.default_rng(seed)
    joints = np.array([p for _, p in _SKELETON], dtype=np.float64)
    parents = np.array([p for p, _ in _SKELETON], dtype=np.int64)
    j = len(joints)

    # seeded anthropometry: limb jitter and per-subject girth
    joints = joints + rng.normal(0.0, 0.015, joints.shape)
    girth = rng.uniform(0.85, 1.15)
    joints *= _SCALE

    positions, faces, bone_of = [], [], []
    offset = 0
    for child in range(j):
        p = parents[child]
        if p < 0:
            continue
        radius = _BONE_RADIUS[child] * girth * rng.uniform(0.9, 1.1) * _SCALE
        v, f = _capsule(joints[p], joints[child], radius, rng)
        positions.append(v)
        faces.append(f + offset)
        bone_of.extend([child] * len(v))
        offset += len(v)
    template = np.vstack(positions)
    faces = np.vstack(faces)
    bone_of = np.asarray(bone_of)
    n = len(template)

    # skinning: gaussian falloff of distance to each joint's bone segment
    children: dict[int, list[int]] = {}
    for child in range(j):
        p = parents[child]
        if p >= 0:
            children.setdefault(int(p), []).append(child)
    sigma = 0.05 * _SCALE / 0.17
    dist = np.empty((n, j))
    for k in range(j):
        if k in children:
            tail = joints[children[k]].mean(axis=0)
        else:
            tail = joints[k] + np.array([0.0, -0.02, 0.0])
        dist[:, k] = _point_segment_distance(template, joints[k], tail)
    weights = np.exp(-((dist / sigma) ** 2))
    weights /= weights.sum(axis=1, keepdims=True)

    # joint regressor: inverse-distance weights over the 8 nearest vertices
    regressor = np.zeros((j, n))
    for k in range(j):
        d = np.linalg.norm(template - joints[k], axis=1)
        nearest = np.argsort(d)[:8]
        w = 1.0 / (d[nearest] + 1e-3)
        regressor[k, nearest] = w / w.sum()

    ymin = template[:, 1].min()
    pelvis = joints[0]
    shape_basis = np.zeros((n, 3, 3))
    shape_basis[:, 1, 0] = (template[:, 1] - ymin) * 0.12
    shape_basis[:, 0, 1] = (template[:, 0] - pelvis[0]) * 0.12
    shape_basis[:, 2, 1] = (template[:, 2] - pelvis[2]) * 0.12
    shape_basis[:, 0, 2] = template[:, 0] * 0.06

    pose_basis = rng.normal(0.0, 5e-4, (n, 3, 9 * (j - 1)))

    az = np.arctan2(template[:, 2], template[:, 0])
    span = template[:, 1].max() - ymin
    uv = np.stack([az / (2.0 * np.pi) + 0.5, (template[:, 1] - ymin) / span], axis=1)

    palette = rng.uniform(0.1, 0.9, (j, 3))
    colors = palette[bone_of] + rng.normal(0.0, 0.03, (n, 3))
    colors = np.clip(colors, 0.02, 0.98)

    model = BodyModel(template, shape_basis, pose_basis, regressor, weights,
                      parents, faces, uv)
    return model, ColoredVertexSet(template, colors)


def _point_segment_distance(points, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int


def camera_rig(n: int, radius: float, target, intr: Intrinsics) -> list[Camera]:
    """n cameras on a sphere section around target, all facing it.

    Deterministic golden-angle layout with elevations within +-25 degrees,
    so the world up vector never degenerates.
    """
    if n < 1:
        raise ParameterError("rig needs at least one camera")
    if radius <= 0:
        raise ParameterError("radius must be positive")
    target = np.asarray(target, dtype=np.float64).reshape(3)
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    cams = []
    for i in range(n):
        frac = (i + 0.5) / n
        el = np.deg2rad(-25.0 + 50.0 * frac)
        az = 2.0 * np.pi * ((i * golden) % 1.0)
        direction = np.array([
            np.cos(el) * np.sin(az),
            np.sin(el),
            np.cos(el) * np.cos(az),
        ])
        eye = target + radius * direction
        cams.append(look_at(eye, target, (0.0, 1.0, 0.0),
                            intr.fx, intr.fy, intr.cx, intr.cy,
                            intr.width, intr.height))
    return cams


@dataclass
class DatasetConfig:
    out_dir: str
    n_subjects: int = 10
    cameras_per_subject: int = 4
    rig_size: int = 24
    rig_radius: float = 0.45
    image_width: int = 308
    image_height: int = 410
    focal: float | None = None
    depth_range: tuple[float, float] = (0.1, 0.7)
    train_fraction: float = 0.8
    seed: int = 0
    pose_jitter: float = 0.05
    shape_jitter: float = 0.5
    clutter: bool = False
    target: tuple[float, float, float] = (0.0, 0.16, 0.0)

    def resolved_focal(self) -> float:
        return self.focal if self.focal is not None else 1.2 * self.image_height

    @classmethod
    def from_json(cls, path) -> "DatasetConfig":
        with open(path) as fh:
            payload = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        if "depth_range" in payload:
            payload["depth_range"] = tuple(payload["depth_range"])
        if "target" in payload:
            payload["target"] = tuple(payload["target"])
        return cls(**payload)


def _subject_seed(seed: int, index: int) -> int:
    return seed * 1_000_003 + index


def _clutter_geometry(rng, target):
    """Off-mesh triangles the splat cannot see; forces inpainting-style gaps."""
    pos, col, faces = [], [], []
    for k in range(6):
        center = np.asarray(target) + rng.normal(0.0, 0.08, 3)
        tri = center + rng.normal(0.0, 0.03, (3, 3))
        color = rng.uniform(0.1, 0.9, 3)
        pos.extend(tri)
        col.extend([color] * 3)
        faces.append([3 * k, 3 * k + 1, 3 * k + 2])
    return np.asarray(pos), np.asarray(col), np.asarray(faces, dtype=np.int64)


def build_dataset(config: DatasetConfig, threads: int | None = None) -> dict:
    """Generate all pairs and write the manifest; returns the manifest dict."""
    out = Path(config.out_dir)
    (out / "cameras").mkdir(parents=True, exist_ok=True)
    d_min, d_max = config.depth_range
    if not d_min < d_max:
        raise ParameterError("depth_range must be increasing")

    intr = Intrinsics(
        fx=config.resolved_focal(), fy=config.resolved_focal(),
        cx=config.image_width / 2.0, cy=config.image_height / 2.0,
        width=config.image_width, height=config.image_height,
    )
    rig = camera_rig(config.rig_size, config.rig_radius, config.target, intr)
    for ci, cam in enumerate(rig):
        save_camera(cam, out / "cameras" / f"cam_{ci:03d}.json")

    tasks = []
    for si in range(config.n_subjects):
        subject_id = f"s{si:03d}"
        rng = np.random.default_rng([config.seed, si, 7])
        model, colored = synth_subject(_subject_seed(config.seed, si))
        beta = rng.normal(0.0, config.shape_jitter, model.num_shape_dims)
        theta = rng.normal(0.0, config.pose_jitter, 3 * model.num_joints)
        theta[:3] = 0.0
        posed = ColoredVertexSet(bm.pose_mesh(model, beta, theta), colored.colors)
        cam_ids = sorted(int(c) for c in rng.choice(config.rig_size,
                                                    config.cameras_per_subject,
                                                    replace=False))
        clutter = None
        if config.clutter:
            clutter = _clutter_geometry(np.random.default_rng([config.seed, si, 13]),
                                        config.target)
        (out / "subjects" / subject_id).mkdir(parents=True, exist_ok=True)
        for ci in cam_ids:
            tasks.append((subject_id, ci, posed, model.faces, clutter))

    def render_entry(task):
        subject_id, ci, posed, faces, clutter = task
        cam = rig[ci]
        sdir = out / "subjects" / subject_id
        proj = normalize_depth(splat(posed, cam), d_min, d_max)
        proj_path = sdir / f"proj_c{ci:03d}.rgbd"
        save_rgbd(proj, proj_path)
        if clutter is not None:
            cpos, ccol, cfaces = clutter
            all_pos = np.vstack([posed.positions, cpos])
            all_col = np.vstack([posed.colors, ccol])
            gt_verts = ColoredVertexSet(all_pos, all_col)
            gt_faces = np.vstack([faces, cfaces + len(posed)])
        else:
            gt_verts, gt_faces = posed, faces
        gt = rasterize(gt_verts, gt_faces, cam)
        gt_path = sdir / f"gt_c{ci:03d}.png"
        save_png(gt, gt_path)
        return {
            "subject_id": subject_id,
            "camera_id": f"cam_{ci:03d}",
            "pose_id": "p000",
            "projection_path": str(proj_path.relative_to(out)),
            "ground_truth_path": str(gt_path.relative_to(out)),
            "camera_path": f"cameras/cam_{ci:03d}.json",
        }

    workers = threads if threads and threads > 0 else (os.cpu_count() or 1)
    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(render_entry, tasks))
    else:
        entries = [render_entry(t) for t in tasks]

    split_rng = np.random.default_rng([config.seed, 999])
    subject_ids = [f"s{si:03d}" for si in range(config.n_subjects)]
    order = split_rng.permutation(config.n_subjects)
    n_train = int(round(config.train_fraction * config.n_subjects))
    split = {subject_ids[k]: ("train" if rank < n_train else "test")
             for rank, k in enumerate(order)}

    manifest = {
        "entries": entries,
        "split": split,
        "depth_range": [d_min, d_max],
        "image_size": [config.image_width, config.image_height],
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_manifest(path) -> dict:
    with open(path) as fh:
        manifest = json.load(fh)
    base = Path(path).parent
    for entry in manifest["entries"]:
        for key in ("projection_path", "ground_truth_path", "camera_path"):
            if not (base / entry[key]).exists():
                raise ParameterError(f"manifest references missing file {entry[key]}")
    return manifest
