"""Blend-skinned body model: blendshapes, joints, LBS posing and unposing.

The model is a template mesh deformed by linear shape/pose blendshapes and
posed with linear blend skinning over a kinematic tree. Pose features for
the pose blendshapes are the flattened per-joint rotation matrices minus
identity, root excluded, so the zero pose contributes zero offsets.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DegenerateSkinningError, FormatError, ParameterError

_WEIGHT_TOL = 1e-6
_COND_LIMIT = 1e8

BSM_MAGIC = b"BSM1"
_FLAG_HAS_UV = 1


@dataclass(frozen=True)
class BodyModel:
    """Container for the skinned template and its deformation bases.

    Arrays:
      template        (N, 3) rest-pose vertex positions, meters
      shape_basis     (N, 3, S) offsets per unit shape coefficient
      pose_basis      (N, 3, 9*(J-1)) offsets per unit pose feature
      joint_regressor (J, N) vertex weights producing joint locations
      skin_weights    (N, J) LBS weights, rows sum to 1
      parents         (J,) parent joint index, -1 marks the root
      faces           (F, 3) triangle vertex indices
      uv              optional (N, 2) texture coordinates in [0, 1]^2
    """

    template: np.ndarray
    shape_basis: np.ndarray
    pose_basis: np.ndarray
    joint_regressor: np.ndarray
    skin_weights: np.ndarray
    parents: np.ndarray
    faces: np.ndarray
    uv: np.ndarray | None = None

    def __post_init__(self):
        n, j = self.num_vertices, self.num_joints
        if n <= 0 or j <= 0:
            raise ParameterError("model must have at least one vertex and one joint")
        if self.shape_basis.shape[:2] != (n, 3):
            raise ParameterError("shape_basis must be (N, 3, S)")
        if self.pose_basis.shape != (n, 3, 9 * (j - 1)):
            raise ParameterError("pose_basis must be (N, 3, 9*(J-1))")
        if self.joint_regressor.shape != (j, n):
            raise ParameterError("joint_regressor must be (J, N)")
        if self.skin_weights.shape != (n, j):
            raise ParameterError("skin_weights must be (N, J)")
        if np.any(self.skin_weights < 0):
            raise ParameterError("skin_weights must be nonnegative")
        row_sums = self.skin_weights.sum(axis=1)
        if np.max(np.abs(row_sums - 1.0)) > _WEIGHT_TOL:
            raise ParameterError("skin_weights rows must sum to 1")
        self._check_tree()
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= n):
            raise ParameterError("face indices out of range")
        if self.uv is not None and self.uv.shape != (n, 2):
            raise ParameterError("uv must be (N, 2)")

    def _check_tree(self):
        parents = np.asarray(self.parents)
        if parents.shape != (self.num_joints,):
            raise ParameterError("parents must have length J")
        roots = np.flatnonzero(parents < 0)
        if len(roots) != 1:
            raise ParameterError("parents must contain exactly one root sentinel")
        # walk every joint to the root; bounded steps rules out cycles
        for j in range(self.num_joints):
            k, steps = j, 0
            while parents[k] >= 0:
                k = int(parents[k])
                steps += 1
                if steps > self.num_joints:
                    raise ParameterError("parents encodes a cycle")

    @property
    def num_vertices(self) -> int:
        return self.template.shape[0]

    @property
    def num_joints(self) -> int:
        return self.joint_regressor.shape[0]

    @property
    def num_shape_dims(self) -> int:
        return self.shape_basis.shape[2]


@dataclass(frozen=True)
class ColoredVertexSet:
    """Vertex positions (meters) with per-vertex RGB colors in [0, 1]."""

    positions: np.ndarray
    colors: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        col = np.clip(np.asarray(self.colors, dtype=np.float64), 0.0, 1.0)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ParameterError("positions must be (N, 3)")
        if col.shape != pos.shape:
            raise ParameterError("colors must match positions shape")
        if not np.all(np.isfinite(pos)):
            raise ParameterError("positions must be finite")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)

    def __len__(self) -> int:
        return self.positions.shape[0]


def _as_beta(model: BodyModel, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    if beta.shape[0] != model.num_shape_dims:
        raise ParameterError(
            f"beta has length {beta.shape[0]}, model expects {model.num_shape_dims}"
        )
    if not np.all(np.isfinite(beta)):
        raise ParameterError("beta must be finite")
    return beta


def _as_theta(model: BodyModel, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape[0] != 3 * model.num_joints:
        raise ParameterError(
            f"theta has length {theta.shape[0]}, model expects {3 * model.num_joints}"
        )
    if not np.all(np.isfinite(theta)):
        raise ParameterError("theta must be finite")
    return theta


def shape_offsets(model: BodyModel, beta) -> np.ndarray:
    """Linear combination of the shape basis slices, (N, 3)."""
    beta = _as_beta(model, beta)
    return np.einsum("ncs,s->nc", model.shape_basis, beta)


def joint_rotations(model: BodyModel, theta) -> np.ndarray:
    """Per-joint rotation matrices (J, 3, 3) from axis-angle theta."""
    theta = _as_theta(model, theta)
    return Rotation.from_rotvec(theta.reshape(-1, 3)).as_matrix()


def pose_feature(model: BodyModel, theta) -> np.ndarray:
    """Flattened (R - I) for every non-root joint, length 9*(J-1)."""
    rots = joint_rotations(model, theta)
    root = int(np.flatnonzero(np.asarray(model.parents) < 0)[0])
    non_root = [j for j in range(model.num_joints) if j != root]
    return (rots[non_root] - np.eye(3)).reshape(-1)


def pose_offsets(model: BodyModel, theta) -> np.ndarray:
    """Pose-corrective offsets (N, 3); zero for the zero pose."""
    feat = pose_feature(model, theta)
    return np.einsum("ncp,p->nc", model.pose_basis, feat)


def joint_locations(model: BodyModel, beta) -> np.ndarray:
    """Regressed joint positions (J, 3) on the shaped template."""
    shaped = model.template + shape_offsets(model, beta)
    return model.joint_regressor @ shaped


def _relative_transforms(model: BodyModel, rots: np.ndarray, joints: np.ndarray) -> np.ndarray:
    """Per-joint 4x4 transforms mapping rest-pose space to posed space.

    Each joint's rigid transform is composed along the kinematic tree and
    re-centered so it acts about the joint's rest location.
    """
    j = model.num_joints
    parents = np.asarray(model.parents)
    world = np.zeros((j, 4, 4))
    order = _topo_order(parents)
    for k in order:
        local = np.eye(4)
        local[:3, :3] = rots[k]
        p = int(parents[k])
        if p < 0:
            local[:3, 3] = joints[k]
            world[k] = local
        else:
            local[:3, 3] = joints[k] - joints[p]
            world[k] = world[p] @ local
    rel = world.copy()
    rel[:, :3, 3] -= np.einsum("jab,jb->ja", world[:, :3, :3], joints)
    return rel


def _topo_order(parents: np.ndarray) -> list[int]:
    order, placed = [], set()
    pending = list(range(len(parents)))
    while pending:
        rest = []
        for k in pending:
            p = int(parents[k])
            if p < 0 or p in placed:
                order.append(k)
                placed.add(k)
            else:
                rest.append(k)
        pending = rest
    return order


def _blended_transforms(model: BodyModel, rots: np.ndarray, joints: np.ndarray) -> np.ndarray:
    rel = _relative_transforms(model, rots, joints)
    return np.einsum("nj,jab->nab", model.skin_weights, rel)


def _world_rotations(parents: np.ndarray, rots: np.ndarray, order: list[int]) -> np.ndarray:
    world = np.zeros_like(rots)
    for k in order:
        p = int(parents[k])
        world[k] = rots[k] if p < 0 else world[p] @ rots[k]
    return world


def _relative_translations(parents, world_rots, joints, order) -> np.ndarray:
    """Translation parts of the joint-centered posed transforms; affine in joints."""
    world_t = np.zeros((len(parents), 3))
    for k in order:
        p = int(parents[k])
        if p < 0:
            world_t[k] = joints[k]
        else:
            world_t[k] = world_t[p] + world_rots[p] @ (joints[k] - joints[p])
    return world_t - np.einsum("kab,kb->ka", world_rots, joints)


def _apply_transforms(mats: np.ndarray, points: np.ndarray) -> np.ndarray:
    return np.einsum("nab,nb->na", mats[:, :3, :3], points) + mats[:, :3, 3]


def pose_mesh(model: BodyModel, beta, theta) -> np.ndarray:
    """Pose the shaped template with LBS; returns (N, 3) positions."""
    beta = _as_beta(model, beta)
    shaped = model.template + shape_offsets(model, beta)
    rest = shaped + pose_offsets(model, theta)
    joints = model.joint_regressor @ shaped
    rots = joint_rotations(model, theta)
    blended = _blended_transforms(model, rots, joints)
    return _apply_transforms(blended, rest)


def unpose(model: BodyModel, posed: ColoredVertexSet, theta) -> ColoredVertexSet:
    """Recover the subject-specific rest-pose template from a posed set.

    The per-vertex blended transform is inverted directly and the pose
    blendshape offsets are subtracted; colors pass through. Joint
    locations depend on the unknown subject shape, but the map from
    rest-pose joints to the joints re-regressed from the unposed vertices
    is affine (world rotations depend only on the pose), so the
    self-consistent joints are obtained from one small linear solve.
    """
    if len(posed) != model.num_vertices:
        raise ParameterError("posed vertex count does not match model")
    parents = np.asarray(model.parents)
    order = _topo_order(parents)
    rots = joint_rotations(model, theta)
    world_rots = _world_rotations(parents, rots, order)
    corrective = pose_offsets(model, theta)

    linear = np.einsum("nj,jab->nab", model.skin_weights, world_rots)
    cond = np.linalg.cond(linear)
    if np.max(cond) > _COND_LIMIT:
        raise DegenerateSkinningError(
            f"blended skinning transform condition number {np.max(cond):.3g} "
            f"exceeds {_COND_LIMIT:.0e}"
        )
    inv_linear = np.linalg.inv(linear)

    def rest_for(joints: np.ndarray) -> np.ndarray:
        rel_t = _relative_translations(parents, world_rots, joints, order)
        blended_t = model.skin_weights @ rel_t
        local = posed.positions - blended_t
        return np.einsum("nab,nb->na", inv_linear, local) - corrective

    def regress(joints: np.ndarray) -> np.ndarray:
        return (model.joint_regressor @ rest_for(joints)).ravel()

    # probe the affine map regress(J) = A J + c column by column, then solve
    # the self-consistency condition (I - A) J = c exactly
    dof = 3 * model.num_joints
    zero = np.zeros((model.num_joints, 3))
    const = regress(zero)
    A = np.empty((dof, dof))
    basis = np.zeros((model.num_joints, 3))
    for i in range(dof):
        basis.flat[i] = 1.0
        A[:, i] = regress(basis) - const
        basis.flat[i] = 0.0
    system = np.eye(dof) - A
    if np.linalg.cond(system) > _COND_LIMIT:
        raise DegenerateSkinningError("joint self-consistency system is singular")
    joints = np.linalg.solve(system, const).reshape(model.num_joints, 3)
    return ColoredVertexSet(rest_for(joints), posed.colors)


def repose_subject(template_star: ColoredVertexSet, model: BodyModel, theta_new) -> ColoredVertexSet:
    """Pose a subject-specific template; joints regressed from the template itself."""
    if len(template_star) != model.num_vertices:
        raise ParameterError("template vertex count does not match model")
    rest = template_star.positions + pose_offsets(model, theta_new)
    joints = model.joint_regressor @ template_star.positions
    rots = joint_rotations(model, theta_new)
    blended = _blended_transforms(model, rots, joints)
    return ColoredVertexSet(_apply_transforms(blended, rest), template_star.colors)


# ---------------------------------------------------------------------------
# model container I/O
#
# Layout: magic "BSM1", little-endian header {u32 N, J, S, F, flags}, then
# dense f32 arrays in field order (template, shape_basis, pose_basis,
# joint_regressor, skin_weights), parents as i32 with -1 sentinel, faces as
# f32 triples, and uv as f32 pairs when flag bit0 is set.


def save_model(model: BodyModel, path) -> None:
    n, j, s, f = model.num_vertices, model.num_joints, model.num_shape_dims, model.faces.shape[0]
    flags = _FLAG_HAS_UV if model.uv is not None else 0
    with open(path, "wb") as fh:
        fh.write(BSM_MAGIC)
        fh.write(struct.pack("<5I", n, j, s, f, flags))
        for arr in (model.template, model.shape_basis, model.pose_basis,
                    model.joint_regressor, model.skin_weights):
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(model.parents, dtype="<i4").tobytes())
        fh.write(np.ascontiguousarray(model.faces, dtype="<f4").tobytes())
        if model.uv is not None:
            fh.write(np.ascontiguousarray(model.uv, dtype="<f4").tobytes())


def load_model(path) -> BodyModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != BSM_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {BSM_MAGIC!r}")
        n, j, s, f, flags = struct.unpack("<5I", fh.read(20))

        def read(shape, dtype="<f4"):
            count = int(np.prod(shape))
            raw = fh.read(count * 4)
            if len(raw) != count * 4:
                raise FormatError(f"{path}: truncated file")
            return np.frombuffer(raw, dtype=dtype).reshape(shape).astype(np.float64)

        template = read((n, 3))
        shape_basis = read((n, 3, s))
        pose_basis = read((n, 3, 9 * (j - 1)))
        regressor = read((j, n))
        weights = read((n, j))
        parents = read((j,), dtype="<i4").astype(np.int64)
        faces = read((f, 3)).astype(np.int64)
        uv = read((n, 2)) if flags & _FLAG_HAS_UV else None
    # restore exact partition of unity lost to f32 quantization
    weights = weights / weights.sum(axis=1, keepdims=True)
    return BodyModel(template, shape_basis, pose_basis, regressor, weights, parents, faces, uv)


def load_pose_sequence(path) -> np.ndarray:
    """Pose sequence file: JSON array of frames, each a flat radians array."""
    with open(path) as fh:
        frames = json.load(fh)
    if not isinstance(frames, list) or not frames:
        raise FormatError(f"{path}: pose sequence must be a nonempty JSON array of frames")
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim != 2:
        raise FormatError(f"{path}: frames must all have the same length")
    return arr


def save_pose_sequence(frames: np.ndarray, path) -> None:
    frames = np.asarray(frames, dtype=np.float64)
    with open(path, "w") as fh:
        json.dump(frames.tolist(), fh)
