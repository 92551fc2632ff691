"""Mesh topology utilities: midpoint subdivision, texture-to-vertex color
sampling, and OBJ/PLY/PNG file I/O."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .body_model import ColoredVertexSet
from .errors import ParameterError, ParseError, TopologyError

DEFAULT_COLOR = 0.5


@dataclass(frozen=True)
class TextureImage:
    """height x width x 3 float32 RGB texture with values in [0, 1]."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ParameterError("texture dimensions must be positive")
        if self.data.shape != (self.height, self.width, 3):
            raise ParameterError("data must be (height, width, 3)")
        if self.data.dtype != np.float32:
            object.__setattr__(self, "data", self.data.astype(np.float32))


def load_texture(path) -> TextureImage:
    with Image.open(path) as im:
        rgb = np.asarray(im.convert("RGB"), dtype=np.float32) / np.float32(255.0)
    return TextureImage(rgb.shape[1], rgb.shape[0], rgb)


def subdivide_midpoint(verts: ColoredVertexSet, faces: np.ndarray, uv: np.ndarray | None = None):
    """Split every edge at its midpoint; each triangle becomes four.

    New vertices average position, color (and uv when present) of the edge
    endpoints, so V' = V + E and F' = 4F. Edges shared by more than two
    faces are rejected.
    """
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
        raise ParameterError("face indices out of range")
    n = len(verts)

    edge_index: dict[tuple[int, int], int] = {}
    edge_count: dict[tuple[int, int], int] = {}
    for tri in faces:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(min(a, b)), int(max(a, b)))
            edge_count[key] = edge_count.get(key, 0) + 1
            if edge_count[key] > 2:
                raise TopologyError(f"edge {key} is shared by more than two faces")
            if key not in edge_index:
                edge_index[key] = n + len(edge_index)

    edges = np.array(sorted(edge_index, key=edge_index.get), dtype=np.int64).reshape(-1, 2)
    mid_pos = verts.positions[edges].mean(axis=1)
    mid_col = verts.colors[edges].mean(axis=1)
    new_pos = np.vstack([verts.positions, mid_pos])
    new_col = np.vstack([verts.colors, mid_col])

    new_uv = None
    if uv is not None:
        uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
        if uv.shape[0] != n:
            raise ParameterError("uv must have one entry per vertex")
        new_uv = np.vstack([uv, uv[edges].mean(axis=1)])

    new_faces = np.empty((faces.shape[0] * 4, 3), dtype=np.int64)
    for i, (a, b, c) in enumerate(faces):
        mab = edge_index[(int(min(a, b)), int(max(a, b)))]
        mbc = edge_index[(int(min(b, c)), int(max(b, c)))]
        mca = edge_index[(int(min(c, a)), int(max(c, a)))]
        new_faces[4 * i:4 * i + 4] = [
            (a, mab, mca),
            (b, mbc, mab),
            (c, mca, mbc),
            (mab, mbc, mca),
        ]
    return ColoredVertexSet(new_pos, new_col), new_faces, new_uv


def sample_vertex_colors(tex: TextureImage, uv: np.ndarray):
    """Bilinear texture lookup at each uv; returns (colors, n_out_of_range).

    uv coordinates outside [0, 1]^2 are clamped and counted. Texel centers
    sit at ((i + 0.5) / size), so sampling a center reproduces that texel.
    """
    uv = np.asarray(uv, dtype=np.float64).reshape(-1, 2)
    out_of_range = int(np.count_nonzero((uv < 0.0) | (uv > 1.0)))
    uv = np.clip(uv, 0.0, 1.0)

    x = uv[:, 0] * tex.width - 0.5
    y = uv[:, 1] * tex.height - 0.5
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    x0c = np.clip(x0, 0, tex.width - 1)
    x1c = np.clip(x0 + 1, 0, tex.width - 1)
    y0c = np.clip(y0, 0, tex.height - 1)
    y1c = np.clip(y0 + 1, 0, tex.height - 1)

    d = tex.data.astype(np.float64)
    colors = (
        d[y0c, x0c] * ((1 - fx) * (1 - fy))[:, None]
        + d[y0c, x1c] * (fx * (1 - fy))[:, None]
        + d[y1c, x0c] * ((1 - fx) * fy)[:, None]
        + d[y1c, x1c] * (fx * fy)[:, None]
    )
    return np.clip(colors, 0.0, 1.0), out_of_range


# ---------------------------------------------------------------------------
# mesh file I/O
#
# OBJ: "v x y z [r g b]" vertex-color extension, "vt u v", "f a/at b/bt c/ct".
# Wedge uvs (a vertex referenced with different vt indices) are averaged into
# the single per-vertex uv this pipeline uses.
# PLY: binary little-endian, positions float32, colors uchar (byte / 255).


def save_mesh(path, verts: ColoredVertexSet, faces: np.ndarray, uv: np.ndarray | None = None):
    path = str(path)
    if path.lower().endswith(".obj"):
        _save_obj(path, verts, faces, uv)
    elif path.lower().endswith(".ply"):
        _save_ply(path, verts, faces)
    else:
        raise ParameterError(f"unsupported mesh extension: {path}")


def load_mesh(path):
    path = str(path)
    if path.lower().endswith(".obj"):
        return _load_obj(path)
    if path.lower().endswith(".ply"):
        return _load_ply(path)
    raise ParameterError(f"unsupported mesh extension: {path}")


def _fmt(x: float) -> str:
    # 9 significant digits round-trips float32 exactly
    return f"{np.float32(x):.9g}"


def _save_obj(path, verts, faces, uv):
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    with open(path, "w") as fh:
        for p, c in zip(verts.positions, verts.colors):
            fh.write(f"v {_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])} "
                     f"{_fmt(c[0])} {_fmt(c[1])} {_fmt(c[2])}\n")
        if uv is not None:
            for u in np.asarray(uv).reshape(-1, 2):
                fh.write(f"vt {_fmt(u[0])} {_fmt(u[1])}\n")
            for tri in faces:
                fh.write("f " + " ".join(f"{i + 1}/{i + 1}" for i in tri) + "\n")
        else:
            for tri in faces:
                fh.write("f " + " ".join(str(i + 1) for i in tri) + "\n")


def _load_obj(path):
    positions, colors, texcoords, faces = [], [], [], []
    uv_samples: dict[int, list] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            try:
                if tag == "v":
                    if len(parts) not in (4, 7):
                        raise ValueError("vertex line needs 3 or 6 values")
                    positions.append([float(v) for v in parts[1:4]])
                    colors.append([float(v) for v in parts[4:7]] if len(parts) == 7 else None)
                elif tag == "vt":
                    texcoords.append([float(parts[1]), float(parts[2])])
                elif tag == "f":
                    if len(parts) != 4:
                        raise ValueError("only triangles are supported")
                    tri = []
                    for token in parts[1:]:
                        fields = token.split("/")
                        vi = int(fields[0]) - 1
                        tri.append(vi)
                        if len(fields) > 1 and fields[1]:
                            ti = int(fields[1]) - 1
                            uv_samples.setdefault(vi, []).append(ti)
                    faces.append(tri)
            except (ValueError, IndexError) as exc:
                raise ParseError(str(exc), path=path, line=lineno) from exc
    if not positions:
        raise ParseError("no vertices found", path=path)
    pos = np.asarray(positions, dtype=np.float64)
    cols = np.array(
        [c if c is not None else [DEFAULT_COLOR] * 3 for c in colors], dtype=np.float64
    )
    faces_arr = np.asarray(faces, dtype=np.int64).reshape(-1, 3) if faces else np.zeros((0, 3), np.int64)
    if faces_arr.size and (faces_arr.min() < 0 or faces_arr.max() >= len(pos)):
        raise ParseError("face index out of range", path=path)
    uv = None
    if texcoords and uv_samples:
        tex = np.asarray(texcoords, dtype=np.float64)
        uv = np.zeros((len(pos), 2))
        for vi, tis in uv_samples.items():
            uv[vi] = tex[tis].mean(axis=0)
    return ColoredVertexSet(pos, cols), faces_arr, uv


_PLY_TYPES = {
    "char": "i1", "uchar": "u1", "int8": "i1", "uint8": "u1",
    "short": "i2", "ushort": "u2", "int16": "i2", "uint16": "u2",
    "int": "i4", "uint": "u4", "int32": "i4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _save_ply(path, verts, faces):
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    n, f = len(verts), faces.shape[0]
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {n}\n"
        "property float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\n"
        f"element face {f}\n"
        "property list uchar int vertex_indices\nend_header\n"
    )
    vert_rec = np.empty(n, dtype=[("pos", "<f4", 3), ("col", "u1", 3)])
    vert_rec["pos"] = verts.positions
    vert_rec["col"] = np.floor(verts.colors * 255.0 + 0.5).astype(np.uint8)
    face_rec = np.empty(f, dtype=[("count", "u1"), ("idx", "<i4", 3)])
    face_rec["count"] = 3
    face_rec["idx"] = faces
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(vert_rec.tobytes())
        fh.write(face_rec.tobytes())


def _load_ply(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    end = blob.find(b"end_header\n")
    if not blob.startswith(b"ply") or end < 0:
        raise ParseError("not a PLY file", path=path)
    header_lines = blob[:end].decode("ascii", errors="replace").splitlines()
    offset = end + len(b"end_header\n")

    fmt = None
    elements = []  # (name, count, [(prop_name, dtype) or ("list", prop_name, cdtype, idtype)])
    for lineno, line in enumerate(header_lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError("property before element", path=path, line=lineno)
            if parts[1] == "list":
                elements[-1][2].append(("list", parts[4], _PLY_TYPES[parts[2]], _PLY_TYPES[parts[3]]))
            else:
                elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]]))
    if fmt != "binary_little_endian":
        raise ParseError(f"unsupported PLY format {fmt!r}", path=path)

    data = {}
    for name, count, props in elements:
        if any(p[0] == "list" for p in props):
            rows = []
            for _ in range(count):
                row = {}
                for prop in props:
                    if prop[0] == "list":
                        cdt = np.dtype("<" + prop[2])
                        k = int(np.frombuffer(blob, cdt, 1, offset)[0])
                        offset += cdt.itemsize
                        idt = np.dtype("<" + prop[3])
                        row[prop[1]] = np.frombuffer(blob, idt, k, offset).astype(np.int64)
                        offset += idt.itemsize * k
                    else:
                        dt = np.dtype("<" + prop[1])
                        row[prop[0]] = np.frombuffer(blob, dt, 1, offset)[0]
                        offset += dt.itemsize
                rows.append(row)
            data[name] = rows
        else:
            dtype = np.dtype([(p[0], "<" + p[1]) for p in props])
            if offset + dtype.itemsize * count > len(blob):
                raise ParseError("truncated vertex data", path=path, offset=offset)
            data[name] = np.frombuffer(blob, dtype, count, offset)
            offset += dtype.itemsize * count

    if "vertex" not in data:
        raise ParseError("missing vertex element", path=path)
    vrec = data["vertex"]
    names = vrec.dtype.names
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise ParseError(f"vertex element lacks property {axis}", path=path)
    pos = np.stack([vrec["x"], vrec["y"], vrec["z"]], axis=1).astype(np.float64)
    if all(c in names for c in ("red", "green", "blue")):
        cols = np.stack([vrec["red"], vrec["green"], vrec["blue"]], axis=1).astype(np.float64)
        if vrec.dtype["red"].kind == "u":
            cols = cols / 255.0
    else:
        cols = np.full((len(pos), 3), DEFAULT_COLOR)
    uv = None
    uv_names = next((pair for pair in (("u", "v"), ("s", "t")) if all(p in names for p in pair)), None)
    if uv_names:
        uv = np.stack([vrec[uv_names[0]], vrec[uv_names[1]]], axis=1).astype(np.float64)

    faces = np.zeros((0, 3), dtype=np.int64)
    if "face" in data and data["face"]:
        tris = []
        for row in data["face"]:
            idx = row.get("vertex_indices", row.get("vertex_index"))
            if idx is None or len(idx) != 3:
                raise ParseError("only triangular faces are supported", path=path)
            tris.append(idx)
        faces = np.asarray(tris, dtype=np.int64)
    if faces.size and (faces.min() < 0 or faces.max() >= len(pos)):
        raise ParseError("face index out of range", path=path)
    return ColoredVertexSet(pos, cols), faces, uv
