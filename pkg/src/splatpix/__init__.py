"""splatpix: blend-skinned body geometry, vertex splatting, z-buffer
rasterization, paired dataset generation and image metrics."""

from .body_model import (
    BodyModel,
    ColoredVertexSet,
    joint_locations,
    load_model,
    load_pose_sequence,
    pose_mesh,
    pose_offsets,
    repose_subject,
    save_model,
    save_pose_sequence,
    shape_offsets,
    unpose,
)
from .camera import Camera, load_camera, look_at, project, project_points, save_camera, unproject
from .dataset import (
    DatasetConfig,
    Intrinsics,
    build_dataset,
    camera_rig,
    load_manifest,
    synth_subject,
)
from .errors import (
    DegenerateSkinningError,
    FormatError,
    ParameterError,
    ParseError,
    TopologyError,
)
from .mesh_ops import TextureImage, load_mesh, sample_vertex_colors, save_mesh, subdivide_midpoint
from .metrics import MetricReport, psnr, report_line
from .raster import RasterImage, load_imgf, load_png, rasterize, save_imgf, save_png
from .splat import ProjectionImage, load_rgbd, normalize_depth, save_rgbd, splat

__version__ = "0.1.0"

__all__ = [
    "BodyModel", "ColoredVertexSet", "Camera", "ProjectionImage", "RasterImage",
    "TextureImage", "MetricReport", "DatasetConfig", "Intrinsics",
    "shape_offsets", "pose_offsets", "joint_locations", "pose_mesh", "unpose",
    "repose_subject", "save_model", "load_model", "load_pose_sequence", "save_pose_sequence",
    "project", "project_points", "unproject", "look_at", "save_camera", "load_camera",
    "splat", "normalize_depth", "save_rgbd", "load_rgbd",
    "rasterize", "save_png", "load_png", "save_imgf", "load_imgf",
    "subdivide_midpoint", "sample_vertex_colors", "load_mesh", "save_mesh",
    "psnr", "report_line", "build_dataset", "camera_rig", "load_manifest", "synth_subject",
    "ParameterError", "DegenerateSkinningError", "TopologyError", "ParseError", "FormatError",
]
