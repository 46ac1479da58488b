"""Perspective-aware obstacle injection and evaluation for road scenes."""

from .cutouts import (CutoutPool, ObjectCutout, extract_cutouts, load_pool,
                      overall_size, query_by_size, save_pool)
from .geometry import (CameraRig, PerspectiveMap, PixelCoord, RoadPoint,
                       back_project, depth_at, estimate_pitch, normalize,
                       perspective_map, project_road_point, scale_at,
                       scale_at_row)
from .inject import (AnchorPoint, FrameSynthesis, InjectionConfig,
                     InjectionRecord, add_noise, build_grid, frame_rng,
                     pixel_size_range, synthesize_frame,
                     synthesize_frame_uniform)
from .metrics import (ComponentReport, MetricAccumulator, ScoreMap, auprc,
                      component_f1, components, ppv, siou)

__all__ = [
    "AnchorPoint", "CameraRig", "ComponentReport", "CutoutPool",
    "FrameSynthesis", "InjectionConfig", "InjectionRecord",
    "MetricAccumulator", "ObjectCutout", "PerspectiveMap", "PixelCoord",
    "RoadPoint", "ScoreMap", "add_noise", "auprc", "back_project",
    "build_grid", "component_f1", "components", "depth_at", "estimate_pitch",
    "extract_cutouts", "frame_rng", "load_pool", "normalize", "overall_size",
    "perspective_map", "pixel_size_range", "ppv", "project_road_point",
    "query_by_size", "save_pool", "scale_at", "scale_at_row", "siou",
    "synthesize_frame", "synthesize_frame_uniform",
]

__version__ = "0.1.0"
