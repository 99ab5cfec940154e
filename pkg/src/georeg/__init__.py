"""Coarse registration of airborne LiDAR point clouds to optical imagery.

Building regions are extracted independently from both modalities (elevation
thresholding + morphology for the cloud, mean-shift segmentation + MBR
filling for the image), matched by graph transformation matching, and used
to estimate the camera's exterior orientation with the Gold Standard
algorithm.
"""

from .config import PipelineConfig, load_config
from .errors import (
    ConfigError,
    DataError,
    DegenerateConfiguration,
    DegenerateInput,
    EmptyCloud,
    GeometryError,
    GeoregError,
    NoConsensus,
    NoMutualPairs,
    NonConvergence,
    SpecInfeasible,
)
from .evalmetrics import ControlPointPair, Tally, precision_recall, relative_shift, shift_gain
from .imageseg import (
    LabImage,
    MeanShiftConfig,
    Segment2D,
    filling_filter,
    mean_shift_segment,
    pansharpen,
    rgb_to_lab,
    segments_from_mask,
    size_filter,
)
from .lidar import (
    ElevationSplit,
    Region3D,
    elevation_threshold,
    extract_buildings,
    morphological_open,
    vertical_project,
)
from .matching import (
    CenterSet,
    MatchSet,
    area_direction_validate,
    gtm_filter,
    initial_match,
    median_knn_graph,
    ransac_filter,
)
from .model import (
    CameraPose,
    GeoRaster,
    LabeledMask,
    Point3,
    PointCloud,
    ProjectionMatrix,
    compose_projection,
    project_point,
    project_points,
)
from .pose import (
    Correspondence32,
    PoseEstimate,
    backproject_to_height,
    decompose_projection,
    dlt,
    gold_standard,
)
from .synth import SceneData, SceneSpec, generate_scene, perturb_pose

__version__ = "0.1.0"

__all__ = [
    "CameraPose",
    "CenterSet",
    "ConfigError",
    "ControlPointPair",
    "Correspondence32",
    "DataError",
    "DegenerateConfiguration",
    "DegenerateInput",
    "ElevationSplit",
    "EmptyCloud",
    "GeoRaster",
    "GeometryError",
    "GeoregError",
    "LabImage",
    "LabeledMask",
    "MatchSet",
    "MeanShiftConfig",
    "NoConsensus",
    "NoMutualPairs",
    "NonConvergence",
    "PipelineConfig",
    "Point3",
    "PointCloud",
    "PoseEstimate",
    "ProjectionMatrix",
    "Region3D",
    "SceneData",
    "SceneSpec",
    "Segment2D",
    "SpecInfeasible",
    "Tally",
    "area_direction_validate",
    "backproject_to_height",
    "compose_projection",
    "decompose_projection",
    "dlt",
    "elevation_threshold",
    "extract_buildings",
    "filling_filter",
    "generate_scene",
    "gold_standard",
    "gtm_filter",
    "initial_match",
    "load_config",
    "mean_shift_segment",
    "median_knn_graph",
    "morphological_open",
    "pansharpen",
    "perturb_pose",
    "precision_recall",
    "project_point",
    "project_points",
    "ransac_filter",
    "relative_shift",
    "rgb_to_lab",
    "segments_from_mask",
    "shift_gain",
    "size_filter",
    "vertical_project",
]
