"""scrforge: synthetic relocalization data generation and pose estimation.

Render labeled (image, scene-coordinate map) frames from a colored point
cloud, bridge rendered-to-photo color gaps with histogram matching, recover
6DoF camera poses from dense scene-coordinate maps with PnP-RANSAC, align
coordinate frames with Umeyama/ICP, and score everything with median /
95th-percentile pose-error reports.
"""

from .errors import ScrforgeError
from .geometry import (CameraIntrinsics, RigidTransform, Rotation, compose,
                       project, rotation_angle_deg, unproject)
from .histmatch import ChannelCDF, compute_cdf, ks_distance, match
from .pnp import (Correspondence, PoseEstimate, RansacConfig, p3p_solve,
                  pnp_ransac, sample_correspondences)
from .pointcloud import (ColorPointCloud, SpatialIndex, bounding_box, load_ply,
                         merge, save_ply, voxel_downsample)
from .registration import IcpConfig, IcpResult, icp, umeyama_rigid
from .renderer import (PoseSamplerConfig, SceneCoordFrame, SplatConfig, render,
                       render_dataset, sample_poses)
from .evaluation import EvalReport, PoseError, aggregate, pose_error
from .scm import read_scm, write_scm

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics", "ChannelCDF", "ColorPointCloud", "Correspondence",
    "EvalReport", "IcpConfig", "IcpResult", "PoseError", "PoseEstimate",
    "PoseSamplerConfig", "RansacConfig", "RigidTransform", "Rotation",
    "SceneCoordFrame", "ScrforgeError", "SpatialIndex", "SplatConfig",
    "aggregate", "bounding_box", "compose", "compute_cdf", "icp",
    "ks_distance", "load_ply", "match", "merge", "p3p_solve", "pnp_ransac",
    "pose_error", "project", "read_scm", "render", "render_dataset",
    "rotation_angle_deg", "sample_correspondences", "sample_poses", "save_ply",
    "umeyama_rigid", "unproject", "voxel_downsample", "write_scm",
]
