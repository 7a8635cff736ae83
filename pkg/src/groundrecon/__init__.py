"""Ground-aware single-view geometry: pixel heights, perspective fields,
camera recovery, reprojection, relighting and evaluation."""
from .camera_est import CameraEstimate, GridSpec, estimate_camera, estimate_camera_detailed
from .core import (
    RECONSTRUCTION_GROUND,
    SCENE_GROUND,
    CameraIntrinsics,
    CameraPose,
    GroundPlane,
    PointCloud,
    ScalarGrid,
    focal_from_fov,
    project,
    rotation_matrix,
    unproject,
)
from .estimators import CameraFieldEstimator, PixelHeightReprojector, ScaleShiftAligner
from .exceptions import (
    AlignmentError,
    DegenerateError,
    DomainError,
    EstimationError,
    FormatError,
    GroundReconError,
    NormalizationStateError,
    ReconstructionError,
    SceneError,
)
from .fields import PerspectiveField, PixelHeightMap, latitude_at, render_perspective_field, up_vector_at
from .metrics import EvalReport, absrel_delta1, align_scale_shift, chamfer_distance, field_errors, lsiv
from .relight import LightSpec, cast_shadow, fill_between, render_reflection
from .reproject import Reconstruction, reconstruct_cloud, reconstruct_point

__version__ = "0.1.0"
