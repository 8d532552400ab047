"""Dense and sparse optical flow with a vision-based grip slip detector."""

__version__ = "0.1.0"

from .errors import ConfigError, DimensionError, FormatError, ParameterError, SlipflowError
from .flow import DenseFlow, FarnebackParams, FlowField, displacement_step, estimate_flow_dense
from .image import (
    Frame,
    Gradients,
    Pyramid,
    build_pyramid,
    downsample,
    gaussian_blur,
    gradients,
    luma,
    warp,
)
from .lk import TrackStatus, TrackedPoint, detect_features, track_sparse
from .polyexp import PolyExpansion, poly_expansion
from .sim import GroundTruth, Mixed, Motion, MotionKind, Scenario, generate_sequence, make_texture, render_frame
from .slip import (
    Command,
    DetectorConfig,
    GripEvent,
    PipelineConfig,
    Policy,
    RegionMasks,
    RoiSpec,
    SlipDetector,
    SlipState,
    build_masks,
    classify,
    mean_roi_velocity,
    react,
    static_check,
)
