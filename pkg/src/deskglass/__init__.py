"""deskglass: desk-scale surface-anchored tracking and camouflage rendering."""

from .geometry import (
    DEFAULT_GEOMETRY,
    DeviceGeometry,
    Pose2D,
    SurfaceMap,
    compose,
    device_point_to_world,
    inverse,
    load_surface_map,
    map_pixel_to_world,
    normalize_angle,
    rectification_scale,
    save_surface_map,
    world_to_map_pixel,
)
from .motion import (
    DetectorConfig,
    DeviceMode,
    Event,
    ImuSample,
    ModeTracker,
    contact_state,
    is_parallel,
    is_stationary,
)
from .pipeline import PipelineConfig, TrackingPipeline, run_replay
from .renderer import RenderConfig, overlay_widget, render_screen
from .simulator import (
    GroundTruth,
    MagnetSetup,
    Scenario,
    Segment,
    capture_surface,
    evaluate,
    plan_trajectory,
    synthesize_imu,
)
from .tracker import (
    AnchorStds,
    FilterState,
    MagnetModel,
    NoiseParams,
    anchor,
    dipole_field,
    estimate_pose,
    mag_update,
    predict,
    zupt_update,
)

__version__ = "0.1.0"
