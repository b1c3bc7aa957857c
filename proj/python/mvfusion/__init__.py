"""Multi-volume TSDF depth fusion."""

from ._mvfusion import (
    CameraIntrinsics,
    ConfigError,
    EmptyInputError,
    Error,
    ErrorStats,
    FormatError,
    FusionPipeline,
    LoadError,
    NoiseModel,
    Pose,
    Scene,
    TrackingLostError,
    add_noise,
    cloud_to_surface_stats,
    corridor_trajectory,
    equivalence_check,
    fit_line,
    icp_align,
    load_sequence,
    orbit_trajectory,
    read_depth_png,
    read_ply,
    render_depth,
    run,
    write_depth_png,
    write_ply,
)

__all__ = [name for name in dir() if not name.startswith("_")]
