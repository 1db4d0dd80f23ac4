"""lightrec: relocate a light source until a reference image's lighting recurs.

A Lambertian scene simulator (parallel / near-point / small-surface sources),
photometric normal-and-lighting estimation, the unit-sphere navigation ball
with isointensity-circle feedback, and a bisection closed-loop controller,
plus batch experiment tooling and an HTTP session service.
"""

from .core import (
    GrayImage,
    LightingVector,
    Rotation3,
    SphericalPose,
    cartesian_to_spherical,
    make_rng,
    spherical_to_cartesian,
    wrap_angle_difference,
)
from .scene import (
    LightSourceSpec,
    NoiseSpec,
    SceneMaps,
    SceneSpec,
    SpecularSpec,
    make_scene,
    render_apl,
    render_npl,
    render_snsl,
    render_source,
    render_unit_sphere,
)
from .estimation import (
    PsResult,
    inject_ambiguity,
    photometric_stereo,
    shading_from_image,
    solve_lighting,
)
from .navigation import (
    NavState,
    NavigationBall,
    Sic,
    ball_to_json,
    compose_ball,
    extract_sic_analytic,
    extract_sic_raster,
    nav_direction,
    nav_magnitude,
    sic_iou,
    simulate_bisection,
)
from .controller import (
    ActuatorModel,
    AlrReport,
    AlrSession,
    SessionConfig,
    Status,
    run_multi_light,
    run_to_termination,
    scripted_follow,
    start_session,
    step_auto,
    step_manual,
)
from .metrics import MetricReport, mean_angle_error, mse, ms_ssim, psnr, ssim

__version__ = "0.1.0"

__all__ = [
    "ActuatorModel",
    "AlrReport",
    "AlrSession",
    "GrayImage",
    "LightSourceSpec",
    "LightingVector",
    "MetricReport",
    "NavState",
    "NavigationBall",
    "NoiseSpec",
    "PsResult",
    "Rotation3",
    "SceneMaps",
    "SceneSpec",
    "SessionConfig",
    "Sic",
    "SpecularSpec",
    "SphericalPose",
    "Status",
    "ball_to_json",
    "cartesian_to_spherical",
    "compose_ball",
    "extract_sic_analytic",
    "extract_sic_raster",
    "inject_ambiguity",
    "make_rng",
    "make_scene",
    "mean_angle_error",
    "mse",
    "ms_ssim",
    "nav_direction",
    "nav_magnitude",
    "photometric_stereo",
    "psnr",
    "render_apl",
    "render_npl",
    "render_snsl",
    "render_source",
    "render_unit_sphere",
    "run_multi_light",
    "run_to_termination",
    "scripted_follow",
    "shading_from_image",
    "sic_iou",
    "simulate_bisection",
    "solve_lighting",
    "spherical_to_cartesian",
    "ssim",
    "start_session",
    "step_auto",
    "step_manual",
    "wrap_angle_difference",
]
