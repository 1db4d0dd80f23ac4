"""Closed-loop light relocation: capture, solve lighting, ball, actuator step.

A session owns the simulator's true source pose but the control path only ever
sees rendered images (photometric mode).  The oracle lighting mode hands the
controller the apl vector of the true pose instead of estimating it; it exists
for degenerate scenes (a flat scene has coplanar normals, so the per-frame
lighting solve is rank-deficient) and for UI demos, never for the quantitative
acceptance runs.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .core import (
    GrayImage,
    LightingVector,
    Rotation3,
    SphericalPose,
    make_rng,
    wrap_angle_difference,
)
from .estimation import (
    PsResult,
    inject_ambiguity,
    photometric_stereo,
    shading_from_image,
    solve_lighting,
)
from .metrics import MetricReport, compare, mse as mse_metric, psnr_from_mse, ssim as ssim_metric
from .navigation import (
    DEAD_BAND_ANGLE,
    NavigationBall,
    NavState,
    compose_ball,
    nav_direction,
    nav_magnitude,
)
from .scene import (
    KIND_SNSL,
    KINDS,
    LightSourceSpec,
    NoiseSpec,
    SceneMaps,
    SceneSpec,
    SpecularSpec,
    render_source,
    render_unit_sphere,
)

TRAJECTORY_COLUMNS = (
    "t",
    "r",
    "theta_deg",
    "phi_deg",
    "lambda_r",
    "lambda_theta",
    "lambda_phi",
    "m_r",
    "m_theta",
    "m_phi",
    "goodness",
    "mse",
    "psnr",
    "ssim",
)


class Status(str, Enum):
    RUNNING = "running"
    CONVERGED = "converged"
    STALLED = "stalled"
    MAX_ITER = "max_iter"


class SessionStateError(RuntimeError):
    """Command issued to a session that is no longer running."""


@dataclass(frozen=True)
class ActuatorModel:
    """Simulated positioner: additive execution noise plus hard travel limits."""

    noise_sigma: tuple[float, float, float] = (0.0, 0.0, 0.0)
    r_limits: tuple[float, float] = (1.5, 50.0)
    phi_limits: tuple[float, float] = (0.0, math.radians(85.0))
    latency_steps: int = 0

    def apply(
        self, pose: SphericalPose, delta: np.ndarray, rng: np.random.Generator
    ) -> tuple[SphericalPose, bool]:
        """Apply a pose increment (with noise); returns (new pose, clamped?)."""
        d = np.asarray(delta, dtype=float).copy()
        if any(s > 0 for s in self.noise_sigma):
            d += rng.normal(0.0, self.noise_sigma, size=3)
        r = pose.r + d[0]
        theta = pose.theta + d[1]
        phi = pose.phi + d[2]
        clamped = False
        if r < self.r_limits[0] or r > self.r_limits[1]:
            r = min(max(r, self.r_limits[0]), self.r_limits[1])
            clamped = True
        if phi < self.phi_limits[0] or phi > self.phi_limits[1]:
            phi = min(max(phi, self.phi_limits[0]), self.phi_limits[1])
            clamped = True
        return SphericalPose(r, theta, phi), clamped


@dataclass(frozen=True)
class SessionConfig:
    """Everything a session needs; angles in config files are degrees (see
    from_json), internal representation is radians."""

    scene: SceneSpec = SceneSpec("bumpy", 128, 7)
    source_kind: str = "npl"
    source_power: float = 50.0
    snsl_extent: float = 0.3
    snsl_count: int = 25
    ref_pose: SphericalPose = SphericalPose(7.0, math.radians(-70.0), math.radians(45.0))
    init_pose: SphericalPose = SphericalPose(9.0, math.radians(30.0), math.radians(25.0))
    lambda0: tuple[float, float, float] = (1.0, 5.0, 5.0)  # scene units, deg, deg
    mu: float = 1.2
    eta: float = 0.98
    max_iter: int = 500
    noise: NoiseSpec = NoiseSpec()
    seed: int = 0
    ambiguity_beta_deg: float = 0.0
    k_lights: int = 12
    insitu_phi_deg: float = 45.0
    insitu_r: float | None = None
    ball_resolution: int = 256
    lighting_mode: str = "photometric"  # or "oracle"
    metric_downsample: int = 2
    actuator_r_limits: tuple[float, float] = (1.5, 50.0)
    actuator_phi_limits_deg: tuple[float, float] = (0.0, 85.0)
    manual_step_limit: tuple[float, float, float] = (2.0, 15.0, 15.0)  # units, deg, deg
    lambda_floor_frac: float = 1e-4
    specular_ks: float = 0.0
    specular_exponent: float = 20.0

    def __post_init__(self):
        if self.source_kind not in KINDS:
            raise ValueError(f"unknown source kind {self.source_kind!r}")
        if self.lighting_mode not in ("photometric", "oracle"):
            raise ValueError(f"unknown lighting mode {self.lighting_mode!r}")
        if not self.eta < 1.0:
            raise ValueError("eta must be below 1")

    def lambda0_internal(self) -> np.ndarray:
        return np.array(
            [self.lambda0[0], math.radians(self.lambda0[1]), math.radians(self.lambda0[2])]
        )

    def source_template(self) -> LightSourceSpec:
        return LightSourceSpec(
            self.source_kind,
            self.ref_pose,
            self.source_power,
            snsl_extent=self.snsl_extent if self.source_kind == KIND_SNSL else 0.0,
            snsl_count=self.snsl_count,
        )

    def specular(self) -> SpecularSpec | None:
        if self.specular_ks > 0:
            return SpecularSpec(self.specular_ks, self.specular_exponent)
        return None

    def actuator(self) -> ActuatorModel:
        return ActuatorModel(
            noise_sigma=self.noise.actuator_sigma,
            r_limits=self.actuator_r_limits,
            phi_limits=tuple(math.radians(v) for v in self.actuator_phi_limits_deg),
        )

    def to_json(self) -> dict:
        def pose_json(p: SphericalPose) -> dict:
            return {"r": p.r, "theta_deg": math.degrees(p.theta), "phi_deg": math.degrees(p.phi)}

        return {
            "scene": self.scene.to_json(),
            "source": {
                "kind": self.source_kind,
                "power": self.source_power,
                "snsl_extent": self.snsl_extent,
                "snsl_count": self.snsl_count,
            },
            "ref_pose": pose_json(self.ref_pose),
            "init_pose": pose_json(self.init_pose),
            "lambda0": list(self.lambda0),
            "mu": self.mu,
            "eta": self.eta,
            "max_iter": self.max_iter,
            "noise": self.noise.to_json(),
            "seed": self.seed,
            "ambiguity_beta_deg": self.ambiguity_beta_deg,
            "k_lights": self.k_lights,
            "insitu_phi_deg": self.insitu_phi_deg,
            "insitu_r": self.insitu_r,
            "ball_resolution": self.ball_resolution,
            "lighting_mode": self.lighting_mode,
            "metric_downsample": self.metric_downsample,
            "actuator_r_limits": list(self.actuator_r_limits),
            "actuator_phi_limits_deg": list(self.actuator_phi_limits_deg),
            "specular_ks": self.specular_ks,
            "specular_exponent": self.specular_exponent,
        }

    @staticmethod
    def from_json(d: dict) -> "SessionConfig":
        def pose(p: dict) -> SphericalPose:
            return SphericalPose(
                float(p["r"]),
                math.radians(float(p.get("theta_deg", 0.0))),
                math.radians(float(p.get("phi_deg", 0.0))),
            )

        kw: dict = {}
        if "scene" in d:
            kw["scene"] = SceneSpec.from_json(d["scene"])
        src = d.get("source", {})
        if "kind" in src:
            kw["source_kind"] = src["kind"]
        if "power" in src:
            kw["source_power"] = float(src["power"])
        if "snsl_extent" in src:
            kw["snsl_extent"] = float(src["snsl_extent"])
        if "snsl_count" in src:
            kw["snsl_count"] = int(src["snsl_count"])
        if "ref_pose" in d:
            kw["ref_pose"] = pose(d["ref_pose"])
        if "init_pose" in d:
            kw["init_pose"] = pose(d["init_pose"])
        if "noise" in d:
            kw["noise"] = NoiseSpec.from_json(d["noise"])
        for name in (
            "mu",
            "eta",
            "ambiguity_beta_deg",
            "insitu_phi_deg",
            "insitu_r",
            "specular_ks",
            "specular_exponent",
        ):
            if name in d and d[name] is not None:
                kw[name] = float(d[name])
        for name in ("max_iter", "seed", "k_lights", "ball_resolution", "metric_downsample"):
            if name in d:
                kw[name] = int(d[name])
        if "lambda0" in d:
            kw["lambda0"] = tuple(float(v) for v in d["lambda0"])
        if "lighting_mode" in d:
            kw["lighting_mode"] = d["lighting_mode"]
        if "actuator_r_limits" in d:
            kw["actuator_r_limits"] = tuple(float(v) for v in d["actuator_r_limits"])
        if "actuator_phi_limits_deg" in d:
            kw["actuator_phi_limits_deg"] = tuple(float(v) for v in d["actuator_phi_limits_deg"])
        return SessionConfig(**kw)


@dataclass
class TrajectoryRow:
    t: int
    r: float
    theta_deg: float
    phi_deg: float
    lambda_r: float
    lambda_theta: float  # degrees
    lambda_phi: float    # degrees
    m_r: int
    m_theta: int
    m_phi: int
    goodness: float
    mse: float
    psnr: float
    ssim: float

    def as_list(self) -> list:
        return [getattr(self, c) for c in TRAJECTORY_COLUMNS]


def capture_frame(
    scene_maps: SceneMaps,
    src: LightSourceSpec,
    config: SessionConfig,
    rng: np.random.Generator,
    ambient_true: np.ndarray | None = None,
    ambient_captured: np.ndarray | None = None,
) -> GrayImage:
    """Simulated camera capture: render the active source, add the static
    ambient contribution of any fixed sources, apply pixel noise, then subtract
    the recorded ambient frame (clamping at zero, masking non-positive pixels).
    Both session initialization and per-iteration observation go through here.
    """
    raw = render_source(scene_maps, src, noise=None, rng=None, specular=config.specular())
    data, mask = raw.data, raw.mask
    if ambient_true is not None:
        data = data + ambient_true
    if config.noise.pixel_sigma > 0:
        data = data + rng.normal(0.0, config.noise.pixel_sigma, size=data.shape)
    if ambient_captured is not None:
        data = data - ambient_captured
        mask = scene_maps.mask & (data > 0)
    return GrayImage(np.maximum(data, 0.0), mask)


def ambiguity_rotation(rng: np.random.Generator, beta: float, cone_deg: float = 20.0) -> Rotation3:
    """Decomposition-ambiguity rotation of angle beta, axis within a cone of
    the view axis.

    Per-axis spherical stepping degenerates at the coordinate pole; an
    ambiguity that carries the measured pole past the measured reference
    direction makes the polar set-point unreachable along any single axis (a
    parametrization artifact, not a lighting one).  Residual rotations of an
    integrability-resolved decomposition concentrate about the view axis,
    which the cone models while still exercising the full angle beta.
    """
    tilt = rng.uniform(0.0, math.radians(cone_deg))
    psi = rng.uniform(0.0, 2.0 * math.pi)
    axis = np.array(
        [math.sin(tilt) * math.cos(psi), math.sin(tilt) * math.sin(psi), math.cos(tilt)]
    )
    return Rotation3.from_axis_angle(axis, beta)


def insitu_poses(k: int, r: float, phi_deg: float = 45.0) -> list[SphericalPose]:
    """K side-lighting poses: a uniform azimuth ring at phi plus one top light."""
    if k < 3:
        raise ValueError("need at least 3 initialization poses")
    phi = math.radians(phi_deg)
    ring = k - 1
    poses = [SphericalPose(r, -math.pi + 2.0 * math.pi * (i + 1) / ring, phi) for i in range(ring)]
    poses.append(SphericalPose(r, 0.0, 0.0))
    return poses


class AlrSession:
    """Mutable loop state for one relocation run.  Create via start_session."""

    def __init__(
        self,
        config: SessionConfig,
        scene_maps: SceneMaps,
        ps: PsResult,
        source: LightSourceSpec,
        ref_image: GrayImage,
        ref_lighting: LightingVector,
        iso_value: float,
        rng: np.random.Generator,
        ambient_true: np.ndarray | None = None,
        ambient_captured: np.ndarray | None = None,
    ):
        self.config = config
        self.scene_maps = scene_maps
        self.ps = ps
        self.source = source  # ground-truth simulator state; hidden from control math
        self.ref_image = ref_image
        self.ref_lighting = ref_lighting
        self.iso_value = iso_value
        lam0 = config.lambda0_internal()
        self.nav = NavState(lam0, mu=config.mu, lam_max=1e3 * float(lam0.max()))
        self.t = 0
        self.eta = config.eta
        self.best_goodness = 0.0
        self.best_image: GrayImage | None = None
        self.trajectory: list[TrajectoryRow] = []
        self.status = Status.RUNNING
        self.events: list[str] = []
        self.radial_polarity = -1.0  # dr = polarity * lambda_r * sgn(A_ref - A_t)
        self._radial_calibrated = False
        self._radial_prev: tuple[float, float] | None = None  # (strength gap, sign)
        self._rng = rng
        self._actuator = config.actuator()
        self._ambient_true = ambient_true
        self._ambient_captured = ambient_captured
        self._ref_small = ref_image.downsample(config.metric_downsample)
        # initial observation so state is meaningful before the first step
        img = self._capture()
        self.last_image = img
        self.last_lighting = self._solve_current(img)
        self.last_ball = self._ball(self.last_lighting)
        self.last_m = self._direction(self.last_ball, self.last_lighting)

    # -- capture and estimation ------------------------------------------------

    def _capture(self) -> GrayImage:
        return capture_frame(
            self.scene_maps,
            self.source,
            self.config,
            self._rng,
            ambient_true=self._ambient_true,
            ambient_captured=self._ambient_captured,
        )

    def _solve_current(self, img: GrayImage) -> LightingVector:
        if self.config.lighting_mode == "oracle":
            return self.source.apl_vector()
        shading = shading_from_image(img, self.ps.reflectance)
        light, _ = solve_lighting(shading, self.ps.normals)
        return light

    def _ball(self, l_t: LightingVector) -> NavigationBall:
        return compose_ball(
            l_t, self.ref_lighting, self.config.ball_resolution, iso_value=self.iso_value
        )

    # -- navigation ------------------------------------------------------------

    def _direction(self, ball: NavigationBall, l_t: LightingVector) -> np.ndarray:
        m = nav_direction(ball)
        if ball.current is None and l_t.magnitude > 0:
            # degenerate current SIC: drive strength up, steer by raw direction
            theta, phi = l_t.angles()
            d_theta = wrap_angle_difference(ball.reference.center_theta, theta)
            d_phi = ball.reference.center_phi - phi
            m[1] = 0.0 if abs(d_theta) <= DEAD_BAND_ANGLE else math.copysign(1.0, d_theta)
            m[2] = 0.0 if abs(d_phi) <= DEAD_BAND_ANGLE else math.copysign(1.0, d_phi)
        return m

    def _radial_self_check(self, ball: NavigationBall, l_t: LightingVector, m_r: float) -> None:
        """One-time polarity validation on the first radial step.

        Works on the measured lighting strength (the reference strength is
        iso / cos_alpha of the reference SIC, so this needs no simulator
        state and survives an empty current SIC): a radial move that grows
        the strength gap without crossing the set-point means the stored
        polarity is wrong; a sign flip is a plain overshoot and confirms it.
        """
        if self._radial_calibrated:
            return
        s_ref = ball.reference.iso_value / max(ball.reference.cos_alpha, 1e-12)
        gap = s_ref - l_t.magnitude
        band = 1e-3 * s_ref
        if self._radial_prev is not None:
            prev_gap, prev_sign = self._radial_prev
            same_side = math.copysign(1.0, gap) == prev_sign and abs(gap) > band
            if same_side and abs(gap) > abs(prev_gap) * (1.0 + 1e-9):
                self.radial_polarity = -self.radial_polarity
                self.events.append(
                    f"t={self.t}: radial polarity flipped to {self.radial_polarity:+.0f} by self-check"
                )
            else:
                self.events.append(f"t={self.t}: radial polarity {self.radial_polarity:+.0f} confirmed")
            self._radial_calibrated = True
            self._radial_prev = None
        elif m_r != 0.0 and abs(gap) > band:
            self._radial_prev = (gap, math.copysign(1.0, gap))

    def advisory_direction(self) -> np.ndarray:
        """Pose-space direction a human should move: radial polarity applied."""
        m = self.last_m
        return np.array([self.radial_polarity * m[0], m[1], m[2]])

    # -- bookkeeping -----------------------------------------------------------

    def _snapshot_metrics(self, img: GrayImage) -> tuple[float, float, float]:
        small = img.downsample(self.config.metric_downsample)
        try:
            m = mse_metric(small, self._ref_small)
            return m, psnr_from_mse(m), ssim_metric(small, self._ref_small)
        except ValueError:
            return math.nan, math.nan, math.nan

    def _log_row(self, m: np.ndarray, goodness: float, img: GrayImage) -> None:
        mse_v, psnr_v, ssim_v = self._snapshot_metrics(img)
        self.trajectory.append(
            TrajectoryRow(
                t=self.t,
                r=float(self.source.pose.r),
                theta_deg=math.degrees(self.source.pose.theta),
                phi_deg=math.degrees(self.source.pose.phi),
                lambda_r=float(self.nav.lam[0]),
                lambda_theta=math.degrees(float(self.nav.lam[1])),
                lambda_phi=math.degrees(float(self.nav.lam[2])),
                m_r=int(m[0]),
                m_theta=int(m[1]),
                m_phi=int(m[2]),
                goodness=float(goodness),
                mse=float(mse_v),
                psnr=float(psnr_v),
                ssim=float(ssim_v),
            )
        )

    def _observe(self) -> tuple[GrayImage, LightingVector, NavigationBall]:
        img = self._capture()
        l_t = self._solve_current(img)
        ball = self._ball(l_t)
        self.last_image, self.last_lighting, self.last_ball = img, l_t, ball
        if ball.goodness > self.best_goodness:
            self.best_goodness = ball.goodness
            self.best_image = img
        return img, l_t, ball

    def _apply_delta(self, delta: np.ndarray) -> None:
        new_pose, clamped = self._actuator.apply(self.source.pose, delta, self._rng)
        if clamped:
            self.events.append(f"t={self.t}: pose clamped to actuator limits")
        self.source = self.source.with_pose(new_pose)

    def _check_stall_and_budget(self, goodness: float) -> None:
        floor = self.config.lambda_floor_frac * self.config.lambda0_internal()
        if self.status == Status.RUNNING and goodness <= self.eta and np.all(self.nav.lam < floor):
            self.status = Status.STALLED
        if self.status == Status.RUNNING and self.t >= self.config.max_iter:
            self.status = Status.MAX_ITER


def start_session(
    scene: SceneMaps | SceneSpec,
    source_kind: str,
    true_ref_pose: SphericalPose,
    init_pose: SphericalPose,
    config: SessionConfig,
    ambient_sources: list[LightSourceSpec] | None = None,
) -> AlrSession:
    """Initialize a relocation run: reference capture, K in-situ frames,
    photometric stereo (optionally ambiguity-injected), reference lighting and
    the frozen iso value; the actuator starts at init_pose."""
    config = replace(
        config, source_kind=source_kind, ref_pose=true_ref_pose, init_pose=init_pose
    )
    scene_maps = scene.make() if isinstance(scene, SceneSpec) else scene
    rng = make_rng(config.seed)
    template = config.source_template()
    specular = config.specular()

    ambient_true = None
    ambient_captured = None
    if ambient_sources:
        ambient_true = np.zeros(scene_maps.shape)
        for src in ambient_sources:
            ambient_true += render_source(scene_maps, src, noise=None, specular=specular).data
        noisy = ambient_true.copy()
        if config.noise.pixel_sigma > 0:
            noisy = noisy + rng.normal(0.0, config.noise.pixel_sigma, size=noisy.shape)
        ambient_captured = np.maximum(noisy, 0.0)

    def capture_at(pose: SphericalPose) -> GrayImage:
        return capture_frame(
            scene_maps,
            template.with_pose(pose),
            config,
            rng,
            ambient_true=ambient_true,
            ambient_captured=ambient_captured,
        )

    # the reference frame belongs to the reference epoch: only this source is
    # lit there, so no ambient is added or subtracted
    ref_image = capture_frame(scene_maps, template.with_pose(true_ref_pose), config, rng)

    if config.lighting_mode == "oracle":
        ps = PsResult(
            normals=scene_maps.normals,
            reflectance=scene_maps.reflectance,
            lights=(),
            mask=scene_maps.mask,
        )
        ref_lighting = template.with_pose(true_ref_pose).apl_vector()
    else:
        effective_power = config.source_power * (
            config.snsl_count if source_kind == KIND_SNSL else 1
        )
        poses = insitu_poses(config.k_lights, config.insitu_r or true_ref_pose.r, config.insitu_phi_deg)
        frames = [capture_at(p) for p in poses]
        lights = [LightingVector.from_pose(p, effective_power / p.r**2) for p in poses]
        ps = photometric_stereo(frames, lights)
        if config.ambiguity_beta_deg > 0:
            z = ambiguity_rotation(rng, math.radians(config.ambiguity_beta_deg))
            ps = inject_ambiguity(ps, z)
        shading = shading_from_image(ref_image, ps.reflectance)
        ref_lighting, _ = solve_lighting(shading, ps.normals)

    iso_value = render_unit_sphere(ref_lighting, config.ball_resolution)[0].median()
    source = template.with_pose(init_pose)
    return AlrSession(
        config,
        scene_maps,
        ps,
        source,
        ref_image,
        ref_lighting,
        iso_value,
        rng,
        ambient_true=ambient_true,
        ambient_captured=ambient_captured,
    )


def step_auto(session: AlrSession) -> AlrSession:
    """One automatic iteration: observe, update bookkeeping, adjust the pose."""
    if session.status != Status.RUNNING:
        raise SessionStateError(f"session is {session.status.value}")
    session.t += 1
    img, l_t, ball = session._observe()
    g = ball.goodness
    if g > session.eta:
        session.status = Status.CONVERGED
        session.last_m = np.zeros(3)
        session._log_row(session.last_m, g, img)
        return session
    m = session._direction(ball, l_t)
    session._radial_self_check(ball, l_t, m[0])
    session.last_m = m
    session.nav = nav_magnitude(session.nav, m)
    delta = np.array(
        [
            session.radial_polarity * m[0] * session.nav.lam[0],
            m[1] * session.nav.lam[1],
            m[2] * session.nav.lam[2],
        ]
    )
    session._apply_delta(delta)
    session._log_row(m, g, img)
    session._check_stall_and_budget(g)
    return session


def step_manual(session: AlrSession, delta: np.ndarray) -> AlrSession:
    """Apply a human pose nudge (r units, radians), then observe and log.

    The navigation magnitude schedule is untouched; the computed direction is
    advisory only.  Deltas beyond the per-step limits are clamped and flagged.
    """
    if session.status != Status.RUNNING:
        raise SessionStateError(f"session is {session.status.value}")
    limits = np.array(
        [
            session.config.manual_step_limit[0],
            math.radians(session.config.manual_step_limit[1]),
            math.radians(session.config.manual_step_limit[2]),
        ]
    )
    delta = np.asarray(delta, dtype=float).reshape(3)
    clipped = np.clip(delta, -limits, limits)
    if np.any(clipped != delta):
        session.events.append(f"t={session.t + 1}: manual delta clamped to per-step limits")
    session.t += 1
    session._apply_delta(clipped)
    img, l_t, ball = session._observe()
    g = ball.goodness
    m = session._direction(ball, l_t)
    session.last_m = m
    session._log_row(m, g, img)
    if g > session.eta:
        session.status = Status.CONVERGED
    return session


@dataclass
class AlrReport:
    """Outcome of a relocation run."""

    status: Status
    iterations: int
    best_goodness: float
    final_metrics: MetricReport | None
    trajectory: list[TrajectoryRow]
    events: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "iterations": self.iterations,
            "best_goodness": self.best_goodness,
            "final_metrics": self.final_metrics.to_json() if self.final_metrics else None,
            "events": list(self.events),
            "trajectory": [dict(zip(TRAJECTORY_COLUMNS, row.as_list())) for row in self.trajectory],
        }


def run_to_termination(session: AlrSession, max_iter: int | None = None) -> AlrReport:
    """Loop step_auto until converged, stalled, or the iteration budget is hit."""
    if max_iter is not None and max_iter != session.config.max_iter:
        session.config = replace(session.config, max_iter=max_iter)
    while session.status == Status.RUNNING:
        step_auto(session)
    return finalize_report(session)


def finalize_report(session: AlrSession) -> AlrReport:
    final = None
    if session.best_image is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # scale-count fallback on small frames
            final = compare(session.best_image, session.ref_image)
    return AlrReport(
        status=session.status,
        iterations=session.t,
        best_goodness=session.best_goodness,
        final_metrics=final,
        trajectory=list(session.trajectory),
        events=list(session.events),
    )


def run_multi_light(
    scene: SceneMaps | SceneSpec,
    sources: list[LightSourceSpec],
    ref_poses: list[SphericalPose],
    init_poses: list[SphericalPose],
    config: SessionConfig,
) -> list[AlrReport]:
    """Sequential relocation of several sources.

    Each source's reference frame is captured with only that source lit;
    already-relocated sources stay on and are handled as ambient light via a
    recorded ambient frame subtracted from every capture.  A failed sub-run
    aborts the sequence, returning the partial reports.
    """
    if not len(sources) == len(ref_poses) == len(init_poses):
        raise ValueError("sources, ref_poses and init_poses must align")
    scene_maps = scene.make() if isinstance(scene, SceneSpec) else scene
    fixed: list[LightSourceSpec] = []
    reports: list[AlrReport] = []
    for i, (src, ref_pose, init_pose) in enumerate(zip(sources, ref_poses, init_poses)):
        sub = replace(
            config,
            source_kind=src.kind,
            source_power=src.power,
            snsl_extent=src.snsl_extent,
            snsl_count=src.snsl_count,
            seed=config.seed + i,
        )
        session = start_session(
            scene_maps, src.kind, ref_pose, init_pose, sub, ambient_sources=list(fixed)
        )
        report = run_to_termination(session)
        reports.append(report)
        if report.status != Status.CONVERGED:
            break
        fixed.append(session.source)
    return reports


def scripted_follow(
    session: AlrSession,
    step_sizes: tuple[float, float, float] = (0.25, 1.0, 1.0),  # units, deg, deg
    goal: float = 0.95,
    max_steps: int = 400,
) -> AlrSession:
    """Scripted stand-in for a human: always nudge along the advisory direction
    with fixed per-axis step sizes until the goodness goal is reached."""
    steps = np.array(
        [step_sizes[0], math.radians(step_sizes[1]), math.radians(step_sizes[2])]
    )
    for _ in range(max_steps):
        if session.status != Status.RUNNING or session.last_ball.goodness > goal:
            break
        step_manual(session, session.advisory_direction() * steps)
    return session


# -- persistence ----------------------------------------------------------------


def write_trajectory_csv(rows: list[TrajectoryRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(TRAJECTORY_COLUMNS)
        for row in rows:
            writer.writerow(
                [v if isinstance(v, int) else repr(float(v)) for v in row.as_list()]
            )


def read_trajectory_csv(path) -> list[TrajectoryRow]:
    out = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != TRAJECTORY_COLUMNS:
            raise ValueError(f"unexpected trajectory columns {reader.fieldnames}")
        for rec in reader:
            out.append(
                TrajectoryRow(
                    t=int(rec["t"]),
                    r=float(rec["r"]),
                    theta_deg=float(rec["theta_deg"]),
                    phi_deg=float(rec["phi_deg"]),
                    lambda_r=float(rec["lambda_r"]),
                    lambda_theta=float(rec["lambda_theta"]),
                    lambda_phi=float(rec["lambda_phi"]),
                    m_r=int(rec["m_r"]),
                    m_theta=int(rec["m_theta"]),
                    m_phi=int(rec["m_phi"]),
                    goodness=float(rec["goodness"]),
                    mse=float(rec["mse"]),
                    psnr=float(rec["psnr"]),
                    ssim=float(rec["ssim"]),
                )
            )
    return out


def save_report(report: AlrReport, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.to_json(), f, indent=2)
