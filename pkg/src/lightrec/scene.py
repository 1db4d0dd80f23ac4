"""Synthetic scenes and Lambertian renderers.

Three source models share one attached-shadow convention (contributions are
clamped at zero, clamped pixels are flagged in the returned mask):

* parallel light: pixel = R * max(0, N . l)
* near point light: pixel = R * e * max(0, N . (E - X)) / |E - X|^3
* small surface light: sum of near-point terms over a square emitter grid

The camera is orthographic on the +z axis; no cast shadows, no interreflection.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    GrayImage,
    LightingVector,
    SphericalPose,
    spherical_to_cartesian,
)

PRESETS = ("flat", "bumpy", "hemisphere", "relief")

KIND_APL = "apl"
KIND_NPL = "npl"
KIND_SNSL = "snsl"
KINDS = (KIND_APL, KIND_NPL, KIND_SNSL)

# sources closer than this to any surface point are rejected as degenerate
MIN_SOURCE_CLEARANCE = 1e-3


class DegenerateGeometryError(ValueError):
    """Light source coincides with (or nearly touches) the scene surface."""


@dataclass
class SceneMaps:
    """Per-pixel unit normals N, reflectance R, spatial coordinates X and mask."""

    normals: np.ndarray      # (H, W, 3)
    reflectance: np.ndarray  # (H, W)
    positions: np.ndarray    # (H, W, 3), scene units
    mask: np.ndarray         # (H, W) bool

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=float)
        self.reflectance = np.asarray(self.reflectance, dtype=float)
        self.positions = np.asarray(self.positions, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        h, w = self.reflectance.shape
        if self.normals.shape != (h, w, 3) or self.positions.shape != (h, w, 3):
            raise ValueError("normals/positions must be (H, W, 3) matching reflectance")
        if self.mask.shape != (h, w):
            raise ValueError("mask shape mismatch")
        norms = np.linalg.norm(self.normals[self.mask], axis=-1)
        if norms.size and np.max(np.abs(norms - 1.0)) > 1e-9:
            raise ValueError("masked-in normals must be unit length")
        if np.any(self.reflectance < 0):
            raise ValueError("reflectance must be nonnegative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.reflectance.shape

    def with_reflectance(self, reflectance: np.ndarray) -> "SceneMaps":
        """Copy with edited reflectance (scene-perturbation hook for change tests)."""
        return SceneMaps(self.normals, reflectance, self.positions, self.mask)


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian image noise and per-axis actuator execution noise."""

    pixel_sigma: float = 0.0
    actuator_sigma: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.pixel_sigma < 0 or any(s < 0 for s in self.actuator_sigma):
            raise ValueError("noise sigmas must be nonnegative")
        object.__setattr__(self, "actuator_sigma", tuple(float(s) for s in self.actuator_sigma))

    def to_json(self) -> dict:
        return {"pixel_sigma": self.pixel_sigma, "actuator_sigma": list(self.actuator_sigma)}

    @staticmethod
    def from_json(d: dict) -> "NoiseSpec":
        return NoiseSpec(
            pixel_sigma=float(d.get("pixel_sigma", 0.0)),
            actuator_sigma=tuple(d.get("actuator_sigma", (0.0, 0.0, 0.0))),
        )


@dataclass(frozen=True)
class SpecularSpec:
    """Phong-style stress lobe k_s * max(0, reflect . view)^n on top of Lambert."""

    k_s: float = 0.2
    exponent: float = 20.0


@dataclass(frozen=True)
class LightSourceSpec:
    """A light source: kind, spherical pose, radiant power, emitter geometry.

    For `snsl`, `snsl_extent` is the side length of the square emitter and
    `snsl_count` the number of point emitters (a perfect square) arranged on a
    uniform grid whose midperpendicular points at the scene center.  The
    intended regime extent << r is reported via `snsl_extent_ratio`, not
    enforced.
    """

    kind: str
    pose: SphericalPose
    power: float
    snsl_extent: float = 0.0
    snsl_count: int = 25

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}")
        if not self.power > 0:
            raise ValueError("source power must be positive")
        if self.kind == KIND_SNSL:
            if not self.snsl_extent > 0:
                raise ValueError("snsl_extent must be positive")
            side = math.isqrt(self.snsl_count)
            if side * side != self.snsl_count or self.snsl_count < 1:
                raise ValueError("snsl_count must be a positive perfect square")

    @staticmethod
    def apl_from_vector(l: LightingVector) -> "LightSourceSpec":
        """Canonicalize a raw parallel-lighting vector to a pose at r = 1."""
        theta, phi = l.angles()
        return LightSourceSpec(KIND_APL, SphericalPose(1.0, theta, phi), l.magnitude)

    @property
    def position(self) -> np.ndarray:
        return spherical_to_cartesian(self.pose)

    @property
    def snsl_extent_ratio(self) -> float:
        return self.snsl_extent / self.pose.r if self.kind == KIND_SNSL else 0.0

    def apl_vector(self) -> LightingVector:
        """The parallel-lighting analog: direction toward the source, strength e/r^2."""
        return LightingVector.from_pose(self.pose, self.power / self.pose.r**2)

    def with_pose(self, pose: SphericalPose) -> "LightSourceSpec":
        return replace(self, pose=pose)

    def emitter_positions(self) -> np.ndarray:
        """(D, 3) point-emitter positions; a single center point unless snsl."""
        center = self.position
        if self.kind != KIND_SNSL:
            return center[None, :]
        toward_scene = -center / np.linalg.norm(center)
        helper = np.array([0.0, 0.0, 1.0])
        if abs(np.dot(toward_scene, helper)) > 0.999:
            helper = np.array([1.0, 0.0, 0.0])
        u = np.cross(toward_scene, helper)
        u /= np.linalg.norm(u)
        v = np.cross(toward_scene, u)
        side = math.isqrt(self.snsl_count)
        offsets = ((np.arange(side) + 0.5) / side - 0.5) * self.snsl_extent
        aa, bb = np.meshgrid(offsets, offsets, indexing="ij")
        return center[None, :] + aa.reshape(-1, 1) * u[None, :] + bb.reshape(-1, 1) * v[None, :]

    def to_json(self) -> dict:
        d = {
            "kind": self.kind,
            "pose": {
                "r": self.pose.r,
                "theta_deg": math.degrees(self.pose.theta),
                "phi_deg": math.degrees(self.pose.phi),
            },
            "power": self.power,
        }
        if self.kind == KIND_SNSL:
            d["snsl_extent"] = self.snsl_extent
            d["snsl_count"] = self.snsl_count
        return d

    @staticmethod
    def from_json(d: dict) -> "LightSourceSpec":
        p = d["pose"]
        pose = SphericalPose(
            float(p["r"]), math.radians(float(p["theta_deg"])), math.radians(float(p["phi_deg"]))
        )
        return LightSourceSpec(
            d["kind"],
            pose,
            float(d["power"]),
            snsl_extent=float(d.get("snsl_extent", 0.0)),
            snsl_count=int(d.get("snsl_count", 25)),
        )


def _finalize(data, mask, noise, rng) -> GrayImage:
    if noise is not None and noise.pixel_sigma > 0:
        if rng is None:
            raise ValueError("pixel noise requested but no rng supplied")
        data = data + rng.normal(0.0, noise.pixel_sigma, size=data.shape)
    return GrayImage(np.maximum(data, 0.0), mask)


def _specular_apl(scene, direction, strength, spec: SpecularSpec) -> np.ndarray:
    # reflect the (pixel -> source) direction about the normal; view along +z
    n = scene.normals
    cos_i = n @ direction
    refl = 2.0 * cos_i[..., None] * n - direction[None, None, :]
    lobe = np.maximum(refl[..., 2], 0.0) ** spec.exponent
    return spec.k_s * strength * np.where(cos_i > 0, lobe, 0.0)


def render_apl(
    scene: SceneMaps,
    light: LightingVector,
    noise: NoiseSpec | None = None,
    rng: np.random.Generator | None = None,
    specular: SpecularSpec | None = None,
) -> GrayImage:
    """Parallel-lighting render: R * max(0, N . l), plus optional noise/lobe."""
    dots = scene.normals @ light.vec
    data = scene.reflectance * np.maximum(dots, 0.0)
    if specular is not None:
        data = data + _specular_apl(scene, light.direction, light.magnitude, specular)
    mask = scene.mask & (dots > 0)
    return _finalize(data, mask, noise, rng)


def _npl_accumulate(scene, emitter, power, specular):
    diff = emitter[None, None, :] - scene.positions
    dist = np.linalg.norm(diff, axis=-1)
    if np.any(dist[scene.mask] < MIN_SOURCE_CLEARANCE):
        raise DegenerateGeometryError(
            f"source at {emitter} is within {MIN_SOURCE_CLEARANCE} of the surface"
        )
    dots = np.einsum("hwk,hwk->hw", scene.normals, diff)
    shading = power * np.maximum(dots, 0.0) / dist**3
    data = scene.reflectance * shading
    if specular is not None:
        n = scene.normals
        ldir = diff / dist[..., None]
        cos_i = np.einsum("hwk,hwk->hw", n, ldir)
        refl = 2.0 * cos_i[..., None] * n - ldir
        lobe = np.maximum(refl[..., 2], 0.0) ** specular.exponent
        data = data + specular.k_s * (power / dist**2) * np.where(cos_i > 0, lobe, 0.0)
    return data, dots


def render_npl(
    scene: SceneMaps,
    src: LightSourceSpec,
    noise: NoiseSpec | None = None,
    rng: np.random.Generator | None = None,
    specular: SpecularSpec | None = None,
) -> GrayImage:
    """Near-point-light render with inverse-square falloff and per-pixel directions."""
    if src.kind != KIND_NPL:
        raise ValueError(f"expected an npl source, got {src.kind!r}")
    data, dots = _npl_accumulate(scene, src.position, src.power, specular)
    mask = scene.mask & (dots > 0)
    return _finalize(data, mask, noise, rng)


def render_snsl(
    scene: SceneMaps,
    src: LightSourceSpec,
    noise: NoiseSpec | None = None,
    rng: np.random.Generator | None = None,
    specular: SpecularSpec | None = None,
) -> GrayImage:
    """Small-near-surface-light render: sum of point emitters on the square grid."""
    if src.kind != KIND_SNSL:
        raise ValueError(f"expected an snsl source, got {src.kind!r}")
    data = np.zeros(scene.shape)
    lit = np.zeros(scene.shape, dtype=bool)
    for emitter in src.emitter_positions():
        part, dots = _npl_accumulate(scene, emitter, src.power, specular)
        data += part
        lit |= dots > 0
    mask = scene.mask & lit
    return _finalize(data, mask, noise, rng)


def render_source(
    scene: SceneMaps,
    src: LightSourceSpec,
    noise: NoiseSpec | None = None,
    rng: np.random.Generator | None = None,
    specular: SpecularSpec | None = None,
) -> GrayImage:
    """Dispatch on source kind."""
    if src.kind == KIND_APL:
        return render_apl(scene, src.apl_vector(), noise, rng, specular)
    if src.kind == KIND_NPL:
        return render_npl(scene, src, noise, rng, specular)
    return render_snsl(scene, src, noise, rng, specular)


def render_unit_sphere(light: LightingVector, resolution: int) -> tuple[GrayImage, SceneMaps]:
    """Orthographic raster of the camera-facing unit hemisphere under `light`.

    Returns the rendered image and the sphere maps (normals equal positions);
    background pixels are masked out.
    """
    if resolution < 64:
        raise ValueError("sphere raster resolution must be at least 64")
    u = np.linspace(-1.0, 1.0, resolution)
    v = np.linspace(1.0, -1.0, resolution)  # row 0 at the top of the image
    uu, vv = np.meshgrid(u, v)
    rho2 = uu**2 + vv**2
    inside = rho2 <= 1.0
    nz = np.sqrt(np.maximum(1.0 - rho2, 0.0))
    normals = np.stack([uu, vv, nz], axis=-1)
    normals[~inside] = (0.0, 0.0, 1.0)
    data = np.maximum(np.einsum("hwk,k->hw", normals, light.vec), 0.0)
    data[~inside] = 0.0
    img = GrayImage(data, inside)
    maps = SceneMaps(normals, np.ones(inside.shape), normals.copy(), inside)
    return img, maps


def _height_to_scene(xx, yy, zz, h, reflectance, mask=None) -> SceneMaps:
    zx = np.gradient(zz, h, axis=1)
    zy = np.gradient(zz, h, axis=0)
    n = np.stack([-zx, -zy, np.ones_like(zz)], axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    positions = np.stack([xx, yy, zz], axis=-1)
    if mask is None:
        mask = np.ones(zz.shape, dtype=bool)
    return SceneMaps(n, reflectance, positions, mask)


def make_scene(preset: str, resolution: int = 128, seed: int | None = None) -> SceneMaps:
    """Build a preset scene on a [-1, 1]^2 grid; normals come from the height
    field by central differences, so curved presets are accurate away from rims.
    """
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {PRESETS}")
    n = int(resolution)
    x = np.linspace(-1.0, 1.0, n)
    y = np.linspace(-1.0, 1.0, n)
    h = x[1] - x[0]
    xx, yy = np.meshgrid(x, y)

    if preset == "flat":
        zz = np.zeros_like(xx)
        refl = np.full_like(xx, 1.0)
        return _height_to_scene(xx, yy, zz, h, refl)

    if preset == "bumpy":
        rng = np.random.default_rng(seed)
        zz = np.zeros_like(xx)
        for _ in range(10):
            fx, fy = rng.uniform(0.6, 3.0, size=2)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            amp = rng.uniform(0.012, 0.035)
            zz += amp * np.sin(math.pi * (fx * xx + fy * yy) + phase)
        refl = 0.55 + 0.35 * np.sin(math.pi * (xx * rng.uniform(0.5, 1.5) + 0.3)) * np.cos(
            math.pi * (yy * rng.uniform(0.5, 1.5) - 0.2)
        )
        return _height_to_scene(xx, yy, zz, h, np.clip(refl, 0.2, 0.9))

    if preset == "hemisphere":
        radius = 0.8
        r2 = xx**2 + yy**2
        cap = r2 <= radius**2
        zz = np.zeros_like(xx)
        zz[cap] = np.sqrt(radius**2 - r2[cap])
        # keep a margin from the rim where central differences degrade
        mask = r2 <= (0.85 * radius) ** 2
        refl = np.full_like(xx, 0.95)
        return _height_to_scene(xx, yy, zz, h, refl, mask)

    # relief: plate with an engraved ring and two diagonal grooves
    r = np.sqrt(xx**2 + yy**2)
    ring = np.exp(-(((r - 0.55) / 0.06) ** 2))
    g1 = np.exp(-(((xx - yy) / 0.08) ** 2)) * (r < 0.4)
    g2 = np.exp(-(((xx + yy) / 0.08) ** 2)) * (r < 0.4)
    zz = -0.05 * (ring + 0.8 * g1 + 0.8 * g2)
    refl = 0.65 + 0.2 * np.cos(3.0 * math.pi * xx) * np.cos(3.0 * math.pi * yy)
    return _height_to_scene(xx, yy, zz, h, refl)


@dataclass(frozen=True)
class SceneSpec:
    """Serializable recipe for a preset scene."""

    preset: str
    resolution: int = 128
    seed: int | None = None

    def make(self) -> SceneMaps:
        return make_scene(self.preset, self.resolution, self.seed)

    def to_json(self) -> dict:
        return {"preset": self.preset, "resolution": self.resolution, "seed": self.seed}

    @staticmethod
    def from_json(d: dict) -> "SceneSpec":
        return SceneSpec(
            preset=d["preset"],
            resolution=int(d.get("resolution", 128)),
            seed=d.get("seed"),
        )


def save_scene_spec(spec: SceneSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(spec.to_json(), f, indent=2)


def load_scene_spec(path) -> SceneSpec:
    with open(path, encoding="utf-8") as f:
        return SceneSpec.from_json(json.load(f))
