"""Shared geometric and image types plus spherical/Cartesian conversions.

Frame convention: the origin is the scene center, the camera sits on the +z
axis looking down at the scene (along -z), theta is the azimuth in (-pi, pi]
and phi is the polar angle measured from +z in [0, pi].  All images are
single-channel, linear radiance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return math.pi - (math.pi - a) % TWO_PI


def wrap_angle_difference(a: float, b: float) -> float:
    """a - b modulo 2*pi, mapped to (-pi, pi] (safe across the +-pi seam)."""
    return wrap_angle(a - b)


@dataclass(frozen=True)
class SphericalPose:
    """Light-source pose (r, theta, phi) in the scene-centered spherical frame.

    r > 0 is the distance from the scene center, theta the azimuth wrapped to
    (-pi, pi], phi the polar angle clamped to [0, pi].
    """

    r: float
    theta: float
    phi: float

    def __post_init__(self):
        if not (self.r > 0.0 and math.isfinite(self.r)):
            raise ValueError(f"pose radius must be positive and finite, got {self.r}")
        object.__setattr__(self, "theta", wrap_angle(self.theta))
        object.__setattr__(self, "phi", min(max(self.phi, 0.0), math.pi))

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.theta, self.phi], dtype=float)


def spherical_to_cartesian(p: SphericalPose) -> np.ndarray:
    """Position [x, y, z] of a spherical pose; phi = 0 lies on the camera axis."""
    s = math.sin(p.phi)
    return np.array(
        [p.r * s * math.cos(p.theta), p.r * s * math.sin(p.theta), p.r * math.cos(p.phi)]
    )


def cartesian_to_spherical(v: np.ndarray) -> SphericalPose:
    """Inverse of :func:`spherical_to_cartesian`."""
    x, y, z = float(v[0]), float(v[1]), float(v[2])
    r = math.sqrt(x * x + y * y + z * z)
    if r <= 0.0:
        raise ValueError("zero-length vector has no spherical pose")
    phi = math.acos(min(max(z / r, -1.0), 1.0))
    theta = math.atan2(y, x)
    if theta <= -math.pi:
        theta = math.pi
    return SphericalPose(r, theta, phi)


def direction_angles(v: np.ndarray) -> tuple[float, float]:
    """(theta, phi) of a direction vector, ignoring its magnitude."""
    p = cartesian_to_spherical(np.asarray(v, dtype=float))
    return p.theta, p.phi


@dataclass(frozen=True)
class LightingVector:
    """Parallel-lighting 3-vector: direction = lighting direction, norm = strength."""

    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=float).reshape(3)
        if not np.all(np.isfinite(v)):
            raise ValueError("lighting vector components must be finite")
        object.__setattr__(self, "vec", v)

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.vec))

    @property
    def direction(self) -> np.ndarray:
        m = self.magnitude
        if m == 0.0:
            raise ValueError("zero lighting vector has no direction")
        return self.vec / m

    def angles(self) -> tuple[float, float]:
        """(theta, phi) of the lighting direction."""
        return direction_angles(self.vec)

    @staticmethod
    def from_pose(pose: SphericalPose, strength: float) -> "LightingVector":
        """Lighting vector of given strength pointing from the scene toward `pose`."""
        u = spherical_to_cartesian(pose) / pose.r
        return LightingVector(u * strength)


@dataclass
class GrayImage:
    """Single-channel linear-radiance image with a per-pixel validity mask.

    `data` is (height, width) float64 with nonnegative intensities; masked-out
    pixels are excluded from every statistic computed on the image.
    """

    data: np.ndarray
    mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise ValueError(f"image data must be 2-D, got shape {self.data.shape}")
        if self.mask is None:
            self.mask = np.ones(self.data.shape, dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.data.shape:
            raise ValueError("mask shape must match data shape")
        if np.any(self.data < 0):
            raise ValueError("intensities must be nonnegative")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def pixel_count(self) -> int:
        return self.data.size

    def masked_values(self) -> np.ndarray:
        return self.data[self.mask]

    def median(self) -> float:
        vals = self.masked_values()
        if vals.size == 0:
            raise ValueError("no masked-in pixels")
        return float(np.median(vals))

    def max(self) -> float:
        vals = self.masked_values()
        if vals.size == 0:
            raise ValueError("no masked-in pixels")
        return float(vals.max())

    def downsample(self, step: int) -> "GrayImage":
        """Strided downsample used for per-iteration metric snapshots."""
        if step <= 1:
            return self
        return GrayImage(self.data[::step, ::step].copy(), self.mask[::step, ::step].copy())


_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class Rotation3:
    """Proper rotation (orthonormal 3x3, det = +1) with an axis-angle accessor."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).reshape(3, 3)
        if not np.allclose(m.T @ m, np.eye(3), atol=_ORTHO_TOL * 10):
            raise ValueError("matrix is not orthonormal")
        if abs(np.linalg.det(m) - 1.0) > 1e-6:
            raise ValueError("matrix determinant is not +1")
        object.__setattr__(self, "matrix", m)

    @staticmethod
    def identity() -> "Rotation3":
        return Rotation3(np.eye(3))

    @staticmethod
    def from_axis_angle(axis: np.ndarray, angle: float) -> "Rotation3":
        """Rodrigues rotation about a (not necessarily unit) axis."""
        e = np.asarray(axis, dtype=float).reshape(3)
        n = np.linalg.norm(e)
        if n == 0.0:
            raise ValueError("rotation axis must be nonzero")
        e = e / n
        k = np.array([[0.0, -e[2], e[1]], [e[2], 0.0, -e[0]], [-e[1], e[0], 0.0]])
        m = np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)
        return Rotation3(m)

    @staticmethod
    def random(rng: np.random.Generator, angle: float | None = None) -> "Rotation3":
        """Rotation about a uniformly random axis; random angle in [0, pi) if not given."""
        axis = rng.normal(size=3)
        while np.linalg.norm(axis) < 1e-12:
            axis = rng.normal(size=3)
        if angle is None:
            angle = float(rng.uniform(0.0, math.pi))
        return Rotation3.from_axis_angle(axis, angle)

    def axis_angle(self) -> tuple[float, np.ndarray]:
        """(beta, e) with beta in [0, pi] and |e| = 1."""
        m = self.matrix
        cos_b = min(max((np.trace(m) - 1.0) / 2.0, -1.0), 1.0)
        beta = math.acos(cos_b)
        if beta < 1e-7:
            return 0.0, np.array([0.0, 0.0, 1.0])
        if math.pi - beta > 1e-7:
            e = np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])
            return beta, e / (2.0 * math.sin(beta))
        # beta ~ pi: axis from the symmetric part, signs from off-diagonals
        e = np.sqrt(np.maximum(np.diag(m) + 1.0, 0.0) / 2.0)
        k = int(np.argmax(e))
        signs = np.ones(3)
        for i in range(3):
            if i != k and e[i] > 0:
                signs[i] = math.copysign(1.0, m[k, i] + m[i, k])
        e = e * signs
        return beta, e / np.linalg.norm(e)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def inverse(self) -> "Rotation3":
        return Rotation3(self.matrix.T)


def make_rng(seed: int | None) -> np.random.Generator:
    """The single deterministic random source passed to every stochastic step."""
    return np.random.default_rng(seed)
