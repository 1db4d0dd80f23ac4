"""Normal/reflectance recovery from side-lit frames and per-frame lighting solves.

Calibrated per-pixel least squares stands in for the uncalibrated solver the
navigation loop would run in the field; decomposition ambiguity is modelled
explicitly by rotating normals and lights together (`inject_ambiguity`), which
leaves every rendered shading untouched.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from .core import GrayImage, LightingVector, Rotation3

# reflectance below this fraction of the map's max is masked out of divisions
REFLECTANCE_FLOOR_FRAC = 1e-6

MAX_LIGHT_CONDITION = 1e4

_SIDECAR_MAGIC = b"PSR1"


class EmptyShadingError(ValueError):
    """Every pixel was masked out of a shading computation."""


class RankDeficientError(ValueError):
    """Lights or normals do not span enough of R^3 to solve the system."""


@dataclass(frozen=True)
class PsResult:
    """Photometric-stereo output: unit normals, reflectance, the K lights used."""

    normals: np.ndarray      # (H, W, 3)
    reflectance: np.ndarray  # (H, W)
    lights: tuple            # K LightingVector
    mask: np.ndarray         # (H, W) bool, pixels with a valid solve
    mode: str = "calibrated"  # or "ambiguity-injected"

    @property
    def shape(self) -> tuple[int, int]:
        return self.reflectance.shape


def shading_from_image(image: GrayImage, reflectance: np.ndarray) -> GrayImage:
    """Recover shading S = I / R; pixels with tiny reflectance are masked out."""
    reflectance = np.asarray(reflectance, dtype=float)
    if reflectance.shape != image.data.shape:
        raise ValueError("reflectance shape must match the image")
    floor = REFLECTANCE_FLOOR_FRAC * float(reflectance.max(initial=0.0))
    ok = image.mask & (reflectance > floor)
    if not np.any(ok):
        raise EmptyShadingError("no pixels left after reflectance floor masking")
    data = np.zeros_like(image.data)
    data[ok] = image.data[ok] / reflectance[ok]
    return GrayImage(data, ok)


def photometric_stereo(images: list[GrayImage], known_lights: list[LightingVector]) -> PsResult:
    """Per-pixel least squares for I_p = R_p * (N_p . l) over unclamped frames.

    Requires K >= 3 lights spanning R^3; pixels visible in fewer than three
    frames are masked out of the result.
    """
    k = len(images)
    if k != len(known_lights):
        raise ValueError("one light per frame required")
    if k < 3:
        raise ValueError(f"need at least 3 frames, got {k}")
    if k > 63:
        raise ValueError("more than 63 frames not supported")
    shape = images[0].data.shape
    if any(im.data.shape != shape for im in images):
        raise ValueError("all frames must share dimensions")

    lights = np.stack([l.vec for l in known_lights])  # (K, 3)
    cond = np.linalg.cond(lights)
    if not np.isfinite(cond) or cond > MAX_LIGHT_CONDITION:
        raise RankDeficientError(f"light matrix condition {cond:.3g} exceeds {MAX_LIGHT_CONDITION:g}")

    intensity = np.stack([im.data.reshape(-1) for im in images])  # (K, P)
    valid = np.stack([im.mask.reshape(-1) for im in images])      # (K, P)

    codes = np.zeros(intensity.shape[1], dtype=np.uint64)
    for row in range(k):
        codes |= valid[row].astype(np.uint64) << np.uint64(row)

    g = np.zeros((intensity.shape[1], 3))
    solved = np.zeros(intensity.shape[1], dtype=bool)
    for code in np.unique(codes):
        rows = [row for row in range(k) if (int(code) >> row) & 1]
        if len(rows) < 3:
            continue
        sub = lights[rows]
        if np.linalg.matrix_rank(sub, tol=1e-8) < 3:
            continue
        cols = codes == code
        g[cols] = (np.linalg.pinv(sub) @ intensity[np.ix_(rows, np.flatnonzero(cols))]).T
        solved[cols] = True

    magnitude = np.linalg.norm(g, axis=1)
    solved &= magnitude > 0
    normals = np.tile(np.array([0.0, 0.0, 1.0]), (g.shape[0], 1))
    normals[solved] = g[solved] / magnitude[solved, None]
    reflectance = np.where(solved, magnitude, 0.0)

    return PsResult(
        normals=normals.reshape(*shape, 3),
        reflectance=reflectance.reshape(shape),
        lights=tuple(known_lights),
        mask=solved.reshape(shape),
    )


def inject_ambiguity(ps: PsResult, z: Rotation3) -> PsResult:
    """Rotate the decomposition: N -> N Z^-1 row-wise, l -> Z l.

    The product N.l is unchanged per pixel, so every re-rendered shading is
    identical; only the individual factors move.
    """
    zinv = z.matrix.T
    normals = ps.normals @ zinv  # row-wise n -> n Z^-1
    lights = tuple(LightingVector(z.matrix @ l.vec) for l in ps.lights)
    return replace(ps, normals=normals, lights=lights, mode="ambiguity-injected")


def solve_lighting(shading: GrayImage, normals: np.ndarray) -> tuple[LightingVector, float]:
    """Closed-form least-squares lighting vector from one shading image.

    Returns (l, residual_rms) over the masked-in pixels.  Raises
    RankDeficientError when the visible normals are coplanar (e.g. a flat
    scene), where only one component of l is observable.
    """
    normals = np.asarray(normals, dtype=float)
    if normals.shape[:2] != shading.data.shape:
        raise ValueError("normals grid must match the shading image")
    n = normals[shading.mask]
    s = shading.data[shading.mask]
    if n.shape[0] < 3:
        raise RankDeficientError(f"only {n.shape[0]} usable pixels")
    sol, _, rank, sv = np.linalg.lstsq(n, s, rcond=None)
    if rank < 3 or sv[2] < 1e-6 * sv[0]:
        raise RankDeficientError("visible normals are coplanar; lighting underdetermined")
    residual = n @ sol - s
    rms = float(np.sqrt(np.mean(residual**2)))
    return LightingVector(sol), rms


def save_ps(ps: PsResult, path) -> None:
    """Binary sidecar: dimensions header + little-endian float32 payload."""
    h, w = ps.shape
    k = len(ps.lights)
    mode_flag = 1 if ps.mode == "ambiguity-injected" else 0
    with open(path, "wb") as f:
        f.write(_SIDECAR_MAGIC)
        f.write(struct.pack("<IIIB", w, h, k, mode_flag))
        f.write(ps.normals.astype("<f4").tobytes())
        f.write(ps.reflectance.astype("<f4").tobytes())
        f.write(np.stack([l.vec for l in ps.lights]).astype("<f4").tobytes())
        f.write(ps.mask.astype(np.uint8).tobytes())


def load_ps(path) -> PsResult:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _SIDECAR_MAGIC:
            raise ValueError(f"bad sidecar magic {magic!r}")
        w, h, k, mode_flag = struct.unpack("<IIIB", f.read(13))
        normals = np.frombuffer(f.read(4 * h * w * 3), dtype="<f4").reshape(h, w, 3)
        refl = np.frombuffer(f.read(4 * h * w), dtype="<f4").reshape(h, w)
        lights = np.frombuffer(f.read(4 * k * 3), dtype="<f4").reshape(k, 3)
        mask = np.frombuffer(f.read(h * w), dtype=np.uint8).reshape(h, w).astype(bool)
    normals = normals.astype(float)
    norms = np.linalg.norm(normals, axis=-1)
    safe = norms > 0
    normals[safe] /= norms[safe, None]
    normals[~safe] = (0.0, 0.0, 1.0)
    return PsResult(
        normals=normals,
        reflectance=refl.astype(float),
        lights=tuple(LightingVector(l) for l in lights.astype(float)),
        mask=mask,
        mode="ambiguity-injected" if mode_flag else "calibrated",
    )


def ps_summary(ps: PsResult, true_normals: np.ndarray | None = None) -> dict:
    """JSON-ready summary; includes normal MAE when ground truth is supplied."""
    h, w = ps.shape
    out = {
        "width": w,
        "height": h,
        "k": len(ps.lights),
        "mode": ps.mode,
        "valid_fraction": float(ps.mask.mean()),
    }
    if true_normals is not None:
        from .metrics import mean_angle_error

        out["mae_normals_rad"] = mean_angle_error(ps.normals, true_normals, ps.mask)
    return out


def save_ps_summary(ps: PsResult, path, true_normals: np.ndarray | None = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(ps_summary(ps, true_normals), f, indent=2)
