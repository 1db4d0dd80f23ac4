"""Navigation ball: isointensity circles, cap IoU goodness, direction/magnitude.

On a unit Lambertian sphere every isointensity locus of a parallel light is a
circle about the lighting axis; its cap geometry carries the control signal.
For iso value v and lighting vector l: cos(alpha) = v/|l| and the (flat disk)
area measure A = pi * sin^2(alpha), so v = |l| * sqrt(1 - A/pi) and A grows
monotonically with |l| at fixed v.  Goodness is the IoU of the two spherical
cap regions enclosed by the reference and current circles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import GrayImage, LightingVector, direction_angles, wrap_angle_difference
from .scene import SceneMaps, render_unit_sphere

# sgn dead-bands: angular axes 0.2 deg, area axis 0.5% of the full-disk measure
DEAD_BAND_ANGLE = math.radians(0.2)
DEAD_BAND_AREA = 0.005 * math.pi


class EmptySicError(ValueError):
    """No pixel (or no analytic solution) at the requested iso value."""


@dataclass(frozen=True)
class Sic:
    """Spherical isointensity circle at `iso_value` around `center_dir`."""

    iso_value: float
    center_dir: np.ndarray  # unit 3-vector, the lighting axis
    center_theta: float
    center_phi: float
    cos_alpha: float        # iso / |l|, in [0, 1]
    area: float             # pi * sin^2(alpha), in [0, pi]
    raster_pixels: np.ndarray | None = None  # optional (n, 2) row/col indices

    def __post_init__(self):
        c = np.asarray(self.center_dir, dtype=float).reshape(3)
        if abs(np.linalg.norm(c) - 1.0) > 1e-9:
            raise ValueError("SIC center direction must be unit length")
        object.__setattr__(self, "center_dir", c)
        if not -1e-12 <= self.area <= math.pi + 1e-12:
            raise ValueError(f"cap area {self.area} outside [0, pi]")
        if not -1e-12 <= self.cos_alpha <= 1.0 + 1e-12:
            raise ValueError(f"cos_alpha {self.cos_alpha} outside [0, 1]")

    @property
    def center_sph(self) -> tuple[float, float]:
        return self.center_theta, self.center_phi

    @property
    def alpha(self) -> float:
        return math.acos(min(max(self.cos_alpha, 0.0), 1.0))


@dataclass(frozen=True)
class NavigationBall:
    """Rendered sphere plus reference/current SICs and their IoU goodness."""

    rendered: GrayImage
    current: Sic | None
    reference: Sic
    goodness: float
    iso_value: float

    def __post_init__(self):
        if not 0.0 <= self.goodness <= 1.0:
            raise ValueError(f"goodness {self.goodness} outside [0, 1]")


@dataclass(frozen=True)
class NavState:
    """Per-axis step magnitudes and the previous direction signs.

    mu > 1 accelerates approach; the bisection scheme only converges for mu < 2.
    `lam_max` bounds the speed-up growth (an axis stuck against an actuator
    limit never flips, and unbounded growth would overflow); infinite by
    default so the raw schedule is unchanged unless a bound is requested.
    """

    lam: np.ndarray                     # (3,) positive magnitudes, axis order r/theta/phi
    prev_m: np.ndarray = field(default=None)  # type: ignore[assignment]
    mu: float = 1.2
    lam_max: float = math.inf

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).reshape(3)
        if np.any(lam <= 0):
            raise ValueError("step magnitudes must stay positive")
        object.__setattr__(self, "lam", lam)
        pm = self.prev_m if self.prev_m is not None else np.zeros(3)
        object.__setattr__(self, "prev_m", np.asarray(pm, dtype=float).reshape(3))


def extract_sic_analytic(light: LightingVector, iso_value: float) -> Sic:
    """Exact SIC of a parallel lighting vector at the given iso value."""
    mag = light.magnitude
    if iso_value < 0:
        raise ValueError("iso value must be nonnegative")
    if mag == 0.0 or iso_value > mag:
        raise EmptySicError(f"iso {iso_value} exceeds lighting strength {mag}")
    cos_alpha = min(iso_value / mag, 1.0)
    theta, phi = light.angles()
    return Sic(
        iso_value=iso_value,
        center_dir=light.direction,
        center_theta=theta,
        center_phi=phi,
        cos_alpha=cos_alpha,
        area=math.pi * (1.0 - cos_alpha**2),
    )


def extract_sic_raster(
    ball_image: GrayImage,
    sphere: SceneMaps,
    iso_value: float,
    band_eps: float,
) -> Sic:
    """SIC from raster pixels within `band_eps` of the iso value.

    The band normals all satisfy n . c = cos(alpha), so the center direction
    is the smallest-variance axis of the band normals (a plane fit).  Unlike a
    plain pixel mean this is immune to the raster's nonuniform pixel density
    around the circle (orthographic foreshortening, band-width variation).
    The cap area comes from the cap formula at the band's mean cos(alpha).
    """
    band = ball_image.mask & (np.abs(ball_image.data - iso_value) <= band_eps)
    if not np.any(band):
        raise EmptySicError(f"no raster pixels within {band_eps} of iso {iso_value}")
    normals = sphere.normals[band]
    mean = normals.mean(axis=0)
    if np.linalg.norm(mean) == 0:
        raise EmptySicError("band normals cancel; no usable center")
    centered = normals - mean
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    if normals.shape[0] >= 3 and eigvals[1] > 1e-10 * max(np.trace(cov), 1e-30):
        center = eigvecs[:, 0]
        if center @ mean < 0:
            center = -center
    else:
        center = mean / np.linalg.norm(mean)  # point-like band: mean is all we have
    cos_alpha = float(np.clip(np.mean(normals @ center), 0.0, 1.0))
    theta, phi = direction_angles(center)
    rows, cols = np.nonzero(band)
    return Sic(
        iso_value=iso_value,
        center_dir=center,
        center_theta=theta,
        center_phi=phi,
        cos_alpha=cos_alpha,
        area=math.pi * (1.0 - cos_alpha**2),
        raster_pixels=np.stack([rows, cols], axis=1),
    )


def spherical_cap_area(alpha: float) -> float:
    """Surface area of a unit-sphere cap of half-angle alpha."""
    return 2.0 * math.pi * (1.0 - math.cos(alpha))


def spherical_cap_intersection_area(alpha1: float, alpha2: float, separation: float) -> float:
    """Closed-form overlap area of two unit-sphere caps.

    alpha1/alpha2 are cap half-angles, separation the angle between the cap
    axes; derived by splitting the lens into two circle segments.
    """
    if alpha1 <= 0 or alpha2 <= 0:
        return 0.0
    if separation >= alpha1 + alpha2:
        return 0.0
    if separation <= abs(alpha1 - alpha2):
        return spherical_cap_area(min(alpha1, alpha2))

    def clamped_acos(x: float) -> float:
        return math.acos(min(max(x, -1.0), 1.0))

    c1, s1 = math.cos(alpha1), math.sin(alpha1)
    c2, s2 = math.cos(alpha2), math.sin(alpha2)
    cd, sd = math.cos(separation), math.sin(separation)
    t1 = clamped_acos((c2 - c1 * cd) / (s1 * sd))
    t2 = clamped_acos((c1 - c2 * cd) / (s2 * sd))
    gamma = clamped_acos((cd - c1 * c2) / (s1 * s2))
    return 2.0 * (math.pi - gamma - t1 * c1 - t2 * c2)


def sic_iou(a: Sic, b: Sic) -> float:
    """IoU of the spherical cap regions enclosed by two SICs."""
    alpha_a, alpha_b = a.alpha, b.alpha
    separation = math.acos(float(np.clip(np.dot(a.center_dir, b.center_dir), -1.0, 1.0)))
    area_a = spherical_cap_area(alpha_a)
    area_b = spherical_cap_area(alpha_b)
    if area_a == 0.0 and area_b == 0.0:
        return 1.0 if separation < 1e-9 else 0.0
    inter = spherical_cap_intersection_area(alpha_a, alpha_b, separation)
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def compose_ball(
    l_t: LightingVector,
    l_ref: LightingVector,
    resolution: int = 256,
    iso_value: float | None = None,
) -> NavigationBall:
    """Build the instant navigation ball for the current and reference lightings.

    The iso value defaults to the median of the reference sphere render (and is
    typically frozen once per session).  If the current lighting is too weak to
    reach the iso value the current SIC is empty and goodness is 0.
    """
    if iso_value is None:
        ref_img, _ = render_unit_sphere(l_ref, resolution)
        iso_value = ref_img.median()
    reference = extract_sic_analytic(l_ref, iso_value)
    rendered, _ = render_unit_sphere(l_t, resolution)
    try:
        current = extract_sic_analytic(l_t, iso_value)
    except EmptySicError:
        return NavigationBall(rendered, None, reference, 0.0, iso_value)
    goodness = sic_iou(current, reference)
    return NavigationBall(rendered, current, reference, goodness, iso_value)


def nav_direction(
    ball: NavigationBall,
    dead_band_angle: float = DEAD_BAND_ANGLE,
    dead_band_area: float = DEAD_BAND_AREA,
) -> np.ndarray:
    """Per-axis signs sgn([A_ref, theta_ref, phi_ref] - [A_t, theta_t, phi_t]).

    Angular differences are seam-wrapped; differences inside the dead-bands map
    to 0.  With an empty current SIC the radial component asks for more
    lighting strength (+1 on the area axis) and the angles fall back to the
    reference center alone (already current-free).
    """
    ref = ball.reference
    if ball.current is None:
        return np.array([1.0, 0.0, 0.0])
    cur = ball.current
    d_area = ref.area - cur.area
    d_theta = wrap_angle_difference(ref.center_theta, cur.center_theta)
    d_phi = ref.center_phi - cur.center_phi

    def banded_sign(x: float, band: float) -> float:
        if abs(x) <= band:
            return 0.0
        return math.copysign(1.0, x)

    return np.array(
        [
            banded_sign(d_area, dead_band_area),
            banded_sign(d_theta, dead_band_angle),
            banded_sign(d_phi, dead_band_angle),
        ]
    )


def nav_magnitude(state: NavState, m_now: np.ndarray, m_prev: np.ndarray | None = None) -> NavState:
    """Bisection update: halve an axis on a sign flip, multiply by mu otherwise.

    A zero sign on either side counts as "no flip" (the axis is inside its
    dead-band; halving there would stall re-acquisition).
    """
    m_now = np.asarray(m_now, dtype=float).reshape(3)
    m_prev = state.prev_m if m_prev is None else np.asarray(m_prev, dtype=float).reshape(3)
    flipped = m_now * m_prev < 0
    lam = np.where(flipped, 0.5 * state.lam, state.mu * state.lam)
    lam = np.minimum(lam, state.lam_max)
    return replace(state, lam=lam, prev_m=m_now)


@dataclass
class BisectionTrace:
    """Pose-space bisection run: per-iteration magnitudes, signs and step norms."""

    converged: bool
    iterations: int
    poses: np.ndarray       # (T + 1, 3), includes the start pose
    lam_history: np.ndarray  # (T, 3)
    m_history: np.ndarray    # (T, 3)
    step_norms: np.ndarray   # (T,)


def simulate_bisection(
    target: np.ndarray,
    init: np.ndarray,
    lambda0: np.ndarray,
    mu: float,
    tol_frac: float = 1e-3,
    max_iter: int = 500,
) -> BisectionTrace:
    """Drive a pose directly toward a target with sign feedback and the
    bisection magnitude schedule; converged when |diag(lam) m| falls below
    tol_frac * |lambda0|.  Axis units are whatever the caller supplies.

    A zero per-axis error keeps the previous direction (a positioner cannot
    hold a pose exactly, and the sign estimator never reports a perfect tie),
    so the scheduler keeps hunting and the magnitude keeps bisecting; the
    first iteration has no previous direction and counts as no flip.
    """
    target = np.asarray(target, dtype=float).reshape(3)
    pose = np.asarray(init, dtype=float).reshape(3).copy()
    lam = np.asarray(lambda0, dtype=float).reshape(3).copy()
    threshold = tol_frac * float(np.linalg.norm(lam))

    poses = [pose.copy()]
    lam_hist, m_hist, norms = [], [], []
    converged = False
    iterations = max_iter
    prev_m: np.ndarray | None = None
    for t in range(1, max_iter + 1):
        m = np.sign(target - pose)
        m = np.where(m == 0.0, 1.0 if prev_m is None else prev_m, m)
        flipped = np.zeros(3, dtype=bool) if prev_m is None else m * prev_m < 0
        lam = np.where(flipped, 0.5 * lam, mu * lam)
        prev_m = m
        step = lam * m
        lam_hist.append(lam.copy())
        m_hist.append(m.copy())
        norms.append(float(np.linalg.norm(step)))
        if norms[-1] < threshold:
            converged = True
            iterations = t
            poses.append(pose.copy())
            break
        pose = pose + step
        poses.append(pose.copy())
    return BisectionTrace(
        converged=converged,
        iterations=iterations,
        poses=np.asarray(poses),
        lam_history=np.asarray(lam_hist),
        m_history=np.asarray(m_hist),
        step_norms=np.asarray(norms),
    )


def ball_to_json(ball: NavigationBall) -> dict:
    """{iso, ref:{theta,phi,area}, cur:{theta,phi,area}, goodness}; cur may be null."""

    def sic_json(s: Sic | None):
        if s is None:
            return None
        return {"theta": s.center_theta, "phi": s.center_phi, "area": s.area}

    return {
        "iso": ball.iso_value,
        "ref": sic_json(ball.reference),
        "cur": sic_json(ball.current),
        "goodness": ball.goodness,
    }


def _circle_points(sic: Sic, samples: int = 720) -> np.ndarray:
    """Visible 3-D points of the SIC circle (z >= 0 on the camera-facing side)."""
    c = sic.center_dir
    helper = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(c, helper)) > 0.999:
        helper = np.array([1.0, 0.0, 0.0])
    p = np.cross(c, helper)
    p /= np.linalg.norm(p)
    q = np.cross(c, p)
    psi = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
    sin_a = math.sqrt(max(1.0 - sic.cos_alpha**2, 0.0))
    pts = sic.cos_alpha * c[None, :] + sin_a * (
        np.cos(psi)[:, None] * p[None, :] + np.sin(psi)[:, None] * q[None, :]
    )
    return pts[pts[:, 2] >= 0.0]


def draw_ball_png(ball: NavigationBall, path) -> None:
    """Raster ball with the reference circle in blue and the current in red."""
    from PIL import Image

    data = ball.rendered.data
    peak = data.max() or 1.0
    gray = np.round(np.clip(data / peak, 0, 1) * 255).astype(np.uint8)
    rgb = np.stack([gray, gray, gray], axis=-1)
    res = gray.shape[0]

    def paint(sic: Sic | None, color):
        if sic is None:
            return
        pts = _circle_points(sic)
        if pts.size == 0:
            return
        all_pts = np.concatenate([pts, sic.center_dir[None, :]])
        cols = np.clip(((all_pts[:, 0] + 1.0) / 2.0 * (res - 1)).round().astype(int), 0, res - 1)
        rows = np.clip(((1.0 - all_pts[:, 1]) / 2.0 * (res - 1)).round().astype(int), 0, res - 1)
        rgb[rows, cols] = color

    paint(ball.reference, (40, 90, 255))
    paint(ball.current, (255, 50, 50))
    Image.fromarray(rgb, mode="RGB").save(path, format="PNG")
