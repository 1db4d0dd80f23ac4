"""Image similarity (MSE / PSNR / SSIM / MS-SSIM) and normal-map accuracy.

Both images are scaled onto [0, 255] by a shared peak (the larger of the two
masked maxima, i.e. the reference's max for a capture that is no brighter)
before MSE/PSNR/SSIM, so unitless linear renders behave like 8-bit captures
and every pairwise metric is symmetric.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve

from .core import GrayImage

PEAK = 255.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# canonical five-scale weights for MS-SSIM
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass(frozen=True)
class MetricReport:
    mse: float
    psnr: float
    ssim: float
    ms_ssim: float
    mae_normals: float | None = None

    def to_json(self) -> dict:
        d = {"mse": self.mse, "psnr": self.psnr, "ssim": self.ssim, "ms_ssim": self.ms_ssim}
        if self.mae_normals is not None:
            d["mae_normals_rad"] = self.mae_normals
        return d

    def to_json_str(self) -> str:
        return json.dumps(self.to_json())


def _check_pair(a: GrayImage, b: GrayImage) -> np.ndarray:
    if a.data.shape != b.data.shape:
        raise ValueError(f"image dimensions differ: {a.data.shape} vs {b.data.shape}")
    return a.mask & b.mask


def _scaled(a: GrayImage, b: GrayImage) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # shared peak keeps every pairwise metric symmetric; for a capture vs its
    # reference this is the reference's max whenever the capture is no brighter
    mask = _check_pair(a, b)
    peak = float(max(a.data[mask].max(), b.data[mask].max())) if np.any(mask) else 0.0
    if peak <= 0:
        peak = 1.0
    s = PEAK / peak
    return a.data * s, b.data * s, mask


def mse(a: GrayImage, b: GrayImage) -> float:
    """Mean squared difference over shared masked pixels, in 0..255 units."""
    sa, sb, mask = _scaled(a, b)
    if not np.any(mask):
        raise ValueError("no shared masked-in pixels")
    d = sa[mask] - sb[mask]
    return float(np.mean(d * d))


def psnr(a: GrayImage, b: GrayImage) -> float:
    """10 * log10(255^2 / mse); +inf for identical images."""
    return psnr_from_mse(mse(a, b))


def psnr_from_mse(m: float) -> float:
    if m == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / m)


def _gaussian_kernel2d(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def _ssim_maps(x: np.ndarray, y: np.ndarray, data_range: float) -> tuple[np.ndarray, np.ndarray]:
    """Full-size luminance*cs map and cs map (borders cropped by the caller)."""
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    win = _gaussian_kernel2d()
    mu_x = convolve(x, win, mode="reflect")
    mu_y = convolve(y, win, mode="reflect")
    sxx = convolve(x * x, win, mode="reflect") - mu_x**2
    syy = convolve(y * y, win, mode="reflect") - mu_y**2
    sxy = convolve(x * y, win, mode="reflect") - mu_x * mu_y
    cs = (2.0 * sxy + c2) / (sxx + syy + c2)
    lum = (2.0 * mu_x * mu_y + c1) / (mu_x**2 + mu_y**2 + c1)
    return lum * cs, cs


def _crop(m: np.ndarray, margin: int) -> np.ndarray:
    if margin <= 0 or min(m.shape) <= 2 * margin:
        return m
    return m[margin:-margin, margin:-margin]


def _masked_mean(m: np.ndarray, mask: np.ndarray) -> float:
    margin = SSIM_WINDOW // 2
    mc, kc = _crop(m, margin), _crop(mask, margin)
    if not np.any(kc):
        raise ValueError("no masked-in pixels after border crop")
    return float(mc[kc].mean())


def ssim(a: GrayImage, b: GrayImage) -> float:
    """Gaussian-window SSIM (11 taps, sigma 1.5, k1=.01, k2=.03), masked mean."""
    sa, sb, mask = _scaled(a, b)
    if min(sa.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} pixels per side")
    smap, _ = _ssim_maps(sa, sb, PEAK)
    return _masked_mean(smap, mask)


def _downsample2(x: np.ndarray) -> np.ndarray:
    # 2x2 average pooling with edge replication on odd sizes (ceil semantics:
    # a 161-pixel side fits five scales via 161 -> 81 -> 41 -> 21 -> 11)
    if x.shape[0] % 2:
        x = np.concatenate([x, x[-1:]], axis=0)
    if x.shape[1] % 2:
        x = np.concatenate([x, x[:, -1:]], axis=1)
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def ms_ssim(a: GrayImage, b: GrayImage, scales: int = 5) -> float:
    """Multi-scale SSIM with the canonical five weights.

    Images too small for the requested scale count fall back to fewer scales
    (weights renormalized) with a warning.  Negative per-scale means are
    clamped at zero before the weighted geometric product.
    """
    sa, sb, mask = _scaled(a, b)
    side = min(sa.shape)
    feasible = 1
    while feasible < scales and -(-side // 2 ** feasible) >= SSIM_WINDOW:
        feasible += 1
    if feasible < scales:
        warnings.warn(
            f"image side {side} supports only {feasible} of {scales} MS-SSIM scales",
            stacklevel=2,
        )
        scales = feasible
    weights = np.array(MS_SSIM_WEIGHTS[:scales])
    weights /= weights.sum()

    vals = []
    x, y, m = sa, sb, mask.astype(float)
    for level in range(scales):
        smap, cs = _ssim_maps(x, y, PEAK)
        use = cs if level < scales - 1 else smap
        vals.append(max(_masked_mean(use, m > 0.5), 0.0))
        if level < scales - 1:
            x, y, m = _downsample2(x), _downsample2(y), _downsample2(m)
    return float(np.prod(np.asarray(vals) ** weights))


def mean_angle_error(n1: np.ndarray, n2: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean arccos(n1 . n2) in radians over masked pixels of two unit-normal maps."""
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    if n1.shape != n2.shape:
        raise ValueError(f"normal map shapes differ: {n1.shape} vs {n2.shape}")
    dots = np.clip(np.einsum("...k,...k->...", n1, n2), -1.0, 1.0)
    if mask is not None:
        dots = dots[np.asarray(mask, dtype=bool)]
    if dots.size == 0:
        raise ValueError("no pixels to compare")
    return float(np.mean(np.arccos(dots)))


def compare(a: GrayImage, b: GrayImage, skip_ms: bool = False) -> MetricReport:
    """Full metric snapshot of `a` against reference `b`."""
    m = mse(a, b)
    return MetricReport(
        mse=m,
        psnr=psnr_from_mse(m),
        ssim=ssim(a, b),
        ms_ssim=float("nan") if skip_ms else ms_ssim(a, b),
    )
