"""Image-quality metrics for tactile reconstructions: CC, RE and SSIM."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.signal import convolve2d


@dataclass(frozen=True)
class MetricsReport:
    cc: float
    re: float
    ssim: float

    def as_dict(self) -> dict:
        return asdict(self)


def _check_shapes(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def correlation_coefficient(a, b) -> float:
    """Pearson correlation over flattened pixels; 0.0 when either image is
    constant (correlation is undefined there)."""
    a, b = _check_shapes(a, b)
    da = a.ravel() - a.mean()
    db = b.ravel() - b.mean()
    na = np.linalg.norm(da)
    nb = np.linalg.norm(db)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(da, db) / (na * nb))


def relative_error(est, gt) -> float:
    """Relative L2 error ||est - gt|| / ||gt||."""
    est, gt = _check_shapes(est, gt)
    norm_gt = np.linalg.norm(gt)
    if norm_gt == 0.0:
        raise ValueError("ground truth is identically zero")
    return float(np.linalg.norm(est - gt) / norm_gt)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    g /= g.sum()
    return np.outer(g, g)


_SSIM_WINDOW = _gaussian_window()
_SSIM_C1 = (0.01 * 1.0) ** 2
_SSIM_C2 = (0.03 * 1.0) ** 2


def ssim(est, gt) -> float:
    """Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), data range 1,
    averaged over fully valid windows."""
    est, gt = _check_shapes(est, gt)
    w = _SSIM_WINDOW
    mu1 = convolve2d(est, w, mode="valid")
    mu2 = convolve2d(gt, w, mode="valid")
    s11 = convolve2d(est * est, w, mode="valid") - mu1 * mu1
    s22 = convolve2d(gt * gt, w, mode="valid") - mu2 * mu2
    s12 = convolve2d(est * gt, w, mode="valid") - mu1 * mu2
    num = (2 * mu1 * mu2 + _SSIM_C1) * (2 * s12 + _SSIM_C2)
    den = (mu1 * mu1 + mu2 * mu2 + _SSIM_C1) * (s11 + s22 + _SSIM_C2)
    return float(np.mean(num / den))


def report(est, gt) -> MetricsReport:
    return MetricsReport(cc=correlation_coefficient(est, gt),
                         re=relative_error(est, gt),
                         ssim=ssim(est, gt))
