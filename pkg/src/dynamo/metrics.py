"""Reconstruction quality metrics: RMSE and windowed SSIM.

RMSE compares complex values directly (the magnitude of the difference,
so phase errors count); SSIM compares magnitude images, with local
statistics over a uniform sliding window and stabilization constants
derived from the peak reference magnitude of the whole sequence.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import DataError

__all__ = ["MetricReport", "rmse", "ssim", "evaluate", "write_metrics_csv"]


def rmse(f_hat: np.ndarray, f_ref: np.ndarray) -> float:
    """Root mean squared magnitude error over all voxels."""
    if f_hat.shape != f_ref.shape:
        raise DataError(f"shape mismatch: {f_hat.shape} vs {f_ref.shape}")
    diff = np.abs(f_hat - f_ref)
    return float(np.sqrt(np.mean(diff * diff)))


def _as_frames(arr: np.ndarray) -> np.ndarray:
    a = np.abs(arr).astype(np.float64)
    return a[:, :, None] if a.ndim == 2 else a


def _ssim_frame(a, b, win, c1, c2, global_stats):
    if global_stats:
        mu_a, mu_b = a.mean(), b.mean()
        var_a, var_b = a.var(), b.var()
        cov = ((a - mu_a) * (b - mu_b)).mean()
        return float(
            ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
            / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
        )
    mu_a = uniform_filter(a, win)
    mu_b = uniform_filter(b, win)
    var_a = uniform_filter(a * a, win) - mu_a * mu_a
    var_b = uniform_filter(b * b, win) - mu_b * mu_b
    cov = uniform_filter(a * b, win) - mu_a * mu_b
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    # keep only windows fully inside the frame
    h = win // 2
    nx, ny = a.shape
    if nx > 2 * h and ny > 2 * h:
        ssim_map = ssim_map[h : nx - h, h : ny - h]
    return float(ssim_map.mean())


def _ssim_per_frame(f_hat, f_ref, window_size, k1, k2, global_stats):
    if f_hat.shape != f_ref.shape:
        raise DataError(f"shape mismatch: {f_hat.shape} vs {f_ref.shape}")
    if not global_stats and window_size % 2 == 0:
        raise DataError("window_size must be odd")
    a3, b3 = _as_frames(f_hat), _as_frames(f_ref)
    lum = float(b3.max())
    c1, c2 = (k1 * lum) ** 2, (k2 * lum) ** 2
    return [
        _ssim_frame(a3[:, :, t], b3[:, :, t], window_size, c1, c2, global_stats)
        for t in range(a3.shape[2])
    ]


def ssim(
    f_hat: np.ndarray,
    f_ref: np.ndarray,
    window_size: int = 7,
    k1: float = 0.01,
    k2: float = 0.03,
    global_stats: bool = False,
) -> float:
    """Mean structural similarity of the magnitude images.

    The local SSIM map (uniform window, fully interior windows only) is
    averaged per frame, then over frames.  ``global_stats`` replaces the
    sliding window with whole-frame statistics.
    """
    return float(np.mean(_ssim_per_frame(f_hat, f_ref, window_size, k1, k2, global_stats)))


@dataclass(frozen=True)
class MetricReport:
    frame_rmse: list
    frame_ssim: list
    total_rmse: float
    mean_ssim: float


def evaluate(
    f_hat: np.ndarray,
    f_ref: np.ndarray,
    window_size: int = 7,
    global_stats: bool = False,
) -> MetricReport:
    fr = [rmse(f_hat[:, :, t], f_ref[:, :, t]) for t in range(f_hat.shape[2])]
    fs = _ssim_per_frame(f_hat, f_ref, window_size, 0.01, 0.03, global_stats)
    return MetricReport(
        frame_rmse=fr,
        frame_ssim=fs,
        total_rmse=rmse(f_hat, f_ref),
        mean_ssim=float(np.mean(fs)),
    )


def write_metrics_csv(report: MetricReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "rmse", "ssim"])
        for t, (r, s) in enumerate(zip(report.frame_rmse, report.frame_ssim)):
            writer.writerow([t, f"{r:.10g}", f"{s:.10g}"])
        writer.writerow(["all", f"{report.total_rmse:.10g}", f"{report.mean_ssim:.10g}"])
