"""Coarse-to-fine orchestration: alternate joint estimation and
motion-compensated refinement over a sweep of window scales."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .io import RunConfig
from .mc import mc_refine
from .motion import AffineMotionField, DenseMotionField
from .oflow import densify_motion, jpdal, upsample_motion
from .operators import WindowSpec, measure_op
from .pdal import SolveTrace

__all__ = ["ReconResult", "scale_schedule", "zero_fill", "mc_jpdal"]


@dataclass
class ReconResult:
    f_hat: np.ndarray
    motion: DenseMotionField
    traces: list  # one (jpdal_trace, mc_trace) pair per scale
    config: RunConfig
    schedule: list


def scale_schedule(config: RunConfig, nx: int, ny: int) -> list:
    """Scales swept coarse-to-fine, with j_coarse clamped so the coarse
    grid keeps at least 8x8 nodes on small images."""
    j_max = max(int(np.log2(min(nx, ny))) - 3, 0)
    j_coarse = config.j_coarse
    if j_coarse > j_max:
        warnings.warn(
            f"j_coarse={j_coarse} leaves fewer than 8x8 coarse nodes on a "
            f"{nx}x{ny} grid; clamping to {j_max}",
            stacklevel=2,
        )
        j_coarse = j_max
    j_coarse = max(j_coarse, config.j_fine)
    return list(range(j_coarse, config.j_fine - 1, -1))


def zero_fill(b: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Adjoint (zero-filled) reconstruction, the universal initializer."""
    return measure_op(mask).adjoint(b)


def mc_jpdal(
    b: np.ndarray,
    mask: np.ndarray,
    config: RunConfig,
    *,
    refresh_every: int = 20,
    wrap: bool = True,
    skip_mc: bool = False,
    keep_intermediates: bool = False,
) -> ReconResult:
    """Full two-stage multi-scale reconstruction.

    Starting from the zero-filled image, each scale runs the joint
    solve (warm-started from the previous scale's image and upsampled
    motion), densifies the estimated motion to the pixel grid and refines
    the image by motion compensation.  ``skip_mc`` yields the
    joint-estimation-only variant.
    """
    nx, ny, nt = mask.shape
    schedule = scale_schedule(config, nx, ny)
    step = 2 ** schedule[0]
    if nx % step or ny % step:
        raise DataError(f"extents ({nx}, {ny}) not divisible by 2**{schedule[0]}")

    f = zero_fill(b, mask)
    motion_field: AffineMotionField | None = None
    dense = DenseMotionField(
        np.zeros((nx, ny, nt)), np.zeros((nx, ny, nt)), magnitude_cap=np.inf
    )
    traces = []
    intermediates = {"zero_fill": f.copy()} if keep_intermediates else None

    for j in schedule:
        window = WindowSpec(config.spline_degree, j)
        warm = upsample_motion(motion_field, j) if motion_field is not None else None
        f, motion_field, jt = jpdal(
            b,
            mask,
            config.prior,
            f,
            window,
            (config.eta, config.tau, config.gamma),
            config,
            motion_init=warm,
            refresh_every=refresh_every,
            wrap=wrap,
        )
        dense = densify_motion(motion_field, config.spline_degree)
        if keep_intermediates:
            intermediates[f"jpdal_j{j}"] = f.copy()
        if skip_mc:
            mt = SolveTrace(stop_reason="skipped")
        else:
            f, mt = mc_refine(f, b, mask, dense, config.lam, config, wrap=wrap)
            if keep_intermediates:
                intermediates[f"mc_j{j}"] = f.copy()
        traces.append((jt, mt))

    result = ReconResult(f_hat=f, motion=dense, traces=traces, config=config,
                         schedule=schedule)
    if keep_intermediates:
        result.intermediates = intermediates
    return result
