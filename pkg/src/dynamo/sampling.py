"""Retrospective k-space undersampling masks.

Two schemes: pseudo-radial golden-angle rays rasterized onto the Cartesian
grid, and variable-density Cartesian (fully sampled low-frequency lines
plus random high-frequency lines).  The DC sample is forced on in every
frame for both schemes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = [
    "SamplingMask",
    "golden_radial_mask",
    "cartesian_vd_mask",
    "reduction_factor",
    "GOLDEN_ANGLE_DEG",
]

GOLDEN_ANGLE_DEG = 111.246117975


@dataclass(frozen=True)
class SamplingMask:
    mask: np.ndarray  # bool, (nx, ny, nt)
    scheme: str
    params: dict

    def __post_init__(self):
        m = self.mask
        if m.ndim != 3 or m.dtype != bool:
            raise DataError("mask must be a boolean (nx, ny, nt) tensor")
        if not m.any(axis=(0, 1)).all():
            raise DataError("every frame needs at least one sample")

    @property
    def shape(self):
        return self.mask.shape


def golden_radial_mask(nx: int, ny: int, nt: int, rays_per_frame: int) -> SamplingMask:
    """Golden-angle pseudo-radial mask.

    Ray m (counted globally across frames) gets angle
    ``m * 111.246117975 deg mod 180 deg``; each ray is walked in 0.5 px
    radius steps from -r_max to r_max about the grid center and the
    nearest grid sample is switched on.
    """
    if rays_per_frame < 1:
        raise DataError("rays_per_frame must be >= 1")
    mask = np.zeros((nx, ny, nt), dtype=bool)
    cx, cy = nx // 2, ny // 2
    r_max = 0.5 * float(max(nx, ny))
    radii = np.arange(-r_max, r_max + 0.25, 0.5)
    for t in range(nt):
        for k in range(rays_per_frame):
            m = t * rays_per_frame + k
            theta = np.deg2rad((m * GOLDEN_ANGLE_DEG) % 180.0)
            c, s = np.cos(theta), np.sin(theta)
            # snap each step to the single nearest pixel of the line in its
            # major-axis column, keeping the ray one pixel thin (Bresenham-like)
            if abs(c) >= abs(s):
                ix = np.rint(cx + radii * c).astype(int)
                iy = np.rint(cy + (ix - cx) * (s / c)).astype(int)
            else:
                iy = np.rint(cy + radii * s).astype(int)
                ix = np.rint(cx + (iy - cy) * (c / s)).astype(int)
            keep = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
            mask[ix[keep], iy[keep], t] = True
        mask[cx, cy, t] = True
    return SamplingMask(mask, "golden_radial", {"rays_per_frame": rays_per_frame})


def cartesian_vd_mask(
    nx: int,
    ny: int,
    nt: int,
    reduction: float,
    low_freq_lines: int,
    seed: int,
) -> SamplingMask:
    """Variable-density Cartesian mask.

    Per frame, the ``low_freq_lines`` phase-encode lines nearest DC are
    fully sampled; random high-frequency lines (fresh draws per frame)
    fill the budget ``round(nx*ny/reduction)``, the last line partially
    if needed.  Deterministic for a given seed.
    """
    if not reduction > 1:
        raise DataError("reduction must exceed 1")
    if low_freq_lines >= ny:
        raise DataError("low_freq_lines must be smaller than ny")
    budget = int(round(nx * ny / reduction))
    if low_freq_lines * nx > budget:
        raise DataError(
            f"low-frequency region ({low_freq_lines * nx} samples) exceeds the "
            f"per-frame budget ({budget})"
        )
    rng = np.random.default_rng(seed)
    cy = ny // 2
    order = np.argsort(np.abs(np.arange(ny) - cy), kind="stable")
    low = order[:low_freq_lines]
    high = np.setdiff1d(np.arange(ny), low)
    mask = np.zeros((nx, ny, nt), dtype=bool)
    for t in range(nt):
        mask[:, low, t] = True
        remaining = budget - low_freq_lines * nx
        lines = rng.permutation(high)
        for line in lines:
            if remaining <= 0:
                break
            if remaining >= nx:
                mask[:, line, t] = True
                remaining -= nx
            else:
                rows = rng.choice(nx, size=remaining, replace=False)
                mask[rows, line, t] = True
                remaining = 0
        mask[nx // 2, cy, t] = True
    return SamplingMask(
        mask,
        "cartesian_vd",
        {"reduction": reduction, "low_freq_lines": low_freq_lines, "seed": seed},
    )


def reduction_factor(mask) -> float:
    """Ratio of grid size to acquired sample count."""
    m = mask.mask if isinstance(mask, SamplingMask) else np.asarray(mask, dtype=bool)
    count = int(m.sum())
    if count == 0:
        raise DataError("mask has no samples")
    return float(m.size / count)
