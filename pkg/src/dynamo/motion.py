"""Motion-field containers shared by the flow, phantom and warp modules."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = ["AffineMotionField", "DenseMotionField"]


@dataclass(frozen=True)
class AffineMotionField:
    """Six local-affine parameter fields on the scale-j coarse grid.

    ``u = u0 + u1*(x-x0) + u2*(y-y0)`` around each window center, likewise
    v; offsets are in pixels of the fine grid.  All fields are real.
    """

    u0: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    scale: int

    def __post_init__(self):
        ref = self.u0.shape
        for name in ("u0", "u1", "u2", "v0", "v1", "v2"):
            arr = getattr(self, name)
            if arr.shape != ref:
                raise DataError(f"{name} shape {arr.shape} != {ref}")
            if np.iscomplexobj(arr):
                raise DataError(f"{name} must be real-valued")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite entries")

    @property
    def grid_shape(self):
        return self.u0.shape

    @classmethod
    def zeros(cls, cx: int, cy: int, nt: int, scale: int) -> "AffineMotionField":
        z = lambda: np.zeros((cx, cy, nt))
        return cls(z(), z(), z(), z(), z(), z(), scale)

    def params(self):
        return (self.u0, self.u1, self.u2, self.v0, self.v1, self.v2)


@dataclass(frozen=True)
class DenseMotionField:
    """Per-pixel displacement of frame t relative to its temporal
    predecessor (circular pairing, frame 0 with the last frame)."""

    u: np.ndarray
    v: np.ndarray
    magnitude_cap: float = 10.0

    def __post_init__(self):
        if self.u.shape != self.v.shape:
            raise DataError(f"u shape {self.u.shape} != v shape {self.v.shape}")
        if np.iscomplexobj(self.u) or np.iscomplexobj(self.v):
            raise DataError("motion components must be real-valued")
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise DataError("motion field contains non-finite entries")
        peak = float(np.sqrt(self.u**2 + self.v**2).max()) if self.u.size else 0.0
        if peak > self.magnitude_cap:
            warnings.warn(
                f"motion magnitude {peak:.2f} px exceeds cap {self.magnitude_cap} px",
                stacklevel=2,
            )

    @property
    def shape(self):
        return self.u.shape

    def to_tensor(self) -> np.ndarray:
        """Stack (u, v) into one float32 tensor for the file container."""
        return np.stack([self.u, self.v], axis=-1).astype(np.float32)

    @classmethod
    def from_tensor(cls, arr: np.ndarray, magnitude_cap: float = np.inf) -> "DenseMotionField":
        if arr.ndim != 4 or arr.shape[-1] != 2:
            raise DataError(f"motion tensor must be (nx, ny, nt, 2), got {arr.shape}")
        u = np.ascontiguousarray(arr[..., 0], dtype=np.float64)
        v = np.ascontiguousarray(arr[..., 1], dtype=np.float64)
        return cls(u, v, magnitude_cap=magnitude_cap)
