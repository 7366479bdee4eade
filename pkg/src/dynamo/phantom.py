"""Synthetic dynamic phantoms with analytic ground-truth motion.

Frames render ellipses under per-ellipse affine trajectories (translation,
rotation, isotropic scaling about the ellipse center).  Edges are
anti-aliased through a signed-distance coverage estimate so sub-pixel
motion produces smooth intensity changes, which keeps optical-flow
estimation well posed.

The returned ground-truth field stores, at every pixel of frame t, the
displacement of the material point relative to the temporally previous
frame (circular pairing: frame 0 refers back to the last frame).  For a
trajectory with rotation rate w and growth k per frame this is

    d(x, t) = c_t - c_{t-1} + k R(w) (x - c_{t-1}) - (x - c_{t-1})

with c_t the ellipse center at frame t.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .motion import DenseMotionField

__all__ = [
    "MotionLaw",
    "Ellipse",
    "PhantomSpec",
    "generate_phantom",
    "object_mask",
    "translating_spec",
    "rotating_spec",
]


@dataclass(frozen=True)
class MotionLaw:
    """Affine trajectory: translation px/frame, rotation rad/frame,
    relative growth per frame.

    Rotation and growth act about ``pivot`` (the ellipse's own initial
    center when None), so several ellipses sharing a pivot move rigidly
    together.
    """

    translate: tuple = (0.0, 0.0)
    rotate: float = 0.0
    scale: float = 0.0
    pivot: tuple | None = None


@dataclass(frozen=True)
class Ellipse:
    center: tuple
    semi_axes: tuple
    angle: float = 0.0
    intensity: complex = 1.0 + 0.0j
    motion: MotionLaw = field(default_factory=MotionLaw)


@dataclass(frozen=True)
class PhantomSpec:
    nx: int
    ny: int
    nt: int
    ellipses: tuple
    noise_sigma: float = 0.0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nt) < 1:
            raise DataError("phantom extents must be positive")
        if self.noise_sigma < 0:
            raise DataError("noise_sigma must be nonnegative")

    @classmethod
    def from_json(cls, text: str) -> "PhantomSpec":
        d = json.loads(text)
        ellipses = tuple(
            Ellipse(
                center=tuple(e["center"]),
                semi_axes=tuple(e["semi_axes"]),
                angle=float(e.get("angle", 0.0)),
                intensity=complex(e.get("intensity", 1.0)),
                motion=MotionLaw(
                    translate=tuple(e.get("translate", (0.0, 0.0))),
                    rotate=float(e.get("rotate", 0.0)),
                    scale=float(e.get("scale", 0.0)),
                    pivot=tuple(e["pivot"]) if "pivot" in e else None,
                ),
            )
            for e in d["ellipses"]
        )
        return cls(
            nx=int(d["nx"]),
            ny=int(d["ny"]),
            nt=int(d["nt"]),
            ellipses=ellipses,
            noise_sigma=float(d.get("noise_sigma", 0.0)),
        )


def _pose(e: Ellipse, t: float):
    """Center, angle and semi-axes of ellipse ``e`` at frame t.

    The material map is ``x -> pivot + vt + k^t R(wt) (x - pivot)`` with
    v the translation, w the rotation rate and k the growth factor.
    """
    m = e.motion
    ox, oy = m.pivot if m.pivot is not None else e.center
    growth = (1.0 + m.scale) ** t
    w = t * m.rotate
    ca, sa = np.cos(w), np.sin(w)
    rx, ry = e.center[0] - ox, e.center[1] - oy
    cx = ox + t * m.translate[0] + growth * (ca * rx - sa * ry)
    cy = oy + t * m.translate[1] + growth * (sa * rx + ca * ry)
    ang = e.angle + w
    return (cx, cy), ang, (e.semi_axes[0] * growth, e.semi_axes[1] * growth)


def _coverage(e: Ellipse, t: int, xg, yg):
    """Approximate per-pixel coverage fraction at frame t (anti-aliased)."""
    (cx, cy), ang, (a, b) = _pose(e, t)
    dx, dy = xg - cx, yg - cy
    ca, sa = np.cos(ang), np.sin(ang)
    mx = ca * dx + sa * dy
    my = -sa * dx + ca * dy
    rho = np.hypot(mx / a, my / b)
    grad = np.hypot(mx / a**2, my / b**2) / np.maximum(rho, 1e-12)
    sdist = (rho - 1.0) / np.maximum(grad, 1e-12)
    return np.clip(0.5 - sdist, 0.0, 1.0)


def _check_in_fov(spec: PhantomSpec):
    for idx, e in enumerate(spec.ellipses):
        for t in range(spec.nt):
            (cx, cy), ang, (a, b) = _pose(e, t)
            # tight bounding box of the rotated ellipse, plus the AA margin
            bx = np.hypot(a * np.cos(ang), b * np.sin(ang)) + 0.5
            by = np.hypot(a * np.sin(ang), b * np.cos(ang)) + 0.5
            if cx - bx < 0 or cx + bx > spec.nx - 1 or cy - by < 0 or cy + by > spec.ny - 1:
                raise DataError(
                    f"ellipse {idx} leaves the field of view at frame {t}"
                )


def _displacement(e: Ellipse, t: int, nt: int, xg, yg):
    """Ground-truth displacement of pixel positions at frame t w.r.t. the
    (circularly) previous frame, under this ellipse's trajectory."""
    s = (t - 1) % nt
    dt = t - s  # 1 except at the wrap frame, where it is 1 - nt
    m = e.motion
    ox, oy = m.pivot if m.pivot is not None else e.center
    w = dt * m.rotate
    k = (1.0 + m.scale) ** dt
    ca, sa = np.cos(w), np.sin(w)
    # offsets from the pivot's position at the source frame
    rx = xg - (ox + s * m.translate[0])
    ry = yg - (oy + s * m.translate[1])
    du = dt * m.translate[0] + k * (ca * rx - sa * ry) - rx
    dv = dt * m.translate[1] + k * (sa * rx + ca * ry) - ry
    return du, dv


def generate_phantom(spec: PhantomSpec, seed: int = 0):
    """Render the phantom; returns ``(frames, true_motion)``.

    Frames are complex128 of shape (nx, ny, nt).  Where ellipses overlap,
    intensities add and the last-listed ellipse owns the motion ground
    truth at that pixel; pixels outside every ellipse carry zero motion.
    """
    _check_in_fov(spec)
    xg, yg = np.meshgrid(
        np.arange(spec.nx, dtype=float), np.arange(spec.ny, dtype=float), indexing="ij"
    )
    frames = np.zeros((spec.nx, spec.ny, spec.nt), dtype=np.complex128)
    u = np.zeros((spec.nx, spec.ny, spec.nt))
    v = np.zeros((spec.nx, spec.ny, spec.nt))
    for t in range(spec.nt):
        for e in spec.ellipses:
            cov = _coverage(e, t, xg, yg)
            frames[:, :, t] += complex(e.intensity) * cov
            owns = cov > 0.5
            if owns.any():
                du, dv = _displacement(e, t, spec.nt, xg, yg)
                u[owns, t] = du[owns]
                v[owns, t] = dv[owns]
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(seed)
        scale = spec.noise_sigma / np.sqrt(2.0)
        frames = frames + scale * (
            rng.standard_normal(frames.shape) + 1j * rng.standard_normal(frames.shape)
        )
    return frames, DenseMotionField(u, v, magnitude_cap=np.inf)


def object_mask(spec: PhantomSpec, threshold: float = 0.5) -> np.ndarray:
    """Boolean (nx, ny, nt) mask of pixels covered by any ellipse."""
    xg, yg = np.meshgrid(
        np.arange(spec.nx, dtype=float), np.arange(spec.ny, dtype=float), indexing="ij"
    )
    mask = np.zeros((spec.nx, spec.ny, spec.nt), dtype=bool)
    for t in range(spec.nt):
        for e in spec.ellipses:
            mask[:, :, t] |= _coverage(e, t, xg, yg) > threshold
    return mask


def translating_spec(
    nx: int = 64,
    ny: int = 64,
    nt: int = 16,
    velocity: tuple = (0.5, 0.0),
    noise_sigma: float = 0.0,
) -> PhantomSpec:
    """Textured body translating rigidly: a large ellipse carrying two
    brighter internal features, all sharing one velocity."""
    law = MotionLaw(translate=velocity)
    sx = nx / 2.0 - velocity[0] * (nt - 1) / 2.0
    sy = ny / 2.0 - velocity[1] * (nt - 1) / 2.0
    body = Ellipse(
        center=(sx, sy),
        semi_axes=(nx * 0.30, ny * 0.34),
        angle=0.2,
        intensity=0.5 + 0.0j,
        motion=law,
    )
    blobs = (
        Ellipse(
            center=(sx - nx * 0.10, sy - ny * 0.08),
            semi_axes=(nx * 0.08, ny * 0.11),
            angle=-0.4,
            intensity=0.5 + 0.0j,
            motion=law,
        ),
        Ellipse(
            center=(sx + nx * 0.09, sy + ny * 0.10),
            semi_axes=(nx * 0.10, ny * 0.07),
            angle=0.9,
            intensity=0.3 + 0.0j,
            motion=law,
        ),
    )
    return PhantomSpec(nx, ny, nt, (body,) + blobs, noise_sigma)


def rotating_spec(
    nx: int = 64,
    ny: int = 64,
    nt: int = 16,
    rate: float = 0.05,
    noise_sigma: float = 0.0,
) -> PhantomSpec:
    """Textured body rotating rigidly about the image center."""
    pivot = (nx / 2.0, ny / 2.0)
    law = MotionLaw(rotate=rate, pivot=pivot)
    body = Ellipse(
        center=pivot,
        semi_axes=(nx * 0.32, ny * 0.24),
        angle=0.2,
        intensity=0.5 + 0.0j,
        motion=law,
    )
    blobs = (
        Ellipse(
            center=(nx * 0.38, ny * 0.44),
            semi_axes=(nx * 0.09, ny * 0.06),
            angle=0.7,
            intensity=0.5 + 0.0j,
            motion=law,
        ),
        Ellipse(
            center=(nx * 0.60, ny * 0.58),
            semi_axes=(nx * 0.06, ny * 0.09),
            angle=-0.3,
            intensity=0.3 + 0.0j,
            motion=law,
        ),
    )
    return PhantomSpec(nx, ny, nt, (body,) + blobs, noise_sigma)
