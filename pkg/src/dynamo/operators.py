"""Linear operators for the saddle-point reconstruction problems.

Every operator is a forward/adjoint pair with declared input and output
spaces, so the same dot test certifies all of them.  Spaces are either a
single :class:`ArraySpec` or a tuple of them (the joint image+motion
variable), in which case vectors are :class:`~dynamo.blocks.BlockVector`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.fft
from scipy.interpolate import BSpline

from . import runtime
from .blocks import BlockVector, inner, norm
from .errors import DataError

__all__ = [
    "ArraySpec",
    "LinearOperator",
    "WindowSpec",
    "measure_op",
    "grad_op",
    "temporal_fft_op",
    "casorati_op",
    "window_avg_op",
    "pointwise_scale_op",
    "pick_block_op",
    "dot_test",
    "random_element",
    "power_iteration",
]


@dataclass(frozen=True)
class ArraySpec:
    """Shape and dtype of one array-valued block."""

    shape: tuple
    dtype: np.dtype = np.dtype(np.complex128)

    def zeros(self):
        return np.zeros(self.shape, dtype=self.dtype)


def _is_block(space) -> bool:
    return isinstance(space, tuple) and all(isinstance(s, ArraySpec) for s in space)


def space_zeros(space):
    if _is_block(space):
        return BlockVector(s.zeros() for s in space)
    return space.zeros()


def random_element(space, rng: np.random.Generator):
    """Standard-normal random element of a space (complex where declared)."""
    if _is_block(space):
        return BlockVector(random_element(s, rng) for s in space)
    x = rng.standard_normal(space.shape)
    if np.issubdtype(space.dtype, np.complexfloating):
        x = x + 1j * rng.standard_normal(space.shape)
    return x.astype(space.dtype, copy=False)


def _space_is_complex(space) -> bool:
    if _is_block(space):
        return all(_space_is_complex(s) for s in space)
    return np.issubdtype(space.dtype, np.complexfloating)


@dataclass(frozen=True)
class LinearOperator:
    """Forward/adjoint pair with shape metadata and a norm upper estimate."""

    apply: Callable
    adjoint: Callable
    in_space: object
    out_space: object
    norm_bound: float = np.inf

    @property
    def in_shape(self):
        if _is_block(self.in_space):
            return tuple(s.shape for s in self.in_space)
        return self.in_space.shape

    @property
    def out_shape(self):
        if _is_block(self.out_space):
            return tuple(s.shape for s in self.out_space)
        return self.out_space.shape


def dot_test(op: LinearOperator, seed: int = 0) -> float:
    """Relative adjoint-consistency residual on random vectors.

    Returns ``|<Ax, z> - <x, A*z>| / (|Ax||z| + tiny)``.  When either
    space contains a real-restricted block the comparison is on real
    parts (the operator is then only real-linear and the imaginary parts
    of the two pairings legitimately differ).
    """
    rng = np.random.default_rng(seed)
    x = random_element(op.in_space, rng)
    z = random_element(op.out_space, rng)
    ax = op.apply(x)
    asz = op.adjoint(z)
    s1 = inner(ax, z)
    s2 = inner(x, asz)
    if not (_space_is_complex(op.in_space) and _space_is_complex(op.out_space)):
        s1, s2 = s1.real, s2.real
    return abs(s1 - s2) / (norm(ax) * norm(z) + np.finfo(float).tiny)


def power_iteration(op: LinearOperator, iters: int = 50, seed: int = 0) -> float:
    """Estimate the operator norm ||A|| by power iteration on A*A."""
    rng = np.random.default_rng(seed)
    x = random_element(op.in_space, rng)
    s = 0.0
    for _ in range(iters):
        y = op.adjoint(op.apply(x))
        s = norm(y)
        if s == 0:
            return 0.0
        x = y * (1.0 / s)
    return float(np.sqrt(s))


# ---------------------------------------------------------------------------
# Fourier measurement
# ---------------------------------------------------------------------------


def _fft2c(f):
    k = scipy.fft.fft2(f, axes=(0, 1), norm="ortho", workers=runtime.get_workers())
    return scipy.fft.fftshift(k, axes=(0, 1))


def _ifft2c(k):
    k = scipy.fft.ifftshift(k, axes=(0, 1))
    return scipy.fft.ifft2(k, axes=(0, 1), norm="ortho", workers=runtime.get_workers())


def measure_op(mask: np.ndarray) -> LinearOperator:
    """Masked per-frame 2D Fourier measurement.

    The FFT is unitary and centered: the DC coefficient sits at
    ``(nx//2, ny//2)``, matching the mask convention.  The forward map
    returns the sampled coefficients concatenated frame by frame; the
    adjoint zero-fills and inverts, so with an all-true mask the operator
    is unitary.
    """
    mask = np.ascontiguousarray(mask.astype(bool))
    if mask.ndim != 3:
        raise DataError(f"mask must be (nx, ny, nt), got shape {mask.shape}")
    nx, ny, nt = mask.shape
    # frame-major sample order
    mask_t = np.moveaxis(mask, 2, 0)
    n_b = int(mask.sum())

    def apply(f):
        if f.shape != (nx, ny, nt):
            raise DataError(f"expected image shape {(nx, ny, nt)}, got {f.shape}")
        k = _fft2c(f)
        return np.moveaxis(k, 2, 0)[mask_t]

    def adjoint(b):
        if b.shape != (n_b,):
            raise DataError(f"expected {n_b} samples, got shape {b.shape}")
        k_t = np.zeros((nt, nx, ny), dtype=np.complex128)
        k_t[mask_t] = b
        return _ifft2c(np.moveaxis(k_t, 0, 2))

    return LinearOperator(
        apply=apply,
        adjoint=adjoint,
        in_space=ArraySpec((nx, ny, nt)),
        out_space=ArraySpec((n_b,)),
        norm_bound=1.0,
    )


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def grad_op(nx: int, ny: int, extra: tuple = (), dtype=np.complex128) -> LinearOperator:
    """Forward-difference spatial gradient with zero last row/column.

    Acts on arrays of shape ``(nx, ny, *extra)`` (trailing axes, e.g.
    time, are carried along untouched); the output stacks the x- and
    y-differences as a leading axis of size 2.  The adjoint is the
    matching negative divergence; ``norm_bound`` is the classic sqrt(8).
    """
    shape = (nx, ny) + tuple(extra)
    dt = np.dtype(dtype)

    def apply(a):
        g = np.zeros((2,) + shape, dtype=a.dtype)
        g[0, :-1] = a[1:] - a[:-1]
        g[1, :, :-1] = a[:, 1:] - a[:, :-1]
        return g

    def adjoint(z):
        out = np.zeros(shape, dtype=z.dtype)
        zx, zy = z[0], z[1]
        if nx > 1:
            out[0] -= zx[0]
            out[1:-1] += zx[:-2] - zx[1:-1]
            out[-1] += zx[-2]
        if ny > 1:
            out[:, 0] -= zy[:, 0]
            out[:, 1:-1] += zy[:, :-2] - zy[:, 1:-1]
            out[:, -1] += zy[:, -2]
        return out

    return LinearOperator(
        apply=apply,
        adjoint=adjoint,
        in_space=ArraySpec(shape, dt),
        out_space=ArraySpec((2,) + shape, dt),
        norm_bound=float(np.sqrt(8.0)),
    )


# ---------------------------------------------------------------------------
# Sparsifying transforms
# ---------------------------------------------------------------------------


def temporal_fft_op(nx: int, ny: int, nt: int) -> LinearOperator:
    """Unitary FFT along the time axis, per pixel."""

    def apply(f):
        return scipy.fft.fft(f, axis=2, norm="ortho", workers=runtime.get_workers())

    def adjoint(g):
        return scipy.fft.ifft(g, axis=2, norm="ortho", workers=runtime.get_workers())

    spec = ArraySpec((nx, ny, nt))
    return LinearOperator(apply=apply, adjoint=adjoint, in_space=spec, out_space=spec,
                          norm_bound=1.0)


def casorati_op(nx: int, ny: int, nt: int) -> LinearOperator:
    """Reshape to the (pixels x frames) matrix; column t is frame t, x fastest."""

    def apply(f):
        return f.reshape(nx * ny, nt, order="F")

    def adjoint(m):
        return m.reshape(nx, ny, nt, order="F")

    return LinearOperator(
        apply=apply,
        adjoint=adjoint,
        in_space=ArraySpec((nx, ny, nt)),
        out_space=ArraySpec((nx * ny, nt)),
        norm_bound=1.0,
    )


# ---------------------------------------------------------------------------
# B-spline windows
# ---------------------------------------------------------------------------


def bspline_samples(degree: int, x: np.ndarray) -> np.ndarray:
    """Samples of the centered symmetric B-spline of the given degree.

    Support edges get the symmetric (average of one-sided limits) value,
    which only matters for degree 0 where the box jumps.
    """
    x = np.asarray(x, dtype=float)
    half = (degree + 1) / 2.0
    if degree == 0:
        out = np.where(np.abs(x) < half, 1.0, 0.0)
        out = np.where(np.abs(x) == half, 0.5, out)
        return out
    knots = np.arange(degree + 2) - half
    basis = BSpline.basis_element(knots, extrapolate=False)
    out = basis(x)
    return np.nan_to_num(out, nan=0.0)


@dataclass(frozen=True)
class WindowSpec:
    """B-spline window: degree n, dyadic scale j.

    Taps are samples of the degree-n spline dilated by 2**j; per axis
    they sum to exactly 2**j (partition of unity of the shifted splines).
    """

    degree: int = 3
    scale: int = 0

    def taps(self) -> np.ndarray:
        step = 2 ** self.scale
        reach = int(np.ceil(step * (self.degree + 1) / 2.0))
        k = np.arange(-reach, reach + 1)
        t = bspline_samples(self.degree, k / step)
        # trim zero tails (degree-0 keeps its half-valued edges)
        nz = np.nonzero(t)[0]
        return t[nz[0] : nz[-1] + 1] if len(nz) else t

    def tap_sum_2d(self) -> float:
        s = float(self.taps().sum())
        return s * s


def _gather_axis(arr, taps, step, axis):
    """Correlate with ``taps`` (zero-padded) and keep every ``step``-th sample.

    Output index i reads input positions step*i + a - len(taps)//2.
    """
    a = np.moveaxis(arr, axis, 0)
    n = a.shape[0]
    m = n // step
    half = len(taps) // 2
    out = np.zeros((m,) + a.shape[1:], dtype=a.dtype)
    base = step * np.arange(m)
    for off, w in enumerate(taps):
        pos = base + off - half
        valid = (pos >= 0) & (pos < n)
        if valid.any():
            out[valid] += w * a[pos[valid]]
    return np.moveaxis(out, 0, axis)


def _scatter_axis(arr, taps, step, axis, n_out):
    """Exact transpose of :func:`_gather_axis`."""
    z = np.moveaxis(arr, axis, 0)
    m = z.shape[0]
    half = len(taps) // 2
    out = np.zeros((n_out,) + z.shape[1:], dtype=z.dtype)
    base = step * np.arange(m)
    for off, w in enumerate(taps):
        pos = base + off - half
        valid = (pos >= 0) & (pos < n_out)
        if valid.any():
            out[pos[valid]] += w * z[valid]
    return np.moveaxis(out, 0, axis)


def window_avg_op(window: WindowSpec, nx: int, ny: int, nt: int) -> LinearOperator:
    """Windowed average at scale j: correlate with the dilated spline
    stencil (separably, zero-padded) and decimate by 2**j in x and y.

    The adjoint zero-upsamples and correlates with the same stencil (it
    is symmetric), implemented as the exact transpose of the forward
    gather.
    """
    step = 2 ** window.scale
    if nx % step or ny % step:
        raise DataError(f"extents ({nx}, {ny}) not divisible by 2**{window.scale}")
    taps = window.taps()
    cx, cy = nx // step, ny // step

    def apply(f):
        return _gather_axis(_gather_axis(f, taps, step, 0), taps, step, 1)

    def adjoint(z):
        return _scatter_axis(_scatter_axis(z, taps, step, 1, ny), taps, step, 0, nx)

    bound = float(np.abs(taps).sum()) ** 2
    return LinearOperator(
        apply=apply,
        adjoint=adjoint,
        in_space=ArraySpec((nx, ny, nt)),
        out_space=ArraySpec((cx, cy, nt)),
        norm_bound=bound,
    )


# ---------------------------------------------------------------------------
# Pointwise scaling and block plumbing
# ---------------------------------------------------------------------------


def pointwise_scale_op(coefficients: np.ndarray) -> LinearOperator:
    """Elementwise multiplication by a fixed field; adjoint multiplies by
    its complex conjugate."""
    c = np.asarray(coefficients)
    if not np.all(np.isfinite(c.view(float) if np.iscomplexobj(c) else c)):
        raise DataError("pointwise coefficients must be finite")
    conj = np.conj(c)
    spec = ArraySpec(c.shape, np.result_type(c.dtype, np.complex128))

    def apply(x):
        if x.shape != c.shape:
            raise DataError(f"expected shape {c.shape}, got {x.shape}")
        return c * x

    def adjoint(z):
        return conj * z

    return LinearOperator(
        apply=apply,
        adjoint=adjoint,
        in_space=spec,
        out_space=spec,
        norm_bound=float(np.max(np.abs(c))) if c.size else 0.0,
    )


def pick_block_op(op: LinearOperator, index: int, joint_space: tuple) -> LinearOperator:
    """Lift an operator on one block into an operator on the joint space.

    The adjoint scatters into a BlockVector that is zero in every other
    block; real blocks receive the real part (they are real-restricted).
    """
    blocks = tuple(joint_space)

    def apply(y: BlockVector):
        return op.apply(y.parts[index])

    def adjoint(z):
        g = op.adjoint(z)
        if not np.issubdtype(blocks[index].dtype, np.complexfloating):
            g = np.real(g)
        out = [s.zeros() for s in blocks]
        out[index] = g
        return BlockVector(out)

    return LinearOperator(
        apply=apply,
        adjoint=adjoint,
        in_space=blocks,
        out_space=op.out_space,
        norm_bound=op.norm_bound,
    )
