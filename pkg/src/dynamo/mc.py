"""Motion-compensated refinement.

Each frame is coupled to its (circularly) previous frame through a sparse
bilinear warp built from the dense motion field; the refinement problem
penalizes the l1 difference between each frame and its warped predecessor
on top of the usual data fit, and is solved with the same primal-dual
linesearch iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .errors import DataError
from .io import RunConfig
from .motion import DenseMotionField
from .operators import ArraySpec, LinearOperator, measure_op
from .pdal import SaddleProblem, SaddleTerm, solve
from .prox import project_linf_ball, prox_datafit_conj

__all__ = ["WarpOperator", "build_warp", "coupled_diff_op", "mc_refine"]


@dataclass(frozen=True)
class WarpOperator:
    """Sparse bilinear interpolation from frame ``source`` onto the pixel
    grid of frame ``target`` (four taps per target pixel; out-of-bounds
    taps dropped, so in-bounds weights sum to 1)."""

    matrix: scipy.sparse.csr_matrix
    source: int
    target: int

    def apply(self, frame: np.ndarray) -> np.ndarray:
        nx, ny = frame.shape
        return (self.matrix @ frame.reshape(-1, order="F")).reshape(nx, ny, order="F")

    def adjoint(self, frame: np.ndarray) -> np.ndarray:
        nx, ny = frame.shape
        return (self.matrix.T @ frame.reshape(-1, order="F")).reshape(nx, ny, order="F")


def _warp_matrix(u: np.ndarray, v: np.ndarray) -> scipy.sparse.csr_matrix:
    nx, ny = u.shape
    xg, yg = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    px = (xg - u).ravel(order="F")
    py = (yg - v).ravel(order="F")
    i0 = np.floor(px).astype(int)
    j0 = np.floor(py).astype(int)
    wx = px - i0
    wy = py - j0
    rows, cols, vals = [], [], []
    target = np.arange(nx * ny)
    for di, dj, w in (
        (0, 0, (1 - wx) * (1 - wy)),
        (1, 0, wx * (1 - wy)),
        (0, 1, (1 - wx) * wy),
        (1, 1, wx * wy),
    ):
        ii, jj = i0 + di, j0 + dj
        ok = (ii >= 0) & (ii < nx) & (jj >= 0) & (jj < ny) & (w != 0)
        rows.append(target[ok])
        cols.append(ii[ok] + nx * jj[ok])
        vals.append(w[ok])
    mat = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nx * ny, nx * ny),
    )
    return mat.tocsr()


def build_warp(motion: DenseMotionField) -> list:
    """One WarpOperator per frame: index t warps frame (t-1) mod nt onto
    frame t's grid by sampling it at ``x - d(x, t)``."""
    nx, ny, nt = motion.shape
    ops = []
    for t in range(nt):
        mat = _warp_matrix(motion.u[:, :, t], motion.v[:, :, t])
        ops.append(WarpOperator(matrix=mat, source=(t - 1) % nt, target=t))
    return ops


def coupled_diff_op(warps: list, nx: int, ny: int, nt: int, wrap: bool = True) -> LinearOperator:
    """Temporal coupling operator: output frame t is
    ``warp_t(f_{t-1}) - f_t`` (zero at t=0 when wrapping is off)."""
    if len(warps) != nt:
        raise DataError(f"need {nt} warp operators, got {len(warps)}")
    active = range(nt) if wrap else range(1, nt)
    spec = ArraySpec((nx, ny, nt))

    def apply(f):
        out = np.zeros((nx, ny, nt), dtype=np.complex128)
        for t in active:
            w = warps[t]
            out[:, :, t] = w.apply(f[:, :, w.source]) - f[:, :, t]
        return out

    def adjoint(z):
        out = np.zeros((nx, ny, nt), dtype=np.complex128)
        for t in active:
            w = warps[t]
            out[:, :, w.source] += w.adjoint(z[:, :, t])
            out[:, :, t] -= z[:, :, t]
        return out

    return LinearOperator(apply=apply, adjoint=adjoint, in_space=spec, out_space=spec,
                          norm_bound=2.0)


def mc_refine(
    f_init: np.ndarray,
    b: np.ndarray,
    mask: np.ndarray,
    motion: DenseMotionField,
    lam: float,
    params: RunConfig,
    *,
    wrap: bool = True,
):
    """Refine a reconstruction with motion-compensated temporal coupling.

    Solves ``min_f 0.5||A f - b||^2 + lam * sum_t ||M_{t-1} f_{t-1} - f_t||_1``
    warm-started at ``f_init``.  Returns ``(f, trace)``.
    """
    nx, ny, nt = f_init.shape
    if motion.shape != (nx, ny, nt):
        raise DataError(f"motion shape {motion.shape} != image shape {(nx, ny, nt)}")
    terms = [
        SaddleTerm(
            op=measure_op(mask),
            conj_prox=lambda z, s: prox_datafit_conj(z, s, b),
            cost=lambda w: 0.5 * float(np.vdot(w - b, w - b).real),
        )
    ]
    if lam > 0:
        dop = coupled_diff_op(build_warp(motion), nx, ny, nt, wrap=wrap)
        terms.append(
            SaddleTerm(
                op=dop,
                conj_prox=lambda z, s: project_linf_ball(z, lam),
                cost=lambda w: lam * float(np.abs(w).sum()),
            )
        )
    problem = SaddleProblem(terms=terms)
    f, _, trace = solve(problem, np.asarray(f_init, dtype=np.complex128), None, params)
    return f, trace
