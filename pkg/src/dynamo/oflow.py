"""Joint reconstruction and local-affine motion estimation at one scale.

The joint variable stacks the complex image sequence with six real affine
parameter fields living on the scale-j coarse grid.  The data term, the
image prior, the windowed optical-flow constraint and per-parameter-field
total variation each become one term of a saddle problem solved by the
linesearch primal-dual iteration.  The temporally shifted reference
sequence (and with it all windowed flow coefficients) is refreshed from
the current image estimate every few iterations, keeping each inner solve
convex while the alternation tracks the nonconvex joint objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import BlockVector
from .errors import DataError
from .io import RunConfig
from .motion import AffineMotionField, DenseMotionField
from .operators import (
    ArraySpec,
    LinearOperator,
    WindowSpec,
    _gather_axis,
    bspline_samples,
    casorati_op,
    grad_op,
    measure_op,
    pick_block_op,
    pointwise_scale_op,  # noqa: F401  (re-exported building block)
    temporal_fft_op,
    window_avg_op,
)
from .pdal import SaddleProblem, SaddleTerm, SolveTrace, solve
from .prox import project_linf_ball, prox_datafit_conj, svt

__all__ = [
    "OfCoefficients",
    "JointScaling",
    "shift_sequence",
    "of_coefficients",
    "of_constraint_op",
    "joint_space",
    "assemble_joint",
    "jpdal",
    "densify_motion",
    "upsample_motion",
]


def shift_sequence(f: np.ndarray) -> np.ndarray:
    """Circular forward temporal shift by one frame: frame t becomes the
    original frame t-1, frame 0 the original last frame."""
    if f.ndim != 3 or f.shape[2] < 2:
        raise DataError("need an (nx, ny, nt) sequence with nt >= 2")
    return np.roll(f, 1, axis=2)


def central_diff(f: np.ndarray, axis: int) -> np.ndarray:
    """Central differences with replicated boundary."""
    a = np.moveaxis(f, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - a[:-2]) / 2.0
    out[0] = (a[1] - a[0]) / 2.0
    out[-1] = (a[-1] - a[-2]) / 2.0
    return np.moveaxis(out, 0, axis)


@dataclass(frozen=True)
class OfCoefficients:
    """Windowed flow coefficients at scale j.

    ``gx`` multiplies u0, ``gx_mx`` (x-moment of the x-derivative,
    window-centered pixel offsets) multiplies u1, ``gx_my`` u2; the ``gy``
    family likewise for v0..v2.  ``ref`` is the windowed average of the
    shifted sequence itself, the offset of the flow residual.
    """

    gx: np.ndarray
    gx_mx: np.ndarray
    gx_my: np.ndarray
    gy: np.ndarray
    gy_mx: np.ndarray
    gy_my: np.ndarray
    ref: np.ndarray

    def fields(self):
        return (self.gx, self.gx_mx, self.gx_my, self.gy, self.gy_mx, self.gy_my)


def of_coefficients(fbar: np.ndarray, window: WindowSpec) -> OfCoefficients:
    """Window-average the shifted sequence, its spatial derivatives and
    their window-centered first moments down to the scale-j grid."""
    step = 2 ** window.scale
    nx, ny, _ = fbar.shape
    if nx % step or ny % step:
        raise DataError(f"extents ({nx}, {ny}) not divisible by 2**{window.scale}")
    taps = window.taps()
    moment = taps * (np.arange(len(taps)) - len(taps) // 2)

    def avg(img, tx, ty):
        return _gather_axis(_gather_axis(img, tx, step, 0), ty, step, 1)

    gx_img = central_diff(fbar, 0)
    gy_img = central_diff(fbar, 1)
    return OfCoefficients(
        gx=avg(gx_img, taps, taps),
        gx_mx=avg(gx_img, moment, taps),
        gx_my=avg(gx_img, taps, moment),
        gy=avg(gy_img, taps, taps),
        gy_mx=avg(gy_img, moment, taps),
        gy_my=avg(gy_img, taps, moment),
        ref=avg(fbar, taps, taps),
    )


def joint_space(nx: int, ny: int, nt: int, scale: int) -> tuple:
    """Block layout of the joint variable: complex image + six real
    affine parameter fields on the coarse grid."""
    step = 2 ** scale
    coarse = (nx // step, ny // step, nt)
    image = ArraySpec((nx, ny, nt), np.dtype(np.complex128))
    param = ArraySpec(coarse, np.dtype(np.float64))
    return (image,) + (param,) * 6


def _flow_operator(wop: LinearOperator, row_scale: float, fields: tuple,
                   space: tuple, wrap: bool) -> LinearOperator:
    """Flow-residual map ``y -> row_scale * W f + sum_p fields[p] * theta_p``.

    The adjoint scatters through the window transpose into the image
    block and through conjugated pointwise products into the parameter
    blocks, whose imaginary parts are discarded (parameters are real).
    Without circular wrapping the frame-0 rows are dropped (zeroed).
    """
    conj_fields = tuple(np.conj(c) for c in fields)
    if fields[0].shape != wop.out_space.shape:
        raise DataError("coefficient grid does not match the window scale")

    def apply(y: BlockVector):
        out = row_scale * wop.apply(y.parts[0])
        for c, p in zip(fields, y.parts[1:]):
            out = out + c * p
        if not wrap:
            out[:, :, 0] = 0
        return out

    def adjoint(z):
        if not wrap:
            z = z.copy()
            z[:, :, 0] = 0
        parts = [row_scale * wop.adjoint(z)]
        parts += [np.real(cc * z) for cc in conj_fields]
        return BlockVector(parts)

    bound = row_scale * wop.norm_bound + sum(float(np.max(np.abs(c))) for c in fields)
    return LinearOperator(
        apply=apply,
        adjoint=adjoint,
        in_space=space,
        out_space=wop.out_space,
        norm_bound=bound,
    )


def of_constraint_op(
    coeffs: OfCoefficients,
    window: WindowSpec,
    nx: int,
    ny: int,
    nt: int,
    wrap: bool = True,
) -> LinearOperator:
    """Linear map from the joint variable to the windowed flow residual
    (before subtracting the reference offset), in pixel units."""
    space = joint_space(nx, ny, nt, window.scale)
    wop = window_avg_op(window, nx, ny, nt)
    return _flow_operator(wop, 1.0, coeffs.fields(), space, wrap)


def moment_unit(window: WindowSpec) -> float:
    """Half-width of the window support in pixels.

    The affine moment offsets are measured in this unit inside the joint
    solve, which makes all six parameter fields pixel-valued (a moment
    parameter is the displacement it contributes at the window edge).
    Only then is one smoothness weight across the six fields meaningful;
    with raw pixel offsets the moment columns dwarf the offset columns
    and the smoother prefers unphysical moment encodings of the motion.
    """
    return 2 ** window.scale * (window.degree + 1) / 2.0


def _normalized_fields(coeffs: OfCoefficients, window: WindowSpec) -> tuple:
    h = moment_unit(window)
    return (
        coeffs.gx,
        coeffs.gx_mx / h,
        coeffs.gx_my / h,
        coeffs.gy,
        coeffs.gy_mx / h,
        coeffs.gy_my / h,
    )


@dataclass(frozen=True)
class JointScaling:
    """Exact change of variables for the joint problem.

    The flow row is divided by the window mass ``nu`` and each parameter
    block p is replaced by ``kappa_p * theta_p``, with the l1 weights
    adjusted so the objective value is unchanged.  This balances the
    column norms the single step size of the solver has to serve; without
    it the motion blocks are orders of magnitude less mobile than the
    image and converge impractically slowly.  Solutions are mapped back,
    so the reparametrization is invisible outside the solver.
    """

    nu: float
    kappa: tuple

    @classmethod
    def identity(cls) -> "JointScaling":
        return cls(nu=1.0, kappa=(1.0,) * 6)

    @classmethod
    def from_coefficients(cls, coeffs: OfCoefficients, window: WindowSpec) -> "JointScaling":
        nu = window.tap_sum_2d()
        kappa = tuple(
            max(float(np.max(np.abs(c))) / nu, 1e-8)
            for c in _normalized_fields(coeffs, window)
        )
        return cls(nu=nu, kappa=kappa)

    def scale_y(self, y: BlockVector) -> BlockVector:
        return BlockVector([y.parts[0]] + [k * p for k, p in zip(self.kappa, y.parts[1:])])

    def unscale_y(self, y: BlockVector) -> BlockVector:
        return BlockVector([y.parts[0]] + [p / k for k, p in zip(self.kappa, y.parts[1:])])


def _l1(x) -> float:
    return float(np.abs(x).sum())


def _prior_terms(prior: str, eta: float, nx: int, ny: int, nt: int, space: tuple):
    """One saddle term per elementary prior; combined priors contribute
    one term each (sharing the weight eta)."""
    if prior not in ("l1", "tv", "low_rank", "l1_tv", "lr_l1"):
        raise DataError(f"unknown prior {prior!r}")
    if eta == 0:
        return []
    terms = []

    def linf_term(op):
        return SaddleTerm(
            op=pick_block_op(op, 0, space),
            conj_prox=lambda z, s: project_linf_ball(z, eta),
            cost=lambda w: eta * _l1(w),
        )

    if prior in ("l1", "l1_tv", "lr_l1"):
        terms.append(linf_term(temporal_fft_op(nx, ny, nt)))
    if prior in ("tv", "l1_tv"):
        terms.append(linf_term(grad_op(nx, ny, (nt,))))
    if prior in ("low_rank", "lr_l1"):
        cas = pick_block_op(casorati_op(nx, ny, nt), 0, space)
        terms.append(
            SaddleTerm(
                op=cas,
                conj_prox=lambda z, s: z - s * svt(z / s, eta / s),
                cost=lambda w: eta * float(np.linalg.svd(w, compute_uv=False).sum()),
            )
        )
    return terms


def assemble_joint(
    b: np.ndarray,
    mask: np.ndarray,
    prior: str,
    fbar: np.ndarray,
    window: WindowSpec,
    weights: tuple,
    wrap: bool = True,
    scaling: JointScaling | None = None,
    motion_smoother: str = "tv",
) -> SaddleProblem:
    """Build the joint saddle problem for a fixed shifted reference.

    ``weights`` is (eta, tau, gamma).  Terms with zero weight are
    omitted; they would be exact no-ops (their dual projection radius is
    zero) but cost operator applications.  With a ``scaling`` the problem
    is expressed in the scaled variables (same objective, better
    conditioned); pass None for the plain pixel-unit form.
    """
    eta, tau, gamma = weights
    if min(eta, tau, gamma) < 0:
        raise DataError("weights must be nonnegative")
    if motion_smoother not in ("tv", "l2"):
        raise DataError(f"unknown motion smoother {motion_smoother!r}")
    sc = scaling if scaling is not None else JointScaling.identity()
    nx, ny, nt = fbar.shape
    space = joint_space(nx, ny, nt, window.scale)

    aop = pick_block_op(measure_op(mask), 0, space)
    terms = [
        SaddleTerm(
            op=aop,
            conj_prox=lambda z, s: prox_datafit_conj(z, s, b),
            cost=lambda w: 0.5 * float(np.vdot(w - b, w - b).real),
        )
    ]
    terms += _prior_terms(prior, eta, nx, ny, nt, space)

    if tau > 0:
        coeffs = of_coefficients(fbar, window)
        wop = window_avg_op(window, nx, ny, nt)
        fields = tuple(
            c / (sc.nu * k) for c, k in zip(_normalized_fields(coeffs, window), sc.kappa)
        )
        ref = coeffs.ref / sc.nu
        if not wrap:
            ref = ref.copy()
            ref[:, :, 0] = 0
        tau_s = tau * sc.nu
        terms.append(
            SaddleTerm(
                op=_flow_operator(wop, 1.0 / sc.nu, fields, space, wrap),
                conj_prox=lambda z, s: project_linf_ball(z - s * ref, tau_s),
                cost=lambda w: tau_s * _l1(w - ref),
            )
        )

    if gamma > 0:
        step = 2 ** window.scale
        cx, cy = nx // step, ny // step
        for i in range(6):
            gop = pick_block_op(
                grad_op(cx, cy, (nt,), dtype=np.float64), 1 + i, space
            )
            gamma_s = gamma / sc.kappa[i]
            if motion_smoother == "tv":
                terms.append(
                    SaddleTerm(
                        op=gop,
                        conj_prox=lambda z, s, g=gamma_s: project_linf_ball(z, g),
                        cost=lambda w, g=gamma_s: g * _l1(w),
                    )
                )
            else:
                # quadratic smoother g(w) = g*||w||^2, dualized the same way
                terms.append(
                    SaddleTerm(
                        op=gop,
                        conj_prox=lambda z, s, g=gamma_s: z / (1.0 + s / (2.0 * g)),
                        cost=lambda w, g=gamma_s: g * float(np.sum(w * w)),
                    )
                )
    return SaddleProblem(terms=terms)


def _dual_scales(prior: str, weights: tuple, scaling: JointScaling) -> list:
    """Factor mapping persistent pixel-unit duals to scaled-problem duals,
    one entry per term of :func:`assemble_joint`."""
    eta, tau, gamma = weights
    scales = [1.0]  # data fit
    if eta > 0:
        n_prior = {"l1": 1, "tv": 1, "low_rank": 1, "l1_tv": 2, "lr_l1": 2}[prior]
        scales += [1.0] * n_prior
    if tau > 0:
        scales.append(scaling.nu)
    if gamma > 0:
        scales += [1.0 / k for k in scaling.kappa]
    return scales


def jpdal(
    b: np.ndarray,
    mask: np.ndarray,
    prior: str,
    f_init: np.ndarray,
    window: WindowSpec,
    weights: tuple,
    params: RunConfig,
    *,
    motion_init: AffineMotionField | None = None,
    refresh_every: int = 20,
    wrap: bool = True,
    motion_smoother: str = "tv",
    growth_cap: float = 1.05,
):
    """Jointly reconstruct the sequence and estimate scale-j motion.

    Runs the primal-dual solver in warm-started chunks of
    ``refresh_every`` iterations, refreshing the shifted reference (and
    the flow coefficients with it) from the current estimate between
    chunks.  Each chunk is solved in the balanced variables of
    :class:`JointScaling`; the persistent state stays in pixel units.
    Stops when a refresh no longer changes the cost by more than the
    relative tolerance, or the iteration budget runs out.

    Returns ``(f_hat, AffineMotionField, SolveTrace)``.
    """
    nx, ny, nt = f_init.shape
    step = 2 ** window.scale
    cx, cy = nx // step, ny // step
    if motion_init is None:
        motion_init = AffineMotionField.zeros(cx, cy, nt, window.scale)
    if motion_init.grid_shape != (cx, cy, nt) or motion_init.scale != window.scale:
        raise DataError("motion_init does not match the window scale")

    tau = weights[1]
    h = moment_unit(window)
    unit = (1.0, h, h, 1.0, h, h)  # pixel slopes -> half-width units
    y = BlockVector(
        [np.asarray(f_init, dtype=np.complex128).copy()]
        + [u * np.asarray(p, dtype=np.float64) for u, p in zip(unit, motion_init.params())]
    )
    z = None  # persistent duals, pixel units
    sigma = params.sigma0
    total = 0
    prev_cost = None
    converged = False
    trace = SolveTrace()

    while total < params.max_iters:
        fbar = shift_sequence(y.parts[0])
        if tau > 0:
            scaling = JointScaling.from_coefficients(of_coefficients(fbar, window), window)
        else:
            scaling = JointScaling.identity()
        problem = assemble_joint(b, mask, prior, fbar, window, weights, wrap=wrap,
                                 scaling=scaling, motion_smoother=motion_smoother)
        dscale = _dual_scales(prior, weights, scaling)
        ys = scaling.scale_y(y)
        cost_now = problem.cost(ys)
        if np.isnan(trace.initial_cost):
            trace.initial_cost = cost_now
        if prev_cost is not None:
            rel = abs(cost_now - prev_cost) / max(abs(prev_cost), np.finfo(float).tiny)
            if rel < params.stop_tol:
                converged = True
                break
        zs = problem.zero_duals() if z is None else [d * zi for d, zi in zip(dscale, z)]
        chunk = min(refresh_every, params.max_iters - total)
        ys, zs, tr = solve(problem, ys, zs, params, max_iters=chunk, sigma_init=sigma,
                           growth_cap=growth_cap)
        y = scaling.unscale_y(ys)
        z = [zi / d for d, zi in zip(dscale, zs)]
        total += len(tr)
        if tr.sigma:
            sigma = tr.sigma[-1]
        trace.extend(tr)
        prev_cost = tr.cost[-1] if tr.cost else cost_now

    trace.stop_reason = "converged" if converged or trace.stop_reason == "converged" \
        else "max_iters"
    f_hat = y.parts[0]
    field = AffineMotionField(
        *(np.real(p) / u for u, p in zip(unit, y.parts[1:])), scale=window.scale
    )
    return f_hat, field, trace


def densify_motion(field: AffineMotionField, degree: int = 3) -> DenseMotionField:
    """Evaluate the affine model of the nearest window at every fine
    pixel, then smooth with one pass of the scale-0 spline kernel to
    remove block seams."""
    step = 2 ** field.scale
    cx, cy, nt = field.grid_shape
    nx, ny = cx * step, cy * step
    ix = np.clip(np.rint(np.arange(nx) / step).astype(int), 0, cx - 1)
    iy = np.clip(np.rint(np.arange(ny) / step).astype(int), 0, cy - 1)
    offx = (np.arange(nx) - step * ix)[:, None, None]
    offy = (np.arange(ny) - step * iy)[None, :, None]

    def expand(p0, p1, p2):
        base0 = p0[ix][:, iy]
        base1 = p1[ix][:, iy]
        base2 = p2[ix][:, iy]
        return base0 + base1 * offx + base2 * offy

    u = expand(field.u0, field.u1, field.u2)
    v = expand(field.v0, field.v1, field.v2)
    u = _smooth(u, degree)
    v = _smooth(v, degree)
    return DenseMotionField(u, v, magnitude_cap=np.inf)


def _smooth(a: np.ndarray, degree: int) -> np.ndarray:
    taps = bspline_samples(degree, np.arange(-(degree + 1) // 2, (degree + 1) // 2 + 1))
    taps = taps[taps > 0]
    if len(taps) <= 1:
        return a
    taps = taps / taps.sum()
    for axis in (0, 1):
        m = np.moveaxis(a, axis, 0)
        half = len(taps) // 2
        padded = np.concatenate(
            [np.repeat(m[:1], half, axis=0), m, np.repeat(m[-1:], half, axis=0)]
        )
        out = np.zeros_like(m)
        for off, w in enumerate(taps):
            out += w * padded[off : off + m.shape[0]]
        a = np.moveaxis(out, 0, axis)
    return a


def upsample_motion(field: AffineMotionField, new_scale: int) -> AffineMotionField:
    """Warm-start motion at a finer scale: copy the nearest coarse node's
    parameters, shifting u0/v0 by the affine terms over the center offset."""
    if new_scale > field.scale:
        raise DataError("can only upsample to a finer (smaller) scale")
    if new_scale == field.scale:
        return field
    step_old = 2 ** field.scale
    step_new = 2 ** new_scale
    cx, cy, nt = field.grid_shape
    nx, ny = cx * step_old, cy * step_old
    cx2, cy2 = nx // step_new, ny // step_new
    px = step_new * np.arange(cx2)
    py = step_new * np.arange(cy2)
    ix = np.clip(np.rint(px / step_old).astype(int), 0, cx - 1)
    iy = np.clip(np.rint(py / step_old).astype(int), 0, cy - 1)
    offx = (px - step_old * ix)[:, None, None]
    offy = (py - step_old * iy)[None, :, None]

    def pick(p):
        return p[ix][:, iy]

    u0 = pick(field.u0) + pick(field.u1) * offx + pick(field.u2) * offy
    v0 = pick(field.v0) + pick(field.v1) * offx + pick(field.v2) * offy
    return AffineMotionField(
        u0, pick(field.u1), pick(field.u2), v0, pick(field.v1), pick(field.v2), new_scale
    )
