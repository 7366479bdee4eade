"""Command-line front end.

Subcommands: phantom, mask, undersample, reconstruct, eval, export.
Exit codes: 0 success, 2 usage error (argparse), 3 data error, 4 solver
divergence.  Every run prints its resolved settings; reconstruction runs
print the full run configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import runtime
from .errors import DataError, DynamoError, SolverDivergenceError
from .io import RunConfig, load_config, load_tensor, save_tensor
from .mc import mc_refine
from .metrics import evaluate, write_metrics_csv
from .motion import DenseMotionField
from .operators import measure_op
from .phantom import PhantomSpec, generate_phantom, rotating_spec, translating_spec
from .pipeline import mc_jpdal, zero_fill
from .sampling import cartesian_vd_mask, golden_radial_mask, reduction_factor


def _print_settings(name: str, settings: dict) -> None:
    print(f"[{name}] {json.dumps(settings, sort_keys=True)}")


def _load_mask(path) -> np.ndarray:
    arr = load_tensor(path)
    if arr.ndim != 3:
        raise DataError(f"{path}: mask must be rank 3, got rank {arr.ndim}")
    return arr.astype(bool)


def _load_sequence(path) -> np.ndarray:
    arr = load_tensor(path)
    if arr.ndim != 3:
        raise DataError(f"{path}: sequence must be rank 3, got rank {arr.ndim}")
    return arr.astype(np.complex128)


# ---------------------------------------------------------------------------
# phantom
# ---------------------------------------------------------------------------


def cmd_phantom(args) -> int:
    if args.spec:
        spec = PhantomSpec.from_json(Path(args.spec).read_text())
    elif args.preset == "translating":
        spec = translating_spec(
            args.nx, args.ny, args.nt,
            velocity=(args.velocity[0], args.velocity[1]),
            noise_sigma=args.noise_sigma,
        )
    else:
        spec = rotating_spec(
            args.nx, args.ny, args.nt, rate=args.rate, noise_sigma=args.noise_sigma
        )
    _print_settings(
        "phantom",
        {
            "preset": None if args.spec else args.preset,
            "spec": args.spec,
            "nx": spec.nx,
            "ny": spec.ny,
            "nt": spec.nt,
            "noise_sigma": spec.noise_sigma,
            "seed": args.seed,
        },
    )
    frames, motion = generate_phantom(spec, seed=args.seed)
    save_tensor(args.out, frames.astype(np.complex64))
    if args.motion_out:
        save_tensor(args.motion_out, motion.to_tensor())
    return 0


# ---------------------------------------------------------------------------
# mask
# ---------------------------------------------------------------------------


def cmd_mask(args) -> int:
    if args.scheme == "golden_radial":
        sm = golden_radial_mask(args.nx, args.ny, args.nt, args.rays)
    else:
        sm = cartesian_vd_mask(
            args.nx, args.ny, args.nt, args.reduction, args.low_freq_lines, args.seed
        )
    factor = reduction_factor(sm)
    _print_settings(
        "mask",
        {"scheme": args.scheme, "nx": args.nx, "ny": args.ny, "nt": args.nt,
         "rays": args.rays, "reduction": args.reduction,
         "low_freq_lines": args.low_freq_lines, "seed": args.seed,
         "measured_reduction": round(factor, 4)},
    )
    save_tensor(args.out, sm.mask.astype(np.uint8))
    return 0


# ---------------------------------------------------------------------------
# undersample
# ---------------------------------------------------------------------------


def cmd_undersample(args) -> int:
    f = _load_sequence(args.sequence)
    mask = _load_mask(args.mask)
    if mask.shape != f.shape:
        raise DataError(f"mask shape {mask.shape} != sequence shape {f.shape}")
    _print_settings(
        "undersample",
        {"sequence": args.sequence, "mask": args.mask,
         "noise_sigma": args.noise_sigma, "seed": args.seed},
    )
    b = measure_op(mask).apply(f)
    if args.noise_sigma > 0:
        rng = np.random.default_rng(args.seed)
        scale = args.noise_sigma / np.sqrt(2.0)
        b = b + scale * (rng.standard_normal(b.shape) + 1j * rng.standard_normal(b.shape))
    save_tensor(args.out, b.astype(np.complex64))
    sidecar = {
        "mask": str(args.mask),
        "shape": list(f.shape),
        "noise_sigma": args.noise_sigma,
        "seed": args.seed,
    }
    Path(str(args.out) + ".json").write_text(json.dumps(sidecar, indent=2))
    return 0


# ---------------------------------------------------------------------------
# reconstruct
# ---------------------------------------------------------------------------


def _write_pipeline_trace(path, traces, schedule) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["stage", "scale", "iter", "cost", "sigma", "trials", "rel_change"])
        for j, (jt, mt) in zip(schedule, traces):
            for stage, tr in (("jpdal", jt), ("mc", mt)):
                for i in range(len(tr)):
                    writer.writerow(
                        [stage, j, i + 1, tr.cost[i], tr.sigma[i], tr.trials[i],
                         tr.rel_change[i]]
                    )


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    print(f"[reconstruct] method={args.method} resolved config:")
    print(cfg.to_json())
    b = load_tensor(args.kspace).astype(np.complex128)
    if b.ndim != 1:
        raise DataError(f"{args.kspace}: k-space data must be a rank-1 tensor")
    mask = _load_mask(args.mask)
    n_b = int(mask.sum())
    if b.shape[0] != n_b:
        raise DataError(
            f"k-space has {b.shape[0]} samples but the mask selects {n_b}"
        )
    wrap = not args.no_wrap

    if args.method == "zero-fill":
        rec = zero_fill(b, mask)
        motion = None
        traces, schedule = [], []
    elif args.method == "mc":
        if not args.motion_in:
            raise DataError("--method mc requires --motion-in")
        motion = DenseMotionField.from_tensor(load_tensor(args.motion_in))
        if motion.shape != mask.shape:
            raise DataError(
                f"motion shape {motion.shape} != mask shape {mask.shape}"
            )
        rec, trace = mc_refine(zero_fill(b, mask), b, mask, motion, cfg.lam, cfg,
                               wrap=wrap)
        traces, schedule = [(trace, trace)], ["-"]
        if args.trace:
            trace.write_csv(args.trace, extra={"stage": "mc", "scale": "-"})
            traces = []
    else:
        result = mc_jpdal(
            b, mask, cfg,
            refresh_every=args.refresh_every,
            wrap=wrap,
            skip_mc=(args.method == "jpdal"),
        )
        rec, motion = result.f_hat, result.motion
        traces, schedule = result.traces, result.schedule

    save_tensor(args.out, rec.astype(np.complex64))
    if args.motion_out:
        if motion is None:
            raise DataError(f"--motion-out not available for method {args.method}")
        save_tensor(args.motion_out, motion.to_tensor())
    if args.trace and traces:
        _write_pipeline_trace(args.trace, traces, schedule)
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def cmd_eval(args) -> int:
    ref = _load_sequence(args.ref)
    rec = _load_sequence(args.rec)
    _print_settings(
        "eval",
        {"ref": args.ref, "rec": args.rec, "ssim_window": args.ssim_window,
         "ssim_global": args.ssim_global},
    )
    report = evaluate(rec, ref, window_size=args.ssim_window,
                      global_stats=args.ssim_global)
    write_metrics_csv(report, args.out)
    print(f"rmse={report.total_rmse:.6g} ssim={report.mean_ssim:.6g}")
    return 0


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_pgm16(path, values: np.ndarray) -> None:
    """16-bit binary PGM; ``values`` are integers in [0, 65535], indexed
    [x, y] with x running left-to-right."""
    q = values.astype(">u2")
    nx, ny = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n65535\n".encode())
        fh.write(q.T.tobytes())


def _quantize(mag: np.ndarray, peak: float) -> np.ndarray:
    if peak <= 0:
        return np.zeros(mag.shape, dtype=np.uint16)
    return np.round(np.clip(mag / peak, 0.0, 1.0) * 65535).astype(np.uint16)


def _export_frames(frames_mag, peak, out_dir, stem, fmt):
    for t in range(frames_mag.shape[2]):
        if fmt == "pgm16":
            write_pgm16(out_dir / f"{stem}_{t:03d}.pgm",
                        _quantize(frames_mag[:, :, t], peak))
        else:
            np.savetxt(out_dir / f"{stem}_{t:03d}.csv",
                       frames_mag[:, :, t], delimiter=",", fmt="%.9g")


def cmd_export(args) -> int:
    rec = _load_sequence(args.rec)
    nx, ny, nt = rec.shape
    if not 0 <= args.profile_column < nx:
        raise DataError(
            f"profile column {args.profile_column} out of range [0, {nx})"
        )
    _print_settings(
        "export",
        {"rec": args.rec, "format": args.format, "out_dir": args.out_dir,
         "profile_column": args.profile_column, "ref": args.ref},
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mag = np.abs(rec)
    _export_frames(mag, float(mag.max()), out_dir, "frame", args.format)

    # y-t temporal profile at the chosen image column
    profile = mag[args.profile_column]  # (ny, nt)
    with open(out_dir / "profile.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y"] + [f"t{t}" for t in range(nt)])
        for yrow in range(ny):
            writer.writerow([yrow] + [f"{profile[yrow, t]:.9g}" for t in range(nt)])

    if args.ref:
        ref = _load_sequence(args.ref)
        if ref.shape != rec.shape:
            raise DataError(f"reference shape {ref.shape} != rec shape {rec.shape}")
        diff = np.abs(rec - ref)
        _export_frames(diff, float(diff.max()), out_dir, "diff", args.format)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynamo",
        description="Dynamic MRI reconstruction with joint motion estimation",
    )
    parser.add_argument("--threads", type=int, default=0,
                        help="worker threads (0 = auto; DYNAMO_THREADS fallback)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a synthetic dynamic phantom")
    p.add_argument("--preset", choices=["translating", "rotating"],
                   default="translating")
    p.add_argument("--spec", help="JSON phantom spec (overrides preset)")
    p.add_argument("--nx", type=int, default=64)
    p.add_argument("--ny", type=int, default=64)
    p.add_argument("--nt", type=int, default=16)
    p.add_argument("--velocity", type=float, nargs=2, default=(0.5, 0.0),
                   metavar=("VX", "VY"))
    p.add_argument("--rate", type=float, default=0.05, help="rotation rad/frame")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--motion-out")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("mask", help="build a k-space sampling mask")
    p.add_argument("--scheme", choices=["golden_radial", "cartesian_vd"],
                   required=True)
    p.add_argument("--nx", type=int, required=True)
    p.add_argument("--ny", type=int, required=True)
    p.add_argument("--nt", type=int, required=True)
    p.add_argument("--rays", type=int, default=24, help="rays per frame (radial)")
    p.add_argument("--reduction", type=float, default=10.0,
                   help="target reduction factor (cartesian)")
    p.add_argument("--low-freq-lines", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("undersample", help="measure a sequence through a mask")
    p.add_argument("--sequence", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_undersample)

    p = sub.add_parser("reconstruct", help="reconstruct from undersampled k-space")
    p.add_argument("--method",
                   choices=["zero-fill", "jpdal", "mc", "mc-jpdal"],
                   required=True)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--kspace", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--motion-out")
    p.add_argument("--motion-in", help="dense motion field (method mc)")
    p.add_argument("--trace", help="write convergence trace CSV")
    p.add_argument("--no-wrap", action="store_true",
                   help="drop the circular frame-0 temporal coupling")
    p.add_argument("--refresh-every", type=int, default=20,
                   help="iterations between shifted-reference refreshes")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", help="RMSE/SSIM against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--rec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ssim-window", type=int, default=7)
    p.add_argument("--ssim-global", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="export frames, profile and differences")
    p.add_argument("--rec", required=True)
    p.add_argument("--format", choices=["pgm16", "csv"], default="pgm16")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--profile-column", type=int, default=0)
    p.add_argument("--ref")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    runtime.set_workers(args.threads)
    try:
        return args.func(args)
    except SolverDivergenceError as exc:
        print(f"error: solver diverged: {exc}", file=sys.stderr)
        return 4
    except DynamoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
