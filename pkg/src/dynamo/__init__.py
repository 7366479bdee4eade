"""Dynamic MRI reconstruction with joint local-affine motion estimation.

The pipeline reconstructs complex image sequences from undersampled
k-space by alternating, over a coarse-to-fine sweep of window scales,
a joint image/motion saddle-point solve and a motion-compensated
refinement, both driven by a primal-dual iteration with linesearch.
"""

from .io import RunConfig, load_config, load_tensor, save_tensor
from .mc import build_warp, mc_refine
from .metrics import evaluate, rmse, ssim
from .motion import AffineMotionField, DenseMotionField
from .oflow import densify_motion, jpdal, shift_sequence
from .operators import LinearOperator, WindowSpec, dot_test
from .pdal import SaddleProblem, SaddleTerm, SolveTrace, solve
from .phantom import PhantomSpec, generate_phantom
from .pipeline import ReconResult, mc_jpdal, zero_fill
from .sampling import cartesian_vd_mask, golden_radial_mask, reduction_factor

__version__ = "0.1.0"

__all__ = [
    "AffineMotionField",
    "DenseMotionField",
    "LinearOperator",
    "PhantomSpec",
    "ReconResult",
    "RunConfig",
    "SaddleProblem",
    "SaddleTerm",
    "SolveTrace",
    "WindowSpec",
    "build_warp",
    "cartesian_vd_mask",
    "densify_motion",
    "dot_test",
    "evaluate",
    "generate_phantom",
    "golden_radial_mask",
    "jpdal",
    "load_config",
    "load_tensor",
    "mc_jpdal",
    "mc_refine",
    "reduction_factor",
    "rmse",
    "save_tensor",
    "shift_sequence",
    "solve",
    "ssim",
    "zero_fill",
]
