"""Joint reconstruction of independently compressed multi-view images."""

from .codec import CodecConfig, CompressedImage, compress_views, decode, encode
from .core import CameraParams, psnr
from .depth import DepthField, DepthProblem, alpha_expansion, estimate_depth
from .evaluation import RdCurve, RdPoint, bjontegaard_rate, emit_plot, run_rd_sweep
from .pipeline import DepthParams, JointParams, joint_decode, reconstruct_pipeline
from .solver import JointProblem, SolverConfig, assemble, solve
from .warp import MotionField, WarpOperator, build_operator, motion_from_depth

__version__ = "0.1.0"

__all__ = [
    "CameraParams", "CodecConfig", "CompressedImage", "DepthField", "DepthParams",
    "DepthProblem", "JointParams", "JointProblem", "MotionField", "RdCurve", "RdPoint",
    "SolverConfig", "WarpOperator", "alpha_expansion", "assemble", "bjontegaard_rate",
    "build_operator", "compress_views", "decode", "emit_plot", "encode", "estimate_depth",
    "joint_decode", "motion_from_depth", "psnr", "reconstruct_pipeline", "run_rd_sweep", "solve",
]
