"""End-to-end decoding: independent compression, depth, joint reconstruction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .codec import compress_views, quant_step
from .core import as_image, psnr
from .depth import DEFAULT_LABELS, MAX_SWEEPS, DepthField, DepthProblem, estimate_depth
from .solver import SolveReport, SolverConfig, assemble, solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DepthParams:
    """How to estimate depth from the decoded views.

    Rectified scenes give ``disparity_range`` (and per-view ``baselines``);
    calibrated scenes give ``cameras`` and ``depth_range``.
    """

    disparity_range: Optional[tuple] = None
    baselines: Optional[tuple] = None
    cameras: Optional[tuple] = None
    depth_range: Optional[tuple] = None
    label_count: int = DEFAULT_LABELS
    lam: float = 190.0
    tau: float = 4.0
    max_sweeps: int = MAX_SWEEPS

    def problem(self, views) -> DepthProblem:
        return DepthProblem(views, cameras=self.cameras, depth_range=self.depth_range,
                            disparity_range=self.disparity_range, baselines=self.baselines,
                            label_count=self.label_count, lam=self.lam, tau=self.tau,
                            max_sweeps=self.max_sweeps)

    def for_pair(self, j: int) -> "DepthParams":
        """Parameters restricted to the reference view and view ``j``."""
        return replace(
            self,
            baselines=None if self.baselines is None else (self.baselines[j - 1],),
            cameras=None if self.cameras is None else (self.cameras[0], self.cameras[j]),
        )


@dataclass(frozen=True)
class JointParams:
    """Constraint radii and solver settings.

    Radii are per pixel. When ``epsilon1`` / ``epsilon2`` are left unset they
    follow the quantizer: ``epsilon1 = epsilon1_scale * s`` and
    ``epsilon2 = epsilon2_scale * s**2`` with ``s = step / sqrt(12)``.
    With ``feasibility_guard`` the automatic ``epsilon2`` is raised to
    ``(r - epsilon1)**2`` when the decoded views have correlation residual
    RMS ``r``; a feasible point then exists by construction.
    """

    epsilon1: Optional[float] = None
    epsilon2: Optional[float] = None
    epsilon1_scale: float = 0.2
    epsilon2_scale: float = 0.01
    use_mask: bool = True
    feasibility_guard: bool = False
    solver: SolverConfig = field(default_factory=SolverConfig)

    def radii(self, quality: Optional[int]):
        if self.epsilon1 is not None and self.epsilon2 is not None:
            return float(self.epsilon1), float(self.epsilon2)
        if quality is None:
            raise ValueError("explicit epsilon1/epsilon2 are required without a codec quality")
        s = quant_step(quality) / np.sqrt(12.0)
        e1 = self.epsilon1 if self.epsilon1 is not None else self.epsilon1_scale * s
        e2 = self.epsilon2 if self.epsilon2 is not None else self.epsilon2_scale * s * s
        return float(e1), float(e2)


@dataclass
class PipelineResult:
    decoded: list
    reconstructed: list
    depth: DepthField
    bits: float
    independent_psnr: list = field(default_factory=list)
    joint_psnr: list = field(default_factory=list)
    report: Optional[SolveReport] = None

    @property
    def mean_independent(self) -> float:
        return float(np.mean(self.independent_psnr))

    @property
    def mean_joint(self) -> float:
        return float(np.mean(self.joint_psnr))


def residual_rms(problem) -> float:
    """RMS per pixel of ``H Y`` at the decoded views."""
    hy = problem.correlation_operator().matvec(problem.stacked().ravel())
    return float(np.sqrt(np.sum(hy**2) / problem.n_pixels))


def joint_decode(decoded, depth_params: DepthParams, joint: JointParams = JointParams(),
                 quality: Optional[int] = None, depth: Optional[DepthField] = None):
    """Estimate depth from decoded views (unless given) and reconstruct them.

    Returns ``(reconstructed, depth, report)``.
    """
    decoded = [as_image(v) for v in decoded]
    if depth is None:
        depth = estimate_depth(depth_params.problem(decoded))
    e1, e2 = joint.radii(quality)
    problem = assemble(decoded, depth, cameras=depth_params.cameras,
                       baselines=depth_params.baselines, epsilon1=e1, epsilon2=e2,
                       use_mask=joint.use_mask)
    if joint.feasibility_guard and joint.epsilon2 is None:
        r = residual_rms(problem)
        if r - e1 > np.sqrt(e2):
            # shifting each view by at most e1 removes at most e1 of residual RMS,
            # since the nonzero singular values of H are at least 1
            problem = replace(problem, epsilon2=(r - e1) ** 2)
            logger.debug("epsilon2 raised to %.4g (residual rms %.4g)", problem.epsilon2, r)
    rec, report = solve(problem, joint.solver)
    return rec, depth, report


def reconstruct_pipeline(raw_views, quality: int, depth_params: DepthParams,
                         joint: JointParams = JointParams(),
                         true_depth: Optional[DepthField] = None) -> PipelineResult:
    """Compress every view at ``quality``, then decode them jointly.

    With ``true_depth`` the depth estimation step is skipped.
    """
    originals = [as_image(v) for v in raw_views]
    if len(originals) < 2:
        raise ValueError("need at least two views")
    decoded, bits = compress_views(originals, quality)
    rec, depth, report = joint_decode(decoded, depth_params, joint, quality, true_depth)
    result = PipelineResult(decoded, rec, depth, bits, report=report)
    result.independent_psnr = [psnr(o, d) for o, d in zip(originals, decoded)]
    result.joint_psnr = [psnr(o, r) for o, r in zip(originals, rec)]
    logger.info("quality %d: bits %.0f independent %.3f dB joint %.3f dB", quality, bits,
                result.mean_independent, result.mean_joint)
    return result


def pairwise_stereo_decode(raw_views, quality: int, depth_params: DepthParams,
                           joint: JointParams = JointParams()) -> PipelineResult:
    """Decode view 1 jointly with each other view in turn.

    Every pair contains view 1; of its reconstructions the one closest to the
    original is kept. The returned depth is the one from the first pair.
    """
    originals = [as_image(v) for v in raw_views]
    decoded, bits = compress_views(originals, quality)
    best_ref, best_score = None, -np.inf
    others, depth0 = [], None
    for j in range(1, len(originals)):
        params = depth_params.for_pair(j)
        rec, depth, _ = joint_decode([decoded[0], decoded[j]], params, joint, quality)
        if depth0 is None:
            depth0 = depth
        score = psnr(originals[0], rec[0])
        if score > best_score:
            best_ref, best_score = rec[0], score
        others.append(rec[1])
    rec = [best_ref] + others
    result = PipelineResult(decoded, rec, depth0, bits)
    result.independent_psnr = [psnr(o, d) for o, d in zip(originals, decoded)]
    result.joint_psnr = [psnr(o, r) for o, r in zip(originals, rec)]
    return result
