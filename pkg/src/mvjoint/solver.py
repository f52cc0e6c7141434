"""Joint reconstruction of J views as a constrained TV problem solved by PPXA.

The unknown is the stacked array ``X`` of shape ``(J, N)``. The problem is

    minimize    sum_j TV(X_j)
    subject to  ||X_j - Y_j||_2 <= eps1 * sqrt(N)              for every j
                sum_{j>=2} ||M_j (X_j - A_j X_1)||^2 <= eps2 * N

with ``Y`` the decoded views, ``A_j`` the forward warp from view 1 to view j
and ``M_j`` its occlusion mask. Radii are given per pixel.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator

from .core import as_image, reshape
from .depth import DepthField
from .prox import (
    FrameBounds,
    TvConfig,
    estimate_frame_bounds,
    prox_affine_ball,
    prox_selector_ball,
    prox_tv,
    tv_norm,
)
from .warp import WarpOperator, build_operator, motion_from_depth

logger = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1.05


class CorrelationOperator(LinearOperator):
    """Block operator with rows ``[-M_j A_j, 0, ..., M_j, ..., 0]``, j >= 2.

    Acts on flattened ``(J, N)`` stacks; never materialized.
    """

    def __init__(self, operators: Sequence[WarpOperator], masks: Sequence[np.ndarray]):
        self.operators = list(operators)
        self.masks = [np.asarray(m, dtype=np.float64) for m in masks]
        self.n = self.operators[0].size
        self.views = len(self.operators) + 1
        super().__init__(np.float64, ((self.views - 1) * self.n, self.views * self.n))

    def _matvec(self, x):
        x = np.asarray(x).reshape(self.views, self.n)
        out = np.empty((self.views - 1, self.n))
        for k, (op, m) in enumerate(zip(self.operators, self.masks)):
            out[k] = m * (x[k + 1] - op.apply(x[0]))
        return out.reshape(-1)

    def _rmatvec(self, r):
        r = np.asarray(r).reshape(self.views - 1, self.n)
        out = np.zeros((self.views, self.n))
        for k, (op, m) in enumerate(zip(self.operators, self.masks)):
            mr = m * r[k]
            out[0] -= op.apply_transpose(mr)
            out[k + 1] = mr
        return out.reshape(-1)

    def dense(self) -> np.ndarray:
        """Explicit matrix; only for small problems and tests."""
        j, n = self.views, self.n
        h = np.zeros(((j - 1) * n, j * n))
        for k, (op, m) in enumerate(zip(self.operators, self.masks)):
            a = op.to_sparse().toarray()
            h[k * n:(k + 1) * n, :n] = -np.diag(m) @ a
            h[k * n:(k + 1) * n, (k + 1) * n:(k + 2) * n] = np.diag(m)
        return h


@dataclass
class JointProblem:
    decoded_views: list
    operators: list
    masks: list
    epsilon1: float
    epsilon2: float

    def __post_init__(self):
        self.decoded_views = [as_image(v) for v in self.decoded_views]
        if len(self.decoded_views) < 2:
            raise ValueError("joint reconstruction needs at least two views")
        shape = self.decoded_views[0].shape
        if any(v.shape != shape for v in self.decoded_views):
            raise ValueError("all views must have the same dimensions")
        if len(self.operators) != len(self.decoded_views) - 1 or len(self.masks) != len(self.operators):
            raise ValueError("need one warp operator and mask per non-reference view")
        if any(op.size != shape[0] * shape[1] for op in self.operators):
            raise ValueError("warp operator size does not match the views")
        if self.epsilon1 <= 0 or self.epsilon2 <= 0:
            raise ValueError("epsilon1 and epsilon2 must be positive")

    @property
    def shape(self):
        return self.decoded_views[0].shape

    @property
    def n_pixels(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def n_views(self) -> int:
        return len(self.decoded_views)

    @property
    def fidelity_radius(self) -> float:
        return self.epsilon1 * np.sqrt(self.n_pixels)

    @property
    def correlation_bound(self) -> float:
        """Bound on the squared correlation norm."""
        return self.epsilon2 * self.n_pixels

    def correlation_operator(self) -> CorrelationOperator:
        return CorrelationOperator(self.operators, self.masks)

    def stacked(self) -> np.ndarray:
        return np.stack([reshape(v) for v in self.decoded_views])


def assemble(decoded_views, depth: DepthField, cameras=None, baselines=None,
             epsilon1: float = 1.0, epsilon2: float = 1.0,
             use_mask: bool = True) -> JointProblem:
    """Build warp operators and masks from view 1 to every other view.

    Rectified depth uses ``baselines`` (default 1 for every view); calibrated
    depth uses ``cameras``. ``use_mask=False`` replaces every mask by the
    identity.
    """
    views = [as_image(v) for v in decoded_views]
    if any(v.shape != views[0].shape for v in views):
        raise ValueError("all views must have the same dimensions")
    if depth.labels.shape != views[0].shape:
        raise ValueError("depth field and views differ in size")
    operators, masks = [], []
    for j in range(1, len(views)):
        if depth.rectified:
            b = 1.0 if baselines is None else baselines[j - 1]
            motion = motion_from_depth(depth, baseline=b)
        else:
            if cameras is None:
                raise ValueError("calibrated depth needs cameras")
            motion = motion_from_depth(depth, cameras[0], cameras[j])
        op, mask = build_operator(motion)
        operators.append(op)
        masks.append(mask if use_mask else np.ones_like(mask))
    return JointProblem(views, operators, masks, epsilon1, epsilon2)


@dataclass(frozen=True)
class SolverConfig:
    outer_iterations: int = 100
    gamma: float = 10.0
    weights: Optional[tuple] = None  # defaults to equal weights
    relaxation: float = 1.0
    log_every: int = 1
    tv: TvConfig = TvConfig()
    affine_iterations: int = 50
    tolerance: float = 1e-4

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not 0 < self.relaxation < 2:
            raise ValueError("relaxation must lie in (0, 2)")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ValueError("weights must be positive and sum to 1")
        if self.outer_iterations < 1 or self.log_every < 1:
            raise ValueError("iteration counts must be positive")


@dataclass
class SolveReport:
    iterations: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    residual_fidelity: list = field(default_factory=list)  # per iteration, per view (RMS)
    residual_correlation: list = field(default_factory=list)  # per iteration, per pixel
    feasible_fidelity: list = field(default_factory=list)
    feasible_correlation: bool = False
    wall_time: float = 0.0

    def log(self, it, objective, fid, corr):
        self.iterations.append(it)
        self.objective.append(objective)
        self.residual_fidelity.append(list(fid))
        self.residual_correlation.append(corr)

    def to_csv(self, path) -> None:
        n_views = len(self.residual_fidelity[0]) if self.residual_fidelity else 0
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "objective"]
                            + [f"residual_fid_{j}" for j in range(1, n_views + 1)]
                            + ["residual_corr"])
            for it, obj, fid, corr in zip(self.iterations, self.objective,
                                          self.residual_fidelity, self.residual_correlation):
                writer.writerow([it, repr(obj)] + [repr(f) for f in fid] + [repr(corr)])


def _measure(problem: JointProblem, x: np.ndarray, h: CorrelationOperator):
    shape = problem.shape
    objective = sum(tv_norm(xj.reshape(shape)) for xj in x)
    y = problem.stacked()
    fid = np.linalg.norm(x - y, axis=1) / np.sqrt(problem.n_pixels)
    hx = h.matvec(x.reshape(-1))
    corr = float(hx @ hx) / problem.n_pixels
    return objective, fid, corr


def solve(problem: JointProblem, config: SolverConfig = SolverConfig(),
          bounds: FrameBounds = None):
    """Run PPXA from the decoded views.

    Returns the reconstructed images (clamped to 0..255) and a SolveReport.
    The iterate itself is never clamped.
    """
    start = time.perf_counter()
    J, shape = problem.n_views, problem.shape
    y = problem.stacked()
    h = problem.correlation_operator()
    bounds = bounds or estimate_frame_bounds(h)
    n_funcs = 2 * J + 1
    weights = (np.full(n_funcs, 1.0 / n_funcs) if config.weights is None
               else np.asarray(config.weights, dtype=np.float64))
    if weights.size != n_funcs:
        raise ValueError(f"expected {n_funcs} weights, got {weights.size}")
    r1 = problem.fidelity_radius
    eps2 = problem.correlation_bound
    gamma, lam = config.gamma, config.relaxation

    aux = [y.copy() for _ in range(n_funcs)]
    x = y.copy()
    tv_duals = [None] * J
    corr_dual = None
    report = SolveReport()

    def prox(i, point):
        nonlocal corr_dual
        if i < J:
            out = point.copy()
            out[i], tv_duals[i] = prox_tv(point[i], gamma / weights[i], config.tv,
                                          shape=shape, dual=tv_duals[i], return_dual=True)
            name = f"tv[{i + 1}]"
        elif i < 2 * J:
            out = prox_selector_ball(point, i - J, y, r1)
            name = f"fidelity[{i - J + 1}]"
        else:
            flat, corr_dual = prox_affine_ball(point.reshape(-1), h, eps2, bounds,
                                               config.affine_iterations, dual=corr_dual,
                                               return_dual=True)
            out = flat.reshape(J, -1)
            name = "correlation"
        if not np.all(np.isfinite(out)):
            raise FloatingPointError(f"non-finite iterate produced by the {name} prox")
        return out

    obj, fid, corr = _measure(problem, x, h)
    report.log(0, obj, fid, corr)
    for it in range(1, config.outer_iterations + 1):
        p = [prox(i, aux[i]) for i in range(n_funcs)]
        p_avg = sum(w * pi for w, pi in zip(weights, p))
        for i in range(n_funcs):
            aux[i] += lam * (2.0 * p_avg - x - p[i])
        x_new = x + lam * (p_avg - x)
        change = np.sqrt(np.mean((x_new - x) ** 2))
        x = x_new
        if it % config.log_every == 0 or it == config.outer_iterations or change < config.tolerance:
            obj, fid, corr = _measure(problem, x, h)
            report.log(it, obj, fid, corr)
            logger.debug("ppxa %d objective %.6g fid %s corr %.4g", it, obj, fid, corr)
        if change < config.tolerance:
            break

    obj, fid, corr = _measure(problem, x, h)
    report.feasible_fidelity = [bool(f <= FEASIBILITY_SLACK * problem.epsilon1) for f in fid]
    report.feasible_correlation = bool(corr <= FEASIBILITY_SLACK * problem.epsilon2)
    report.wall_time = time.perf_counter() - start
    images = [np.clip(xj.reshape(shape), 0.0, 255.0) for xj in x]
    return images, report
