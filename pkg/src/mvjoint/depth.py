"""Dense depth / disparity estimation from decoded views.

The labeling minimizes a squared-difference data term plus a truncated
linear smoothness term on the 4-neighbourhood, using alpha-expansion moves
solved exactly by min-cut.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core import CameraParams, as_image, load_pgm16, save_image, save_pgm16
from .maxflow import SINK, maxflow

logger = logging.getLogger(__name__)

DEFAULT_LABELS = 64
MAX_SWEEPS = 4
_DEGENERATE_Z = 1e-9


# --------------------------------------------------------------------------
# Geometry
# --------------------------------------------------------------------------


class Projection(NamedTuple):
    row: Optional[int]
    col: Optional[int]
    in_frame: bool
    degenerate: bool


def _round(x):
    return np.floor(np.asarray(x) + 0.5).astype(np.int64)


def project_points(rows, cols, depth, cam_src: CameraParams, cam_dst: CameraParams):
    """Vectorized reprojection of pixels at the given depths.

    Returns integer destination ``(rows, cols)`` and a mask of points that
    land in front of the destination camera.
    """
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    depth = np.broadcast_to(np.asarray(depth, dtype=np.float64), rows.shape)
    pix = np.stack([rows.ravel(), cols.ravel(), np.ones(rows.size)])
    world = cam_src.R @ np.linalg.solve(cam_src.P, pix) * depth.ravel() + cam_src.T[:, None]
    cam = cam_dst.P @ np.linalg.solve(cam_dst.R, world - cam_dst.T[:, None])
    z = cam[2]
    ok = z > _DEGENERATE_Z
    safe = np.where(ok, z, 1.0)
    r = _round(cam[0] / safe).reshape(rows.shape)
    c = _round(cam[1] / safe).reshape(rows.shape)
    return r, c, ok.reshape(rows.shape)


def project_pixel(pixel, depth: float, cam_src: CameraParams, cam_dst: CameraParams,
                  shape=None) -> Projection:
    """Project pixel ``(row, col)`` seen at ``depth`` into another camera.

    ``shape`` is the destination frame size used for the in-frame flag; with
    no shape every non-degenerate projection counts as in frame.
    """
    if depth <= 0:
        raise ValueError("depth must be positive")
    r, c, ok = project_points([pixel[0]], [pixel[1]], depth, cam_src, cam_dst)
    if not ok[0]:
        return Projection(None, None, False, True)
    row, col = int(r[0]), int(c[0])
    inside = True
    if shape is not None:
        inside = 0 <= row < shape[0] and 0 <= col < shape[1]
    return Projection(row, col, inside, False)


def inverse_depth_table(d_min: float, d_max: float, count: int) -> np.ndarray:
    """Depth per label, uniform in inverse depth; label 0 is the farthest."""
    if not 0 < d_min < d_max:
        raise ValueError("need 0 < d_min < d_max")
    inv = np.linspace(1.0 / d_max, 1.0 / d_min, count)
    return 1.0 / inv


# --------------------------------------------------------------------------
# Problem and result types
# --------------------------------------------------------------------------


@dataclass
class DepthProblem:
    """Depth estimation inputs.

    Give either ``cameras`` (one per view, with ``depth_range``) or a
    rectified ``disparity_range``. In rectified mode, label ``d`` shifts the
    reference pixel ``(m, n)`` to ``(m, n - baselines[j] * d)`` in view j.
    """

    views: Sequence[np.ndarray]
    cameras: Optional[Sequence[CameraParams]] = None
    depth_range: Optional[tuple] = None
    disparity_range: Optional[tuple] = None
    baselines: Optional[Sequence[float]] = None
    label_count: int = DEFAULT_LABELS
    lam: float = 1.0
    tau: float = 4.0
    max_sweeps: int = MAX_SWEEPS

    def __post_init__(self):
        self.views = [as_image(v) for v in self.views]
        if len(self.views) < 2:
            raise ValueError("depth estimation needs at least two views")
        if any(v.shape != self.views[0].shape for v in self.views):
            raise ValueError("all views must have the same dimensions")
        if (self.cameras is None) == (self.disparity_range is None):
            raise ValueError("give exactly one of cameras or disparity_range")
        if self.lam < 0 or self.tau <= 0:
            raise ValueError("need lam >= 0 and tau > 0")
        if self.cameras is not None:
            if len(self.cameras) != len(self.views):
                raise ValueError("one camera per view is required")
            if self.depth_range is None:
                raise ValueError("calibrated mode needs depth_range=(d_min, d_max)")
        else:
            lo, hi = (int(v) for v in self.disparity_range)
            if hi < lo:
                raise ValueError("empty disparity range")
            self.disparity_range = (lo, hi)
            self.label_count = hi - lo + 1
            if self.baselines is None:
                self.baselines = [1.0] * (len(self.views) - 1)
            if len(self.baselines) != len(self.views) - 1:
                raise ValueError("one baseline per non-reference view is required")

    @property
    def rectified(self) -> bool:
        return self.disparity_range is not None

    @property
    def shape(self):
        return self.views[0].shape

    def label_table(self) -> np.ndarray:
        if self.rectified:
            lo, hi = self.disparity_range
            return np.arange(lo, hi + 1, dtype=np.float64)
        return inverse_depth_table(*self.depth_range, self.label_count)


@dataclass
class DepthField:
    """Per-pixel label grid plus the value of each label.

    In rectified mode the table holds disparities in pixels, otherwise
    depths in world units.
    """

    labels: np.ndarray
    label_table: np.ndarray
    rectified: bool = True
    lam: float = 0.0
    tau: float = 0.0
    energy_trace: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.label_table = np.asarray(self.label_table, dtype=np.float64)
        if self.labels.min(initial=0) < 0 or self.labels.max(initial=0) >= len(self.label_table):
            raise ValueError("label out of range")

    @property
    def values(self) -> np.ndarray:
        return self.label_table[self.labels]

    def disparity(self, focal_baseline: float = 1.0) -> np.ndarray:
        """Disparity map ``s / D``; rectified fields already store it."""
        if self.rectified:
            return self.values
        return focal_baseline / self.values


def save_depth(depth: DepthField, path) -> None:
    """Write labels as a 16-bit PGM with a JSON sidecar next to it."""
    path = Path(path)
    save_pgm16(depth.labels, path)
    meta = {"labelTable": depth.label_table.tolist(), "lambda": depth.lam,
            "tau": depth.tau, "L": len(depth.label_table), "rectified": depth.rectified}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=1))


def load_depth(path) -> DepthField:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    return DepthField(load_pgm16(path), np.array(meta["labelTable"]),
                      bool(meta.get("rectified", True)), meta["lambda"], meta["tau"])


def save_disparity_view(depth: DepthField, path, focal_baseline: float = 1.0) -> None:
    """8-bit visualization of ``s / D`` stretched so the maximum maps to 255."""
    disp = depth.disparity(focal_baseline)
    top = float(np.max(np.abs(disp))) or 1.0
    save_image(np.clip(disp, 0, None) * (255.0 / top), path)


# --------------------------------------------------------------------------
# Energy terms
# --------------------------------------------------------------------------


def smoothness_cost(label_a, label_b, tau):
    """Truncated linear penalty on label indices."""
    return np.minimum(np.abs(np.asarray(label_a) - np.asarray(label_b)), tau)


def _view_costs(problem: DepthProblem, j: int) -> np.ndarray:
    """Squared differences against view ``j`` per pixel and label; NaN off-frame."""
    ref = problem.views[0]
    tgt = problem.views[j]
    n1, n2 = ref.shape
    rows, cols = np.mgrid[0:n1, 0:n2]
    table = problem.label_table()
    out = np.full((n1, n2, len(table)), np.nan)
    for k, value in enumerate(table):
        if problem.rectified:
            shift = problem.baselines[j - 1] * value
            r2 = rows
            c2 = _round(cols - shift)
            ok = np.ones_like(rows, dtype=bool)
        else:
            r2, c2, ok = project_points(rows, cols, value, problem.cameras[0],
                                        problem.cameras[j])
        ok &= (r2 >= 0) & (r2 < n1) & (c2 >= 0) & (c2 < n2)
        diff = tgt[np.where(ok, r2, 0), np.where(ok, c2, 0)] - ref
        out[..., k] = np.where(ok, diff * diff, np.nan)
    return out


def build_cost_volume(problem: DepthProblem) -> np.ndarray:
    """Data cost per pixel and label, summed over the non-reference views.

    A projection that leaves the frame costs ``tau * lam`` plus the median
    of that pixel's in-frame costs for the view.
    """
    total = np.zeros(problem.shape + (problem.label_count,))
    base = problem.tau * problem.lam
    for j in range(1, len(problem.views)):
        costs = _view_costs(problem, j)
        missing = np.isnan(costs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            med = np.nanmedian(costs, axis=2)
        med = np.where(np.isnan(med), 0.0, med)
        total += np.where(missing, (base + med)[..., None], costs)
    return total


def _grid_edges(n1: int, n2: int):
    idx = np.arange(n1 * n2).reshape(n1, n2)
    p = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    q = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    return p, q


def labeling_energy(cost: np.ndarray, labels: np.ndarray, lam: float, tau: float) -> float:
    """Data term plus ``lam`` times the truncated linear smoothness term."""
    n1, n2, _ = cost.shape
    flat = labels.reshape(-1)
    data = cost.reshape(n1 * n2, -1)[np.arange(n1 * n2), flat].sum()
    p, q = _grid_edges(n1, n2)
    smooth = smoothness_cost(flat[p], flat[q], tau).sum()
    return float(data + lam * smooth)


def _expansion_move(cost2d, labels, alpha, lam, tau, p, q):
    n = labels.size
    idx = np.arange(n)
    u0 = cost2d[idx, labels].copy()
    u1 = cost2d[:, alpha].copy()
    fp, fq = labels[p], labels[q]
    a = lam * smoothness_cost(fp, fq, tau)
    b = lam * smoothness_cost(fp, alpha, tau)
    c = lam * smoothness_cost(alpha, fq, tau)
    # E(xp, xq) = a + (c - a) xp + (0 - c) xq + (b + c - a) (1 - xp) xq
    np.add.at(u1, p, c - a)
    np.add.at(u1, q, -c)
    w = np.maximum(b + c - a, 0.0)
    diff = u1 - u0
    _, tree = maxflow(n, p, q, w, np.zeros_like(w), np.maximum(diff, 0.0),
                      np.maximum(-diff, 0.0))
    # only nodes still tied to the sink switch, so ties keep the current label
    switch = tree == SINK
    return np.where(switch, alpha, labels)


def alpha_expansion(cost: np.ndarray, lam: float, tau: float,
                    max_sweeps: int = MAX_SWEEPS, init: Optional[np.ndarray] = None):
    """Minimize the labeling energy by sweeps of alpha-expansion moves.

    Returns the labels and the energy after every accepted move (the first
    entry is the initial energy). Starts from the per-pixel data argmin.
    """
    n1, n2, n_labels = cost.shape
    cost2d = cost.reshape(n1 * n2, n_labels)
    labels = (np.argmin(cost2d, axis=1) if init is None else np.asarray(init).reshape(-1)).astype(np.int64)
    energy = labeling_energy(cost, labels.reshape(n1, n2), lam, tau)
    trace = [energy]
    if lam == 0 or n_labels < 2:
        return labels.reshape(n1, n2), trace
    p, q = _grid_edges(n1, n2)
    for sweep in range(max_sweeps):
        improved = False
        for alpha in range(n_labels):
            proposal = _expansion_move(cost2d, labels, alpha, lam, tau, p, q)
            e = labeling_energy(cost, proposal.reshape(n1, n2), lam, tau)
            if e < energy - 1e-12 * max(1.0, abs(energy)):
                labels, energy = proposal, e
                trace.append(e)
                improved = True
        logger.debug("sweep %d energy %.6g", sweep, energy)
        if not improved:
            break
    return labels.reshape(n1, n2), trace


def estimate_depth(problem: DepthProblem) -> DepthField:
    table = problem.label_table()
    if problem.label_count < 2:
        warnings.warn("fewer than two labels; returning a constant labeling")
        return DepthField(np.zeros(problem.shape, np.int64), table, problem.rectified,
                          problem.lam, problem.tau)
    cost = build_cost_volume(problem)
    labels, trace = alpha_expansion(cost, problem.lam, problem.tau, problem.max_sweeps)
    return DepthField(labels, table, problem.rectified, problem.lam, problem.tau, trace)


def bad_pixel_rate(estimated: np.ndarray, truth: np.ndarray, mask=None,
                   threshold: float = 1.0) -> float:
    """Fraction of pixels whose disparity error exceeds ``threshold``."""
    err = np.abs(np.asarray(estimated, float) - np.asarray(truth, float)) > threshold
    if mask is not None:
        err = err[np.asarray(mask, bool)]
    return float(np.mean(err)) if err.size else 0.0
