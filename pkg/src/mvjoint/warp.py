"""Forward warping as a sparse partial-permutation operator.

``WarpOperator`` stores, for every destination pixel (row of the matrix),
the source pixel (column) it copies, or -1 for a hole.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import CameraParams, DimensionError
from .depth import DepthField, project_points


@dataclass(frozen=True)
class MotionField:
    """Integer per-pixel displacement: source ``(m, n)`` lands on
    ``(m + vertical[m, n], n + horizontal[m, n])``.

    ``invalid`` marks sources whose destination could not be computed
    (degenerate projection); they never write.
    """

    horizontal: np.ndarray
    vertical: np.ndarray
    invalid: np.ndarray = None

    def __post_init__(self):
        h = np.asarray(self.horizontal, dtype=np.int64)
        v = np.asarray(self.vertical, dtype=np.int64)
        if h.shape != v.shape or h.ndim != 2:
            raise DimensionError("motion components must be 2-D grids of equal shape")
        inv = np.zeros(h.shape, bool) if self.invalid is None else np.asarray(self.invalid, bool)
        object.__setattr__(self, "horizontal", h)
        object.__setattr__(self, "vertical", v)
        object.__setattr__(self, "invalid", inv)

    @property
    def shape(self):
        return self.horizontal.shape

    def destinations(self):
        """Destination rows/cols and a flag telling which land in frame."""
        n1, n2 = self.shape
        rows, cols = np.mgrid[0:n1, 0:n2]
        dr = rows + self.vertical
        dc = cols + self.horizontal
        inside = (dr >= 0) & (dr < n1) & (dc >= 0) & (dc < n2) & ~self.invalid
        return dr, dc, inside


def motion_from_depth(depth: DepthField, cam_src: CameraParams = None,
                      cam_dst: CameraParams = None, baseline: float = 1.0) -> MotionField:
    """Displacement of each reference pixel into the target view.

    Rectified fields shift by ``-baseline * disparity`` columns; calibrated
    fields are reprojected through both cameras.
    """
    n1, n2 = depth.labels.shape
    if depth.rectified:
        shift = np.floor(baseline * depth.values + 0.5).astype(np.int64)
        return MotionField(-shift, np.zeros_like(shift))
    if cam_src is None or cam_dst is None:
        raise ValueError("calibrated depth needs source and destination cameras")
    rows, cols = np.mgrid[0:n1, 0:n2]
    r2, c2, ok = project_points(rows, cols, depth.values, cam_src, cam_dst)
    return MotionField(np.where(ok, c2 - cols, 0), np.where(ok, r2 - rows, 0), ~ok)


def uniform_motion(shape, horizontal: int = 0, vertical: int = 0) -> MotionField:
    return MotionField(np.full(shape, horizontal), np.full(shape, vertical))


@dataclass(frozen=True)
class WarpOperator:
    source: np.ndarray  # source index per destination row, -1 for holes
    shape: tuple

    @property
    def size(self) -> int:
        return self.source.size

    @property
    def hole_rows(self) -> np.ndarray:
        return np.flatnonzero(self.source < 0)

    @property
    def entries(self):
        rows = np.flatnonzero(self.source >= 0)
        return rows, self.source[rows]

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.source >= 0))

    def mask(self) -> np.ndarray:
        """Diagonal of the occlusion mask: 0 on holes, 1 elsewhere."""
        return (self.source >= 0).astype(np.float64)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.size:
            raise DimensionError(f"vector length {x.shape[-1]} != operator size {self.size}")
        valid = self.source >= 0
        y = np.zeros(x.shape, dtype=np.result_type(x, np.float64))
        y[..., valid] = x[..., self.source[valid]]
        return y

    def apply_transpose(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if y.shape[-1] != self.size:
            raise DimensionError(f"vector length {y.shape[-1]} != operator size {self.size}")
        valid = self.source >= 0
        x = np.zeros(y.shape, dtype=np.result_type(y, np.float64))
        x[..., self.source[valid]] = y[..., valid]
        return x

    def to_sparse(self) -> sp.csr_matrix:
        rows, cols = self.entries
        return sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(self.size, self.size))

    @classmethod
    def identity(cls, shape) -> "WarpOperator":
        return cls(np.arange(shape[0] * shape[1]), tuple(shape))

    def save(self, path, mask_path=None) -> None:
        rows, cols = self.entries
        with open(path, "w") as fh:
            fh.write(f"{self.size} {rows.size}\n")
            for r, c in zip(rows, cols):
                fh.write(f"{r} {c}\n")
        if mask_path is not None:
            with open(mask_path, "w") as fh:
                fh.write("".join("1" if s >= 0 else "0" for s in self.source) + "\n")

    @classmethod
    def load(cls, path, shape) -> "WarpOperator":
        with open(path) as fh:
            n, nnz = (int(t) for t in fh.readline().split())
            pairs = np.loadtxt(fh, dtype=np.int64, ndmin=2) if nnz else np.empty((0, 2), np.int64)
        if n != shape[0] * shape[1] or len(pairs) != nnz:
            raise ValueError("triplet file does not match the declared size")
        source = np.full(n, -1, np.int64)
        source[pairs[:, 0]] = pairs[:, 1]
        return cls(source, tuple(shape))


def build_operator(motion: MotionField):
    """Forward-warp operator and occlusion mask for a motion field.

    Sources are visited in raster order and a later source overwrites an
    earlier one at the same destination. Destinations outside the frame are
    dropped. Returns ``(operator, mask_diagonal)``.
    """
    n1, n2 = motion.shape
    dr, dc, inside = motion.destinations()
    src = np.flatnonzero(inside.ravel())
    dst = (dr * n2 + dc).ravel()[src]
    source = np.full(n1 * n2, -1, np.int64)
    # src is ascending in raster order, so the last writer is the largest index
    np.maximum.at(source, dst, src)
    op = WarpOperator(source, (n1, n2))
    return op, op.mask()

