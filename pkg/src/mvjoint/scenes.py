"""Synthetic rectified multi-view scenes with exact ground truth.

Views follow the rectified convention used throughout: a reference pixel
``(m, n)`` with disparity ``d`` appears at ``(m, n - b_j * d)`` in view j,
where ``b_j`` is the view's baseline factor (the reference has ``b = 0``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import save_image
from .depth import DepthField, save_depth
from .warp import build_operator, motion_from_depth

KINDS = ("translated-plane", "two-plane-occlusion", "textured-ramp")


@dataclass(frozen=True)
class SceneSpec:
    kind: str = "translated-plane"
    height: int = 64
    width: int = 64
    shift: int = 3  # plane disparity (background for two-plane)
    foreground_shift: int = 6
    baselines: tuple = (1,)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scene kind {self.kind!r}; choose from {KINDS}")
        if self.height < 8 or self.width < 8:
            raise ValueError("scenes must be at least 8x8")
        if self.shift < 0 or self.foreground_shift < 0:
            raise ValueError("shifts must be non-negative")
        if not self.baselines:
            raise ValueError("need at least one non-reference view")

    @property
    def max_disparity(self) -> int:
        if self.kind == "translated-plane":
            return self.shift
        if self.kind == "two-plane-occlusion":
            return max(self.shift, self.foreground_shift)
        return max(self.shift, self.foreground_shift)


@dataclass
class Scene:
    spec: SceneSpec
    views: list
    disparity: np.ndarray  # ground-truth disparity of the reference view
    holes: list = field(default_factory=list)  # per non-reference view, bool grids

    @property
    def baselines(self):
        return list(self.spec.baselines)

    def true_depth(self, disparity_range=None) -> DepthField:
        lo, hi = disparity_range or (0, self.spec.max_disparity)
        return DepthField(self.disparity - lo, np.arange(lo, hi + 1))

    def occlusion_mask(self):
        """Reference pixels visible in every other view (no border exit and
        not overwritten by a later source)."""
        visible = np.ones(self.disparity.shape, bool)
        depth = self.true_depth()
        for b in self.baselines:
            op, _ = build_operator(motion_from_depth(depth, baseline=b))
            used = np.zeros(op.size, bool)
            _, cols = op.entries
            used[cols] = True
            visible &= used.reshape(self.disparity.shape)
        return visible


def texture(shape, rng: np.random.Generator) -> np.ndarray:
    """Piecewise-smooth random image with edges and mid-frequency detail."""
    h, w = shape
    img = gaussian_filter(rng.standard_normal(shape), 4.0)
    img *= 45.0 / (img.std() + 1e-12)
    rows, cols = np.mgrid[0:h, 0:w]
    for _ in range(max(3, h * w // 600)):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ry, rx = rng.uniform(3, 12, size=2)
        level = rng.uniform(-50, 50)
        if rng.random() < 0.5:
            inside = (np.abs(rows - cy) < ry) & (np.abs(cols - cx) < rx)
        else:
            inside = ((rows - cy) / ry) ** 2 + ((cols - cx) / rx) ** 2 < 1
        img[inside] += level
    detail = gaussian_filter(rng.standard_normal(shape), 1.0)
    img += detail * (12.0 / (detail.std() + 1e-12))
    return np.clip(img + 128.0, 0.0, 255.0)


def _translated(spec: SceneSpec, rng):
    h, w, d = spec.height, spec.width, spec.shift
    pad = int(np.ceil(max(abs(b) for b in spec.baselines) * d)) + 1
    tex = texture((h, w + 2 * pad), rng)
    cols = np.arange(w)
    views = [tex[:, pad + cols]]
    for b in spec.baselines:
        views.append(tex[:, pad + cols + int(round(b * d))])
    return views, np.full((h, w), d, np.int64)


def _two_plane(spec: SceneSpec, rng):
    h, w = spec.height, spec.width
    db, df = spec.shift, spec.foreground_shift
    pad = int(np.ceil(max(abs(b) for b in spec.baselines) * max(db, df))) + 1
    bg = texture((h, w + 2 * pad), rng)
    fg = texture((h, w + 2 * pad), rng)
    r0, r1 = h // 4, h - h // 4
    c0, c1 = w // 4, w - w // 4
    rows, cols = np.mgrid[0:h, 0:w]

    def render(b):
        ref_fg = cols + int(round(b * df))
        on_fg = (rows >= r0) & (rows < r1) & (ref_fg >= c0) & (ref_fg < c1)
        ref_bg = cols + int(round(b * db))
        return np.where(on_fg, fg[rows, pad + np.clip(ref_fg, -pad, w + pad - 1)],
                        bg[rows, pad + ref_bg])

    views = [render(0)] + [render(b) for b in spec.baselines]
    disp = np.full((h, w), db, np.int64)
    disp[r0:r1, c0:c1] = df
    return views, disp


def _ramp(spec: SceneSpec, rng):
    h, w = spec.height, spec.width
    d0, d1 = spec.shift, spec.foreground_shift
    disp = np.floor(d0 + (d1 - d0) * np.arange(w) / max(w - 1, 1) + 0.5).astype(np.int64)
    disp = np.broadcast_to(disp, (h, w)).copy()
    ref = texture((h, w), rng)
    depth = DepthField(disp, np.arange(0, max(d0, d1) + 1))
    views = [ref]
    for b in spec.baselines:
        op, _ = build_operator(motion_from_depth(depth, baseline=b))
        fill = texture((h, w), rng).ravel()
        warped = op.apply(ref.ravel())
        warped[op.hole_rows] = fill[op.hole_rows]
        views.append(warped.reshape(h, w))
    return views, disp


def generate(spec: SceneSpec) -> Scene:
    rng = np.random.default_rng(spec.seed)
    builder = {"translated-plane": _translated, "two-plane-occlusion": _two_plane,
               "textured-ramp": _ramp}[spec.kind]
    views, disp = builder(spec, rng)
    scene = Scene(spec, [np.asarray(v, dtype=np.float64) for v in views], disp)
    depth = scene.true_depth()
    for b in spec.baselines:
        op, _ = build_operator(motion_from_depth(depth, baseline=b))
        scene.holes.append((op.source < 0).reshape(disp.shape))
    return scene


def write_scene(scene: Scene, out_dir) -> list:
    """Write views, ground-truth disparity and hole masks; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for j, view in enumerate(scene.views, start=1):
        p = out / f"view{j}.pgm"
        save_image(view, p)
        paths.append(p)
    p = out / "disparity.pgm"
    save_depth(scene.true_depth(), p)
    paths.append(p)
    for j, holes in enumerate(scene.holes, start=2):
        p = out / f"holes{j}.pgm"
        save_image(holes.astype(float) * 255.0, p)
        paths.append(p)
    return paths
