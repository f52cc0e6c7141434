"""Rate-distortion sweeps, Bjontegaard delta-rate and RD plot files."""

from __future__ import annotations

import csv
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .depth import DepthField
from .pipeline import DepthParams, JointParams, PipelineResult, reconstruct_pipeline

logger = logging.getLogger(__name__)

BD_POINTS = 4


@dataclass(frozen=True)
class RdPoint:
    total_bits: float
    mean_psnr: float
    label: str = ""

    def __post_init__(self):
        if not self.total_bits > 0:
            raise ValueError("total_bits must be positive")
        if not np.isfinite(self.mean_psnr):
            raise ValueError("mean_psnr must be finite")


@dataclass
class RdCurve:
    label: str
    points: list = field(default_factory=list)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.total_bits)
        rates = [p.total_bits for p in self.points]
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ValueError(f"curve {self.label!r}: rates must be strictly increasing")
        psnrs = [p.mean_psnr for p in self.points]
        if any(b < a for a, b in zip(psnrs, psnrs[1:])):
            warnings.warn(f"curve {self.label!r}: PSNR decreases with rate")

    @classmethod
    def from_arrays(cls, label, rates, psnrs) -> "RdCurve":
        return cls(label, [RdPoint(float(r), float(q), label) for r, q in zip(rates, psnrs)])

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.total_bits for p in self.points])

    @property
    def psnrs(self) -> np.ndarray:
        return np.array([p.mean_psnr for p in self.points])

    def __eq__(self, other):
        return (isinstance(other, RdCurve) and self.label == other.label
                and self.points == other.points)


def bjontegaard_rate(reference: RdCurve, test: RdCurve, n_points: int = BD_POINTS) -> float:
    """Average rate difference (percent) of ``test`` against ``reference``.

    A cubic of log10(rate) in PSNR is fitted to the ``n_points`` lowest-rate
    points of each curve and both fits are integrated over the common PSNR
    interval. Negative values mean the test curve needs fewer bits.
    """
    curves = []
    for curve in (reference, test):
        if len(curve.points) < n_points:
            raise ValueError(f"curve {curve.label!r} has fewer than {n_points} points")
        pts = curve.points[:n_points]
        q = np.array([p.mean_psnr for p in pts])
        r = np.log10([p.total_bits for p in pts])
        curves.append((q, np.polyfit(q, r, 3)))
    (q_ref, fit_ref), (q_test, fit_test) = curves
    lo = max(q_ref.min(), q_test.min())
    hi = min(q_ref.max(), q_test.max())
    if not hi > lo:
        raise ValueError("PSNR ranges of the two curves do not overlap")
    int_ref = np.polyint(fit_ref)
    int_test = np.polyint(fit_test)
    area_ref = np.polyval(int_ref, hi) - np.polyval(int_ref, lo)
    area_test = np.polyval(int_test, hi) - np.polyval(int_test, lo)
    avg = (area_test - area_ref) / (hi - lo)
    return float((10.0**avg - 1.0) * 100.0)


def _sweep_point(args):
    views, qp, depth_params, joint, true_depth = args
    return reconstruct_pipeline(views, qp, depth_params, joint, true_depth)


def run_rd_sweep(views, qp_list, depth_params: DepthParams,
                 joint: JointParams = JointParams(), workers: int = 1,
                 true_depth: Optional[DepthField] = None, return_results: bool = False):
    """One pipeline run per quantizer; returns the independent and joint curves."""
    qp_list = list(qp_list)
    if len(qp_list) < BD_POINTS:
        raise ValueError(f"need at least {BD_POINTS} quantizer values")
    jobs = [(views, qp, depth_params, joint, true_depth) for qp in qp_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]
    indep = RdCurve.from_arrays("independent", [r.bits for r in results],
                                [r.mean_independent for r in results])
    joint_curve = RdCurve.from_arrays("joint", [r.bits for r in results],
                                      [r.mean_joint for r in results])
    if return_results:
        return indep, joint_curve, dict(zip(qp_list, results))
    return indep, joint_curve


# --------------------------------------------------------------------------
# Plot files
# --------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def write_curves_csv(curves, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rate_bits", "psnr_db", "label"])
        for curve in curves:
            for p in curve.points:
                writer.writerow([repr(p.total_bits), repr(p.mean_psnr), curve.label])


def read_curves_csv(path) -> list:
    grouped: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            grouped.setdefault(row["label"], []).append(
                RdPoint(float(row["rate_bits"]), float(row["psnr_db"]), row["label"]))
    return [RdCurve(label, pts) for label, pts in grouped.items()]


def _svg(curves, width=640, height=420) -> str:
    margin = 60
    rates = np.concatenate([c.rates for c in curves])
    psnrs = np.concatenate([c.psnrs for c in curves])
    r0, r1 = rates.min(), rates.max()
    q0, q1 = psnrs.min(), psnrs.max()
    r1 = r1 if r1 > r0 else r0 + 1.0
    q1 = q1 if q1 > q0 else q0 + 1.0

    def sx(r):
        return margin + (r - r0) / (r1 - r0) * (width - 2 * margin)

    def sy(q):
        return height - margin - (q - q0) / (q1 - q0) * (height - 2 * margin)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">Total rate (bits)</text>',
        f'<text x="18" y="{height / 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14" transform="rotate(-90 18 {height / 2})">Mean PSNR (dB)</text>',
        f'<text x="{margin}" y="{height - margin + 18}" font-family="sans-serif" '
        f'font-size="11">{r0:.0f}</text>',
        f'<text x="{width - margin}" y="{height - margin + 18}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{r1:.0f}</text>',
        f'<text x="{margin - 6}" y="{height - margin}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{q0:.2f}</text>',
        f'<text x="{margin - 6}" y="{margin + 4}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{q1:.2f}</text>',
    ]
    for k, curve in enumerate(curves):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{sx(p.total_bits):.2f},{sy(p.mean_psnr):.2f}" for p in curve.points)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        parts.append(f'<text x="{width - margin - 4}" y="{margin + 16 * (k + 1)}" '
                     f'text-anchor="end" fill="{color}" font-family="sans-serif" '
                     f'font-size="12">{curve.label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plot(curves, path):
    """Write ``<path>.csv`` and ``<path>.svg``; returns both paths."""
    curves = list(curves)
    if not curves:
        raise ValueError("nothing to plot")
    base = Path(path)
    if base.suffix.lower() in (".csv", ".svg"):
        base = base.with_suffix("")
    csv_path, svg_path = base.with_suffix(".csv"), base.with_suffix(".svg")
    write_curves_csv(curves, csv_path)
    svg_path.write_text(_svg(curves))
    return csv_path, svg_path
