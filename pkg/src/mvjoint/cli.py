"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Logging verbosity comes from ``MVJOINT_LOG`` (error, info or debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .codec import CodecConfig, decode, encode, save_compressed
from .core import load_cameras, load_image, mean_psnr, psnr, save_image
from .depth import (
    DEFAULT_LABELS,
    MAX_SWEEPS,
    DepthField,
    bad_pixel_rate,
    estimate_depth,
    load_depth,
    save_depth,
    save_disparity_view,
)
from .evaluation import RdCurve, bjontegaard_rate, emit_plot, run_rd_sweep
from .pipeline import DepthParams, JointParams, joint_decode
from .prox import TvConfig
from .scenes import KINDS, SceneSpec, generate, write_scene
from .solver import SolverConfig

logger = logging.getLogger("mvjoint")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
DEFAULT_QPS = (50, 45, 40, 35, 30, 25)


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 2."""


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

_SECTIONS = {
    "codec": {"qp"},
    "depth": {"lambda", "tau", "labels", "max_sweeps", "disparity_range", "depth_range",
              "baselines"},
    "solver": {"epsilon1", "epsilon2", "epsilon1_scale", "epsilon2_scale", "iterations",
               "gamma", "relaxation", "tolerance", "tv_iterations", "affine_iterations",
               "use_mask", "feasibility_guard"},
    "eval": {"qp", "workers", "true_depth", "bad_pixel_threshold"},
}
_TOP = {"views", "scene", "cameras", "ground_truth", *_SECTIONS}
_SCENE = {"kind", "height", "width", "shift", "foreground_shift", "baselines", "seed"}


@dataclass
class RunConfig:
    views: list = field(default_factory=list)
    scene: Optional[SceneSpec] = None
    cameras: Optional[list] = None
    ground_truth: Optional[str] = None
    codec: dict = field(default_factory=dict)
    depth: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    eval: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def _check_keys(block, allowed, where):
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown field {unknown[0]!r}")


def _range(value, name):
    if isinstance(value, str):
        value = value.split(":")
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected MIN:MAX, got {value!r}") from None
    if hi < lo:
        raise ConfigError(f"{name}: MIN exceeds MAX")
    return lo, hi


def parse_config(text: str, base_dir=".", require_views: bool = True) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    _check_keys(raw, _TOP, "config")
    for name, keys in _SECTIONS.items():
        _check_keys(raw.get(name, {}), keys, name)
    cfg = RunConfig(base_dir=Path(base_dir))
    for name in _SECTIONS:
        setattr(cfg, name, dict(raw.get(name, {})))
    if "scene" in raw:
        _check_keys(raw["scene"], _SCENE, "scene")
        scene = dict(raw["scene"])
        if "baselines" in scene:
            scene["baselines"] = tuple(scene["baselines"])
        try:
            cfg.scene = SceneSpec(**scene)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scene: {exc}") from None
    views = raw.get("views")
    if views is None:
        if require_views and cfg.scene is None:
            raise ConfigError("missing required field 'views'")
        views = []
    if not isinstance(views, list) or not all(isinstance(v, str) for v in views):
        raise ConfigError("views: expected a list of image paths")
    if views and len(views) < 2:
        raise ConfigError("views: need at least two images")
    cfg.views = views
    cfg.cameras = raw.get("cameras")
    cfg.ground_truth = raw.get("ground_truth")
    for key in ("qp",):
        for section in (cfg.codec, cfg.eval):
            if key in section:
                section[key] = _qp_list(section[key])
    if "disparity_range" in cfg.depth:
        cfg.depth["disparity_range"] = _range(cfg.depth["disparity_range"], "depth.disparity_range")
    if "depth_range" in cfg.depth:
        cfg.depth["depth_range"] = _range(cfg.depth["depth_range"], "depth.depth_range")
    return cfg


def load_config(path, require_views: bool = True) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path.parent, require_views)


def _qp_list(value):
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    if isinstance(value, (int, float)):
        value = [value]
    try:
        qps = [int(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"qp: expected a comma separated list of integers, got {value!r}") from None
    if not qps or any(q < 1 for q in qps):
        raise ConfigError("qp: values must be positive integers")
    return qps


def parameter_header(depth: DepthParams, joint: JointParams) -> list:
    """Lines echoing the model parameters at the top of report files."""
    e1 = "auto" if joint.epsilon1 is None else f"{joint.epsilon1:g}"
    e2 = "auto" if joint.epsilon2 is None else f"{joint.epsilon2:g}"
    mode = (f"rectified {depth.disparity_range[0]:g}:{depth.disparity_range[1]:g}"
            if depth.disparity_range is not None else "calibrated")
    labels = (int(depth.disparity_range[1] - depth.disparity_range[0]) + 1
              if depth.disparity_range is not None else depth.label_count)
    return [
        f"# depth: lambda={depth.lam:g} tau={depth.tau:g} labels={labels} mode={mode}",
        f"# solver: epsilon1={e1} epsilon2={e2} iterations={joint.solver.outer_iterations} "
        f"gamma={joint.solver.gamma:g}",
    ]


# --------------------------------------------------------------------------
# Building parameters from config plus flags
# --------------------------------------------------------------------------


def _views(cfg: RunConfig, args):
    """Originals (or pre-decoded images) and ground truth when available."""
    scene = None
    if cfg.views:
        views = [load_image(cfg.path(p)) for p in cfg.views]
    elif cfg.scene is not None:
        spec = cfg.scene if args.seed is None else replace(cfg.scene, seed=args.seed)
        scene = generate(spec)
        views = scene.views
    else:
        raise ConfigError("missing required field 'views'")
    return views, scene


def _depth_params(cfg: RunConfig, args, n_views: int, scene=None) -> DepthParams:
    d = cfg.depth
    cameras_paths = getattr(args, "cameras", None) or cfg.cameras
    disparity_range = d.get("disparity_range")
    if getattr(args, "rectified", None):
        disparity_range = _range(args.rectified, "--rectified")
    cameras = None
    if cameras_paths:
        cameras = []
        for p in cameras_paths:
            cameras.extend(load_cameras(cfg.path(p)))
        if len(cameras) != n_views:
            raise ConfigError(f"cameras: expected {n_views} cameras, found {len(cameras)}")
        disparity_range = None
        if "depth_range" not in d and not getattr(args, "depth_range", None):
            raise ConfigError("depth.depth_range is required with cameras")
    baselines = d.get("baselines")
    if disparity_range is None and cameras is None:
        if scene is None:
            raise ConfigError("give --rectified MIN:MAX, depth.disparity_range or cameras")
        disparity_range = (0, scene.spec.max_disparity)
    if baselines is None and scene is not None and cameras is None:
        baselines = scene.baselines
    if baselines is not None and len(baselines) != n_views - 1:
        raise ConfigError("depth.baselines: one value per non-reference view is required")
    depth_range = d.get("depth_range")
    if getattr(args, "depth_range", None):
        depth_range = _range(args.depth_range, "--depth-range")
    lam = getattr(args, "lam", None)
    return DepthParams(
        disparity_range=None if disparity_range is None else tuple(int(v) for v in disparity_range),
        baselines=None if baselines is None else tuple(float(b) for b in baselines),
        cameras=None if cameras is None else tuple(cameras),
        depth_range=depth_range,
        label_count=int(d.get("labels", DEFAULT_LABELS)),
        lam=float(lam if lam is not None else d.get("lambda", 190.0)),
        tau=float(d.get("tau", 4.0)),
        max_sweeps=int(d.get("max_sweeps", MAX_SWEEPS)),
    )


def _joint_params(cfg: RunConfig, args=None) -> JointParams:
    s = cfg.solver
    e1 = getattr(args, "epsilon1", None) if args is not None else None
    e2 = getattr(args, "epsilon2", None) if args is not None else None
    e1 = e1 if e1 is not None else s.get("epsilon1")
    e2 = e2 if e2 is not None else s.get("epsilon2")
    solver = SolverConfig(
        outer_iterations=int(s.get("iterations", 100)),
        gamma=float(s.get("gamma", 10.0)),
        relaxation=float(s.get("relaxation", 1.0)),
        tolerance=float(s.get("tolerance", 1e-4)),
        affine_iterations=int(s.get("affine_iterations", 50)),
        tv=TvConfig(inner_iterations=int(s.get("tv_iterations", 30))),
    )
    return JointParams(
        epsilon1=None if e1 is None else float(e1),
        epsilon2=None if e2 is None else float(e2),
        epsilon1_scale=float(s.get("epsilon1_scale", 0.2)),
        epsilon2_scale=float(s.get("epsilon2_scale", 0.01)),
        use_mask=bool(s.get("use_mask", True)),
        feasibility_guard=bool(s.get("feasibility_guard", False)),
        solver=solver,
    )


def _ground_truth(cfg: RunConfig, scene, depth_params: DepthParams) -> Optional[DepthField]:
    if cfg.ground_truth:
        return load_depth(cfg.path(cfg.ground_truth))
    if scene is not None and depth_params.disparity_range is not None:
        return scene.true_depth(depth_params.disparity_range)
    return None


def _config_from_args(args, require_views=True) -> RunConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config, require_views=require_views and not getattr(args, "views", None))
    else:
        cfg = RunConfig()
    if getattr(args, "views", None):
        cfg.views = [str(Path(v).resolve()) for v in args.views]
    if require_views and not cfg.views and cfg.scene is None:
        raise ConfigError("missing required field 'views'")
    return cfg


def _qps(cfg: RunConfig, args, fallback=DEFAULT_QPS):
    if getattr(args, "qp", None):
        return _qp_list(args.qp)
    return cfg.eval.get("qp") or cfg.codec.get("qp") or list(fallback)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_synth(args) -> int:
    if args.config:
        cfg = load_config(args.config, require_views=False)
        spec = cfg.scene or SceneSpec()
    else:
        spec = SceneSpec()
    overrides = {k: v for k, v in (("kind", args.kind), ("shift", args.shift),
                                   ("foreground_shift", args.foreground_shift),
                                   ("seed", args.seed)) if v is not None}
    if args.size:
        overrides["height"] = overrides["width"] = args.size
    if args.baselines:
        overrides["baselines"] = tuple(float(b) for b in args.baselines.split(","))
    try:
        spec = replace(spec, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    paths = write_scene(generate(spec), args.out)
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_compress(args) -> int:
    cfg = _config_from_args(args)
    qps = _qps(cfg, args, fallback=(CodecConfig().quality,))
    if len(qps) != 1:
        raise ConfigError("compress takes a single --qp value")
    views, _ = _views(cfg, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = CodecConfig(qps[0])
    total = 0.0
    for j, view in enumerate(views, start=1):
        c = encode(view, config)
        rec = decode(c)
        save_compressed(c, out / f"view{j}.mvjc")
        save_image(rec, out / f"view{j}_decoded.pgm")
        total += c.estimated_bits
        print(f"view{j}: {c.estimated_bits:.0f} bits, PSNR {psnr(view, rec):.3f} dB")
    (out / "bits.json").write_text(json.dumps({"qp": qps[0], "total_bits": total}, indent=1))
    print(f"total: {total:.0f} bits")
    return EXIT_OK


def cmd_depth(args) -> int:
    cfg = _config_from_args(args)
    views, scene = _views(cfg, args)
    params = _depth_params(cfg, args, len(views), scene)
    depth = estimate_depth(params.problem(views))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_depth(depth, out / "depth.pgm")
    save_disparity_view(depth, out / "disparity_view.pgm")
    truth = _ground_truth(cfg, scene, params)
    if truth is not None:
        rate = bad_pixel_rate(depth.values, truth.values)
        print(f"bad pixels: {100 * rate:.2f}%")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = _config_from_args(args)
    decoded, scene = _views(cfg, args)
    params = _depth_params(cfg, args, len(decoded), scene)
    joint = _joint_params(cfg, args)
    qp = args.qp_single
    if (joint.epsilon1 is None or joint.epsilon2 is None) and qp is None:
        raise ConfigError("give --epsilon1/--epsilon2 or the --qp used by the codec")
    depth = load_depth(args.depth) if args.depth else None
    rec, depth, report = joint_decode(decoded, params, joint, qp, depth)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for j, img in enumerate(rec, start=1):
        save_image(img, out / f"view{j}_joint.pgm")
    save_depth(depth, out / "depth.pgm")
    report.to_csv(out / "solve.csv")
    print(f"iterations: {report.iterations[-1]}, objective {report.objective[-1]:.6g}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if len(args.originals) != len(args.images):
        raise ConfigError("--originals and --images must list the same number of files")
    originals = [load_image(p) for p in args.originals]
    images = [load_image(p) for p in args.images]
    for j, (o, i) in enumerate(zip(originals, images), start=1):
        print(f"view{j}: {psnr(o, i):.3f} dB")
    print(f"mean: {mean_psnr(originals, images):.3f} dB")
    if args.bits is not None:
        print(f"rate: {args.bits:g} bits")
    if args.depth and args.truth:
        rate = bad_pixel_rate(load_depth(args.depth).values, load_depth(args.truth).values)
        print(f"bad pixels: {100 * rate:.2f}%")
    return EXIT_OK


def _sweep(cfg, args, out: Path, write_images: bool):
    qps = _qps(cfg, args)
    views, scene = _views(cfg, args)
    depth_params = _depth_params(cfg, args, len(views), scene)
    joint = _joint_params(cfg, args)
    workers = args.workers or int(cfg.eval.get("workers", 1))
    truth = _ground_truth(cfg, scene, depth_params)
    out.mkdir(parents=True, exist_ok=True)
    indep, joint_curve, results = run_rd_sweep(views, qps, depth_params, joint, workers=workers,
                                               return_results=True)
    curves = [indep, joint_curve]
    if cfg.eval.get("true_depth") and truth is not None:
        _, upper, _ = run_rd_sweep(views, qps, depth_params, joint, workers=workers,
                                   true_depth=truth, return_results=True)
        curves.append(RdCurve("joint-true-depth", [replace(p, label="joint-true-depth")
                                                   for p in upper.points]))
    csv_path, svg_path = emit_plot(curves, out / "rd")
    lines = parameter_header(depth_params, joint)
    lines.append(f"# qp: {','.join(str(q) for q in qps)}")
    lines.append("qp,total_bits,independent_psnr,joint_psnr,bad_pixel_percent")
    threshold = float(cfg.eval.get("bad_pixel_threshold", 1.0))
    for qp, res in results.items():
        bad = ""
        if truth is not None:
            bad = f"{100 * bad_pixel_rate(res.depth.values, truth.values, threshold=threshold):.2f}"
        lines.append(f"{qp},{res.bits:.0f},{res.mean_independent:.4f},{res.mean_joint:.4f},{bad}")
        if write_images:
            sub = out / f"qp{qp}"
            sub.mkdir(exist_ok=True)
            for j, (d, r) in enumerate(zip(res.decoded, res.reconstructed), start=1):
                save_image(d, sub / f"view{j}_decoded.pgm")
                save_image(r, sub / f"view{j}_joint.pgm")
            save_depth(res.depth, sub / "depth.pgm")
            save_disparity_view(res.depth, sub / "disparity_view.pgm")
            if res.report is not None:
                res.report.to_csv(sub / "solve.csv")
    if len(indep.points) >= 4:
        try:
            bd = bjontegaard_rate(indep, joint_curve)
            lines.append(f"# bd_rate_joint_vs_independent: {bd:.3f}%")
        except ValueError as exc:
            lines.append(f"# bd_rate_joint_vs_independent: unavailable ({exc})")
    report = out / "report.txt"
    report.write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    print(f"wrote {csv_path}, {svg_path}, {report}")
    return EXIT_OK


def cmd_rd(args) -> int:
    cfg = _config_from_args(args)
    return _sweep(cfg, args, Path(args.out), write_images=False)


def cmd_full(args) -> int:
    cfg = _config_from_args(args)
    return _sweep(cfg, args, Path(args.out), write_images=True)


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _common(p, views=True, out_default="out"):
    p.add_argument("--config", help="JSON config with codec/depth/solver/eval sections")
    p.add_argument("--out", default=out_default, help="output directory")
    p.add_argument("--seed", type=int, help="seed for synthetic scenes")
    if views:
        p.add_argument("views", nargs="*", help="view images, reference first")


def _geometry(p):
    p.add_argument("--rectified", metavar="MIN:MAX", help="disparity range of rectified views")
    p.add_argument("--cameras", nargs="+", metavar="PATH", help="camera JSON files (calibrated mode)")
    p.add_argument("--depth-range", metavar="MIN:MAX", help="depth range in calibrated mode")
    p.add_argument("--lambda", dest="lam", type=float, help="smoothness weight")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvjoint",
                                     description="Joint decoding of compressed multi-view images.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic scene with ground truth")
    _common(p, views=False, out_default="scene")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--size", type=int, help="image height and width")
    p.add_argument("--shift", type=int, help="plane (or background) disparity")
    p.add_argument("--foreground-shift", type=int)
    p.add_argument("--baselines", help="comma separated baseline factors, one per extra view")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compress", help="encode and decode every view")
    _common(p)
    p.add_argument("--qp", help="quantizer")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("depth", help="estimate depth from decoded views")
    _common(p)
    _geometry(p)
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("reconstruct", help="joint reconstruction of decoded views")
    _common(p)
    _geometry(p)
    p.add_argument("--depth", help="depth PGM (with JSON sidecar); estimated when omitted")
    p.add_argument("--epsilon1", type=float)
    p.add_argument("--epsilon2", type=float)
    p.add_argument("--qp", dest="qp_single", type=int,
                   help="quantizer used by the codec, sets the radii when epsilons are not given")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="PSNR of images against originals")
    p.add_argument("--originals", nargs="+", required=True)
    p.add_argument("--images", nargs="+", required=True)
    p.add_argument("--bits", type=float, help="total bits spent on the images")
    p.add_argument("--depth", help="estimated depth PGM")
    p.add_argument("--truth", help="ground-truth depth PGM")
    p.set_defaults(func=cmd_evaluate)

    for name, func, text in (("rd", cmd_rd, "rate-distortion sweep"),
                             ("full", cmd_full, "sweep plus reconstructions and depth maps")):
        p = sub.add_parser(name, help=text)
        _common(p, out_default="results")
        _geometry(p)
        p.add_argument("--qp", help="comma separated quantizers")
        p.add_argument("--workers", type=int, help="parallel sweep points")
        p.add_argument("--epsilon1", type=float)
        p.add_argument("--epsilon2", type=float)
        p.set_defaults(func=func)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("MVJOINT_LOG", "error").lower()
    if level not in LOG_LEVELS:
        raise ConfigError(f"MVJOINT_LOG must be one of {sorted(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        _setup_logging()
        if getattr(args, "workers", None) is not None and args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"mvjoint: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        logger.debug("failure", exc_info=True)
        print(f"mvjoint: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
