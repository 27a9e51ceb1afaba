"""``foggen`` command line interface.

Exit codes: 0 success, 1 processing error, 2 bad arguments. Progress and
errors go to stderr; machine-readable results go to files or stdout.
"""
import argparse
import json
import logging
import os
from pathlib import Path
import sys
import warnings

import numpy as np

from . import io
from .classes import CLASS_NAMES, FREQUENT_CLASSES
from .core import CameraRig
from .dataset import (
    build_dataset,
    build_ssl_manifest,
    discover_inputs,
    instances_to_bboxes,
    sky_criterion,
)
from .depth import denoise_and_complete
from .evaluation import (
    DEFAULT_BIN_EDGES,
    confusion_accumulate,
    distance_binned_iou,
    mean_iou,
    per_class_iou,
)
from .fog import FogBoundWarning, estimate_atmospheric_light, fog_from_depth, mor_from_beta
from .params import DEFAULT_BETAS, DEFAULT_SEED, FOG_BETA_MIN, PipelineParams

log = logging.getLogger("foggen")

# (dest, flag, type, help) for every tunable pipeline constant
PARAM_FLAGS = [
    ("epsilon", "--epsilon", float, "photo-consistency RGB threshold (default 12/255 = 0.0471)"),
    ("k_hat", "--k-hat", int, "target SLIC superpixel count (default 2048)"),
    ("m", "--compactness", float, "SLIC compactness m, also used in alpha = m^2/S^2 (default 10)"),
    ("P", "--min-valid", int, "reliability: minimum valid pixels P (default 20)"),
    ("lambda_", "--valid-fraction", float, "reliability: minimum valid fraction lambda (default 0.6)"),
    ("ransac_max_iters", "--ransac-max-iters", int, "RANSAC iteration cap (default 2000)"),
    ("ransac_p", "--ransac-p", float, "RANSAC confidence p (default 0.99)"),
    ("theta_factor", "--theta-factor", float, "RANSAC inlier threshold = factor * median depth (default 0.01)"),
    ("theta_hat", "--theta-hat", float, "outlier replacement margin in meters (default 50)"),
    ("depth_floor", "--depth-floor", float, "minimum completed depth in meters (default 0.1)"),
    ("radius", "--radius", int, "guided filter window radius r (default 20)"),
    ("mu", "--mu", float, "guided filter regularization mu (default 1e-3)"),
]


class ProcessingError(Exception):
    pass


def add_param_args(parser):
    group = parser.add_argument_group("pipeline parameters")
    for dest, flag, typ, help_ in PARAM_FLAGS:
        group.add_argument(flag, dest=dest, type=typ, default=None, help=help_)
    group.add_argument("--config", type=Path, help="JSON file of parameters; flags take precedence")
    group.add_argument(
        "--seed", type=int, default=None, help=f"global random seed (default {DEFAULT_SEED})"
    )


def load_config(path):
    if path is None:
        return {}
    if not path.is_file():
        raise ProcessingError(f"config file not found: {path}")
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ProcessingError(f"{path}: config must be a JSON object")
    return cfg


def resolve(args):
    """Merge defaults < config file < command-line flags."""
    cfg = load_config(getattr(args, "config", None))
    names = PipelineParams.__dataclass_fields__
    merged = {k: v for k, v in cfg.items() if k in names}
    for dest, *_ in PARAM_FLAGS:
        if getattr(args, dest, None) is not None:
            merged[dest] = getattr(args, dest)
    params = PipelineParams.from_dict(merged)
    seed = args.seed if args.seed is not None else cfg.get("seed", DEFAULT_SEED)
    threads = getattr(args, "threads", None)
    if threads is None:
        threads = cfg.get("threads") or int(os.environ.get("FOGGEN_THREADS", "1"))
    return params, int(seed), int(threads), cfg


def require_files(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise ProcessingError(f"input file not found: {p}")


def write_json_out(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        io.atomic_write_bytes(out, text.encode())


def _load_frame(args):
    require_files(args.left, args.right, args.disparity, args.camera)
    left = io.read_image(args.left)
    right = io.read_image(args.right)
    disparity = io.read_disparity(args.disparity)
    rig = CameraRig.load(args.camera)
    rig.check_bounds(left.shape[1], left.shape[0])
    return left, right, disparity, rig


def cmd_simulate(args):
    params, seed, _, _ = resolve(args)
    if args.beta < 0:
        raise ProcessingError("beta must be >= 0")
    if args.beta < FOG_BETA_MIN:
        log.warning("beta=%g is below fog bound 2.996e-3 1/m (visibility above 1 km)", args.beta)
    left, right, disparity, rig = _load_frame(args)
    depth = denoise_and_complete(left, right, disparity, rig, params, seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FogBoundWarning)
        result = fog_from_depth(left, depth, rig, args.beta, params)
    io.write_image(args.out, result.foggy)
    sidecar_path = args.sidecar or Path(args.out).with_suffix(".json")
    io.write_json(
        sidecar_path,
        {
            "beta": args.beta,
            "mor_m": mor_from_beta(args.beta) if args.beta > 0 else None,
            "atmospheric_light": result.light.to_dict(),
            "seed": seed,
            "params_sha256": params.sha256(),
        },
    )
    if args.save_transmission:
        io.write_transmission(args.save_transmission, result.transmission)
    if args.save_depth:
        io.write_metric(args.save_depth, result.depth)
    if args.save_distance:
        io.write_metric(args.save_distance, result.distance)
    log.info("wrote %s", args.out)
    return 0


def cmd_depth(args):
    params, seed, _, _ = resolve(args)
    left, right, disparity, rig = _load_frame(args)
    depth = denoise_and_complete(left, right, disparity, rig, params, seed)
    io.write_metric(args.out, depth.depth)
    if args.save_superpixels:
        io.write_labels(args.save_superpixels, depth.segmentation.labels)
    log.info(
        "wrote %s (%d superpixels, %d matched)",
        args.out, depth.segmentation.n_segments, len(depth.assignment),
    )
    return 0


def cmd_dataset(args):
    params, seed, threads, cfg = resolve(args)
    betas = args.betas or cfg.get("betas") or list(DEFAULT_BETAS)
    for b in betas:
        if b < FOG_BETA_MIN:
            log.warning("beta=%g is below fog bound 2.996e-3 1/m", b)
    if not Path(args.input).is_dir():
        raise ProcessingError(f"input directory not found: {args.input}")
    if args.allowlist is not None:
        require_files(args.allowlist)
    with warnings.catch_warnings():
        # the per-beta check already warned once above
        warnings.simplefilter("ignore", FogBoundWarning)
        report = build_dataset(
            args.input, args.output, betas, params, seed, threads, args.allowlist
        )
    log.info(
        "%d files written, %d rejected, %d errors",
        len(report.written), len(report.rejects), len(report.errors),
    )
    return 0 if report.ok else 1


def _pair_files(pred, gt, distance):
    pred, gt = Path(pred), Path(gt)
    if gt.is_dir():
        gts = sorted(gt.glob("*.png"))
        preds = [pred / g.name for g in gts]
        dists = [Path(distance) / g.name for g in gts] if distance else None
    else:
        gts, preds = [gt], [pred]
        dists = [Path(distance)] if distance else None
    require_files(*gts, *preds, *(dists or []))
    return preds, gts, dists


def cmd_eval(args):
    preds, gts, dists = _pair_files(args.pred, args.gt, args.distance)
    pred_maps = [io.read_labels(p) for p in preds]
    gt_maps = [io.read_labels(g) for g in gts]
    cm = None
    for p, g in zip(pred_maps, gt_maps):
        cm = confusion_accumulate(p, g, cm)
    ious = per_class_iou(cm)
    try:
        frequent = mean_iou(cm, FREQUENT_CLASSES)
    except ValueError:
        frequent = None
    out = {
        "per_class_iou": {
            n: (None if np.isnan(v) else float(v)) for n, v in zip(CLASS_NAMES, ious)
        },
        "mean_iou_all": mean_iou(cm),
        "mean_iou_frequent": frequent,
        "per_bin": [],
    }
    if dists:
        bins = args.bins or list(DEFAULT_BIN_EDGES)
        out["per_bin"] = distance_binned_iou(
            pred_maps, gt_maps, [io.read_metric(d) for d in dists], bins
        )
    write_json_out(out, args.out)
    return 0


def cmd_bboxes(args):
    require_files(*args.instances)
    out = {}
    for path in args.instances:
        boxes = instances_to_bboxes(io.read_png(path))
        out[Path(path).name] = [b.to_dict() for b in boxes]
    write_json_out(out if len(args.instances) > 1 else next(iter(out.values())), args.out)
    return 0


def read_list(path):
    require_files(path)
    items = []
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        items.append((cols[0], cols[1] if len(cols) > 1 else ""))
    return items


def cmd_manifest(args):
    seed = args.seed if args.seed is not None else DEFAULT_SEED
    manifest = build_ssl_manifest(read_list(args.labeled), read_list(args.pseudo), args.w, seed)
    if args.out is None:
        sys.stdout.write(manifest.to_ndjson())
    else:
        manifest.write(args.out)
    log.info("lambda = %.6g, %d entries", manifest.lam, len(manifest.entries))
    return 0


def cmd_filter_sky(args):
    if args.input:
        items = [(it.name, it.left, it.labels) for it in discover_inputs(args.input)]
    else:
        if not (args.image and args.labels):
            raise ProcessingError("give --input, or both --image and --labels")
        items = [(Path(args.image).stem, Path(args.image), Path(args.labels))]
    for name, image, labels in items:
        require_files(image)
        light = estimate_atmospheric_light(io.read_image(image))
        rec = {"name": name, "pixel": list(light.pixel), "rgb": list(light.color)}
        rec["sky"] = sky_criterion(light, io.read_labels(labels)) if labels else None
        sys.stdout.write(json.dumps(rec) + "\n")
    return 0


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="foggen", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def stereo_args(p):
        p.add_argument("--left", type=Path, required=True, help="clear left image (PNG)")
        p.add_argument("--right", type=Path, required=True, help="right stereo image (PNG)")
        p.add_argument("--disparity", type=Path, required=True, help="16-bit disparity PNG")
        p.add_argument("--camera", type=Path, required=True, help="camera JSON")

    p = sub.add_parser("simulate", help="add fog to one stereo frame", formatter_class=fmt)
    stereo_args(p)
    p.add_argument("--beta", type=float, required=True,
                   help="attenuation coefficient in 1/m; fog needs >= 2.996e-3")
    p.add_argument("--out", type=Path, required=True, help="foggy 8-bit PNG")
    p.add_argument("--sidecar", type=Path, help="sidecar JSON (default: --out with .json)")
    p.add_argument("--save-transmission", type=Path, help="16-bit PNG, round(t*65535)")
    p.add_argument("--save-depth", type=Path, help="16-bit PNG, round(meters*256)")
    p.add_argument("--save-distance", type=Path, help="16-bit PNG, round(meters*256)")
    add_param_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("depth", help="denoise and complete depth", formatter_class=fmt)
    stereo_args(p)
    p.add_argument("--out", type=Path, required=True, help="16-bit depth PNG, round(meters*256)")
    p.add_argument("--save-superpixels", type=Path, help="16-bit superpixel label PNG")
    add_param_args(p)
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("dataset", help="build multi-beta foggy dataset", formatter_class=fmt)
    p.add_argument("--input", type=Path, required=True, help="input tree root")
    p.add_argument("--output", type=Path, required=True, help="output tree root")
    p.add_argument("--betas", type=float, nargs="+",
                   help="attenuation coefficients (default 0.005 0.01 0.02 0.03 0.06)")
    p.add_argument("--allowlist", type=Path, help="names of images judged overcast, one per line")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default $FOGGEN_THREADS or 1)")
    add_param_args(p)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("eval", help="mean IoU and distance-binned IoU", formatter_class=fmt)
    p.add_argument("--pred", type=Path, required=True, help="prediction PNG or directory")
    p.add_argument("--gt", type=Path, required=True, help="ground-truth trainId PNG or directory")
    p.add_argument("--distance", type=Path, help="distance PNG(s), round(meters*256)")
    p.add_argument("--bins", type=float, nargs="+",
                   help="bin edges in meters (default 0 20 50 80 120 160 230 400 inf)")
    p.add_argument("--out", type=Path, help="output JSON (default stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bboxes", help="bounding boxes from instance maps", formatter_class=fmt)
    p.add_argument("--instances", type=Path, nargs="+", required=True)
    p.add_argument("--out", type=Path, help="output JSON (default stdout)")
    p.set_defaults(func=cmd_bboxes)

    p = sub.add_parser("manifest", help="1:w labeled/pseudo-labeled stream", formatter_class=fmt)
    p.add_argument("--labeled", type=Path, required=True, help="TSV: foggy_path<TAB>label_path")
    p.add_argument("--pseudo", type=Path, required=True, help="TSV: foggy_path<TAB>label_path")
    p.add_argument("--w", type=float, default=5.0, help="pseudo-to-labeled ratio w")
    p.add_argument("--seed", type=int, default=None, help=f"random seed (default {DEFAULT_SEED})")
    p.add_argument("--out", type=Path, help="NDJSON output (default stdout)")
    p.set_defaults(func=cmd_manifest)

    p = sub.add_parser("filter-sky", help="check the atmospheric-light sky criterion",
                       formatter_class=fmt)
    p.add_argument("--input", type=Path, help="input tree root")
    p.add_argument("--image", type=Path, help="single clear image")
    p.add_argument("--labels", type=Path, help="trainId label PNG for --image")
    p.set_defaults(func=cmd_filter_sky)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    logging.captureWarnings(True)
    try:
        return args.func(args)
    except (ProcessingError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
