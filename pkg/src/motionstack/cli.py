"""Single executable exposing every pipeline stage as a subcommand.

Exit codes: 0 success, 1 usage error (bad flags or flag values), 2 data or
validation error (a named input file violates its contract), 3 I/O error.

Every subcommand prints a one-line human summary to standard output and can
write a machine-readable JSON report with a ``{"tool_version", "command",
"inputs", "results"}`` envelope to ``--out`` (for ``eval`` and ``reid`` the
report is the primary product and ``--out`` is required). Reports contain
no timestamps or absolute-path echoes beyond the flags as given, so a rerun
with identical inputs and seeds is byte-identical.

``MOTIONSTACK_THREADS``, when set, must be a positive integer; it caps
worker counts. Every stage currently runs single-threaded, which trivially
honors any cap, but the value is still validated so a typo fails loudly.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from math import isfinite
from pathlib import Path

import numpy as np

from . import __version__
from .det_metrics import (
    evaluate,
    load_detections_jsonl,
    load_ground_truth_jsonl,
    write_detections_jsonl,
)
from .errors import DataValidationError, MotionStackError
from .frame_pipeline import VARIANTS, FrameSequence, InputConfig, build_dataset, normalize_variant
from .metric_learning import (
    DEFAULT_MERGE_THRESHOLD,
    EmbeddingNet,
    TrainConfig,
    load_feature_table,
    load_net,
    load_triplets_jsonl,
    mine_triplets,
    pca_project_2d,
    propose_merges,
    save_net,
    separation_metrics,
    tracklet_centroids,
    train,
    write_scatter_csv,
    write_triplets_jsonl,
)
from .roi_features import OUT_SIZE, SAMPLING_RATIO, FeatureMap, pool_boxes
from .synth_scenes import (
    BACKGROUND_MODES,
    DEFAULT_FEATURE_DIM,
    SceneConfig,
    generate,
    perturb_detections,
)
from .tensor_io import read_tensor, write_tensor
from .tracklets import (
    MIN_TRACKLET_LEN,
    enumerate_keys,
    filter_min_length,
    load_identity_map,
    load_tracklets_json,
)
from .weight_surgery import MODES, expand_first_layer, load_conv_layer, save_conv_layer


class _UsageError(Exception):
    """Raised for malformed flags or flag values; mapped to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit(2); keep the contract
        raise _UsageError(message)


def _check_threads_env() -> None:
    raw = os.environ.get("MOTIONSTACK_THREADS")
    if raw is None:
        return
    try:
        value = int(raw)
    except ValueError:
        raise _UsageError(f"MOTIONSTACK_THREADS must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise _UsageError(f"MOTIONSTACK_THREADS must be a positive integer, got {raw!r}")


def _write_json(payload: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _emit_report(args, command: str, inputs: dict, results: dict) -> None:
    out = getattr(args, "out", None)
    if out is None:
        return
    _write_json(
        {"tool_version": __version__, "command": command, "inputs": inputs, "results": results},
        out,
    )


def _parse_switch(raw: str) -> tuple[int, int]:
    obj_s, sep, frame_s = raw.partition(":")
    if not sep:
        raise ValueError(f"expected OBJECT:FRAME, got {raw!r}")
    return (int(obj_s), int(frame_s))


def _parse_hidden(raw: str) -> tuple[int, ...]:
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    if not parts:
        raise ValueError(f"expected comma-separated layer widths, got {raw!r}")
    return tuple(int(p) for p in parts)


def _load_boxes_json(path: str) -> np.ndarray:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{path}: invalid JSON: {exc}") from exc
    raw = doc.get("boxes") if isinstance(doc, dict) else doc
    if not isinstance(raw, list):
        raise DataValidationError(f"{path}: expected a 'boxes' list or a bare list of boxes")
    boxes = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, list) or len(entry) != 4:
            raise DataValidationError(f"{path}: boxes[{i}] must be [x1, y1, x2, y2], got {entry!r}")
        try:
            box = [float(v) for v in entry]
        except (TypeError, ValueError):
            raise DataValidationError(f"{path}: boxes[{i}] is non-numeric: {entry!r}") from None
        if not all(isfinite(v) for v in box):
            raise DataValidationError(f"{path}: boxes[{i}] is non-finite: {entry!r}")
        boxes.append(box)
    if not boxes:
        raise DataValidationError(f"{path}: no boxes to pool")
    return np.array(boxes, dtype=np.float64)


# ---------------------------------------------------------------------------
# subcommand implementations; each returns (command, inputs, results, summary)


def _cmd_stack(args):
    config = InputConfig(variant=args.variant, n=args.n, delta=args.delta)
    if config.range_warning:
        print(
            "warning: parameters outside the evaluated range (n 1..10, delta 1..5)",
            file=sys.stderr,
        )
    if not args.frames.is_dir():
        raise FileNotFoundError(f"frame directory {args.frames} does not exist")
    source = FrameSequence.from_dir(args.frames)
    manifest = build_dataset(source, config, args.out_dir, labels_dir=args.labels)
    inputs = {
        "frames": str(args.frames),
        "variant": config.variant,
        "n": args.n,
        "delta": args.delta,
        "labels": str(args.labels) if args.labels else None,
        "out_dir": str(args.out_dir),
    }
    results = {
        "num_items": len(manifest["items"]),
        "config": manifest["config"],
        "manifest": "manifest.json",
    }
    summary = (
        f"stack: wrote {len(manifest['items'])} tensors "
        f"({config.variant}, {config.channels} channels) to {args.out_dir}"
    )
    return "stack", inputs, results, summary


def _cmd_surgery(args):
    layer = load_conv_layer(args.weights)
    expanded = expand_first_layer(layer, args.n, args.mode, seed=args.seed)
    save_conv_layer(expanded, args.out_weights)
    inputs = {
        "weights": str(args.weights),
        "mode": args.mode,
        "n": args.n,
        "seed": args.seed,
        "out_weights": str(args.out_weights),
    }
    results = {
        "in_shape": list(layer.weight.shape),
        "out_shape": list(expanded.weight.shape),
        "bias": expanded.bias is not None,
    }
    summary = (
        f"surgery: {args.mode} n={args.n}: {list(layer.weight.shape)} -> "
        f"{list(expanded.weight.shape)} written to {args.out_weights}"
    )
    return "surgery", inputs, results, summary


def _cmd_eval(args):
    dets = load_detections_jsonl(args.dets)
    gts = load_ground_truth_jsonl(args.gt)
    report = evaluate(dets, gts)
    inputs = {"dets": str(args.dets), "gt": str(args.gt)}
    summary = (
        f"eval: map50={report['map50']:.4f} map5095={report['map5095']:.4f} "
        f"precision={report['precision']:.4f} recall={report['recall']:.4f}"
    )
    return "eval", inputs, report, summary


def _cmd_features(args):
    if not args.scale > 0:
        raise _UsageError(f"--scale must be positive, got {args.scale}")
    tensor = read_tensor(args.map)
    try:
        fmap = FeatureMap(tensor, spatial_scale=args.scale)
    except ValueError as exc:
        raise DataValidationError(f"{args.map}: {exc}") from exc
    boxes = _load_boxes_json(args.boxes)
    vectors = pool_boxes(fmap, boxes, args.out_h, args.out_w, args.sampling_ratio)
    write_tensor(vectors, args.out_features)
    inputs = {
        "map": str(args.map),
        "scale": args.scale,
        "boxes": str(args.boxes),
        "out_h": args.out_h,
        "out_w": args.out_w,
        "sampling_ratio": args.sampling_ratio,
        "out_features": str(args.out_features),
    }
    results = {"num_boxes": int(vectors.shape[0]), "channels": int(vectors.shape[1])}
    summary = (
        f"features: pooled {vectors.shape[0]} boxes to {vectors.shape[1]}-d vectors "
        f"in {args.out_features}"
    )
    return "features", inputs, results, summary


def _cmd_mine(args):
    tracklets = load_tracklets_json(args.tracklets)
    kept = filter_min_length(tracklets, args.min_len)
    triplets = mine_triplets(kept, args.seed, args.per_anchor)
    write_triplets_jsonl(triplets, args.out_triplets)
    inputs = {
        "tracklets": str(args.tracklets),
        "seed": args.seed,
        "per_anchor": args.per_anchor,
        "min_len": args.min_len,
        "out_triplets": str(args.out_triplets),
    }
    results = {
        "num_tracklets": len(tracklets),
        "num_kept": len(kept),
        "num_triplets": len(triplets),
    }
    summary = (
        f"mine: {len(triplets)} triplets from {len(kept)}/{len(tracklets)} tracklets "
        f"(min length {args.min_len}) in {args.out_triplets}"
    )
    return "mine", inputs, results, summary


def _cmd_train(args):
    tracklets = load_tracklets_json(args.tracklets)
    table = load_feature_table(tracklets, args.features)
    triplets = load_triplets_jsonl(args.triplets)
    net = EmbeddingNet.init(
        table.dim, hidden=args.hidden, seed=args.seed, normalize_output=args.normalize_output
    )
    config = TrainConfig(
        margin=args.margin,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        triplets_per_anchor=args.per_anchor,
    )
    net, trace = train(net, table, triplets, config)
    save_net(net, args.out_dir)
    inputs = {
        "features": str(args.features),
        "tracklets": str(args.tracklets),
        "triplets": str(args.triplets),
        "epochs": args.epochs,
        "lr": args.lr,
        "margin": args.margin,
        "batch_size": args.batch_size,
        "seed": args.seed,
        "hidden": list(args.hidden),
        "normalize_output": args.normalize_output,
        "out_dir": str(args.out_dir),
    }
    results = {
        "num_triplets": len(triplets),
        "layer_dims": net.layer_dims,
        "loss_trace": trace,
        "initial_loss": trace[0] if trace else None,
        "final_loss": trace[-1] if trace else None,
        "net": "net.json",
    }
    summary = (
        f"train: {args.epochs} epochs on {len(triplets)} triplets, "
        f"loss {trace[0]:.6f} -> {trace[-1]:.6f}, net saved to {args.out_dir}"
        if trace
        else f"train: nothing to do, net saved to {args.out_dir}"
    )
    return "train", inputs, results, summary


def _cmd_reid(args):
    tracklets = load_tracklets_json(args.tracklets)
    table = load_feature_table(tracklets, args.features)
    net = load_net(args.net)
    centroids = tracklet_centroids(net, tracklets, table)
    merges = propose_merges(centroids, tracklets, args.threshold)

    groups_def = load_identity_map(args.identity_map) if args.identity_map else None
    id_to_group: dict[int, object] = {}
    if groups_def is not None:
        for gi, group in enumerate(groups_def):
            for tid in group:
                id_to_group[tid] = gi
    samples: dict[object, list[np.ndarray]] = {}
    for t in tracklets:
        emb = net.embed_batch(table.matrix64[table.rows_for(t)])
        if groups_def is None:
            key: object = t.id
        else:
            key = id_to_group.get(t.id, f"ungrouped_{t.id}")
        samples.setdefault(key, []).extend(emb)
    separation = separation_metrics(samples)

    inputs = {
        "features": str(args.features),
        "tracklets": str(args.tracklets),
        "net": str(args.net),
        "threshold": args.threshold,
        "identity_map": str(args.identity_map) if args.identity_map else None,
    }
    results = {
        "threshold": args.threshold,
        "merges": [list(pair) for pair in merges],
        "separation": separation,
        "grouping": "identity_map" if groups_def is not None else "tracklet_id",
        "num_tracklets": len(tracklets),
    }
    summary = (
        f"reid: {len(merges)} merge proposals at threshold {args.threshold}, "
        f"intra/inter ratio {separation['ratio']:.4f}"
    )
    return "reid", inputs, results, summary


def _cmd_project(args):
    tracklets = load_tracklets_json(args.tracklets)
    table = load_feature_table(tracklets, args.features)
    keys = enumerate_keys(tracklets)
    rows = np.array([table.row(tid, f) for tid, f in keys], dtype=np.intp)
    points = table.matrix64[rows]
    if args.net is not None:
        points = load_net(args.net).embed_batch(points)
    coords = pca_project_2d(points)
    write_scatter_csv(keys, coords, args.out_csv)
    inputs = {
        "features": str(args.features),
        "tracklets": str(args.tracklets),
        "net": str(args.net) if args.net else None,
        "out_csv": str(args.out_csv),
    }
    results = {"num_points": len(keys), "embedded": args.net is not None}
    summary = f"project: wrote {len(keys)} points to {args.out_csv}"
    return "project", inputs, results, summary


def _cmd_synth_generate(args):
    try:
        config = SceneConfig(
            width=args.width,
            height=args.height,
            num_frames=args.num_frames,
            num_objects=args.num_objects,
            radius_range=(args.radius_min, args.radius_max),
            velocity_range=(args.vel_min, args.vel_max),
            id_switch_events=tuple(args.switch),
            seed=args.seed,
            background=args.background,
            feature_dim=args.feature_dim,
        )
    except MotionStackError as exc:
        # Scene parameters come straight from flags, so this is a usage error.
        raise _UsageError(str(exc)) from exc
    manifest = generate(config, args.out_dir)
    inputs = {"out_dir": str(args.out_dir), **config.to_dict()}
    results = {
        "num_frames": manifest["num_frames"],
        "num_tracklets": manifest["num_tracklets"],
        "num_ground_truth": manifest["num_ground_truth"],
        "frames_dir": "frames",
        "gt": "gt.jsonl",
        "tracklets": "tracklets.json",
        "identity_map": "identity_map.json",
        "features": "features.mten",
        "scene": "scene.json",
    }
    summary = (
        f"synth generate: {manifest['num_frames']} frames, "
        f"{manifest['num_tracklets']} tracklets, "
        f"{manifest['num_ground_truth']} gt boxes in {args.out_dir}"
    )
    return "synth generate", inputs, results, summary


def _cmd_synth_perturb(args):
    for name, rate in (("--drop-rate", args.drop_rate), ("--fp-rate", args.fp_rate)):
        if not 0.0 <= rate <= 1.0:
            raise _UsageError(f"{name} must be in [0, 1], got {rate}")
    if args.jitter_px < 0:
        raise _UsageError(f"--jitter-px must be nonnegative, got {args.jitter_px}")
    if (args.canvas_width is None) != (args.canvas_height is None):
        raise _UsageError("--canvas-width and --canvas-height must be given together")
    canvas = None
    if args.canvas_width is not None:
        if args.canvas_width < 1 or args.canvas_height < 1:
            raise _UsageError("canvas dimensions must be positive")
        canvas = (args.canvas_width, args.canvas_height)
    gts = load_ground_truth_jsonl(args.gt)
    dets = perturb_detections(
        gts, args.drop_rate, args.jitter_px, args.fp_rate, seed=args.seed, canvas=canvas
    )
    write_detections_jsonl(dets, args.out_dets)
    num_true = sum(1 for d in dets if d.score == 1.0)
    inputs = {
        "gt": str(args.gt),
        "drop_rate": args.drop_rate,
        "jitter_px": args.jitter_px,
        "fp_rate": args.fp_rate,
        "seed": args.seed,
        "canvas": list(canvas) if canvas else None,
        "out_dets": str(args.out_dets),
    }
    results = {
        "num_ground_truth": len(gts),
        "num_detections": len(dets),
        "num_true": num_true,
        "num_false_positives": len(dets) - num_true,
    }
    summary = (
        f"synth perturb: {len(dets)} detections ({len(dets) - num_true} false positives) "
        f"from {len(gts)} gt boxes in {args.out_dets}"
    )
    return "synth perturb", inputs, results, summary


# ---------------------------------------------------------------------------
# parser


def build_parser() -> _Parser:
    parser = _Parser(
        prog="motionstack",
        description="Motion-aware detection toolkit: frame stacking, first-layer "
        "weight surgery, detection metrics, RoI features, and tracklet "
        "re-identification.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command", parser_class=_Parser)

    p = sub.add_parser("stack", help="build stacked input tensors from a PPM frame directory")
    p.add_argument("--frames", type=Path, required=True, help="directory of *.ppm frames")
    p.add_argument(
        "--variant",
        type=normalize_variant,
        required=True,
        choices=VARIANTS,
        help="stacking layout (hyphens accepted, e.g. rgb-seq)",
    )
    p.add_argument("--n", type=int, default=1, help="frames per stack for sequence variants")
    p.add_argument("--delta", type=int, default=1, help="frame gap for pair variants")
    p.add_argument("--labels", type=Path, default=None, help="directory of per-frame label files")
    p.add_argument("--out-dir", type=Path, required=True, help="output directory for tensors + manifest")
    p.add_argument("--out", type=Path, default=None, help="JSON report path")
    p.set_defaults(func=_cmd_stack)

    p = sub.add_parser("surgery", help="expand a first conv layer for stacked inputs")
    p.add_argument("--weights", type=Path, required=True, help="input conv layer (.mten + sidecar)")
    p.add_argument("--mode", required=True, choices=MODES, help="replicate tiles and rescales; random redraws")
    p.add_argument("--n", type=int, required=True, help="stacking factor")
    p.add_argument("--seed", type=int, default=0, help="seed for random mode")
    p.add_argument("--out-weights", type=Path, required=True, help="output conv layer path")
    p.add_argument("--out", type=Path, default=None, help="JSON report path")
    p.set_defaults(func=_cmd_surgery)

    p = sub.add_parser("eval", help="COCO-style detection evaluation")
    p.add_argument("--dets", type=Path, required=True, help="detections JSON-lines")
    p.add_argument("--gt", type=Path, required=True, help="ground-truth JSON-lines")
    p.add_argument("--out", type=Path, required=True, help="JSON report path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("features", help="pool per-box descriptors from a feature map")
    p.add_argument("--map", type=Path, required=True, help="feature map MTENSOR [C, Hf, Wf]")
    p.add_argument("--scale", type=float, required=True, help="feature pixels per image pixel")
    p.add_argument("--boxes", type=Path, required=True, help="JSON file with image-coordinate boxes")
    p.add_argument("--out-h", type=int, default=OUT_SIZE, help="pooled grid height")
    p.add_argument("--out-w", type=int, default=OUT_SIZE, help="pooled grid width")
    p.add_argument("--sampling-ratio", type=int, default=SAMPLING_RATIO, help="samples per bin side")
    p.add_argument("--out-features", type=Path, required=True, help="output MTENSOR [N, C]")
    p.add_argument("--out", type=Path, default=None, help="JSON report path")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("mine", help="sample training triplets from tracklets")
    p.add_argument("--tracklets", type=Path, required=True, help="tracklets JSON")
    p.add_argument("--seed", type=int, default=0, help="sampling seed")
    p.add_argument("--per-anchor", type=int, default=1, help="triplets per anchor frame")
    p.add_argument(
        "--min-len", type=int, default=MIN_TRACKLET_LEN, help="minimum tracklet length to keep"
    )
    p.add_argument("--out-triplets", type=Path, required=True, help="output triplets JSON-lines")
    p.add_argument("--out", type=Path, default=None, help="JSON report path")
    p.set_defaults(func=_cmd_mine)

    p = sub.add_parser("train", help="train the embedding net on mined triplets")
    p.add_argument("--features", type=Path, required=True, help="feature matrix MTENSOR [T, D]")
    p.add_argument("--tracklets", type=Path, required=True, help="tracklets JSON")
    p.add_argument("--triplets", type=Path, required=True, help="triplets JSON-lines")
    p.add_argument("--epochs", type=int, default=20, help="training epochs")
    p.add_argument("--lr", type=float, default=1e-3, help="learning rate")
    p.add_argument("--margin", type=float, default=1.0, help="triplet loss margin")
    p.add_argument("--batch-size", type=int, default=64, help="minibatch size")
    p.add_argument("--seed", type=int, default=0, help="init and shuffle seed")
    p.add_argument("--per-anchor", type=int, default=1, help="recorded mining rate (provenance)")
    p.add_argument(
        "--hidden", type=_parse_hidden, default=(512, 256), help="hidden widths, e.g. 512,256"
    )
    p.add_argument(
        "--normalize-output", action="store_true", help="L2-normalize embeddings at inference"
    )
    p.add_argument("--out-dir", type=Path, required=True, help="directory for the saved net")
    p.add_argument("--out", type=Path, default=None, help="JSON report path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("reid", help="propose tracklet merges from embedding centroids")
    p.add_argument("--features", type=Path, required=True, help="feature matrix MTENSOR [T, D]")
    p.add_argument("--tracklets", type=Path, required=True, help="tracklets JSON")
    p.add_argument("--net", type=Path, required=True, help="trained net manifest (net.json)")
    p.add_argument(
        "--threshold",
        type=float,
        default=DEFAULT_MERGE_THRESHOLD,
        help="centroid distance cutoff for merge proposals",
    )
    p.add_argument(
        "--identity-map",
        type=Path,
        default=None,
        help="true identity groups JSON; groups separation stats by identity instead of tracklet",
    )
    p.add_argument("--out", type=Path, required=True, help="JSON report path")
    p.set_defaults(func=_cmd_reid)

    p = sub.add_parser("project", help="2-d PCA scatter of features or embeddings")
    p.add_argument("--features", type=Path, required=True, help="feature matrix MTENSOR [T, D]")
    p.add_argument("--tracklets", type=Path, required=True, help="tracklets JSON")
    p.add_argument("--net", type=Path, default=None, help="optional net manifest; project embeddings")
    p.add_argument("--out-csv", type=Path, required=True, help="output id,frame,x,y CSV")
    p.add_argument("--out", type=Path, default=None, help="JSON report path")
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("synth", help="synthetic scenes and detection perturbation")
    synth_sub = p.add_subparsers(dest="synth_command", required=True, metavar="action", parser_class=_Parser)

    g = synth_sub.add_parser("generate", help="render a scene with full ground truth")
    g.add_argument("--width", type=int, default=96, help="canvas width in pixels")
    g.add_argument("--height", type=int, default=72, help="canvas height in pixels")
    g.add_argument("--num-frames", type=int, default=64, help="frames to render")
    g.add_argument("--num-objects", type=int, default=3, help="moving blobs")
    g.add_argument("--radius-min", type=int, default=4, help="smallest blob radius")
    g.add_argument("--radius-max", type=int, default=7, help="largest blob radius")
    g.add_argument("--vel-min", type=float, default=1.0, help="slowest speed, px/frame")
    g.add_argument("--vel-max", type=float, default=2.5, help="fastest speed, px/frame")
    g.add_argument(
        "--switch",
        type=_parse_switch,
        action="append",
        default=[],
        metavar="OBJECT:FRAME",
        help="inject an id switch (repeatable)",
    )
    g.add_argument("--seed", type=int, default=0, help="scene seed")
    g.add_argument("--background", choices=BACKGROUND_MODES, default="flat", help="background mode")
    g.add_argument("--feature-dim", type=int, default=DEFAULT_FEATURE_DIM, help="feature vector width")
    g.add_argument("--out-dir", type=Path, required=True, help="scene output directory")
    g.add_argument("--out", type=Path, default=None, help="JSON report path")
    g.set_defaults(func=_cmd_synth_generate)

    g = synth_sub.add_parser("perturb", help="degrade ground truth into detections")
    g.add_argument("--gt", type=Path, required=True, help="ground-truth JSON-lines")
    g.add_argument("--drop-rate", type=float, default=0.0, help="box drop probability")
    g.add_argument("--jitter-px", type=float, default=0.0, help="corner jitter amplitude")
    g.add_argument("--fp-rate", type=float, default=0.0, help="false positives per frame")
    g.add_argument("--seed", type=int, default=0, help="perturbation seed")
    g.add_argument("--canvas-width", type=int, default=None, help="false-positive box bound")
    g.add_argument("--canvas-height", type=int, default=None, help="false-positive box bound")
    g.add_argument("--out-dets", type=Path, required=True, help="output detections JSON-lines")
    g.add_argument("--out", type=Path, default=None, help="JSON report path")
    g.set_defaults(func=_cmd_synth_perturb)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_threads_env()
        command, inputs, results, summary = args.func(args)
        _emit_report(args, command, inputs, results)
        print(summary)
        return 0
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code) if exc.code else 0
    except MotionStackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # Remaining bare ValueErrors come from flag-derived values.
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
