"""Command-line entry point: ``trfl <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data or configuration error,
3 numerical failure. Results go to stdout, diagnostics to stderr. The log
level comes from the ``TRF_LOG`` environment variable (default WARNING).
"""
import argparse
import csv
import io
import json
import logging
import os
import sys

from . import __version__
from .arch import (PRESET_NAMES, build_preset, load_arch_file, normalize_preset_name, param_count,
                   rf_calculus)
from .exceptions import NumericalError, TRFLError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("trfl")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- output
def _csv(rows):
    if not rows:
        return ""
    buf = io.StringIO()
    fieldnames = list(rows[0])
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in fieldnames})
    return buf.getvalue()


def _text(obj, indent=0):
    pad = "  " * indent
    if isinstance(obj, dict):
        lines = []
        for k, v in obj.items():
            if isinstance(v, (dict, list)):
                lines.append(f"{pad}{k}:")
                lines.append(_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {v}")
        return "\n".join(lines)
    if isinstance(obj, list):
        if obj and all(isinstance(r, dict) for r in obj):
            keys = list(obj[0])
            table = [keys] + [["" if r.get(k) is None else str(r.get(k)) for k in keys] for r in obj]
            widths = [max(len(row[i]) for row in table) for i in range(len(keys))]
            return "\n".join(pad + "  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
                             for row in table)
        return "\n".join(f"{pad}- {v}" for v in obj)
    return f"{pad}{obj}"


def emit(payload, fmt, rows=None):
    """Print ``payload`` as JSON or text; CSV prints ``rows`` (a list of dicts)."""
    if fmt == "json":
        out = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    elif fmt == "csv":
        out = _csv(rows if rows is not None else [payload])
    else:
        out = _text(payload) + "\n"
    sys.stdout.write(out)


# -------------------------------------------------------------- commands
def _resolve_arch(args, n_classes=None, in_channels=None):
    spec = args.arch
    if os.path.isfile(spec):
        return load_arch_file(spec)
    return build_preset(spec, width=args.width, n_classes=n_classes or args.classes,
                        in_channels=in_channels or args.in_channels,
                        downsample_at=args.downsample_at)


def cmd_rf_report(args):
    arch = _resolve_arch(args)
    hw = tuple(args.input_size) if args.input_size else None
    report = rf_calculus(arch, args.input_frames, with_shapes=hw is not None, input_hw=hw)
    payload = report.to_dict()
    payload["model"] = arch.meta.get("preset", "custom")
    emit(payload, args.format, rows=payload["nodes"])


def cmd_param_count(args):
    arch = _resolve_arch(args)
    n = param_count(arch)
    payload = {"model": arch.meta.get("preset", "custom"), "classes": arch.sink.out_channels,
               "width": arch.meta.get("width"), "parameters": n, "millions": round(n / 1e6, 3)}
    emit(payload, args.format)


def cmd_sensitivity(args):
    from .sensitivity import SegmentLayout, sweep, window_ratio

    if args.durations:
        rows = sweep(args.arch, args.durations, n_segments=args.segments)
        emit({"rows": rows}, args.format, rows=rows)
        return
    if args.video_len is None or args.segment_len is None:
        raise UsageError("give --video-len and --segment-len, or --durations")
    if args.segment_len < 1 or args.video_len % args.segment_len:
        raise UsageError("--video-len must be a positive multiple of --segment-len")
    layout = SegmentLayout.equal(args.video_len // args.segment_len, args.segment_len)
    rows = []
    for name in args.arch:
        arch = load_arch_file(name) if os.path.isfile(name) else build_preset(name)
        rep = window_ratio(arch, layout)
        rows.append({"model": arch.meta.get("preset", "custom"), "d": args.segment_len,
                     "L": args.video_len, "single": rep.single, "total": rep.total,
                     "ratio": rep.ratio, "error": ""})
    emit({"rows": rows}, args.format, rows=rows)


def cmd_gen_data(args):
    from .dmm import DMMConfig, SPLITS, generate, load_mnist_glyphs, write_container

    cfg = DMMConfig(canvas=tuple(args.canvas), d=args.d, speeds=tuple(args.speeds),
                    videos_per_class=args.videos_per_class,
                    permutation_probability={"test_perm": args.perm_prob}, seed=args.seed,
                    glyph_size=args.glyph_size)
    train_glyphs = test_glyphs = None
    if args.train_images or args.test_images:
        if not (args.train_images and args.test_images):
            raise UsageError("--train-images and --test-images go together")
        train_glyphs = load_mnist_glyphs(args.train_images, "train")
        test_glyphs = load_mnist_glyphs(args.test_images, "test")
    splits = generate(cfg, train_glyphs, test_glyphs, splits=tuple(args.splits or SPLITS))
    summary = []
    for name, split in splits.items():
        path = os.path.join(args.out, name)
        write_container(split, path)
        summary.append({"split": name, "path": path, "videos": len(split),
                        "permuted": sum(s.permuted for s in split.samples)})
    emit({"config": cfg.to_dict(), "glyph_source": "idx" if train_glyphs else "procedural",
          "splits": summary}, args.format, rows=summary)


def _train_config(args):
    from .harness import TrainConfig

    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    flags = {"model": args.arch, "width": args.width, "downsample_at": args.downsample_at,
             "dataset": args.dataset, "optimizer": args.optimizer, "lr": args.lr,
             "momentum": args.momentum, "weight_decay": args.weight_decay,
             "schedule": args.schedule, "batch_size": args.batch_size, "epochs": args.epochs,
             "loss": args.loss, "eval_every": args.eval_every,
             "validation_fraction": args.validation_fraction, "run_id": args.run_id,
             "eval_splits": args.eval_split}
    data.update({k: v for k, v in flags.items() if v is not None})
    if args.seed is not None:
        data["seed"] = args.seed
    if not data.get("dataset"):
        raise UsageError("train needs --dataset (or a config file that sets it)")
    return TrainConfig.from_dict(data)


def cmd_train(args):
    from .harness import train

    result = train(_train_config(args), args.run_dir)
    rows = [r.to_dict() for r in result.history] + [r.to_dict() for r in result.evaluations.values()]
    emit(result.summary, args.format, rows=rows)


def cmd_eval(args):
    from .harness import evaluate

    row = evaluate(args.checkpoint, args.split, split_name=args.name).to_dict()
    emit(row, args.format)


def cmd_experiment(args):
    from .harness import experiment_fig3

    seeds = args.seeds if args.seeds else [args.seed or 0]
    rows = experiment_fig3(args.out, scale=args.scale, seeds=tuple(seeds), epochs=args.epochs,
                           durations=args.durations, models=args.models,
                           videos_per_class=args.videos_per_class)
    emit({"scale": args.scale, "seeds": list(seeds), "rows": rows}, args.format, rows=rows)


# ---------------------------------------------------------------- parser
def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "text"), default="text",
                        help="output format on stdout (default: text)")
    common.add_argument("--seed", type=int, default=None,
                        help="master seed for every random choice (default: 0)")

    archflags = _Parser(add_help=False)
    archflags.add_argument("--arch", default="resnet50_3d",
                           help=f"preset ({', '.join(PRESET_NAMES)}; '-' and '_' both work) "
                                "or a JSON architecture file")
    archflags.add_argument("--width", type=float, default=None,
                           help="channel multiplier (default: preset default)")
    archflags.add_argument("--downsample-at", choices=("mid_conv", "bottleneck_entry"),
                           default=None, help="where stage strides sit (default: preset default)")
    archflags.add_argument("--classes", type=int, default=3, help="classifier outputs (default 3)")
    archflags.add_argument("--in-channels", type=int, default=3, help="input channels (default 3)")

    parser = _Parser(prog="trfl", description="Temporal receptive field toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("rf-report", parents=[common, archflags],
                       help="temporal receptive field of every layer")
    p.add_argument("--input-frames", type=int, default=64, help="clip length in frames (default 64)")
    p.add_argument("--input-size", type=int, nargs=2, metavar=("H", "W"), default=None,
                   help="also report full (C, T, H, W) shapes for this frame size")
    p.set_defaults(func=cmd_rf_report)

    p = sub.add_parser("param-count", parents=[common, archflags], help="count learned parameters")
    p.set_defaults(func=cmd_param_count)

    p = sub.add_parser("sensitivity", parents=[common], help="single sub-action window ratio")
    p.add_argument("--arch", nargs="+", default=["resnet50_3d"], help="one or more presets or files")
    p.add_argument("--video-len", type=int, default=None, help="clip length L in frames")
    p.add_argument("--segment-len", type=int, default=None, help="sub-action duration d in frames")
    p.add_argument("--durations", type=int, nargs="+", default=None,
                   help="sweep these durations instead (L = segments * d)")
    p.add_argument("--segments", type=int, default=2, help="sub-actions per clip in a sweep (default 2)")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("gen-data", parents=[common], help="render the moving-glyph dataset")
    p.add_argument("--out", required=True, help="output directory, one container per split")
    p.add_argument("--d", type=int, default=16, help="frames per sub-action (default 16)")
    p.add_argument("--canvas", type=int, nargs=2, default=[64, 64], metavar=("H", "W"),
                   help="frame size (default 64 64)")
    p.add_argument("--speeds", type=int, nargs="+", default=[1, 2], help="pixels per frame (default 1 2)")
    p.add_argument("--videos-per-class", type=int, default=1000, help="videos per class and split")
    p.add_argument("--perm-prob", type=float, default=0.5,
                   help="chance a test_perm video swaps its sub-actions (default 0.5)")
    p.add_argument("--glyph-size", type=int, default=28, help="glyph side on the canvas, divides 28")
    p.add_argument("--splits", nargs="+", choices=("train", "test_noperm", "test_perm"), default=None,
                   help="subset of splits to write (default: all)")
    p.add_argument("--train-images", default=None, help="MNIST training images (IDX, optionally .gz)")
    p.add_argument("--test-images", default=None, help="MNIST test images (IDX, optionally .gz)")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train one model into a run directory")
    p.add_argument("--config", default=None, help="JSON train config; flags override its keys")
    p.add_argument("--run-dir", required=True, help="output directory")
    p.add_argument("--dataset", default=None, help="directory written by gen-data")
    p.add_argument("--arch", default=None, help="preset name (default video_bagnet_9)")
    p.add_argument("--width", type=float, default=None, help="channel multiplier")
    p.add_argument("--downsample-at", choices=("mid_conv", "bottleneck_entry"), default=None)
    p.add_argument("--optimizer", choices=("sgd", "adam"), default=None, help="default sgd")
    p.add_argument("--lr", type=float, default=None, help="base learning rate (default 0.01)")
    p.add_argument("--momentum", type=float, default=None, help="SGD momentum (default 0.9)")
    p.add_argument("--weight-decay", type=float, default=None, help="decoupled decay (default 1e-4)")
    p.add_argument("--schedule", choices=("cosine", "constant"), default=None, help="default cosine")
    p.add_argument("--batch-size", type=int, default=None, help="default 8")
    p.add_argument("--epochs", type=int, default=None, help="default 10")
    p.add_argument("--loss", choices=("softmax_ce", "sigmoid_bce"), default=None)
    p.add_argument("--eval-every", type=int, default=None, help="validate every N epochs (default 1)")
    p.add_argument("--validation-fraction", type=float, default=None, help="default 0.1")
    p.add_argument("--eval-split", nargs="+", default=None,
                   help="splits to evaluate with the best checkpoint, e.g. test_noperm test_perm")
    p.add_argument("--run-id", default=None, help="label for metrics rows (default 'run')")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on one split")
    p.add_argument("--checkpoint", required=True, help="best.ckpt from a run directory")
    p.add_argument("--split", required=True, help="split container directory")
    p.add_argument("--name", default=None, help="split label in the output (default: stored name)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", parents=[common], help="run a packaged experiment")
    p.add_argument("name", choices=("fig3",), help="experiment to run")
    p.add_argument("--scale", choices=("tiny", "paper"), default="tiny", help="default tiny")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", type=int, nargs="+", default=None, help="default: --seed")
    p.add_argument("--epochs", type=int, default=None, help="override the scale's epochs")
    p.add_argument("--durations", type=int, nargs="+", default=None, help="override durations")
    p.add_argument("--models", nargs="+", default=None, help="override model presets")
    p.add_argument("--videos-per-class", type=int, default=None, help="override dataset size")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    level = os.environ.get("TRF_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and args.command != "train":
        args.seed = 0
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"trfl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"trfl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TRFLError, OSError) as exc:
        print(f"trfl: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
