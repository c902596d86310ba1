"""Sub-action permutation experiment: accuracy on same-order and permuted test
clips for large- and small-RF models, joined with the window ratio."""
import csv
import json
import logging
import os
from dataclasses import dataclass, replace

from ..arch import normalize_preset_name
from ..dmm import DMMConfig, generate, write_container
from ..exceptions import TRFLError
from ..sensitivity import sweep
from .runner import TrainConfig, train

log = logging.getLogger(__name__)

TEST_SPLITS = ("test_noperm", "test_perm")
RESULT_FIELDS = ("model", "d", "seed", "split", "accuracy", "loss", "ratio", "best_epoch",
                 "run_dir", "error")


@dataclass(frozen=True)
class Fig3Scale:
    """Sizes for one scale of the experiment."""

    canvas: tuple
    glyph_size: int
    width: float
    durations: tuple
    videos_per_class: int
    batch_size: int
    epochs: int
    models: tuple
    lr: float = 0.01


SCALES = {
    "tiny": Fig3Scale(canvas=(32, 32), glyph_size=14, width=0.25, durations=(8, 16),
                      videos_per_class=300, batch_size=8, epochs=16,
                      models=("resnet50_3d", "video_bagnet_9")),
    "paper": Fig3Scale(canvas=(64, 64), glyph_size=28, width=None, durations=(16, 32, 64),
                       videos_per_class=1000, batch_size=8, epochs=30,
                       models=("resnet50_3d", "video_bagnet_1", "video_bagnet_9",
                               "video_bagnet_17", "video_bagnet_33")),
}


def get_scale(scale, **overrides):
    if isinstance(scale, Fig3Scale):
        base = scale
    elif scale in SCALES:
        base = SCALES[scale]
    else:
        raise ValueError(f"unknown scale {scale!r}; choose from {sorted(SCALES)}")
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if "models" in overrides:
        overrides["models"] = tuple(normalize_preset_name(m) for m in overrides["models"])
    for key in ("durations", "canvas"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    return replace(base, **overrides)


def experiment_fig3(out_dir, scale="tiny", seeds=(0,), **overrides):
    """Train every model on every duration and seed, then test both orders.

    Args:
        out_dir: receives ``data/``, ``runs/``, ``results.csv`` and
            ``results.json``.
        scale: ``"tiny"``, ``"paper"`` or a :class:`Fig3Scale`.
        seeds: each seed gets its own dataset and model initialization.
        **overrides: replace any :class:`Fig3Scale` field.

    Returns:
        list of result rows, ``len(models) * len(durations) * len(seeds) * 2``
        long. A failed run keeps its rows with ``accuracy = None`` and the
        reason in ``error``; the sweep carries on.
    """
    scale = get_scale(scale, **overrides)
    ratios = {(r["model"], r["d"]): r["ratio"] for r in sweep(scale.models, scale.durations)}
    rows = []
    for d in scale.durations:
        for seed in seeds:
            cfg = DMMConfig(canvas=scale.canvas, d=d, videos_per_class=scale.videos_per_class,
                            glyph_size=scale.glyph_size, seed=seed)
            data_dir = os.path.join(out_dir, "data", f"d{d}_s{seed}")
            splits = generate(cfg)
            for name, split in splits.items():
                write_container(split, os.path.join(data_dir, name))
            for model in scale.models:
                run_id = f"{model}_d{d}_s{seed}"
                run_dir = os.path.join(out_dir, "runs", run_id)
                base = {"model": model, "d": d, "seed": seed, "ratio": ratios[(model, d)],
                        "run_dir": os.path.relpath(run_dir, out_dir)}
                tc = TrainConfig(model=model, width=scale.width, dataset=data_dir,
                                 eval_splits=TEST_SPLITS, batch_size=scale.batch_size,
                                 epochs=scale.epochs, lr=scale.lr, seed=seed, run_id=run_id)
                log.info("training %s", run_id)
                try:
                    result = train(tc, run_dir, data=splits)
                except TRFLError as exc:
                    log.warning("run %s failed: %s", run_id, exc)
                    rows.extend(dict(base, split=s, accuracy=None, loss=None, best_epoch=None,
                                     error=str(exc)) for s in TEST_SPLITS)
                    continue
                for s in TEST_SPLITS:
                    ev = result.evaluations[s]
                    rows.append(dict(base, split=s, accuracy=ev.metric, loss=ev.loss,
                                     best_epoch=result.summary["best_epoch"], error=""))
                    log.info("%s %s accuracy %.4f", run_id, s, ev.metric)
    write_results(out_dir, rows, scale, seeds)
    return rows


def write_results(out_dir, rows, scale, seeds):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row[k] is None else row[k]) for k in RESULT_FIELDS})
    meta = {"scale": {k: list(v) if isinstance(v, tuple) else v
                      for k, v in scale.__dict__.items()},
            "seeds": list(seeds), "rows": rows}
    with open(os.path.join(out_dir, "results.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
