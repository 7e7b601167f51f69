"""Command-line entry point: ``idc {synth,train,predict,metrics,spectrum,ablate}``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from idc import data, gates, metrics, pipeline, spectral
from idc.errors import ConfigError, DataError, IdcError

log = logging.getLogger("idc")

MANIFEST = "manifest.json"


def content_hash(raw: bytes) -> str:
    """git-style object hash: sha1 over ``blob <len>\\0`` followed by the bytes."""
    return hashlib.sha1(b"blob %d\0" % len(raw) + raw).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Run:
    """Collects what one command read and wrote, then writes ``manifest.json``."""

    def __init__(self, command: str, out_dir, seed=None, config_path=None, config_bytes=None):
        self.out = Path(out_dir)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise DataError(f"cannot create output directory {out_dir}: {exc}") from None
        self.manifest = {
            "command": command,
            "config_path": None if config_path is None else str(config_path),
            "config_hash": None if config_bytes is None else content_hash(config_bytes),
            "seed": seed,
            "inputs": {},
            "outputs": [],
            "started": _now(),
        }

    def input(self, name: str, path) -> None:
        self.manifest["inputs"][name] = str(path)

    def path(self, name: str) -> Path:
        self.manifest["outputs"].append(name)
        return self.out / name

    def finish(self) -> None:
        self.manifest["finished"] = _now()
        (self.out / MANIFEST).write_text(json.dumps(self.manifest, indent=2) + "\n",
                                         encoding="utf-8")


def _load_config(spec: str, seed: int | None):
    """A preset name or a JSON file path; returns ``(config, path, raw bytes)``."""
    if spec in pipeline.PRESETS:
        cfg = pipeline.preset(spec)
        raw = json.dumps(cfg.to_dict(), sort_keys=True).encode()
        path = f"preset:{spec}"
    else:
        path = Path(spec)
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise ConfigError(f"cannot read config {spec}: {exc}") from None
        cfg = pipeline.TrainConfig.load(path)
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    return cfg, path, raw


def _load_data(path, scale: str) -> data.Dataset:
    return data.load_csv(path, scale=(scale == "minmax"))


def _write_log(model: pipeline.IdcModel, path: Path) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for rec in model.log:
            fh.write(json.dumps(rec) + "\n")


def _write_matrix(path: Path, M: np.ndarray, header) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in M:
            w.writerow([repr(float(v)) for v in row])


def _labels_for(path, n: int) -> np.ndarray:
    y = data.load_labels(path)
    if y.shape[0] != n:
        raise DataError(f"{path} has {y.shape[0]} labels for {n} samples")
    return y


def _scores(pred, truth) -> dict:
    return {"acc": metrics.clustering_accuracy(pred, truth), "ari": metrics.ari(pred, truth),
            "nmi": metrics.nmi(pred, truth)}


# --------------------------------------------------------------------------
# commands


def cmd_synth(args) -> None:
    spec = data.SyntheticSpec()
    raw = None
    if args.spec:
        raw = Path(args.spec).read_bytes()
        spec = data.SyntheticSpec.from_dict(json.loads(raw))
    if args.seed is not None:
        spec = data.SyntheticSpec(**{**spec.to_dict(), "seed": args.seed})
    run = Run("synth", args.out, spec.seed, args.spec, raw)
    ds = data.make_synthetic(spec)
    paths = data.export_synthetic(ds, spec, run.out)
    for p in paths.values():
        run.path(p.name)
    run.finish()
    print(f"wrote {ds.n} samples x {ds.d} features to {paths['data']}")


def cmd_train(args) -> None:
    cfg, cfg_path, raw = _load_config(args.config, args.seed)
    run = Run("train", args.out, cfg.seed, cfg_path, raw)
    run.input("data", args.data)
    ds = _load_data(args.data, args.scale)
    if args.resume:
        run.input("resume", args.resume)
        model = pipeline.IdcModel.load(args.resume)
        if model.stage < 1:
            raise DataError(f"{args.resume} holds no completed stage 1")
        model.config = cfg
        print(f"resuming from stage-{model.stage} checkpoint; skipping stage 1")
    else:
        model = pipeline.train_stage1(ds, cfg, run.out)
        run.path("checkpoint_stage1.json")
        print(f"stage 1 done: mean open gates {model.log[-1]['open_gates']:.2f}")
    model = pipeline.train_stage2(ds, model, run.out)
    run.path("checkpoint_stage2.json")
    model.save(run.path("model.json"))
    _write_log(model, run.path("log.jsonl"))
    cfg.save(run.path("config.json"))
    run.finish()
    print(f"model written to {run.out / 'model.json'}")


def cmd_predict(args) -> None:
    run = Run("predict", args.out)
    run.input("model", args.model)
    run.input("data", args.data)
    model = pipeline.IdcModel.load(args.model)
    run.manifest["seed"] = model.config.seed
    ds = _load_data(args.data, args.scale)
    out = pipeline.predict(model, ds.X)
    names = model.feature_names or [f"x{j}" for j in range(model.d)]
    with run.path("assignments.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "label", *[f"soft_{k}" for k in range(out["soft"].shape[1])]])
        for i, (lab, row) in enumerate(zip(out["labels"], out["soft"])):
            w.writerow([i, int(lab), *(repr(float(v)) for v in row)])
    gates.write_gates_csv(out["gates"], run.path("gates.csv"), names)
    _write_matrix(run.path("global_gates.csv"), out["global_gates"], names)
    gates.write_topk_json(out["gates"], run.path("topk.json"), args.topk, names)
    run.finish()
    print(f"{ds.n} samples assigned; mean open gates {gates.mean_open_gates(out['gates']):.2f}")


def cmd_metrics(args) -> None:
    run = Run("metrics", args.out)
    for name in ("model", "data", "labels"):
        run.input(name, getattr(args, name))
    model = pipeline.IdcModel.load(args.model)
    run.manifest["seed"] = model.config.seed
    ds = _load_data(args.data, args.scale)
    y = _labels_for(args.labels, ds.n)
    mask = None
    if args.mask:
        run.input("mask", args.mask)
        mask = data.load_mask(args.mask)
    cfg = metrics.MetricConfig(r=args.r, top_k=args.topk, seed=model.config.seed)
    report, faith = metrics.evaluate(model, ds.X, y, cfg, mask)
    report.save_json(run.path("report.json"))
    report.save_csv(run.path("report.csv"))
    faith.write_curve(run.path("faithfulness_curve.csv"))
    run.finish()
    print(json.dumps(report.to_dict(), indent=2))


def cmd_spectrum(args) -> None:
    run = Run("spectrum", args.out)
    run.input("model", args.model)
    run.input("data", args.data)
    model = pipeline.IdcModel.load(args.model)
    ds = _load_data(args.data, args.scale)
    res = spectral.model_spectrum(model, ds.X, spectral.SpectrumConfig(args.kmax, args.nk))
    res.write_csv(run.path("spectrum.csv"))
    run.finish()
    print(f"top-decile median |NUDFT| {res.top_decile_median():.4g}")


def cmd_ablate(args) -> None:
    cfg, cfg_path, raw = _load_config(args.config, args.seed)
    pipeline.ablation_config(cfg, args.drop)  # reject unknown names before training
    run = Run("ablate", args.out, cfg.seed, cfg_path, raw)
    run.input("data", args.data)
    ds = _load_data(args.data, args.scale)
    y = None
    if args.labels:
        run.input("labels", args.labels)
        y = _labels_for(args.labels, ds.n)
    full = pipeline.train(ds, cfg)
    rows = {"full": {"labels": pipeline.predict(full, ds.X)["labels"],
                     "gates": pipeline.eval_gates(full, ds.X)},
            f"w/o {args.drop}": pipeline.run_ablation(ds, cfg, args.drop)}
    table = []
    for name, res in rows.items():
        row = {"variant": name, "open_gates": gates.mean_open_gates(res["gates"])}
        if y is not None:
            row.update(_scores(res["labels"], y))
        table.append(row)
    with run.path("ablation.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(table[0]))
        w.writeheader()
        w.writerows(table)
    run.path("ablation.json").write_text(json.dumps(table, indent=2) + "\n", encoding="utf-8")
    run.finish()
    for row in table:
        print("  ".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}"
                        for k, v in row.items()))


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="idc", description="Interpretable deep clustering.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def data_args(sp, labels=False):
        sp.add_argument("--data", required=True, help="CSV with a header row")
        sp.add_argument("--scale", choices=["none", "minmax"], default="none",
                        help="column scaling applied on load (default: none)")
        if labels:
            sp.add_argument("--labels", required=True, help="single-column label CSV")

    sp = sub.add_parser("synth", help="write the synthetic gate benchmark")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--spec", help="JSON file overriding SyntheticSpec fields")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="run both training stages")
    data_args(sp)
    sp.add_argument("--config", required=True,
                    help=f"JSON config or a preset name ({', '.join(pipeline.PRESETS)})")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--resume", help="stage-1 checkpoint; skips stage 1")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="cluster labels and gates for a dataset")
    sp.add_argument("--model", required=True)
    data_args(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--topk", type=int, default=15)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("metrics", help="clustering and interpretability report")
    sp.add_argument("--model", required=True)
    data_args(sp, labels=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--topk", type=int, default=15)
    sp.add_argument("--r", type=int, default=2)
    sp.add_argument("--mask", help="mask.json from `idc synth` (adds the selection F1)")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("spectrum", help="|NUDFT| of predictions per feature")
    sp.add_argument("--model", required=True)
    data_args(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--kmax", type=float, default=20.0)
    sp.add_argument("--nk", type=int, default=1000)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("ablate", help="compare the full model with one component removed")
    data_args(sp)
    sp.add_argument("--labels")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--drop", required=True, choices=list(pipeline.ABLATIONS))
    sp.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        args.func(args)
    except IdcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    log.info("%s finished in %.1fs", args.command, time.perf_counter() - t0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
