"""Two-stage training, schedules, checkpoints and inference."""

from __future__ import annotations

import copy
import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from idc import autoenc, cluster, gates
from idc.data import BatchPlan, Dataset, batches
from idc.errors import ConfigError, DataError, NumericalError
from idc.numcore import Tape, Var, ops
from idc.numcore.optim import Adam
from idc.numcore.rng import Rng

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "idc-checkpoint/1"
STAGE1_PREFIXES = ("gate.", "enc.", "dec.")
STAGE2_PREFIXES = ("head.", "aux.", "global.")


def lambda_at(epoch: float, total_epochs: float, lambda_max: float) -> float:
    """Cosine ramp from 0 at ``epoch = 0`` to ``lambda_max`` at ``total_epochs``."""
    if total_epochs <= 0:
        return lambda_max
    if not 0 <= epoch <= total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs}]")
    return lambda_max * 0.5 * (1.0 - math.cos(math.pi * epoch / total_epochs))


_SECTIONS = {"gate": gates.GateConfig, "ae": autoenc.AeConfig,
             "cluster": cluster.ClusterConfig}


@dataclass
class TrainConfig:
    epochs_stage1: int = 50
    epochs_stage2: int = 2000
    batch_size: int = 800
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    warmup_fraction: float = 0.1
    schedule: str = "cosine"
    seed: int = 0
    stage2_restarts: int = 1
    restart_epochs: int = 200
    gate: gates.GateConfig = field(default_factory=gates.GateConfig)
    ae: autoenc.AeConfig = field(default_factory=autoenc.AeConfig)
    cluster: cluster.ClusterConfig = field(default_factory=cluster.ClusterConfig)

    def validate(self) -> None:
        problems = []
        if self.epochs_stage1 < 1:
            problems.append("epochs_stage1 must be >= 1")
        if self.epochs_stage2 < 1:
            problems.append("epochs_stage2 must be >= 1")
        if self.batch_size < 2:
            problems.append("batch_size must be >= 2")
        if not self.lr > 0:
            problems.append("lr must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            problems.append("beta1 and beta2 must lie in [0, 1)")
        if not 0 <= self.warmup_fraction < 1:
            problems.append("warmup_fraction must lie in [0, 1)")
        if self.stage2_restarts < 1:
            problems.append("stage2_restarts must be >= 1")
        if self.restart_epochs < 1:
            problems.append("restart_epochs must be >= 1")
        if self.schedule != "cosine":
            problems.append("schedule must be 'cosine'")
        problems += [f"gate.{p}" if not p.startswith("gate") else p for p in self.gate.validate()]
        problems += self.ae.validate()
        problems += self.cluster.validate()
        if problems:
            raise ConfigError(problems)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict, partial: bool = False) -> "TrainConfig":
        """Strict parse: every field must be present unless ``partial``."""
        problems = []
        top = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for name in top:
            if name not in d:
                if not partial:
                    problems.append(f"missing field {name!r}")
                continue
            if name in _SECTIONS:
                sub_cls = _SECTIONS[name]
                sub = d[name]
                if not isinstance(sub, dict):
                    problems.append(f"field {name!r} must be an object")
                    continue
                sub_fields = {f.name for f in dataclasses.fields(sub_cls)}
                for s in sorted(sub_fields - set(sub)):
                    if not partial:
                        problems.append(f"missing field '{name}.{s}'")
                for s in sorted(set(sub) - sub_fields):
                    problems.append(f"unknown field '{name}.{s}'")
                try:
                    kwargs[name] = sub_cls(**{k: v for k, v in sub.items() if k in sub_fields})
                except TypeError as exc:
                    problems.append(f"field {name!r}: {exc}")
            else:
                kwargs[name] = d[name]
        for name in sorted(set(d) - set(top)):
            problems.append(f"unknown field {name!r}")
        if problems:
            raise ConfigError(problems)
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "TrainConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def replace(self, **changes) -> "TrainConfig":
        """Copy with dotted-path overrides, e.g. ``replace(**{"gate.lambda_max": 0})``."""
        cfg = copy.deepcopy(self)
        for key, value in changes.items():
            target = cfg
            *path, leaf = key.split(".")
            for p in path:
                target = getattr(target, p)
            if not hasattr(target, leaf):
                raise ConfigError(f"unknown field {key!r}")
            setattr(target, leaf, value)
        return cfg


# (epochs stage 1, epochs stage 2, batch size) per benchmark dataset
SCHEDULES = {
    "synthetic": (50, 2000, 800),
    "mnist60k": (300, 600, 256),
    "mnist10k": (300, 700, 100),
    "fashionmnist": (100, 500, 256),
    "tox171": (1000, 1000, 16),
    "allaml": (1000, 1000, 36),
    "prostate": (1000, 1000, 102),
    "srbct": (2000, 1000, 83),
    "biase": (10000, 1000, 56),
    "intestine": (5000, 1000, 238),
    "pbmc2": (100, 100, 256),
    "cnae9": (1000, 1000, 500),
    "mfeatz": (1000, 1000, 500),
    "miniboone": (20, 30, 512),
    "albert": (10, 40, 1024),
    "cifar10": (600, 700, 256),
}
PRESET_K = {"mnist60k": 10, "mnist10k": 10, "fashionmnist": 10, "cifar10": 10}
PRESETS = tuple(SCHEDULES)


def preset(name: str, seed: int = 0) -> TrainConfig:
    """Default hyperparameters with a dataset's epoch and batch schedule."""
    if name == "synthetic":
        return synthetic_config(seed)
    if name not in SCHEDULES:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    e1, e2, bs = SCHEDULES[name]
    cfg = TrainConfig(epochs_stage1=e1, epochs_stage2=e2, batch_size=bs, seed=seed,
                      stage2_restarts=6, restart_epochs=max(1, e2 // 10))
    if name in PRESET_K:
        cfg.cluster.k = PRESET_K[name]
    return cfg


def synthetic_config(seed: int = 0) -> TrainConfig:
    """Table-8 schedule for the synthetic benchmark with loss weights tuned to it.

    The reconstruction terms are means over features while the sparsity
    penalty sums over them, so a much smaller ``lambda_max`` than the
    default balances the two. The gate coding-rate term is kept but made
    weak: at full strength it closes gates regardless of how informative
    they are. Stage 2 keeps the best of six short head restarts.
    """
    return TrainConfig(
        epochs_stage1=50, epochs_stage2=2000, batch_size=800, seed=seed,
        stage2_restarts=6, restart_epochs=150,
        gate=gates.GateConfig(sigma=0.5, lambda_max=0.02, eps_gtcr=1000.0, hidden=64),
        ae=autoenc.AeConfig(hidden=[64, 32], d_h=8, m_rand=0.3, sigma_h=0.2),
        cluster=cluster.ClusterConfig(k=4, tau=1.0, eps_head=0.1, lambda_g_max=1.0,
                                      head_norm="cluster"),
    )


# --------------------------------------------------------------------------
# model container


@dataclass
class IdcModel:
    config: TrainConfig
    d: int
    params: dict[str, np.ndarray]
    stage: int = 0
    feature_names: list[str] | None = None
    log: list[dict] = field(default_factory=list)

    def check_finite(self) -> None:
        bad = [k for k, v in self.params.items() if not np.all(np.isfinite(v))]
        if bad:
            raise NumericalError(f"non-finite parameters: {', '.join(bad)}")

    def to_json(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "stage": self.stage,
            "d": self.d,
            "k": self.config.cluster.k,
            "d_h": self.config.ae.d_h,
            "feature_names": self.feature_names,
            "config": self.config.to_dict(),
            "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                       for k, v in sorted(self.params.items())},
            "log": self.log,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def from_json(cls, d: dict) -> "IdcModel":
        if d.get("format") != CHECKPOINT_FORMAT:
            raise DataError(f"unsupported checkpoint format {d.get('format')!r}")
        params = {k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"])
                  for k, v in d["params"].items()}
        model = cls(TrainConfig.from_dict(d["config"]), int(d["d"]), params,
                    int(d["stage"]), d.get("feature_names"), list(d.get("log", [])))
        model.check_finite()
        return model

    @classmethod
    def load(cls, path) -> "IdcModel":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read checkpoint {path}: {exc}") from None
        return cls.from_json(d)


def _select(params: dict, prefixes) -> list[str]:
    return [k for k in params if k.startswith(prefixes)]


def _grad_step(params: dict, names: list[str], opt: Adam, loss_fn: Callable):
    tape = Tape()
    leaves = {k: tape.leaf(params[k]) for k in names}
    view = dict(params)
    view.update(leaves)
    total, *rest = loss_fn(view)
    if not isinstance(total, Var):
        # nothing in the loss depends on a trainable parameter
        return rest
    grads = tape.backward(total)
    opt.step(params, {k: grads[v] for k, v in leaves.items()})
    return rest


class _Checkpointer:
    def __init__(self, out_dir, total_epochs: int):
        self.out_dir = None if out_dir is None else Path(out_dir)
        self.every = max(1, int(round(0.1 * total_epochs)))

    def maybe_save(self, model: IdcModel, epoch: int) -> None:
        if self.out_dir is not None and (epoch + 1) % self.every == 0:
            model.save(self.out_dir / "checkpoint_last.json")


def _mean_records(records: list[dict]) -> dict:
    return {k: float(np.mean([r[k] for r in records])) for k in records[0]}


# --------------------------------------------------------------------------
# stage 1


def new_model(ds: Dataset, cfg: TrainConfig) -> IdcModel:
    cfg.validate()
    rng = Rng(cfg.seed).spawn(0)
    params = gates.init_gating_network(ds.d, cfg.gate.hidden, rng)
    params.update(autoenc.init_autoencoder(ds.d, cfg.ae, rng))
    return IdcModel(cfg, ds.d, params, 0, ds.feature_names)


def eval_gates(model: IdcModel, X: np.ndarray) -> np.ndarray:
    _, z = autoenc.local_gates(model.params, X, model.config.gate, model.config.ae, None,
                               gates.EVAL)
    return np.asarray(z)


def train_stage1(ds: Dataset, cfg: TrainConfig, out_dir=None,
                 model: IdcModel | None = None) -> IdcModel:
    """Optimize the gating network and autoencoder on the sparse objective.

    The first ``warmup_fraction`` of epochs trains the autoencoder alone with
    every gate open; the sparsity weight then follows the cosine ramp over
    the remaining epochs.
    """
    model = model or new_model(ds, cfg)
    root = Rng(cfg.seed)
    noise_rng, batch_rng = root.spawn(1), root.spawn(2)
    plan = BatchPlan(cfg.batch_size)
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    epochs = cfg.epochs_stage1
    warm = int(round(cfg.warmup_fraction * epochs)) if cfg.ae.use_gates else 0
    ramp = max(1, epochs - warm)
    ckpt = _Checkpointer(out_dir, epochs)
    trainable = _select(model.params, STAGE1_PREFIXES)
    ae_only = _select(model.params, ("enc.", "dec."))
    X = ds.X
    last_good = copy.deepcopy(model.params)
    for epoch in range(epochs):
        t0 = time.perf_counter()
        warming = epoch < warm
        lam = 0.0 if warming else lambda_at(epoch - warm + 1, ramp, cfg.gate.lambda_max)
        records = []
        for idx in batches(ds.n, plan, batch_rng):
            xb = X[idx]
            z_open = np.ones_like(xb) if warming else None

            def loss_fn(p):
                total, br = autoenc.sparse_loss(xb, p, cfg.gate, cfg.ae, lam, noise_rng,
                                                z_override=z_open)
                return total, br

            try:
                (br,) = _grad_step(model.params, ae_only if warming else trainable, opt, loss_fn)
            except NumericalError as exc:
                model.params = last_good
                if out_dir is not None:
                    model.save(Path(out_dir) / "checkpoint_last.json")
                raise NumericalError(f"stage 1 diverged at epoch {epoch}: {exc}") from None
            records.append(br)
        model.check_finite()
        last_good = copy.deepcopy(model.params)
        rec = {"epoch": epoch, "stage": 1, "lambda": lam, "warmup": warming}
        rec.update(_mean_records(records))
        rec["open_gates"] = gates.mean_open_gates(eval_gates(model, X))
        rec["wall_ms"] = (time.perf_counter() - t0) * 1e3
        model.log.append(rec)
        log.debug("stage1 %s", rec)
        ckpt.maybe_save(model, epoch)
    model.stage = 1
    if out_dir is not None:
        model.save(Path(out_dir) / "checkpoint_stage1.json")
    return model


# --------------------------------------------------------------------------
# stage 2


def frozen_features(model: IdcModel, X: np.ndarray):
    """Noise-free local gates, gated inputs and unit-norm embeddings."""
    z = eval_gates(model, X)
    xg = X * z
    h = np.asarray(autoenc.encode(model.params, xg))
    return z, xg, np.asarray(ops.l2_normalize_rows(h))


class _Stage2Run:
    """One stage-2 candidate: its own head initialization, noise and batch streams."""

    def __init__(self, model: IdcModel, base: dict, rng: Rng):
        cfg = model.config
        self.cfg = cfg
        self.params = dict(base)
        self.params.update(cluster.init_cluster_params(model.d, cfg.ae.d_h, cfg.cluster,
                                                       rng.spawn(0)))
        self.noise_rng, self.batch_rng = rng.spawn(1), rng.spawn(2)
        self.opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
        self.trainable = _select(self.params, STAGE2_PREFIXES)
        self.log: list[dict] = []

    def epoch(self, epoch: int, xg, hn) -> None:
        cfg = self.cfg
        t0 = time.perf_counter()
        lam_g = lambda_at(epoch + 1, cfg.epochs_stage2, cfg.cluster.lambda_g_max)
        records = []
        for idx in batches(xg.shape[0], BatchPlan(cfg.batch_size), self.batch_rng):
            xb, hb = xg[idx], hn[idx]

            def loss_fn(p):
                total, br, _ = cluster.clust_loss(xb, hb, p, cfg.cluster, lam_g,
                                                  self.noise_rng, cfg.gate.sigma)
                return total, br

            (br,) = _grad_step(self.params, self.trainable, self.opt, loss_fn)
            records.append(br)
        rec = {"epoch": epoch, "stage": 2, "lambda_g": lam_g}
        rec.update(_mean_records(records))
        rec["wall_ms"] = (time.perf_counter() - t0) * 1e3
        self.log.append(rec)

    def score(self, hn) -> float:
        """Noise-free head loss on every sample; lower is better."""
        logits = cluster.head_logits(self.params, hn)
        soft = cluster.gumbel_softmax(logits, self.cfg.cluster.tau, None, gates.EVAL)
        return float(cluster.head_loss(hn, soft, self.cfg.cluster.eps_head,
                                       self.cfg.cluster.head_norm))


def train_stage2(ds: Dataset, model: IdcModel, out_dir=None) -> IdcModel:
    """Fit the clustering head, auxiliary classifier and global gates.

    Stage-1 weights are frozen; their (noise-free) outputs are computed once.
    With ``stage2_restarts > 1`` several heads are trained for
    ``restart_epochs`` from different initializations, the one with the
    lowest noise-free head loss on the full data is kept and trained on to
    ``epochs_stage2``. No labels are involved in the choice.
    """
    if model.stage < 1:
        raise ValueError("stage 1 has not been run on this model")
    if ds.d != model.d:
        raise DataError(f"model expects {model.d} columns, data has {ds.d}")
    cfg = model.config
    cfg.validate()
    root = Rng(cfg.seed).spawn(3)
    base = {k: v for k, v in model.params.items() if not k.startswith(STAGE2_PREFIXES)}
    _, xg, hn = frozen_features(model, ds.X)
    epochs = cfg.epochs_stage2
    n_runs = cfg.stage2_restarts
    burn = min(cfg.restart_epochs, epochs) if n_runs > 1 else 0
    runs = [_Stage2Run(model, base, root.spawn(r)) for r in range(n_runs)]

    def fail(run, epoch, exc):
        model.params = dict(run.params)
        model.log.extend(run.log)
        if out_dir is not None:
            model.save(Path(out_dir) / "checkpoint_last.json")
        return NumericalError(f"stage 2 diverged at epoch {epoch}: {exc}")

    for run in runs:
        for epoch in range(burn):
            try:
                run.epoch(epoch, xg, hn)
            except NumericalError as exc:
                raise fail(run, epoch, exc) from None
    chosen = 0
    if n_runs > 1:
        scores = [run.score(hn) for run in runs]
        chosen = int(np.argmin(scores))
        model.log.append({"epoch": burn - 1, "stage": 2, "event": "restart_selection",
                          "scores": scores, "chosen": chosen})
    run = runs[chosen]
    model.params = run.params
    model.log.extend(run.log)
    ckpt = _Checkpointer(out_dir, epochs)
    for epoch in range(burn, epochs):
        try:
            run.epoch(epoch, xg, hn)
        except NumericalError as exc:
            raise fail(run, epoch, exc) from None
        model.log.append(run.log[-1])
        ckpt.maybe_save(model, epoch)
    model.check_finite()
    model.stage = 2
    cluster.check_collapse(_assign(model, hn)[1])
    if out_dir is not None:
        model.save(Path(out_dir) / "checkpoint_stage2.json")
    return model


def train(ds: Dataset, cfg: TrainConfig, out_dir=None) -> IdcModel:
    model = train_stage1(ds, cfg, out_dir)
    return train_stage2(ds, model, out_dir)


# --------------------------------------------------------------------------
# inference


def _assign(model: IdcModel, hn: np.ndarray):
    cfg = model.config.cluster
    logits = np.asarray(cluster.head_logits(model.params, hn))
    soft = np.asarray(cluster.gumbel_softmax(logits, cfg.tau, None, gates.EVAL))
    return np.argmax(soft, axis=1), soft


def global_gate_matrix(model: IdcModel) -> np.ndarray:
    return np.clip(0.5 + model.params["global.M"], 0.0, 1.0)


def predict(model: IdcModel, X) -> dict:
    """Noise-free cluster labels, soft assignments, local gates and Z_G."""
    if model.stage < 2:
        raise ValueError("model is not trained (stage 2 missing)")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.d:
        raise DataError(f"model expects {model.d} columns, got shape {X.shape}")
    z, _, hn = frozen_features(model, X)
    hard, soft = _assign(model, hn)
    return {"labels": hard, "soft": soft, "gates": z, "global_gates": global_gate_matrix(model)}


# --------------------------------------------------------------------------
# ablations

ABLATIONS = {
    "reg": {"gate.lambda_max": 0.0},
    "latent_denoise": {"ae.latent_denoise": False},
    "input_denoise": {"ae.input_denoise": False},
    "recon": {"ae.recon": False},
    "head_kmeans": {},
}


def ablation_config(cfg: TrainConfig, drop: str) -> TrainConfig:
    if drop not in ABLATIONS:
        raise ConfigError(f"unknown ablation {drop!r}; valid: {', '.join(ABLATIONS)}")
    return cfg.replace(**ABLATIONS[drop])


def kmeans_on_features(model: IdcModel, X: np.ndarray) -> np.ndarray:
    """Cluster the unit-norm embeddings of a stage-1 model with K-means."""
    _, _, hn = frozen_features(model, X)
    labels, _, _ = cluster.kmeans(hn, model.config.cluster.k, seed=model.config.seed)
    return labels


def run_ablation(ds: Dataset, cfg: TrainConfig, drop: str, out_dir=None) -> dict:
    """Train the ablated variant; returns its hard labels and eval gates."""
    abl = ablation_config(cfg, drop)
    if drop == "head_kmeans":
        model = train_stage1(ds, abl, out_dir)
        return {"labels": kmeans_on_features(model, ds.X), "gates": eval_gates(model, ds.X),
                "model": model}
    model = train(ds, abl, out_dir)
    out = predict(model, ds.X)
    return {"labels": out["labels"], "gates": out["gates"], "model": model}
