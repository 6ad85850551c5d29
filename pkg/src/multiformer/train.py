"""Multi-stage heatmap regression: loss, training loop, checkpoints.

A checkpoint is an MFCK file holding ``param/*``, ``buffer/*``, ``optim/*``
and ``meta/*`` records, plus a ``<file>.json`` sidecar with the model and
training configuration needed to rebuild the network.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datakit.dataset import ArrayBatch, Dataset, DatasetError, to_arrays
from .model import MultiFormer
from .numerics.checkpoint import load_checkpoint, save_checkpoint
from .numerics.optim import StepDecay, make_optimizer
from .numerics.tensor import (
    ConfigurationError,
    DimensionError,
    NonFiniteError,
    Tensor,
    checked,
    default_dtype,
    mse,
    no_grad,
)
from .presets import ModelConfig, get_preset

DTYPES = {"float32": np.float32, "float64": np.float64}


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, op: str):
        super().__init__(f"non-finite loss in epoch {epoch}; first non-finite value produced by '{op}'")
        self.epoch = epoch
        self.op = op


@dataclass(frozen=True)
class TrainConfig:
    preset: str = "desk"
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 100
    decay: float = 0.7
    decay_interval: int = 15
    seed: int = 0
    stages: int = 3
    optimizer: str = "adam"
    dtype: str = "float32"
    sigma: float = 1.5
    limb_width: float = 1.0
    dropout: float | None = None  # None keeps the preset's rate
    train_split: str = "train"
    val_split: str = "val"

    def __post_init__(self):
        for name in ("lr", "batch_size", "epochs", "decay", "decay_interval", "stages", "sigma", "limb_width"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.dtype not in DTYPES:
            raise ConfigurationError(f"dtype must be one of {sorted(DTYPES)}, got {self.dtype!r}")

    def model_config(self) -> ModelConfig:
        overrides = {"stages": self.stages}
        if self.dropout is not None:
            overrides["dropout"] = self.dropout
        return get_preset(self.preset, **overrides)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def loss_total(outputs, pcm_labels, paf_labels) -> Tensor:
    """Sum over stages of squared PCM and PAF residuals over every pixel and channel."""
    if not outputs:
        raise DimensionError("no stage outputs")
    total = None
    for out in outputs:
        if out.pcm.shape != np.shape(pcm_labels) or out.paf.shape != np.shape(paf_labels):
            raise DimensionError(
                f"stage output {out.pcm.shape}/{out.paf.shape} vs labels {np.shape(pcm_labels)}/{np.shape(paf_labels)}"
            )
        term = mse(out.pcm, pcm_labels) + mse(out.paf, paf_labels)
        total = term if total is None else total + term
    return total


@dataclass
class TrainResult:
    model: MultiFormer
    history: list = field(default_factory=list)  # dicts: epoch, train_loss, val_loss, lr
    best_path: Path | None = None
    last_path: Path | None = None


def _batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    # every batch needs >= 2 samples for batch statistics
    k = max(1, min(math.ceil(n / batch_size), n // 2))
    return np.array_split(rng.permutation(n), k)


def _checkpoint_state(model: MultiFormer, opt, epoch: int, best: float) -> dict:
    state = {f"param/{k}": p.data for k, p in model.named_parameters()}
    state.update({f"buffer/{k}": v for k, v in model.named_buffers()})
    state.update({f"optim/{k}": v for k, v in opt.state().items()})
    state["meta/epoch"] = np.array(float(epoch))
    state["meta/best"] = np.array(best)
    return state


def save_training_checkpoint(path, model, opt, epoch: int, best: float, cfg: TrainConfig) -> Path:
    path = Path(path)
    save_checkpoint(path, _checkpoint_state(model, opt, epoch, best))
    sidecar = {"model": model.cfg.to_dict(), "train": cfg.to_dict(), "epoch": epoch}
    tmp = f"{path}.json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=1, sort_keys=True)
    os.replace(tmp, f"{path}.json")
    return path


def read_sidecar(path) -> dict:
    side = f"{os.fspath(path)}.json"
    try:
        with open(side, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise FileNotFoundError(f"{side}: {exc.strerror}") from exc


def load_model(path) -> tuple[MultiFormer, dict]:
    """Rebuild a network from a checkpoint and its sidecar; returns (model, raw records)."""
    side = read_sidecar(path)
    records = load_checkpoint(path)
    cfg = ModelConfig.from_dict(side["model"])
    dtype = DTYPES[side.get("train", {}).get("dtype", "float32")]
    with default_dtype(dtype):
        model = MultiFormer(cfg)
    model.load_state_dict(
        {k.split("/", 1)[1]: v for k, v in records.items() if k.startswith(("param/", "buffer/"))},
    )
    return model, records


def _epoch_loss(model, data: ArrayBatch, cfg: TrainConfig) -> float:
    """Mean per-sample loss in eval mode."""
    model.eval()
    total = 0.0
    with no_grad():
        for idx in np.array_split(np.arange(len(data)), max(1, math.ceil(len(data) / cfg.batch_size))):
            b = data.take(idx)
            total += float(loss_total(model(b.freq, b.temp), b.pcm, b.paf).data)
    model.train()
    return total / len(data)


def _find_nonfinite_op(model, batch: ArrayBatch, rng_state) -> str:
    """Re-run a batch with non-finite checks on and return the first failing op."""
    rng = np.random.default_rng()
    rng.bit_generator.state = rng_state
    model.set_rng(rng)
    try:
        with checked(), no_grad():
            loss_total(model(batch.freq, batch.temp), batch.pcm, batch.paf)
    except NonFiniteError as exc:
        return exc.op
    return "loss"


def train(
    cfg: TrainConfig,
    dataset: Dataset | ArrayBatch,
    out_dir=None,
    resume=None,
    log=None,
    val_data: ArrayBatch | None = None,
) -> TrainResult:
    """Seeded training run.

    Writes ``best.mfck``, ``last.mfck`` and ``loss.csv`` into ``out_dir`` when
    given. ``resume`` points at a ``last.mfck`` written by an earlier run with
    the same configuration; the continued run matches an uninterrupted one.
    """
    mcfg = cfg.model_config()
    dtype = DTYPES[cfg.dtype]
    if isinstance(dataset, ArrayBatch):
        train_data = dataset
    else:
        samples = dataset.split(cfg.train_split)
        if not samples:
            raise DatasetError(f"training split '{cfg.train_split}' is empty")
        train_data = to_arrays(samples, mcfg.packets, mcfg.subcarriers, mcfg.side, cfg.sigma, cfg.limb_width, dtype)
        val_samples = dataset.split(cfg.val_split) if cfg.val_split else []
        if val_samples and val_data is None:
            val_data = to_arrays(val_samples, mcfg.packets, mcfg.subcarriers, mcfg.side, cfg.sigma, cfg.limb_width, dtype)
    if len(train_data) < 2:
        raise DatasetError("training needs at least 2 samples (batch statistics)")

    with default_dtype(dtype):
        model = MultiFormer(mcfg, seed=cfg.seed)
    names = [n for n, _ in model.named_parameters()]
    opt = make_optimizer(cfg.optimizer, model.parameters(), names, cfg.lr, StepDecay(cfg.decay, cfg.decay_interval))
    start, best = 1, math.inf
    history: list[dict] = []

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    if resume is not None:
        model_rec = load_checkpoint(resume)
        model.load_state_dict({k.split("/", 1)[1]: v for k, v in model_rec.items() if k.startswith(("param/", "buffer/"))})
        opt.load_state({k[len("optim/"):]: v for k, v in model_rec.items() if k.startswith("optim/")})
        start = int(model_rec["meta/epoch"]) + 1
        best = float(model_rec["meta/best"])
        history = _read_history(out / "loss.csv", start - 1) if out is not None and (out / "loss.csv").exists() else []

    model.train()
    for epoch in range(start, cfg.epochs + 1):
        rng = np.random.default_rng([cfg.seed, epoch])
        lr = opt.lr
        running = 0.0
        for idx in _batches(len(train_data), cfg.batch_size, rng):
            batch = train_data.take(idx)
            rng_state = rng.bit_generator.state
            model.set_rng(rng)
            loss = loss_total(model(batch.freq, batch.temp), batch.pcm, batch.paf)
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDivergedError(epoch, _find_nonfinite_op(model, batch, rng_state))
            (loss * (1.0 / len(idx))).backward()
            opt.step()
            opt.zero_grad()
            running += value
        opt.epoch_end(epoch)
        train_loss = running / len(train_data)
        val_loss = _epoch_loss(model, val_data, cfg) if val_data is not None and len(val_data) else float("nan")
        history.append({"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss, "lr": lr})
        if log is not None:
            log(history[-1])
        score = val_loss if math.isfinite(val_loss) else train_loss
        if out is not None:
            if score < best:
                best = score
                save_training_checkpoint(out / "best.mfck", model, opt, epoch, best, cfg)
            save_training_checkpoint(out / "last.mfck", model, opt, epoch, best, cfg)
            _write_history(out / "loss.csv", history)
        else:
            best = min(best, score)
    result = TrainResult(model, history)
    if out is not None:
        result.best_path = out / "best.mfck" if (out / "best.mfck").exists() else None
        result.last_path = out / "last.mfck" if (out / "last.mfck").exists() else None
        if not history:
            _write_history(out / "loss.csv", history)
    model.eval()
    return result


CSV_FIELDS = ("epoch", "train_loss", "val_loss", "lr")


def _write_history(path, history) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for row in history:
            w.writerow([row["epoch"], repr(float(row["train_loss"])), repr(float(row["val_loss"])), repr(float(row["lr"]))])
    os.replace(tmp, path)


def _read_history(path, upto: int) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        if int(r["epoch"]) <= upto:
            out.append({"epoch": int(r["epoch"]), **{k: float(r[k]) for k in CSV_FIELDS[1:]}})
    return out


def read_history(path) -> list[dict]:
    return _read_history(path, 10**9)
