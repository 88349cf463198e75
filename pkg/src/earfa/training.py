"""L1 training with Adam, the step schedule, checkpointing, and the
ablation harness.

One logical training thread owns the parameters, optimizer state, and one
seeded random generator; everything stochastic (patch positions, image
choice, augmentation ops) is drawn from that generator in a fixed order,
so a given seed reproduces the identical run.
"""

from __future__ import annotations

import csv
import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import augment_pair, sample_patch, scan_dataset
from .errors import ConfigError, NumericError, ValidationError, WeightLoadError
from .metrics import y_channel_scores
from .model import EARFA, ModelConfig, super_resolve
from .tensor import Tensor, absolute, sub, tmean
from .weights import load_weights, read_tensor_record, write_tensor_record

OPT_MAGIC = b"EARO"
OPT_VERSION = 1


@dataclass
class TrainConfig:
    batch: int = 64
    iters: int = 500_000
    lr0: float = 5e-4
    milestones: tuple = (250_000, 400_000, 450_000, 475_000)
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    seed: int = 0
    patch: int = 64            # LR patch size
    log_every: int = 100
    eval_every: int = 1000
    checkpoint_every: int = 1000

    def validate(self) -> "TrainConfig":
        if self.batch < 1 or self.iters < 1 or self.patch < 1:
            raise ConfigError("batch, iters and patch must be positive")
        if self.lr0 <= 0:
            raise ConfigError("lr0 must be positive")
        ms = tuple(self.milestones)
        if any(b <= a for a, b in zip(ms, ms[1:])) or any(m >= self.iters for m in ms):
            raise ConfigError("milestones must be strictly increasing and below iters")
        return self


def lr_at(iteration: int, cfg: TrainConfig) -> float:
    """Piecewise-constant schedule: halve at each milestone reached."""
    passed = sum(1 for m in cfg.milestones if iteration >= m)
    return cfg.lr0 * (0.5 ** passed)


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute error over all elements, as a scalar tensor."""
    if pred.data.shape != target.data.shape:
        raise ValidationError(f"shape mismatch: {pred.data.shape} vs {target.data.shape}")
    return tmean(absolute(sub(pred, target)))


class Adam:
    """Standard Adam with bias correction; aborts on non-finite gradients."""

    def __init__(self, named_params, beta1: float = 0.9, beta2: float = 0.99,
                 eps: float = 1e-8):
        self.params = list(named_params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None

    def step(self, lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params:
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for parameter '{name}'")
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainState:
    """Everything needed to resume a run mid-stream."""

    iteration: int = 0
    best_psnr: float = float("-inf")
    rng_state: dict | None = None
    losses: list = field(default_factory=list)


def save_optimizer(path, optimizer: Adam, state: TrainState) -> None:
    meta = json.dumps({
        "iteration": state.iteration,
        "best_psnr": state.best_psnr,
        "rng_state": state.rng_state,
        "adam_t": optimizer.t,
    }).encode("utf-8")
    with open(path, "wb") as f:
        f.write(OPT_MAGIC)
        f.write(struct.pack("<I", OPT_VERSION))
        f.write(struct.pack("<I", len(meta)))
        f.write(meta)
        tensors = [(f"m.{name}", optimizer.m[name]) for name, _ in optimizer.params]
        tensors += [(f"v.{name}", optimizer.v[name]) for name, _ in optimizer.params]
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors:
            write_tensor_record(f, name, arr)


def load_optimizer(path, optimizer: Adam) -> TrainState:
    with open(path, "rb") as f:
        if f.read(4) != OPT_MAGIC:
            raise WeightLoadError(f"{path}: not an optimizer sidecar")
        (version,) = struct.unpack("<I", f.read(4))
        if version != OPT_VERSION:
            raise WeightLoadError(f"{path}: unsupported sidecar version {version}")
        (meta_len,) = struct.unpack("<I", f.read(4))
        meta = json.loads(f.read(meta_len).decode("utf-8"))
        (count,) = struct.unpack("<I", f.read(4))
        tensors = dict(read_tensor_record(f) for _ in range(count))
    optimizer.t = int(meta["adam_t"])
    for name, _ in optimizer.params:
        optimizer.m[name] = tensors[f"m.{name}"]
        optimizer.v[name] = tensors[f"v.{name}"]
    return TrainState(iteration=int(meta["iteration"]),
                      best_psnr=float(meta["best_psnr"]),
                      rng_state=meta["rng_state"])


def _draw_batch(pairs: list, cfg: TrainConfig, rng: np.random.Generator):
    lrs, hrs = [], []
    for _ in range(cfg.batch):
        pair = pairs[int(rng.integers(0, len(pairs)))]
        lr, hr = sample_patch(pair, cfg.patch, rng)
        lr, hr = augment_pair(lr, hr, int(rng.integers(0, 8)))
        lrs.append(lr)
        hrs.append(hr)
    return np.concatenate(lrs, axis=0), np.concatenate(hrs, axis=0)


def evaluate(model: EARFA, pairs: list, shave: int | None = None) -> tuple[float, float]:
    """Mean Y-channel PSNR/SSIM of the model over image pairs."""
    shave = model.cfg.scale if shave is None else shave
    ps, ss = [], []
    for pair in pairs:
        sr = super_resolve(model, pair.lr)
        p, s = y_channel_scores(sr, pair.hr, shave)
        ps.append(p)
        ss.append(s)
    return float(np.mean(ps)), float(np.mean(ss))


def train(model_cfg: ModelConfig, cfg: TrainConfig, dataset, out_dir,
          val_pairs: list | None = None, resume=None) -> dict:
    """Run the training loop; returns a summary with per-iteration losses.

    ``dataset`` is a directory of HR PNGs or a prebuilt list of
    :class:`ImagePair`.  Writes ``log.csv`` (iter, lr, loss, eval_psnr),
    the final weights, the optimizer sidecar, and a config echo into
    ``out_dir``.  ``resume`` names a checkpoint stem to continue from.
    """
    cfg.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if isinstance(dataset, (str, Path)):
        pairs = scan_dataset(dataset, model_cfg.scale)
    else:
        pairs = list(dataset)
    usable = [p for p in pairs
              if p.lr.shape[2] >= cfg.patch and p.lr.shape[3] >= cfg.patch]
    if len(usable) < len(pairs):
        warnings.warn(f"skipping {len(pairs) - len(usable)} image(s) smaller "
                      f"than the {cfg.patch}px patch")
    pairs = usable
    if not pairs:
        raise ValidationError("training dataset is empty")

    model = EARFA(model_cfg, seed=cfg.seed)
    optimizer = Adam(model.named_params(), cfg.beta1, cfg.beta2, cfg.eps)
    rng = np.random.default_rng(cfg.seed)
    state = TrainState()

    if resume is not None:
        resume = Path(resume)
        model.load_state(load_weights(resume.with_suffix(".earfa")))
        state = load_optimizer(resume.with_suffix(".opt"), optimizer)
        rng.bit_generator.state = state.rng_state

    (out_dir / "model.cfg").write_text(model_cfg.to_text(), encoding="utf-8")
    log_path = out_dir / "log.csv"
    mode = "a" if resume is not None and log_path.exists() else "w"
    log_file = open(log_path, mode, newline="", encoding="utf-8")
    log = csv.writer(log_file)
    if mode == "w":
        log.writerow(["iter", "lr", "loss", "eval_psnr"])

    def checkpoint(stem: str):
        model.save(out_dir / f"{stem}.earfa")
        state.rng_state = rng.bit_generator.state
        save_optimizer(out_dir / f"{stem}.opt", optimizer, state)

    losses = []
    eval_psnr = ""
    for it in range(state.iteration, cfg.iters):
        lr_now = lr_at(it, cfg)
        lr_batch, hr_batch = _draw_batch(pairs, cfg, rng)
        pred = model(Tensor(lr_batch))
        loss = l1_loss(pred, Tensor(hr_batch))
        optimizer.zero_grad()
        loss.backward()
        optimizer.step(lr_now)
        loss_val = loss.item()
        losses.append(loss_val)

        if val_pairs and (it + 1) % cfg.eval_every == 0:
            p, _ = evaluate(model, val_pairs)
            eval_psnr = f"{p:.4f}"
            if p > state.best_psnr:
                state.best_psnr = p
                model.save(out_dir / "best.earfa")
        if it % cfg.log_every == 0 or it == cfg.iters - 1:
            log.writerow([it, f"{lr_now:.3e}", f"{loss_val:.6f}", eval_psnr])
            log_file.flush()
            eval_psnr = ""
        state.iteration = it + 1
        if (it + 1) % cfg.checkpoint_every == 0:
            checkpoint("checkpoint")

    checkpoint("final")
    log_file.close()
    return {
        "losses": losses,
        "iterations": state.iteration,
        "best_psnr": state.best_psnr,
        "weights": out_dir / "final.earfa",
        "log": log_path,
        "model": model,
    }


# -- ablation harness -----------------------------------------------------------

#: (label, spatial attention, channel attention) in presentation order.
ABLATION_VARIANTS = (
    ("baseline", "none", "none"),
    ("slka", "slka", "none"),
    ("ea", "none", "ea"),
    ("ea+lka", "lka", "ea"),
    ("slka+se", "slka", "se"),
    ("slka+ea", "slka", "ea"),
)


def ablate(base_cfg: ModelConfig, cfg: TrainConfig, dataset, out_dir,
           val_pairs: list | None = None) -> list[dict]:
    """Train every attention combination with a shared seed and data order.

    Returns one row per variant and writes ``ablation.csv`` into
    ``out_dir``.  Because every stochastic draw comes from a generator
    seeded identically per variant, all variants see the same patches in
    the same order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if isinstance(dataset, (str, Path)):
        pairs = scan_dataset(dataset, base_cfg.scale)
    else:
        pairs = list(dataset)
    eval_pairs = val_pairs if val_pairs else pairs

    rows = []
    for label, spatial, channel in ABLATION_VARIANTS:
        variant_cfg = base_cfg.with_attention(spatial, channel)
        result = train(variant_cfg, cfg, pairs, out_dir / label.replace("+", "_"))
        p, s = evaluate(result["model"], eval_pairs)
        rows.append({
            "variant": label,
            "slka": int(spatial == "slka"),
            "ea": int(channel == "ea"),
            "lka": int(spatial == "lka"),
            "se": int(channel == "se"),
            "params": sum(t.data.size for _, t in result["model"].named_params()),
            "final_loss": result["losses"][-1],
            "psnr": p,
            "ssim": s,
        })

    csv_path = out_dir / "ablation.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return rows
