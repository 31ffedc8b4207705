"""Desk-scale masked reconstruction harness.

A two-layer per-subvolume autoencoder ``y = W2 relu(W1 x + b1) + b2`` is
trained with an L1 loss restricted to the masked subvolumes. Every block
of the masked volume is fed through the model independently; hidden blocks
arrive as ``fill``-valued inputs. Gradients are derived by hand so they can
be checked against finite differences.

Because the loss is a mean over ``h*w*d`` voxels per block, per-parameter
gradients scale as ``1 / (h*w*d)``; learning rates are correspondingly
large.
"""
from __future__ import annotations

import copy
import csv
import logging
import math
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import rng
from .errors import DegenerateRatioError, DivergenceError, ParseError, ShapeError
from .masking import MaskPlan, Strategy, apply_mask, build_mask_plan
from .partition import extract_all
from .volume import Volume3D

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"FMPT"
CHECKPOINT_VERSION = 1
PARAMS = ("W1", "b1", "W2", "b2")

# seed offsets for derived streams
INIT_STAGE = 0x1000
HELDOUT_STAGE = 0x2000


@dataclass
class PretextModel:
    W1: np.ndarray  # (m, n)
    b1: np.ndarray  # (m,)
    W2: np.ndarray  # (n, m)
    b2: np.ndarray  # (n,)
    history: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.W1.shape[1]

    @property
    def m(self) -> int:
        return self.W1.shape[0]

    def params(self) -> dict:
        return {name: getattr(self, name) for name in PARAMS}

    def copy(self) -> "PretextModel":
        return PretextModel(*(p.copy() for p in (self.W1, self.b1, self.W2, self.b2)), list(self.history))

    def is_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params().values())


def _uniform(gen: rng.SplitMix64, count: int, bound: float) -> np.ndarray:
    # 53-bit mantissa draws mapped to [-bound, bound)
    u = np.array([(gen.next_u64() >> 11) * (1.0 / (1 << 53)) for _ in range(count)])
    return (2.0 * u - 1.0) * bound


def init_model(n: int, m: int, seed: int = 0) -> PretextModel:
    """Uniform fan-in initialization, ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
    if not 0 < m < n:
        raise ValueError(f"bottleneck must satisfy 0 < m < n, got m={m}, n={n}")
    gen = rng.SplitMix64(rng.derive_seed(seed, INIT_STAGE))
    b_in, b_hid = 1.0 / math.sqrt(n), 1.0 / math.sqrt(m)
    W1 = _uniform(gen, m * n, b_in).reshape(m, n)
    b1 = _uniform(gen, m, b_in)
    W2 = _uniform(gen, n * m, b_hid).reshape(n, m)
    b2 = _uniform(gen, n, b_hid)
    return PretextModel(W1, b1, W2, b2)


def forward(model: PretextModel, x) -> np.ndarray:
    """Reconstruct one flattened block (``n``) or a stack of them (``B x n``)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n or x.ndim > 2:
        raise ShapeError(f"model expects blocks of {model.n} values, got shape {x.shape}")
    hidden = np.maximum(x @ model.W1.T + model.b1, 0.0)
    return hidden @ model.W2.T + model.b2


def _masked_rows(plan) -> np.ndarray:
    if isinstance(plan, MaskPlan):
        rows = np.array([e.masked for e in plan.entries], dtype=bool)
    else:
        rows = np.asarray(plan, dtype=bool)
    if not rows.any():
        raise DegenerateRatioError("no masked subvolumes; the restricted loss is undefined")
    return rows


def block_matrix(v: Volume3D, plan: MaskPlan) -> np.ndarray:
    """Blocks of ``v`` on the plan's grid, one flattened block per row."""
    if v.shape != plan.grid.shape:
        raise ShapeError(f"plan grid is for shape {plan.grid.shape}, volume has {v.shape}")
    return extract_all(v, plan.grid).reshape(plan.grid.P, -1).astype(np.float64)


def masked_l1_loss(target: Volume3D, recon, plan: MaskPlan) -> float:
    """Mean absolute error over the voxels of masked subvolumes only.

    ``recon`` holds one reconstructed block per row, in flat-index order.
    """
    rows = _masked_rows(plan)
    t = block_matrix(target, plan)[rows]
    r = np.asarray(recon, dtype=np.float64).reshape(plan.grid.P, -1)
    if r.shape[1] != t.shape[1]:
        raise ShapeError(f"reconstruction blocks have {r.shape[1]} values, expected {t.shape[1]}")
    return float(np.abs(r[rows] - t).mean())


@dataclass
class Batch:
    """Model inputs and targets for the masked rows of one or more volumes."""

    inputs: np.ndarray
    targets: np.ndarray

    @classmethod
    def from_volume(cls, target: Volume3D, plan: MaskPlan, fill: float = 0.0) -> "Batch":
        rows = _masked_rows(plan)
        masked = apply_mask(target, plan, fill)
        return cls(block_matrix(masked, plan)[rows], block_matrix(target, plan)[rows])

    @classmethod
    def concat(cls, batches) -> "Batch":
        batches = list(batches)
        return cls(np.concatenate([b.inputs for b in batches]), np.concatenate([b.targets for b in batches]))


def batch_loss(model: PretextModel, batch: Batch) -> float:
    return float(np.abs(forward(model, batch.inputs) - batch.targets).mean())


def gradient(model: PretextModel, batch: Batch) -> dict:
    """Analytic gradient of the masked L1 loss; subgradient 0 at every kink."""
    X, T = batch.inputs, batch.targets
    N = float(T.size)
    Z = X @ model.W1.T + model.b1
    H = np.maximum(Z, 0.0)
    Y = H @ model.W2.T + model.b2
    G_y = np.sign(Y - T) / N
    G_z = (G_y @ model.W2) * (Z > 0.0)
    return {
        "W1": G_z.T @ X,
        "b1": G_z.sum(axis=0),
        "W2": G_y.T @ H,
        "b2": G_y.sum(axis=0),
    }


def numeric_gradient(loss_fn, params: dict, step: float = 1e-4) -> dict:
    """Central finite differences of ``loss_fn()`` over every coordinate of ``params``.

    ``params`` arrays are perturbed in place and restored.
    """
    out = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn()
            flat[i] = orig - step
            down = loss_fn()
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        out[name] = g
    return out


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 24.0
    epochs: int = 50
    batch_size: int = 0  # volumes per step; 0 = all (full batch)
    seed: int = 0
    ratio: float = 0.6
    strategy: str = "ForegroundHU"
    lam: float = 0.1
    weight_decay: float = 0.05
    sub: tuple = (8, 8, 8)
    bottleneck: int = 32
    fill: float = 0.0

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("learning rate must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 0:
            raise ValueError("batch size must be non-negative")
        object.__setattr__(self, "sub", tuple(int(s) for s in self.sub))
        Strategy.parse(self.strategy)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sub"] = list(self.sub)
        return d


def _plan_seed(seed: int, epoch: int, volume_index: int) -> int:
    return rng.derive_seed(seed + epoch, volume_index << 32)


def _epoch_batches(volumes, config: TrainConfig, epoch: int) -> list[Batch]:
    batches = []
    for i, v in enumerate(volumes):
        plan = build_mask_plan(v, config.sub, config.lam, config.ratio, config.strategy,
                               _plan_seed(config.seed, epoch, i))
        batches.append(Batch.from_volume(v, plan, config.fill))
    return batches


def train(model: PretextModel | None, volumes, config: TrainConfig) -> PretextModel:
    """Gradient descent with decoupled weight decay; returns a trained copy.

    Each step is ``theta <- theta - lr * grad - weight_decay * theta``. Mask
    plans are redrawn every epoch from seed ``config.seed + epoch``.
    ``history`` records the loss of each epoch's batches before its update.
    """
    volumes = list(volumes)
    if not volumes:
        raise ValueError("training needs at least one volume")
    n = int(np.prod(config.sub))
    model = init_model(n, config.bottleneck, config.seed) if model is None else model.copy()
    if model.n != n:
        raise ShapeError(f"model block size {model.n} does not match subvolume {config.sub}")
    model.history = []
    step = config.batch_size or len(volumes)
    last_good = model.copy()

    for epoch in range(config.epochs):
        batches = _epoch_batches(volumes, config, epoch)
        epoch_loss = 0.0
        total = 0
        for start in range(0, len(batches), step):
            batch = Batch.concat(batches[start : start + step])
            loss = batch_loss(model, batch)
            if not math.isfinite(loss):
                raise DivergenceError(f"loss became {loss} at epoch {epoch}", state=last_good, history=model.history)
            grads = gradient(model, batch)
            last_good = model.copy()
            last_good.history = list(model.history)
            for name in PARAMS:
                p = getattr(model, name)
                p -= config.lr * grads[name] + config.weight_decay * p
            if not model.is_finite():
                raise DivergenceError(f"parameters became non-finite at epoch {epoch}",
                                      state=last_good, history=model.history)
            epoch_loss += loss * batch.targets.size
            total += batch.targets.size
        model.history.append(epoch_loss / total)
    return model


def evaluate(model: PretextModel, volumes, config: TrainConfig, stage: int = HELDOUT_STAGE) -> float:
    """Masked L1 over plans drawn from a seed stream training never uses."""
    batches = []
    for i, v in enumerate(volumes):
        plan = build_mask_plan(v, config.sub, config.lam, config.ratio, config.strategy,
                               rng.derive_seed(config.seed, stage + (i << 32)))
        batches.append(Batch.from_volume(v, plan, config.fill))
    return batch_loss(model, Batch.concat(batches))


def strategy_sweep(volumes, strategies, ratios, config: TrainConfig) -> list[dict]:
    """Train one model per (strategy, ratio) cell and report held-out masked loss.

    A failing cell is logged and reported with ``final_loss = nan``.
    """
    strategies = [Strategy.parse(s) for s in strategies]
    ratios = [float(r) for r in ratios]
    if not strategies or not ratios:
        raise ValueError("sweep needs at least one strategy and one ratio")
    rows = []
    for strategy in strategies:
        for ratio in ratios:
            cell = replace(config, strategy=strategy.value, ratio=ratio)
            try:
                trained = train(None, volumes, cell)
                final = evaluate(trained, volumes, cell)
            except Exception as exc:  # noqa: BLE001 - one bad cell must not stop the sweep
                log.warning("sweep cell %s/%s failed: %s", strategy.value, ratio, exc)
                final = math.nan
            rows.append({"strategy": strategy.value, "ratio": ratio, "final_loss": final,
                         "epochs": cell.epochs, "seed": cell.seed})
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["strategy", "ratio", "final_loss", "epochs", "seed"])
        for r in rows:
            writer.writerow([r["strategy"], repr(r["ratio"]), repr(r["final_loss"]), r["epochs"], r["seed"]])


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(history):
            writer.writerow([epoch, repr(float(loss))])


def save_checkpoint(model: PretextModel, path) -> None:
    """Write ``FMPT`` | version u32 | n u32 | m u32 | W1 b1 W2 b2 as LE float32."""
    head = CHECKPOINT_MAGIC + struct.pack("<III", CHECKPOINT_VERSION, model.n, model.m)
    body = b"".join(np.asarray(p, dtype="<f4").tobytes(order="C") for p in model.params().values())
    Path(path).write_bytes(head + body)


def load_checkpoint(path) -> PretextModel:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC or len(raw) < 16:
        raise ParseError(f"{path}: not a pretext checkpoint")
    version, n, m = struct.unpack_from("<III", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise ParseError(f"{path}: unsupported checkpoint version {version}")
    shapes = [(m, n), (m,), (n, m), (n,)]
    need = 16 + 4 * sum(int(np.prod(s)) for s in shapes)
    if len(raw) != need:
        raise ParseError(f"{path}: expected {need} bytes, found {len(raw)}")
    arrays, offset = [], 16
    for shape in shapes:
        count = int(np.prod(shape))
        arrays.append(np.frombuffer(raw, dtype="<f4", count=count, offset=offset).astype(np.float64).reshape(shape))
        offset += 4 * count
    return PretextModel(*arrays)
