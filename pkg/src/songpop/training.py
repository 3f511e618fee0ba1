"""Epoch loop with patience-based early stopping and best-checkpoint restore."""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dataset import batch_iter
from .errors import ConfigError, InvalidInputError, NumericError
from .nn import Adam, PopularityNet, mse_loss

log = logging.getLogger(__name__)

TARGET_SCALE = 100.0


@dataclass(frozen=True)
class TrainingConfig:
    batch_size: int = 32
    max_epochs: int = 25
    learning_rate: float = 0.001
    patience: int = 7
    min_delta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("batch_size", "max_epochs", "patience"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.min_delta < 0:
            raise ConfigError(f"min_delta must be >= 0, got {self.min_delta}")


@dataclass
class EarlyStopper:
    """Stops after ``patience`` consecutive epochs without a loss below
    ``best_loss - min_delta``. A loss equal to the best does not count as
    an improvement."""

    patience: int = 7
    min_delta: float = 0.0
    best_loss: float = math.inf
    epochs_since_improvement: int = 0
    history: list = field(default_factory=list)

    @property
    def epoch(self) -> int:
        return len(self.history)

    def observe(self, val_loss: float) -> bool:
        """Record one epoch's validation loss; returns True when training should stop."""
        if not math.isfinite(val_loss):
            raise NumericError(f"validation loss is {val_loss} at epoch {self.epoch + 1}")
        self.history.append(float(val_loss))
        if val_loss < self.best_loss - self.min_delta:
            self.best_loss = float(val_loss)
            self.epochs_since_improvement = 0
        else:
            self.epochs_since_improvement += 1
        return self.epochs_since_improvement >= self.patience

    @property
    def improved(self) -> bool:
        return bool(self.history) and self.epochs_since_improvement == 0


@dataclass
class FeatureSet:
    """Network-ready arrays for a list of tracks."""

    track_ids: list
    specs: np.ndarray  # (N, n_mels, n_frames)
    meta: np.ndarray  # (N, meta_dim), scaled
    popularity: np.ndarray  # (N,) in 0-100 units

    def __len__(self):
        return len(self.track_ids)

    @property
    def targets(self) -> np.ndarray:
        return self.popularity / TARGET_SCALE

    def subset(self, idx) -> "FeatureSet":
        idx = np.asarray(idx, dtype=np.intp)
        return FeatureSet([self.track_ids[i] for i in idx], self.specs[idx],
                          self.meta[idx], self.popularity[idx])


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_loss: float
    val_mae: float
    seconds: float


@dataclass
class TrainResult:
    net: PopularityNet
    logs: list
    best_epoch: int
    best_loss: float
    stopped_early: bool


def predict(net: PopularityNet, data: FeatureSet, batch_size: int = 64) -> np.ndarray:
    """Raw head outputs in 0-100 units."""
    out = []
    for start in range(0, len(data), batch_size):
        sl = slice(start, start + batch_size)
        out.append(net.forward(data.specs[sl], data.meta[sl]))
    net._cache = None
    return np.concatenate(out) * TARGET_SCALE


def validate(net: PopularityNet, data: FeatureSet) -> tuple[float, float]:
    """(MSE in normalized units, MAE in popularity units); parameters untouched."""
    if len(data) == 0:
        raise InvalidInputError("validation set is empty")
    preds = predict(net, data)
    loss, _ = mse_loss(preds / TARGET_SCALE, data.targets)
    return loss, float(np.mean(np.abs(preds - data.popularity)))


def train(net: PopularityNet, train_set: FeatureSet, val_set: FeatureSet, cfg: TrainingConfig,
          on_improve: Optional[Callable[[PopularityNet, int], None]] = None) -> TrainResult:
    """Train ``net`` in place and return the lowest-validation-loss parameters.

    ``on_improve(best_net, epoch)`` is called every time the best loss
    improves, e.g. to write a checkpoint.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ConfigError("train and validation sets must both be non-empty")
    opt = Adam(lr=cfg.learning_rate)
    stopper = EarlyStopper(cfg.patience, cfg.min_delta)
    logs = []
    best = net.copy()
    best_epoch = 0
    stopped = False
    indices = list(range(len(train_set)))

    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        total, seen = 0.0, 0
        for batch in batch_iter(indices, cfg.batch_size, cfg.seed, shuffle=True, epoch=epoch):
            b = train_set.subset(batch)
            preds = net.forward(b.specs, b.meta)
            loss, dpreds = mse_loss(preds, b.targets)
            if not math.isfinite(loss):
                raise NumericError(f"training loss is {loss} at epoch {epoch}")
            net.backward(dpreds)
            opt.step(net)
            total += loss * len(batch)
            seen += len(batch)
        val_loss, val_mae = validate(net, val_set)
        stop = stopper.observe(val_loss)
        entry = EpochLog(epoch, total / seen, val_loss, val_mae, time.perf_counter() - t0)
        logs.append(entry)
        log.info("epoch %d: train %.6f  val %.6f  mae %.3f", epoch, entry.train_loss, val_loss, val_mae)
        if stopper.improved:
            best = net.copy()
            best_epoch = epoch
            if on_improve is not None:
                on_improve(best, epoch)
        if stop:
            stopped = True
            log.info("early stop at epoch %d (best epoch %d)", epoch, best_epoch)
            break

    return TrainResult(best, logs, best_epoch, stopper.best_loss, stopped)


EPOCH_LOG_COLUMNS = ("epoch", "train_loss", "val_loss", "val_mae")


def write_epoch_log(path, logs, timing_path=None) -> None:
    """Write the per-epoch curves; wall times go to a separate file so the
    curve file is reproducible byte for byte."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPOCH_LOG_COLUMNS)
        for e in logs:
            w.writerow([e.epoch, repr(e.train_loss), repr(e.val_loss), repr(e.val_mae)])
    if timing_path is not None:
        with open(timing_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("epoch", "seconds"))
            for e in logs:
                w.writerow([e.epoch, f"{e.seconds:.3f}"])
