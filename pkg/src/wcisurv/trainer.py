"""Mini-batch SGD with warmup + cosine schedule, batch samplers and data splits."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import model as mdl
from .losses import DEFAULT_CUT, NoComparablePairsError, cce_risk, evaluate_loss
from .pairing import UndefinedMetricError, concordance_index
from .survdata import ConfigError, DataError, Dataset


class TrainingError(RuntimeError):
    pass


@dataclass
class OptimConfig:
    lr_init: float = 2e-4
    lr_peak: float = 1e-3
    warmup_epochs: int = 5
    epochs: int = 60
    momentum: float = 0.8
    weight_decay: float = 3e-5
    batch_size: int = 64

    def validate(self):
        if not (self.lr_init > 0 and self.lr_peak > 0):
            raise ConfigError("learning rates must be positive")
        if self.warmup_epochs < 0 or self.epochs < 0:
            raise ConfigError("epoch counts must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight decay must be non-negative")
        if self.batch_size < 8 or self.batch_size % 8:
            raise ConfigError(f"batch size must be a positive multiple of 8, got {self.batch_size}")


def lr_at(cfg: OptimConfig, epoch: int, step: int, steps_per_epoch: int) -> float:
    """Linear warmup lr_init -> lr_peak over ``warmup_epochs``, then cosine decay to 0."""
    pos = epoch + step / steps_per_epoch
    if pos < cfg.warmup_epochs:
        return cfg.lr_init + (cfg.lr_peak - cfg.lr_init) * pos / cfg.warmup_epochs
    span = cfg.epochs - cfg.warmup_epochs
    if span <= 0:
        return cfg.lr_peak
    frac = min((pos - cfg.warmup_epochs) / span, 1.0)
    return 0.5 * cfg.lr_peak * (1.0 + math.cos(math.pi * frac))


# ---------------------------------------------------------------- samplers

class SamplerKind(enum.Enum):
    UNIFORM = "uniform"
    EVENT_BALANCED = "event_balanced"
    SKEWED = "skewed"


@dataclass
class SamplerPolicy:
    kind: SamplerKind = SamplerKind.UNIFORM
    skew_events_per_batch: tuple[int, int] = (1, 16)
    seed: int = 0

    def validate(self, batch_size: int):
        lo, hi = self.skew_events_per_batch
        if not 0 <= lo <= hi <= batch_size:
            raise ConfigError(f"skew range {self.skew_events_per_batch} must lie within [0, {batch_size}]")


class _Pool:
    """Endless without-replacement draws: reshuffles once exhausted."""

    def __init__(self, items, rng):
        self.items = np.asarray(items, dtype=np.int64)
        self.rng = rng
        self.order = np.empty(0, dtype=np.int64)

    def take(self, k):
        """``k`` distinct items (``k`` must not exceed the pool size)."""
        got = self.order[:k]
        self.order = self.order[k:]
        if len(got) < k:
            fresh = self.rng.permutation(self.items)
            # items just handed out go to the back so the batch stays duplicate-free
            fresh = np.concatenate([fresh[~np.isin(fresh, got)], fresh[np.isin(fresh, got)]])
            need = k - len(got)
            got = np.concatenate([got, fresh[:need]])
            self.order = fresh[need:]
        return got


def epoch_batches(policy: SamplerPolicy, event, batch_size: int, rng) -> list[np.ndarray]:
    """Index arrays for one epoch."""
    event = np.asarray(event)
    n = len(event)
    if policy.kind is SamplerKind.UNIFORM:
        order = rng.permutation(n)
        return [order[s : s + batch_size] for s in range(0, n, batch_size)]
    ev = rng.permutation(np.flatnonzero(event == 1))
    ne = rng.permutation(np.flatnonzero(event == 0))
    if policy.kind is SamplerKind.EVENT_BALANCED:
        n_batches = -(-n // batch_size)
        slots = [[] for _ in range(n_batches)]
        for k, idx in enumerate(np.concatenate([ev, ne])):
            slots[k % n_batches].append(idx)
        return [rng.permutation(np.asarray(s, dtype=np.int64)) for s in slots]
    # skewed: event count per batch drawn uniformly from the configured range
    lo, hi = policy.skew_events_per_batch
    ev_pool, ne_pool = _Pool(ev, rng), _Pool(ne, rng)
    batches = []
    for _ in range(max(n // batch_size, 1)):
        k = int(rng.integers(lo, hi + 1))
        k = min(k, len(ev))
        idx = np.concatenate([ev_pool.take(k), ne_pool.take(min(batch_size - k, len(ne)))])
        batches.append(rng.permutation(idx))
    return batches


# ---------------------------------------------------------------- splitting

def _apportion(total: int, fractions) -> list[int]:
    """Floor each share, then hand leftovers to the largest remainders (ties: earlier first)."""
    raw = [total * f for f in fractions]
    sizes = [int(math.floor(r + 1e-9)) for r in raw]
    left = total - sum(sizes)
    order = sorted(range(len(raw)), key=lambda k: (-(raw[k] - sizes[k]), k))
    for k in order[:left]:
        sizes[k] += 1
    return sizes


DEFAULT_FRACTIONS = (0.67, 0.12, 0.21)


def split(dataset: Dataset, fractions=DEFAULT_FRACTIONS, seed: int = 0) -> tuple[Dataset, Dataset, Dataset]:
    """Event-stratified train/val/test split.

    Split sizes follow the floor-then-distribute rule on the whole dataset;
    events are apportioned the same way, so each part's event fraction tracks
    the global one. Any non-empty part without events is rejected.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    ev = rng.permutation(np.flatnonzero(dataset.event == 1))
    ne = rng.permutation(np.flatnonzero(dataset.event == 0))
    sizes = _apportion(len(dataset), fractions)
    ev_sizes = _apportion(len(ev), fractions)
    # keep every part's total exact; shift event quota when a part lacks non-events
    ne_sizes = [s - e for s, e in zip(sizes, ev_sizes)]
    parts, e0, n0 = [], 0, 0
    for name, s, es, ns in zip(("train", "val", "test"), sizes, ev_sizes, ne_sizes):
        if ns < 0:
            raise DataError("cannot stratify: too few censored records")
        idx = np.sort(np.concatenate([ev[e0 : e0 + es], ne[n0 : n0 + ns]]))
        e0, n0 = e0 + es, n0 + ns
        if s > 0 and es == 0:
            raise DataError(f"{name} split has no events")
        parts.append(dataset.subset(idx, name=f"{dataset.name}-{name}"))
    return tuple(parts)


# ---------------------------------------------------------------- training

@dataclass
class TrainReport:
    epochs: list[dict] = field(default_factory=list)  # epoch, lr, train_loss, val_ci, skipped
    batch_losses: list[float] = field(default_factory=list)
    final_model: mdl.RiskModel | None = None
    best_model: mdl.RiskModel | None = None
    best_epoch: int | None = None
    skipped_batches: int = 0


def model_scores(model: mdl.RiskModel, dataset: Dataset) -> np.ndarray:
    fwd = mdl.forward_batch(model, dataset.xa, dataset.xb)
    return fwd.risk if fwd.logits is None else cce_risk(fwd.logits)


def train(
    model: mdl.RiskModel,
    dataset: Dataset,
    loss_id: str,
    optim: OptimConfig,
    sampler: SamplerPolicy,
    tau: float = 0.1,
    cut: float = DEFAULT_CUT,
    val: Dataset | None = None,
) -> TrainReport:
    """Train ``model`` in place and return the per-epoch report.

    Batches whose loss has nothing to rank are skipped and counted; an epoch in
    which every batch is skipped raises :class:`TrainingError`.
    """
    optim.validate()
    sampler.validate(optim.batch_size)
    if dataset.n_events == 0:
        raise DataError("training data has no events")
    if dataset.feature_dims != model.input_dims:
        raise DataError(f"dataset dims {dataset.feature_dims} do not match model {model.input_dims}")
    if (loss_id == "cce") != (model.out_units == 2):
        raise ConfigError("the cce loss needs two-unit heads and other losses need one-unit heads")

    rng = np.random.default_rng(sampler.seed)
    params = model.params()
    velocity = [np.zeros_like(p) for p in params]
    report = TrainReport()
    best_ci = -np.inf

    for epoch in range(optim.epochs):
        batches = epoch_batches(sampler, dataset.event, optim.batch_size, rng)
        losses, skipped = [], 0
        for step, idx in enumerate(batches):
            batch = dataset.subset(idx)
            fwd = mdl.forward_batch(model, batch.xa, batch.xb)
            inputs = fwd.risk if fwd.logits is None else fwd.logits
            try:
                out = evaluate_loss(loss_id, batch, inputs, tau=tau, cut=cut)
            except NoComparablePairsError:
                skipped += 1
                continue
            grads = mdl.backward(model, fwd, out.grad)
            lr = lr_at(optim, epoch, step, len(batches))
            for p, g, v in zip(params, grads, velocity):
                v *= optim.momentum
                v += g
                p -= lr * (v + optim.weight_decay * p)
            losses.append(out.value)
        if not losses:
            raise TrainingError(f"degenerate sampler: every batch of epoch {epoch} had nothing to rank")
        report.batch_losses.extend(losses)
        report.skipped_batches += skipped
        row = {
            "epoch": epoch,
            "lr": lr_at(optim, epoch, 0, len(batches)),
            "train_loss": float(np.mean(losses)),
            "val_ci": float("nan"),
            "skipped": skipped,
        }
        if val is not None:
            try:
                row["val_ci"] = concordance_index(val, model_scores(model, val))
            except UndefinedMetricError:
                pass
            if row["val_ci"] > best_ci:
                best_ci = row["val_ci"]
                report.best_model, report.best_epoch = model.copy(), epoch
        report.epochs.append(row)

    report.final_model = model
    return report
