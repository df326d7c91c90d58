"""Survival records, dataset container, CSV I/O and a proportional-hazards simulator."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration value."""


class DataError(ValueError):
    """Malformed or unusable data."""


@dataclass(frozen=True)
class SurvivalRecord:
    id: int
    features_a: np.ndarray
    features_b: np.ndarray
    time: float
    event: int

    def __post_init__(self):
        if not self.time > 0:
            raise DataError(f"record {self.id}: time must be positive, got {self.time}")
        if self.event not in (0, 1):
            raise DataError(f"record {self.id}: event must be 0 or 1, got {self.event}")


@dataclass(eq=False)
class Dataset:
    """Column-oriented collection of survival records.

    Stored as arrays so that batching and pair construction stay vectorised;
    ``records`` gives the per-subject view.
    """

    ids: np.ndarray
    xa: np.ndarray
    xb: np.ndarray
    time: np.ndarray
    event: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.time = np.asarray(self.time, dtype=np.float64)
        self.event = np.asarray(self.event, dtype=np.int64)
        n = len(self.ids)
        self.xa = np.asarray(self.xa, dtype=np.float64)
        self.xb = np.asarray(self.xb, dtype=np.float64)
        if self.xa.ndim != 2 or self.xb.ndim != 2:
            raise DataError("feature blocks must be 2-d (records x features)")
        if not (len(self.time) == len(self.event) == len(self.xa) == len(self.xb) == n):
            raise DataError("column lengths differ")
        if len(np.unique(self.ids)) != n:
            raise DataError("ids must be unique")
        if n and not np.all(self.time > 0):
            raise DataError("times must be positive")
        if n and not np.all((self.event == 0) | (self.event == 1)):
            raise DataError("event indicators must be 0 or 1")

    @classmethod
    def from_records(cls, records, name="dataset"):
        records = list(records)
        if not records:
            raise DataError("no records")
        return cls(
            ids=[r.id for r in records],
            xa=np.stack([np.asarray(r.features_a, dtype=float) for r in records]),
            xb=np.stack([np.asarray(r.features_b, dtype=float) for r in records]),
            time=[r.time for r in records],
            event=[r.event for r in records],
            name=name,
        )

    def __len__(self):
        return len(self.ids)

    @property
    def feature_dims(self) -> tuple[int, int]:
        return self.xa.shape[1], self.xb.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    @property
    def records(self) -> list[SurvivalRecord]:
        return [
            SurvivalRecord(int(i), a.copy(), b.copy(), float(t), int(e))
            for i, a, b, t, e in zip(self.ids, self.xa, self.xb, self.time, self.event)
        ]

    def subset(self, idx, name=None) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            self.ids[idx], self.xa[idx], self.xb[idx], self.time[idx], self.event[idx],
            name=name or self.name,
        )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.feature_dims == other.feature_dims
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.xa, other.xa)
            and np.array_equal(self.xb, other.xb)
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.event, other.event)
        )


def unit_vector(dim: int) -> np.ndarray:
    return np.full(dim, 1.0 / np.sqrt(dim)) if dim > 0 else np.zeros(0)


@dataclass
class SynthConfig:
    n: int = 2500
    dim_a: int = 8
    dim_b: int = 4
    beta_a: np.ndarray | None = None  # None -> unit vector with equal entries
    beta_b: np.ndarray | None = None
    baseline_rate: float = 0.02
    censor_rate: float = 0.01
    time_scale: float = 1.0
    seed: int = 7

    def __post_init__(self):
        self.beta_a = unit_vector(self.dim_a) if self.beta_a is None else np.asarray(self.beta_a, float)
        self.beta_b = unit_vector(self.dim_b) if self.beta_b is None else np.asarray(self.beta_b, float)

    def validate(self):
        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.dim_a < 1 or self.dim_b < 1:
            raise ConfigError("feature dims must be >= 1")
        if self.beta_a.shape != (self.dim_a,) or self.beta_b.shape != (self.dim_b,):
            raise ConfigError("coefficient lengths must match feature dims")
        for key in ("baseline_rate", "censor_rate", "time_scale"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive")


@dataclass
class SynthResult:
    dataset: Dataset
    event_time: np.ndarray  # latent, uncensored
    censor_time: np.ndarray
    censored_fraction: float = field(default=0.0)


def simulate(cfg: SynthConfig) -> SynthResult:
    """Draw a dataset together with the latent event and censoring times."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    xa = rng.standard_normal((cfg.n, cfg.dim_a))
    xb = rng.standard_normal((cfg.n, cfg.dim_b))
    log_risk = xa @ cfg.beta_a + xb @ cfg.beta_b
    event_time = rng.exponential(1.0 / (cfg.baseline_rate * np.exp(log_risk))) * cfg.time_scale
    censor_time = rng.exponential(1.0 / cfg.censor_rate, size=cfg.n) * cfg.time_scale
    # exponential draws can underflow to exactly zero
    tiny = np.finfo(float).tiny
    event_time = np.maximum(event_time, tiny)
    censor_time = np.maximum(censor_time, tiny)
    event = (event_time <= censor_time).astype(np.int64)
    time = np.where(event == 1, event_time, censor_time)
    ds = Dataset(np.arange(cfg.n), xa, xb, time, event, name=f"synthetic-seed{cfg.seed}")
    return SynthResult(ds, event_time, censor_time, float(1.0 - event.mean()))


def generate_synthetic(cfg: SynthConfig) -> Dataset:
    return simulate(cfg).dataset


def censored_fraction(dataset: Dataset) -> float:
    return float(1.0 - dataset.event.mean())


def oracle_risk(cfg: SynthConfig, record: SurvivalRecord) -> float:
    """True log-hazard ratio of ``record`` under the generating model."""
    xa = np.asarray(record.features_a, dtype=float)
    xb = np.asarray(record.features_b, dtype=float)
    if xa.shape != np.shape(cfg.beta_a) or xb.shape != np.shape(cfg.beta_b):
        raise DataError(
            f"feature dims {xa.shape[0]}/{xb.shape[0]} do not match "
            f"coefficients {len(cfg.beta_a)}/{len(cfg.beta_b)}"
        )
    return float(xa @ cfg.beta_a + xb @ cfg.beta_b)


def oracle_risks(cfg: SynthConfig, dataset: Dataset) -> np.ndarray:
    if dataset.feature_dims != (len(cfg.beta_a), len(cfg.beta_b)):
        raise DataError("dataset dims do not match generator coefficients")
    return dataset.xa @ cfg.beta_a + dataset.xb @ cfg.beta_b


# ---------------------------------------------------------------- CSV

def _header(dim_a, dim_b):
    return ["id", "time", "event"] + [f"a_{k}" for k in range(dim_a)] + [f"b_{k}" for k in range(dim_b)]


def _fmt(x: float) -> str:
    # repr gives the shortest string that round-trips a double exactly
    return repr(float(x))


def dumps_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_header(*dataset.feature_dims))
    for i in range(len(dataset)):
        writer.writerow(
            [int(dataset.ids[i]), _fmt(dataset.time[i]), int(dataset.event[i])]
            + [_fmt(v) for v in dataset.xa[i]]
            + [_fmt(v) for v in dataset.xb[i]]
        )
    return buf.getvalue()


def write_csv(dataset: Dataset, path) -> None:
    Path(path).write_text(dumps_csv(dataset), encoding="utf-8", newline="\n")


def loads_csv(text: str, name="dataset") -> Dataset:
    lines = [ln for ln in text.splitlines()]
    # leading '#' lines are provenance comments
    start = 0
    while start < len(lines) and lines[start].startswith("#"):
        start += 1
    rows = list(csv.reader(lines[start:]))
    if not rows or not any(rows):
        raise DataError("no records")
    header = [h.strip() for h in rows[0]]
    for col in ("id", "time", "event"):
        if col not in header:
            raise DataError(f"line {start + 1}: missing column '{col}'")
    a_cols = sorted((h for h in header if h.startswith("a_")), key=lambda h: int(h[2:]))
    b_cols = sorted((h for h in header if h.startswith("b_")), key=lambda h: int(h[2:]))
    for prefix, cols in (("a", a_cols), ("b", b_cols)):
        expected = [f"{prefix}_{k}" for k in range(len(cols))]
        if cols != expected:
            raise DataError(f"line {start + 1}: feature columns {prefix}_* are not contiguous from 0")
    pos = {h: k for k, h in enumerate(header)}

    ids, times, events, xa, xb = [], [], [], [], []
    for offset, row in enumerate(rows[1:]):
        lineno = start + offset + 2
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            rid = int(row[pos["id"]])
            t = float(row[pos["time"]])
            e = int(row[pos["event"]])
            fa = [float(row[pos[c]]) for c in a_cols]
            fb = [float(row[pos[c]]) for c in b_cols]
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
        if not t > 0:
            raise DataError(f"line {lineno}: non-positive time {row[pos['time']]}")
        if e not in (0, 1):
            raise DataError(f"line {lineno}: event must be 0 or 1, got {e}")
        ids.append(rid)
        times.append(t)
        events.append(e)
        xa.append(fa)
        xb.append(fb)
    if not ids:
        raise DataError("no records")
    return Dataset(
        ids,
        np.array(xa, dtype=float).reshape(len(ids), len(a_cols)),
        np.array(xb, dtype=float).reshape(len(ids), len(b_cols)),
        times,
        events,
        name=name,
    )


def read_csv(path) -> Dataset:
    path = Path(path)
    return loads_csv(path.read_text(encoding="utf-8"), name=path.stem)
