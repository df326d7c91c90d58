"""Comparable-pair construction and the concordance index."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class UndefinedMetricError(ValueError):
    """Raised when a ranking metric has no comparable units to average over."""


class PairMode(enum.Enum):
    LOSS = "loss"  # T_j >= T_i, j != i
    METRIC = "metric"  # T_j > T_i


def comparable_mask(time, event, mode: PairMode) -> np.ndarray:
    """Boolean matrix M with M[i, j] true iff (i, j) is a comparable pair.

    Row i is always empty when sample i is censored.
    """
    time = np.asarray(time, dtype=float)
    event = np.asarray(event).astype(bool)
    if mode is PairMode.LOSS:
        later = time[None, :] >= time[:, None]
        np.fill_diagonal(later, False)
    else:
        later = time[None, :] > time[:, None]
    return later & event[:, None]


@dataclass
class PairIndex:
    event_indices: list[int]
    pairs_per_event: dict[int, list[int]]
    mode: PairMode
    n_dropped: int = 0  # events with an empty risk set (LossMode only)

    @property
    def n_events(self) -> int:
        return len(self.event_indices)

    def n_pairs_of(self, i: int) -> int:
        return len(self.pairs_per_event[i])

    @property
    def n_pairs(self) -> int:
        return sum(len(v) for v in self.pairs_per_event.values())

    def as_dict(self) -> dict[int, list[int]]:
        return {i: list(self.pairs_per_event[i]) for i in self.event_indices}

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flattened (event index, partner index, owning-event size) per pair,
        in event-then-partner order."""
        sizes = [len(self.pairs_per_event[i]) for i in self.event_indices]
        first = np.repeat(np.asarray(self.event_indices, dtype=np.int64), sizes)
        second = np.fromiter(
            (j for i in self.event_indices for j in self.pairs_per_event[i]), dtype=np.int64, count=sum(sizes)
        )
        return first, second, np.repeat(np.asarray(sizes, dtype=np.int64), sizes)

    @classmethod
    def from_lists(cls, pairs: dict[int, list[int]], mode: PairMode = PairMode.LOSS) -> "PairIndex":
        """Index over an explicit pair structure; empty entries are dropped."""
        kept = [int(i) for i in pairs if len(pairs[i])]
        return cls(kept, {i: [int(j) for j in pairs[i]] for i in kept}, mode, len(pairs) - len(kept))


def build_pairs(dataset, mode: PairMode = PairMode.LOSS) -> PairIndex:
    mask = comparable_mask(dataset.time, dataset.event, mode)
    events = np.flatnonzero(np.asarray(dataset.event) == 1)
    pairs = {int(i): np.flatnonzero(mask[i]).tolist() for i in events}
    if mode is PairMode.LOSS:
        kept = [int(i) for i in events if pairs[int(i)]]
        dropped = len(events) - len(kept)
        pairs = {i: pairs[i] for i in kept}
        return PairIndex(kept, pairs, mode, dropped)
    return PairIndex([int(i) for i in events], pairs, mode, 0)


def concordance_counts(time, event, risks) -> tuple[float, int]:
    """(number of concordant pairs with ties as 0.5, number of comparable pairs)."""
    risks = np.asarray(risks, dtype=float)
    mask = comparable_mask(time, event, PairMode.METRIC)
    diff = risks[:, None] - risks[None, :]
    score = np.where(diff > 0, 1.0, np.where(diff == 0, 0.5, 0.0))
    # integer-valued halves: the sum is exact regardless of order
    return float(score[mask].sum()), int(mask.sum())


def concordance_index(dataset, risks) -> float:
    """Harrell's C over strictly ordered comparable pairs; risk ties count one half."""
    risks = np.asarray(risks, dtype=float)
    if risks.shape != (len(dataset),):
        raise ValueError(f"expected {len(dataset)} risks, got shape {risks.shape}")
    concordant, total = concordance_counts(dataset.time, dataset.event, risks)
    if total == 0:
        raise UndefinedMetricError("undefined CI: no comparable pairs")
    return concordant / total
