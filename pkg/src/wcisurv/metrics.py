"""Time-dependent AUC, McNemar comparison of two rankers, batch-loss stability."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pairing import PairMode, UndefinedMetricError, comparable_mask

DEFAULT_HORIZON = 36.0


def time_dependent_auc(dataset, risks, horizon: float = DEFAULT_HORIZON) -> float:
    """Cumulative/dynamic AUC at ``horizon``.

    Cases are events at or before the horizon, controls everyone still
    event-free after it; records censored before the horizon are left out.
    """
    risks = np.asarray(risks, dtype=float)
    time = np.asarray(dataset.time, dtype=float)
    event = np.asarray(dataset.event) == 1
    cases = risks[event & (time <= horizon)]
    controls = risks[time > horizon]
    if not len(cases) or not len(controls):
        raise UndefinedMetricError(
            f"undefined AUC at horizon {horizon}: {len(cases)} cases, {len(controls)} controls"
        )
    diff = cases[:, None] - controls[None, :]
    wins = np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0)
    return float(wins / diff.size)


@dataclass(frozen=True)
class McNemarResult:
    b: int
    c: int
    statistic: float
    p_value: float
    exact: bool = False


def mcnemar_from_counts(b: int, c: int, exact: bool = False) -> McNemarResult:
    """Continuity-corrected chi-squared McNemar test, or the exact binomial version."""
    n = b + c
    stat = 0.0 if n == 0 else (abs(b - c) - 1) ** 2 / n
    if exact:
        k = min(b, c)
        tail = sum(math.comb(n, i) for i in range(k + 1)) / 2.0**n if n else 1.0
        p = min(1.0, 2.0 * tail)
    else:
        p = math.erfc(math.sqrt(stat / 2.0))
    return McNemarResult(b, c, stat, p, exact)


def mcnemar_ci(dataset, risks_1, risks_2, exact: bool = False) -> McNemarResult:
    """McNemar test whose trials are the comparable pairs of ``dataset``.

    A pair counts as correct for a model when it ranks the earlier event
    strictly higher.
    """
    r1 = np.asarray(risks_1, dtype=float)
    r2 = np.asarray(risks_2, dtype=float)
    if r1.shape != (len(dataset),) or r2.shape != (len(dataset),):
        raise ValueError("risk vectors must match the dataset length")
    mask = comparable_mask(dataset.time, dataset.event, PairMode.METRIC)
    if not mask.any():
        raise UndefinedMetricError("no comparable pairs for McNemar test")
    ok1 = (r1[:, None] > r1[None, :])[mask]
    ok2 = (r2[:, None] > r2[None, :])[mask]
    b = int(np.count_nonzero(ok1 & ~ok2))
    c = int(np.count_nonzero(ok2 & ~ok1))
    return mcnemar_from_counts(b, c, exact)


@dataclass(frozen=True)
class StabilityReport:
    per_batch_losses: tuple[float, ...]
    mean: float
    std: float
    cv: float  # nan when mean <= 0


def batch_stability(per_batch_losses) -> StabilityReport:
    x = np.asarray(per_batch_losses, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two batch losses")
    mean = float(x.mean())
    std = float(x.std(ddof=1))
    return StabilityReport(tuple(x.tolist()), mean, std, std / mean if mean > 0 else float("nan"))
