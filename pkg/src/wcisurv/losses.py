"""Survival losses over a batch of risk scores, each with a hand-derived gradient.

Every loss takes a ``batch`` exposing ``time`` and ``event`` arrays (a
:class:`~wcisurv.survdata.Dataset` or anything shaped like one) and returns a
:class:`LossOutput` whose ``grad`` is the derivative with respect to the
per-sample inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pairing import PairIndex, PairMode, UndefinedMetricError, build_pairs

EXP_CLAMP = 60.0
DEFAULT_CUT = 36.0


class NoComparablePairsError(UndefinedMetricError):
    """The batch holds no event that can be ranked against anything."""


@dataclass
class LossOutput:
    value: float
    grad: np.ndarray
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class WciConfig:
    tau: float = 0.1

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class CceConfig:
    cut: float = DEFAULT_CUT

    def __post_init__(self):
        if not self.cut > 0:
            raise ValueError(f"cut must be positive, got {self.cut}")


def _risks(batch, risks):
    risks = np.asarray(risks, dtype=float)
    if batch is not None and risks.shape != (len(batch.time),):
        raise ValueError(f"expected {len(batch.time)} risks, got shape {risks.shape}")
    return risks


def _loss_pairs(batch, pairs: PairIndex | None):
    if pairs is None:
        pairs = build_pairs(batch, PairMode.LOSS)
    n_events = int(np.sum(np.asarray(batch.event) == 1)) if batch is not None else pairs.n_events
    if pairs.n_events == 0:
        raise NoComparablePairsError("no comparable pairs in batch")
    first, second, sizes = pairs.arrays()
    diag = {
        "pairs_used": len(first),
        "events_used": pairs.n_events,
        "events_dropped": max(n_events - pairs.n_events, pairs.n_dropped),
    }
    return first, second, sizes, diag


def _exp_surrogate(z):
    """exp(z) with z clamped to +-EXP_CLAMP; returns (value, d value / d z)."""
    zc = np.clip(z, -EXP_CLAMP, EXP_CLAMP)
    e = np.exp(zc)
    return e, np.where(np.abs(z) < EXP_CLAMP, e, 0.0)


def _pairwise(first, second, weights, risks, scale, surrogate):
    """Per-pair terms phi((R[first[k]] - R[second[k]]) / scale) and the gradient in R
    of their ``weights``-weighted sum."""
    diff = (risks[first] - risks[second]) / scale
    if surrogate == "exp":
        term, dterm = _exp_surrogate(-diff)
        dterm = -dterm  # d/d diff
    elif surrogate == "logsigmoid":
        # -log sigmoid(d) = softplus(-d)
        term = np.logaddexp(0.0, -diff)
        dterm = -0.5 * (1.0 - np.tanh(0.5 * diff))
    else:
        raise ValueError(f"unknown surrogate {surrogate!r}")
    g = weights * dterm / scale
    n = len(risks)
    grad = np.bincount(first, g, minlength=n) - np.bincount(second, g, minlength=n)
    return term, grad


def wci_loss(batch, risks, cfg: WciConfig | float = WciConfig(), pairs: PairIndex | None = None) -> LossOutput:
    """Weighted CI loss: per-event mean of exp(-(R_i - R_j)/tau) over the
    event's pairs, then a plain mean over events.

    ``pairs`` overrides the pair structure derived from the batch times.
    """
    tau = cfg.tau if isinstance(cfg, WciConfig) else WciConfig(float(cfg)).tau
    risks = _risks(batch, risks)
    first, second, sizes, diag = _loss_pairs(batch, pairs)
    weights = 1.0 / (sizes * diag["events_used"])
    term, grad = _pairwise(first, second, weights, risks, tau, "exp")
    # inner mean per event, then outer mean: equal terms give exactly their value
    _, slot = np.unique(first, return_inverse=True)
    value = float(np.mean(np.bincount(slot, term) / np.bincount(slot)))
    return LossOutput(value, grad, diag)


def bci_loss(batch, risks, surrogate: str = "exp", pairs: PairIndex | None = None) -> LossOutput:
    """Balanced CI loss: one global mean of the pair surrogate over all pairs.

    ``surrogate="logsigmoid"`` swaps exp(-d) for -log sigmoid(d).
    """
    risks = _risks(batch, risks)
    first, second, sizes, diag = _loss_pairs(batch, pairs)
    weights = np.full(len(first), 1.0 / diag["pairs_used"])
    term, grad = _pairwise(first, second, weights, risks, 1.0, surrogate)
    return LossOutput(float(np.mean(term)), grad, diag)


def cox_loss(batch, risks) -> LossOutput:
    """Negative mean Cox partial log-likelihood, Breslow ties.

    The risk set of event i is every sample with T_j >= T_i, i included.
    """
    risks = _risks(batch, risks)
    time = np.asarray(batch.time, dtype=float)
    event = np.asarray(batch.event) == 1
    n_events = int(event.sum())
    if n_events == 0:
        raise NoComparablePairsError("cox loss needs at least one event")
    at_risk = (time[None, :] >= time[:, None])[event]  # rows: events
    shift = risks.max()
    w = np.exp(risks - shift)
    denom = at_risk @ w
    log_denom = np.log(denom) + shift
    value = -float(np.sum(risks[event] - log_denom)) / n_events
    share = at_risk * (w[None, :] / denom[:, None])  # softmax over each risk set
    grad = -(event.astype(float) - share.sum(axis=0)) / n_events
    diag = {"events_used": n_events, "pairs_used": int(at_risk.sum()) - n_events, "events_dropped": 0}
    return LossOutput(value, grad, diag)


def ce_labels(batch, cut: float = DEFAULT_CUT):
    """(labelable mask, label): events are 1, censored beyond ``cut`` are 0."""
    time = np.asarray(batch.time, dtype=float)
    event = np.asarray(batch.event) == 1
    return event | (time > cut), event.astype(float)


def ce_loss(batch, risks, cut: float = DEFAULT_CUT) -> LossOutput:
    """Binary cross-entropy of sigmoid(R); samples censored before ``cut`` are excluded."""
    risks = _risks(batch, risks)
    keep, label = ce_labels(batch, cut)
    n_used = int(keep.sum())
    if n_used == 0:
        raise NoComparablePairsError("no labelable samples for cross-entropy")
    per = np.where(label == 1, np.logaddexp(0.0, -risks), np.logaddexp(0.0, risks))
    value = float(per[keep].sum()) / n_used
    prob = 0.5 * (1.0 + np.tanh(0.5 * risks))
    grad = np.where(keep, prob - label, 0.0) / n_used
    return LossOutput(value, grad, {"samples_used": n_used, "samples_excluded": len(risks) - n_used})


def cce_targets(batch, cut: float = DEFAULT_CUT):
    """(contributing mask, interval index) for the two-bin (0, cut], (cut, inf) model."""
    time = np.asarray(batch.time, dtype=float)
    event = np.asarray(batch.event) == 1
    late = time > cut
    return event | late, np.where(event & ~late, 0, 1)


def cce_loss(batch, logits, cfg: CceConfig | float = CceConfig()) -> LossOutput:
    """Censored cross-entropy over two time intervals.

    Samples censored inside the first interval have likelihood p1 + p2 = 1,
    contribute nothing and are counted in ``samples_excluded``.
    """
    cut = cfg.cut if isinstance(cfg, CceConfig) else CceConfig(float(cfg)).cut
    logits = np.asarray(logits, dtype=float)
    if logits.shape != (len(batch.time), 2):
        raise ValueError(f"expected logits of shape ({len(batch.time)}, 2), got {logits.shape}")
    keep, target = cce_targets(batch, cut)
    n_used = int(keep.sum())
    if n_used == 0:
        raise NoComparablePairsError("no contributing samples for censored cross-entropy")
    log_p = logits - np.logaddexp(logits[:, :1], logits[:, 1:])
    rows = np.arange(len(logits))
    value = -float(log_p[rows, target][keep].sum()) / n_used
    grad = np.exp(log_p)
    grad[rows, target] -= 1.0
    grad = np.where(keep[:, None], grad, 0.0) / n_used
    return LossOutput(value, grad, {"samples_used": n_used, "samples_excluded": len(keep) - n_used})


def cce_risk(logits) -> np.ndarray:
    """Probability of the first interval, used as the ranking score."""
    logits = np.asarray(logits, dtype=float)
    return np.exp(logits[:, 0] - np.logaddexp(logits[:, 0], logits[:, 1]))


LOSS_IDS = ("ce", "cce", "cox", "bci", "wci", "wci_no_tau")


def evaluate_loss(loss_id: str, batch, risks, tau: float = 0.1, cut: float = DEFAULT_CUT) -> LossOutput:
    """Dispatch by loss name; ``wci_no_tau`` is WCI at tau = 1."""
    if loss_id == "wci":
        return wci_loss(batch, risks, WciConfig(tau))
    if loss_id == "wci_no_tau":
        return wci_loss(batch, risks, WciConfig(1.0))
    if loss_id == "bci":
        return bci_loss(batch, risks)
    if loss_id == "cox":
        return cox_loss(batch, risks)
    if loss_id == "ce":
        return ce_loss(batch, risks, cut)
    if loss_id == "cce":
        return cce_loss(batch, risks, CceConfig(cut))
    raise ValueError(f"unknown loss {loss_id!r}; expected one of {LOSS_IDS}")


def loss_gradient_check(loss_id: str, batch, risks, h: float = 1e-6, **kwargs) -> float:
    """Max relative error between the analytic gradient and central differences.

    The error is measured in the max norm relative to the larger of the two
    gradients' max norms, so coordinates with tiny derivatives are not
    swamped by cancellation in the finite difference.
    """
    if not h > 0:
        raise ValueError("step must be positive")
    risks = np.array(risks, dtype=float)
    analytic = evaluate_loss(loss_id, batch, risks, **kwargs).grad
    numeric = np.zeros_like(risks)
    flat, nflat = risks.reshape(-1), numeric.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        up = evaluate_loss(loss_id, batch, risks, **kwargs).value
        flat[k] = orig - h
        down = evaluate_loss(loss_id, batch, risks, **kwargs).value
        flat[k] = orig
        nflat[k] = (up - down) / (2 * h)
    scale = max(np.abs(analytic).max(), np.abs(numeric).max())
    if scale == 0:
        return 0.0
    return float(np.abs(analytic - numeric).max() / scale)
