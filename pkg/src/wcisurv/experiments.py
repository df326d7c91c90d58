"""Experiment pipelines shared by the CLI and the scripts in ``scripts/``."""

from __future__ import annotations

import csv
import dataclasses
import io
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import model as mdl
from .config import ExperimentConfig
from .losses import NoComparablePairsError, bci_loss, wci_loss
from .metrics import batch_stability, mcnemar_ci, time_dependent_auc
from .pairing import UndefinedMetricError, concordance_index
from .survdata import generate_synthetic, read_csv
from .trainer import SamplerKind, epoch_batches, model_scores, split, train


# ---------------------------------------------------------------- output

def csv_text(cfg_hash: str, header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(f"# wcisurv {__version__} config={cfg_hash}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_atomic(path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_jobs(fn, arg_list, jobs: int = 1) -> list:
    """Map ``fn`` over ``arg_list``; results come back in input order."""
    if jobs <= 1 or len(arg_list) <= 1:
        return [fn(*a) for a in arg_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *zip(*arg_list)))


# ---------------------------------------------------------------- pipeline pieces

def seeded(cfg: ExperimentConfig, offset: int) -> ExperimentConfig:
    """Copy of ``cfg`` with all three seeds shifted by ``offset``."""
    out = dataclasses.replace(cfg, optim=dataclasses.replace(cfg.optim))
    out.seed_data += offset
    out.seed_model += offset
    out.seed_sampler += offset
    return out


def load_data(cfg: ExperimentConfig):
    """(train, val, test, generator config or None)."""
    if cfg.data_source == "synthetic":
        synth = cfg.synth()
        ds = generate_synthetic(synth)
    else:
        synth = None
        ds = read_csv(cfg.data_source)
    train_ds, val_ds, test_ds = split(ds, cfg.split_fractions, seed=cfg.seed_data)
    return train_ds, val_ds, test_ds, synth


def build_model(cfg: ExperimentConfig, dims, loss_id: str, fusion=None) -> mdl.RiskModel:
    out_units = 2 if loss_id == "cce" else 1
    sizes_a, sizes_b = mdl.default_sizes(dims[0], dims[1], cfg.hidden, out_units)
    return mdl.init(cfg.seed_model, sizes_a, sizes_b, fusion or cfg.fusion)


def evaluate(scores, dataset, horizon) -> dict:
    out = {"ci": concordance_index(dataset, scores)}
    try:
        out["auc"] = time_dependent_auc(dataset, scores, horizon)
    except UndefinedMetricError:
        out["auc"] = float("nan")
    return out


def run_training(cfg: ExperimentConfig, loss_id=None, tau=None, fusion=None):
    """Train one model; returns (report, model, (train, val, test), loss_id, tau)."""
    loss_id = loss_id or cfg.loss_id
    tau = cfg.tau if tau is None else tau
    if loss_id == "wci_no_tau":
        loss_id, tau = "wci", 1.0
    train_ds, val_ds, test_ds, _ = load_data(cfg)
    model = build_model(cfg, train_ds.feature_dims, loss_id, fusion)
    report = train(
        model, train_ds, loss_id, cfg.optim, cfg.sampler(), tau=tau, cut=cfg.cut,
        val=val_ds if len(val_ds) else None,
    )
    return report, model, (train_ds, val_ds, test_ds), loss_id, tau


TRAIN_HEADER = ["epoch", "lr", "train_loss", "val_ci", "skipped_batches"]


def report_rows(report) -> list[list]:
    return [[r["epoch"], r["lr"], r["train_loss"], r["val_ci"], r["skipped"]] for r in report.epochs]


# ---------------------------------------------------------------- sweeps

def _tau_point(cfg, tau, offset):
    c = seeded(cfg, offset)
    _, model, (_, _, test_ds), _, _ = run_training(c, "wci", tau)
    m = evaluate(model_scores(model, test_ds), test_ds, c.horizon)
    return [tau, offset, m["ci"], m["auc"]]


def sweep_tau(cfg: ExperimentConfig, taus=None, n_seeds=None, jobs: int = 1) -> list[list]:
    """Rows of (tau, seed offset, test CI, test AUC)."""
    taus = cfg.taus if taus is None else taus
    n_seeds = cfg.sweep_seeds if n_seeds is None else n_seeds
    args = [(cfg, float(t), k) for t in taus for k in range(n_seeds)]
    return run_jobs(_tau_point, args, jobs)


TAU_HEADER = ["tau", "seed", "ci", "auc"]


def _fusion_point(cfg, loss_id, w, offset):
    c = seeded(cfg, offset)
    fusion = mdl.FusionWeights(*w)
    _, model, (_, _, test_ds), _, _ = run_training(c, loss_id, fusion=fusion)
    m = evaluate(model_scores(model, test_ds), test_ds, c.horizon)
    return [w[0], w[1], loss_id, offset, m["ci"], m["auc"]]


def sweep_fusion(cfg: ExperimentConfig, grid=None, losses=None, n_seeds: int = 1, jobs: int = 1) -> list[list]:
    """Rows of (w_nv, w_v, loss, seed offset, test CI, test AUC)."""
    grid = cfg.fusion_grid if grid is None else grid
    losses = cfg.sweep_losses if losses is None else losses
    args = [(cfg, ls, tuple(w), k) for ls in losses for w in grid for k in range(n_seeds)]
    return run_jobs(_fusion_point, args, jobs)


FUSION_HEADER = ["w_nv", "w_v", "loss", "seed", "ci", "auc"]


# ---------------------------------------------------------------- stability

def fixed_score_losses(dataset, risks, kind: SamplerKind, cfg: ExperimentConfig, seed: int, tau: float):
    """Per-batch WCI and BCI values for fixed scores over sampler-drawn batches.

    Batches that either loss cannot evaluate are dropped from both series.
    """
    policy = cfg.sampler(kind, seed)
    rng = np.random.default_rng(seed)
    wci, bci = [], []
    for _ in range(cfg.stability_epochs):
        for idx in epoch_batches(policy, dataset.event, cfg.optim.batch_size, rng):
            batch = dataset.subset(idx)
            try:
                w = wci_loss(batch, risks[idx], tau).value
                b = bci_loss(batch, risks[idx]).value
            except NoComparablePairsError:
                continue
            wci.append(w)
            bci.append(b)
    return wci, bci


def _trained_losses(cfg, kind, offset, loss_id, tau):
    c = seeded(cfg, offset)
    c.sampler_kind = kind
    report, *_ = run_training(c, loss_id, tau)
    return report.batch_losses


def stability(cfg: ExperimentConfig, jobs: int = 1) -> list[list]:
    """Rows of (sampler, loss, tau, seed, n_batches, mean, std, cv) for WCI vs BCI.

    ``fixed`` mode scores the training split with uniform random risks that
    stay fixed while batches are drawn; ``train`` mode records the batch
    losses of actual training runs.
    """
    tau = cfg.stability_tau
    rows = []
    if cfg.stability_mode == "fixed":
        train_ds, *_ = load_data(cfg)
        for kind in (SamplerKind.SKEWED, SamplerKind.UNIFORM):
            for k in range(cfg.stability_seeds):
                risks = np.random.default_rng(cfg.seed_model + k).uniform(0.0, 1.0, len(train_ds))
                w, b = fixed_score_losses(train_ds, risks, kind, cfg, cfg.seed_sampler + k, tau)
                for name, t, series in (("wci", tau, w), ("bci", 1.0, b)):
                    st = batch_stability(series)
                    rows.append([kind.value, name, t, k, len(series), st.mean, st.std, st.cv])
        return rows
    args = [
        (cfg, kind, k, name, t)
        for kind in (SamplerKind.SKEWED, SamplerKind.UNIFORM)
        for k in range(cfg.stability_seeds)
        for name, t in (("wci", tau), ("bci", 1.0))
    ]
    for (_, kind, k, name, t), series in zip(args, run_jobs(_trained_losses, args, jobs)):
        st = batch_stability(series)
        rows.append([kind.value, name, t, k, len(series), st.mean, st.std, st.cv])
    return rows


STABILITY_HEADER = ["sampler", "loss", "tau", "seed", "n_batches", "mean", "std", "cv"]


def stability_wins(rows, sampler: str = "skewed") -> tuple[int, int]:
    """(#seeds with WCI cv <= BCI cv, #seeds) for one sampler."""
    cv = {(r[1], r[3]): r[7] for r in rows if r[0] == sampler}
    seeds = sorted({k for _, k in cv})
    return sum(cv[("wci", k)] <= cv[("bci", k)] for k in seeds), len(seeds)


def compare(dataset, model_1, model_2, exact: bool = False):
    return mcnemar_ci(dataset, model_scores(model_1, dataset), model_scores(model_2, dataset), exact)
