"""Command-line runner: ``wcisurv <command> --config FILE [--out DIR]``.

Exit status is 0 on success, 1 for usage or configuration errors and 2 for
runtime or data errors. Diagnostics go to stderr; results go to files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import experiments as ex
from .model import CheckpointError, dumps_checkpoint, load_checkpoint
from .pairing import UndefinedMetricError
from .survdata import ConfigError, DataError, dumps_csv, oracle_risks, read_csv, simulate
from .trainer import TrainingError, model_scores

log = logging.getLogger("wcisurv")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _out(args, cfg) -> Path:
    return Path(args.out or cfg.out_dir)


def _with_overrides(args) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.load(args.config)
    for name in ("data", "model", "sampler"):
        value = getattr(args, f"seed_{name}")
        if value is not None:
            setattr(cfg, f"seed_{name}", value)
    return cfg.validate()


def _eval_set(cfg, dataset_path):
    if dataset_path:
        return read_csv(dataset_path), None
    _, _, test_ds, synth = ex.load_data(cfg)
    return test_ds, synth


# ---------------------------------------------------------------- commands

def cmd_generate(args, cfg):
    if cfg.data_source != "synthetic":
        raise ConfigError("generate needs data.source = synthetic")
    res = simulate(cfg.synth())
    out = _out(args, cfg)
    text = f"# wcisurv {__version__} config={cfg.hash()}\n" + dumps_csv(res.dataset)
    ex.write_atomic(out / "dataset.csv", text)
    manifest = {
        "config_hash": cfg.hash(),
        "version": __version__,
        "records": len(res.dataset),
        "events": res.dataset.n_events,
        "censored_fraction": res.censored_fraction,
        "seed_data": cfg.seed_data,
        "file": "dataset.csv",
    }
    ex.write_atomic(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("wrote %d records (censored %.3f) to %s", len(res.dataset), res.censored_fraction, out)


def cmd_train(args, cfg):
    report, model, (_, _, test_ds), loss_id, tau = ex.run_training(cfg)
    out = _out(args, cfg)
    meta = {"loss": cfg.loss_id, "tau": tau, "config_hash": cfg.hash()}
    ex.write_atomic(out / "checkpoint.bin", dumps_checkpoint(model, meta))
    if report.best_model is not None:
        best_meta = dict(meta, epoch=report.best_epoch)
        ex.write_atomic(out / "best_checkpoint.bin", dumps_checkpoint(report.best_model, best_meta))
    h = cfg.hash()
    ex.write_atomic(out / "train_report.csv", ex.csv_text(h, ex.TRAIN_HEADER, ex.report_rows(report)))
    ex.write_atomic(
        out / "batch_losses.csv",
        ex.csv_text(h, ["step", "loss"], [[k, v] for k, v in enumerate(report.batch_losses)]),
    )
    m = ex.evaluate(model_scores(model, test_ds), test_ds, cfg.horizon)
    ex.write_atomic(
        out / "train_metrics.csv",
        ex.csv_text(h, ["split", "ci", "auc", "horizon"], [["test", m["ci"], m["auc"], cfg.horizon]]),
    )
    log.info("trained %s (tau=%g) for %d epochs; test CI %.4f", cfg.loss_id, tau, len(report.epochs), m["ci"])


def cmd_eval(args, cfg):
    dataset, synth = _eval_set(cfg, args.dataset)
    if args.oracle:
        if synth is None:
            raise ConfigError("--oracle needs synthetic data (the generator coefficients)")
        scores, source = oracle_risks(synth, dataset), "oracle"
    else:
        if not args.checkpoint:
            raise UsageError("eval needs --checkpoint or --oracle")
        model, _ = load_checkpoint(args.checkpoint, dataset.feature_dims)
        scores, source = model_scores(model, dataset), str(args.checkpoint)
    horizon = cfg.horizon if args.horizon is None else args.horizon
    m = ex.evaluate(scores, dataset, horizon)
    ex.write_atomic(
        _out(args, cfg) / "metrics.csv",
        ex.csv_text(cfg.hash(), ["scorer", "ci", "auc", "horizon"], [[source, m["ci"], m["auc"], horizon]]),
    )
    log.info("CI %.4f  AUC@%g %.4f", m["ci"], horizon, m["auc"])


def cmd_sweep_tau(args, cfg):
    rows = ex.sweep_tau(cfg, jobs=args.jobs)
    ex.write_atomic(_out(args, cfg) / "sweep_tau.csv", ex.csv_text(cfg.hash(), ex.TAU_HEADER, rows))
    for tau in cfg.taus:
        cis = [r[2] for r in rows if r[0] == tau]
        log.info("tau=%-6g median CI %.4f", tau, float(np.median(cis)))


def cmd_sweep_fusion(args, cfg):
    rows = ex.sweep_fusion(cfg, n_seeds=args.seeds, jobs=args.jobs)
    ex.write_atomic(_out(args, cfg) / "sweep_fusion.csv", ex.csv_text(cfg.hash(), ex.FUSION_HEADER, rows))
    log.info("wrote %d fusion sweep rows", len(rows))


def cmd_stability(args, cfg):
    rows = ex.stability(cfg, jobs=args.jobs)
    ex.write_atomic(_out(args, cfg) / "stability.csv", ex.csv_text(cfg.hash(), ex.STABILITY_HEADER, rows))
    for sampler in ("skewed", "uniform"):
        wins, total = ex.stability_wins(rows, sampler)
        log.info("%s sampling: WCI cv <= BCI cv in %d/%d seeds", sampler, wins, total)


def cmd_compare(args, cfg):
    dataset, _ = _eval_set(cfg, args.dataset)
    m1, _ = load_checkpoint(args.checkpoint, dataset.feature_dims)
    m2, _ = load_checkpoint(args.checkpoint2, dataset.feature_dims)
    res = ex.compare(dataset, m1, m2, exact=args.exact)
    ex.write_atomic(
        _out(args, cfg) / "mcnemar.csv",
        ex.csv_text(
            cfg.hash(),
            ["model_1", "model_2", "b", "c", "statistic", "p_value", "exact"],
            [[args.checkpoint, args.checkpoint2, res.b, res.c, res.statistic, res.p_value, int(res.exact)]],
        ),
    )
    log.info("b=%d c=%d statistic=%.4f p=%.4g", res.b, res.c, res.statistic, res.p_value)


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep-tau": cmd_sweep_tau,
    "sweep-fusion": cmd_sweep_fusion,
    "stability": cmd_stability,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wcisurv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wcisurv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key = value experiment config")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed-data", type=int)
        p.add_argument("--seed-model", type=int)
        p.add_argument("--seed-sampler", type=int)
        p.add_argument("-v", "--verbose", action="store_true")
        if name in ("eval", "compare"):
            p.add_argument("--checkpoint")
            p.add_argument("--dataset", help="CSV to evaluate on instead of the configured test split")
        if name == "eval":
            p.add_argument("--horizon", type=float)
            p.add_argument("--oracle", action="store_true", help="score with the generator's true log-risk")
        if name == "compare":
            p.add_argument("--checkpoint2", required=True)
            p.add_argument("--exact", action="store_true", help="exact binomial McNemar test")
        if name in ("sweep-tau", "sweep-fusion", "stability"):
            p.add_argument("--jobs", type=int, default=1, help="grid points run in parallel")
        if name == "sweep-fusion":
            p.add_argument("--seeds", type=int, default=1)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        if args.command == "compare" and not args.checkpoint:
            raise UsageError("compare needs --checkpoint and --checkpoint2")
        log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
        cfg = _with_overrides(args)
        COMMANDS[args.command](args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"wcisurv: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, CheckpointError, TrainingError, UndefinedMetricError, OSError) as exc:
        print(f"wcisurv: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
