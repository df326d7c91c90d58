"""Experiment configuration: a flat ``key = value`` text format.

Keys are grouped by prefix (``data.``, ``optim.``, ...). Blank lines and
``#`` comments are ignored. Unknown keys are rejected so typos surface early.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .losses import DEFAULT_CUT, LOSS_IDS
from .metrics import DEFAULT_HORIZON
from .model import FusionWeights
from .survdata import ConfigError, SynthConfig
from .trainer import OptimConfig, SamplerKind, SamplerPolicy

DEFAULT_TAUS = (10.0, 1.0, 0.1, 0.05, 0.02)
DEFAULT_FUSION_GRID = ((0.1, 0.9), (0.3, 0.7), (0.5, 0.5), (0.7, 0.3), (0.9, 0.1))
SWEEP_LOSSES = ("ce", "cox", "bci", "cce", "wci_no_tau", "wci")


@dataclass
class ExperimentConfig:
    # data
    data_source: str = "synthetic"  # "synthetic" or a CSV path
    n: int = 3000
    dim_a: int = 8
    dim_b: int = 4
    baseline_rate: float = 0.02
    censor_rate: float = 0.006
    time_scale: float = 1.0
    split_fractions: tuple[float, float, float] = (4 / 6, 1 / 6, 1 / 6)
    # model
    hidden: tuple[int, ...] = (64,)
    fusion: FusionWeights = field(default_factory=FusionWeights)
    # loss
    loss_id: str = "wci"
    tau: float = 0.1
    cut: float = DEFAULT_CUT
    # optimisation and sampling
    optim: OptimConfig = field(default_factory=OptimConfig)
    sampler_kind: SamplerKind = SamplerKind.UNIFORM
    skew_range: tuple[int, int] = (1, 16)
    # seeds
    seed_data: int = 7
    seed_model: int = 0
    seed_sampler: int = 0
    # evaluation and sweeps
    horizon: float = DEFAULT_HORIZON
    taus: tuple[float, ...] = DEFAULT_TAUS
    fusion_grid: tuple[tuple[float, float], ...] = DEFAULT_FUSION_GRID
    sweep_losses: tuple[str, ...] = SWEEP_LOSSES
    sweep_seeds: int = 5
    stability_seeds: int = 10
    stability_tau: float = 1.0
    stability_epochs: int = 20
    stability_mode: str = "fixed"  # fixed random scores, or "train"
    out_dir: str = "out"

    def synth(self) -> SynthConfig:
        return SynthConfig(
            n=self.n, dim_a=self.dim_a, dim_b=self.dim_b, baseline_rate=self.baseline_rate,
            censor_rate=self.censor_rate, time_scale=self.time_scale, seed=self.seed_data,
        )

    def sampler(self, kind: SamplerKind | None = None, seed: int | None = None) -> SamplerPolicy:
        return SamplerPolicy(
            kind or self.sampler_kind, self.skew_range, self.seed_sampler if seed is None else seed
        )

    def validate(self) -> "ExperimentConfig":
        if self.loss_id not in LOSS_IDS:
            raise ConfigError(f"loss.id must be one of {LOSS_IDS}, got {self.loss_id!r}")
        for ls in self.sweep_losses:
            if ls not in LOSS_IDS:
                raise ConfigError(f"unknown loss {ls!r} in sweep.losses")
        if not (self.tau > 0 and self.stability_tau > 0 and all(t > 0 for t in self.taus)):
            raise ConfigError("temperatures must be positive")
        if not self.cut > 0 or not self.horizon > 0:
            raise ConfigError("cut and horizon must be positive")
        if any(h < 1 for h in self.hidden):
            raise ConfigError("hidden widths must be >= 1")
        if self.stability_mode not in ("fixed", "train"):
            raise ConfigError("stability.mode must be 'fixed' or 'train'")
        if self.sweep_seeds < 1 or self.stability_seeds < 1 or self.stability_epochs < 1:
            raise ConfigError("seed and epoch counts must be >= 1")
        for w in self.fusion_grid:
            FusionWeights(*w)
        self.optim.validate()
        self.sampler().validate(self.optim.batch_size)
        if self.data_source == "synthetic":
            self.synth().validate()
        return self

    # ------------------------------------------------------------ text form

    def to_items(self) -> dict[str, str]:
        o = self.optim
        items = {
            "data.source": self.data_source,
            "data.n": self.n,
            "data.dim_a": self.dim_a,
            "data.dim_b": self.dim_b,
            "data.baseline_rate": self.baseline_rate,
            "data.censor_rate": self.censor_rate,
            "data.time_scale": self.time_scale,
            "split.fractions": _join(self.split_fractions),
            "model.hidden": _join(self.hidden),
            "model.w_nv": self.fusion.w_nv,
            "model.w_v": self.fusion.w_v,
            "loss.id": self.loss_id,
            "loss.tau": self.tau,
            "loss.cut": self.cut,
            "optim.lr_init": o.lr_init,
            "optim.lr_peak": o.lr_peak,
            "optim.warmup_epochs": o.warmup_epochs,
            "optim.epochs": o.epochs,
            "optim.momentum": o.momentum,
            "optim.weight_decay": o.weight_decay,
            "optim.batch_size": o.batch_size,
            "sampler.kind": self.sampler_kind.value,
            "sampler.skew_min": self.skew_range[0],
            "sampler.skew_max": self.skew_range[1],
            "seeds.data": self.seed_data,
            "seeds.model": self.seed_model,
            "seeds.sampler": self.seed_sampler,
            "eval.horizon": self.horizon,
            "sweep.taus": _join(self.taus),
            "sweep.fusion": ", ".join(f"{a!r}:{b!r}" for a, b in self.fusion_grid),
            "sweep.losses": ", ".join(self.sweep_losses),
            "sweep.seeds": self.sweep_seeds,
            "stability.seeds": self.stability_seeds,
            "stability.tau": self.stability_tau,
            "stability.epochs": self.stability_epochs,
            "stability.mode": self.stability_mode,
        }
        return {k: v if isinstance(v, str) else repr(v) for k, v in items.items()}

    def dumps(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.to_items().items())

    def hash(self) -> str:
        """Digest of everything that influences results (output dir excluded)."""
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()[:16]


def _join(values) -> str:
    return ", ".join(repr(v) for v in values)


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _fractions(text):
    vals = _floats(text)
    total = sum(vals)
    if len(vals) != 3 or min(vals) < 0 or total <= 0:
        raise ConfigError("split.fractions needs three non-negative weights")
    # weights are normalised so "4, 1, 1" is accepted; dumped fractions load back unchanged
    if abs(total - 1.0) <= 1e-12:
        return tuple(vals)
    return tuple(v / total for v in vals)


def _grid(text):
    out = []
    for part in text.split(","):
        if part.strip():
            a, _, b = part.partition(":")
            out.append((float(a), float(b)))
    return tuple(out)


def _optim(name):
    def setter(cfg, value):
        field_type = type(getattr(cfg.optim, name))
        setattr(cfg.optim, name, field_type(value) if field_type is int else float(value))

    return setter


def _set(attr, conv):
    def setter(cfg, value):
        setattr(cfg, attr, conv(value))

    return setter


def _fusion_part(which):
    def setter(cfg, value):
        w = float(value)
        cfg.fusion = FusionWeights(w, 1.0 - w) if which == "nv" else FusionWeights(1.0 - w, w)

    return setter


_KEYS = {
    "data.source": _set("data_source", str),
    "data.n": _set("n", int),
    "data.dim_a": _set("dim_a", int),
    "data.dim_b": _set("dim_b", int),
    "data.baseline_rate": _set("baseline_rate", float),
    "data.censor_rate": _set("censor_rate", float),
    "data.time_scale": _set("time_scale", float),
    "split.fractions": _set("split_fractions", _fractions),
    "model.hidden": _set("hidden", _ints),
    "model.w_nv": _fusion_part("nv"),
    "model.w_v": _fusion_part("v"),
    "loss.id": _set("loss_id", str),
    "loss.tau": _set("tau", float),
    "loss.cut": _set("cut", float),
    "sampler.kind": _set("sampler_kind", SamplerKind),
    "sampler.skew_min": lambda c, v: setattr(c, "skew_range", (int(v), c.skew_range[1])),
    "sampler.skew_max": lambda c, v: setattr(c, "skew_range", (c.skew_range[0], int(v))),
    "seeds.data": _set("seed_data", int),
    "seeds.model": _set("seed_model", int),
    "seeds.sampler": _set("seed_sampler", int),
    "eval.horizon": _set("horizon", float),
    "sweep.taus": _set("taus", _floats),
    "sweep.fusion": _set("fusion_grid", _grid),
    "sweep.losses": _set("sweep_losses", lambda t: tuple(s.strip() for s in t.split(",") if s.strip())),
    "sweep.seeds": _set("sweep_seeds", int),
    "stability.seeds": _set("stability_seeds", int),
    "stability.tau": _set("stability_tau", float),
    "stability.epochs": _set("stability_epochs", int),
    "stability.mode": _set("stability_mode", str),
    "output.dir": _set("out_dir", str),
}
for _name in ("lr_init", "lr_peak", "warmup_epochs", "epochs", "momentum", "weight_decay", "batch_size"):
    _KEYS[f"optim.{_name}"] = _optim(_name)


def loads(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = dataclasses.replace(base) if base else ExperimentConfig()
    cfg.optim = dataclasses.replace(cfg.optim)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        if key not in _KEYS:
            raise ConfigError(f"config line {lineno}: unknown key '{key}'")
        try:
            _KEYS[key](cfg, value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: bad value for '{key}': {exc}") from None
    return cfg


def load(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text)
