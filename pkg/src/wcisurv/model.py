"""Two-branch MLP risk model with linear fusion and manual backpropagation.

Each branch maps one feature group to a score in [0, 1] and the two are
combined as ``R = w_nv * R_nv + w_v * R_v``. With ``out_units=2`` each branch
ends in a softmax over the intervals (0, cut], (cut, inf); the fused
distribution is the same weighted mixture and its log is exposed as logits,
so the first-interval probability still obeys the fusion rule.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DEFAULT_HIDDEN = (64,)
REFERENCE_SIZES_A = [24, 32, 16, 1]  # 18 dose-volume + 6 clinical inputs

MAGIC = b"WCISURV\x00"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class FusionWeights:
    w_nv: float = 0.5
    w_v: float = 0.5

    def __post_init__(self):
        if self.w_nv < 0 or self.w_v < 0 or abs(self.w_nv + self.w_v - 1.0) > 1e-9:
            raise ValueError(f"fusion weights must be non-negative and sum to 1, got ({self.w_nv}, {self.w_v})")


@dataclass
class MlpHead:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def out_units(self) -> int:
        return self.layer_sizes[-1]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


@dataclass
class RiskModel:
    head_a: MlpHead
    head_b: MlpHead
    fusion: FusionWeights = field(default_factory=FusionWeights)

    @property
    def out_units(self) -> int:
        return self.head_a.out_units

    @property
    def input_dims(self) -> tuple[int, int]:
        return self.head_a.layer_sizes[0], self.head_b.layer_sizes[0]

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order; updating them in place updates the model."""
        return self.head_a.params() + self.head_b.params()

    def copy(self) -> "RiskModel":
        def dup(h):
            return MlpHead(list(h.layer_sizes), [w.copy() for w in h.weights], [b.copy() for b in h.biases])

        return RiskModel(dup(self.head_a), dup(self.head_b), self.fusion)

    def with_fusion(self, fusion: FusionWeights) -> "RiskModel":
        m = self.copy()
        m.fusion = fusion
        return m


def _he_uniform_head(rng, sizes):
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpHead(list(sizes), weights, biases)


def init(seed: int, layer_sizes_a, layer_sizes_b, fusion: FusionWeights = FusionWeights()) -> RiskModel:
    """He-uniform weights, zero biases. Both heads must share the output width (1 or 2)."""
    layer_sizes_a, layer_sizes_b = list(layer_sizes_a), list(layer_sizes_b)
    if len(layer_sizes_a) < 2 or len(layer_sizes_b) < 2 or min(layer_sizes_a + layer_sizes_b) < 1:
        raise ValueError("each head needs at least an input and an output size, all >= 1")
    if layer_sizes_a[-1] != layer_sizes_b[-1] or layer_sizes_a[-1] not in (1, 2):
        raise ValueError("heads must both end in 1 unit (sigmoid) or 2 units (softmax)")
    rng = np.random.default_rng(seed)
    return RiskModel(_he_uniform_head(rng, layer_sizes_a), _he_uniform_head(rng, layer_sizes_b), fusion)


def default_sizes(dim_a: int, dim_b: int, hidden=DEFAULT_HIDDEN, out_units: int = 1):
    return [dim_a, *hidden, out_units], [dim_b, *hidden, out_units]


# ---------------------------------------------------------------- forward / backward

def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _softmax(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class HeadCache:
    inputs: list[np.ndarray]  # input to each layer
    pre: list[np.ndarray]  # pre-activation of each layer
    out: np.ndarray  # sigmoid (n,) or softmax (n, 2)


@dataclass
class ForwardResult:
    risk: np.ndarray  # fused R, shape (n,)
    risk_a: np.ndarray  # R_nv
    risk_b: np.ndarray  # R_v
    logits: np.ndarray | None  # log of fused interval distribution, out_units == 2 only
    cache_a: HeadCache
    cache_b: HeadCache


def _head_forward(head: MlpHead, x: np.ndarray) -> HeadCache:
    inputs, pre = [], []
    h = x
    last = len(head.weights) - 1
    for k, (w, b) in enumerate(zip(head.weights, head.biases)):
        inputs.append(h)
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if k < last else z
    out = _sigmoid(h[:, 0]) if head.out_units == 1 else _softmax(h)
    return HeadCache(inputs, pre, out)


def _head_backward(head: MlpHead, cache: HeadCache, d_out: np.ndarray) -> list[np.ndarray]:
    """Gradients [dW0, db0, dW1, db1, ...] given d loss / d head output."""
    if head.out_units == 1:
        s = cache.out
        dz = (d_out * s * (1.0 - s))[:, None]
    else:
        p = cache.out
        dz = p * (d_out - np.sum(d_out * p, axis=1, keepdims=True))
    grads = [None] * (2 * len(head.weights))
    for k in range(len(head.weights) - 1, -1, -1):
        grads[2 * k] = cache.inputs[k].T @ dz
        grads[2 * k + 1] = dz.sum(axis=0)
        if k:
            dz = (dz @ head.weights[k].T) * (cache.pre[k - 1] > 0)
    return grads


def _check_dims(model: RiskModel, xa, xb):
    if xa.shape[1] != model.input_dims[0] or xb.shape[1] != model.input_dims[1]:
        raise ValueError(f"feature dims {xa.shape[1]}/{xb.shape[1]} do not match model {model.input_dims}")


def forward_batch(model: RiskModel, xa, xb) -> ForwardResult:
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    _check_dims(model, xa, xb)
    ca = _head_forward(model.head_a, xa)
    cb = _head_forward(model.head_b, xb)
    wa, wb = model.fusion.w_nv, model.fusion.w_v
    if model.out_units == 1:
        return ForwardResult(wa * ca.out + wb * cb.out, ca.out, cb.out, None, ca, cb)
    mix = wa * ca.out + wb * cb.out
    return ForwardResult(mix[:, 0], ca.out[:, 0], cb.out[:, 0], np.log(mix), ca, cb)


def forward(model: RiskModel, record) -> tuple[float, float, float]:
    """(R, R_nv, R_v) for a single record."""
    res = forward_batch(model, np.reshape(record.features_a, (1, -1)), np.reshape(record.features_b, (1, -1)))
    return float(res.risk[0]), float(res.risk_a[0]), float(res.risk_b[0])


def predict(model: RiskModel, dataset) -> np.ndarray:
    """Ranking scores for every record of ``dataset``."""
    return forward_batch(model, dataset.xa, dataset.xb).risk


def backward(model: RiskModel, fwd: ForwardResult, upstream: np.ndarray) -> list[np.ndarray]:
    """Parameter gradients in ``model.params()`` order.

    ``upstream`` is d loss / d R with shape (n,) for single-unit heads, or
    d loss / d logits with shape (n, 2) for interval heads.
    """
    upstream = np.asarray(upstream, dtype=float)
    wa, wb = model.fusion.w_nv, model.fusion.w_v
    if model.out_units == 1:
        if upstream.shape != fwd.risk.shape:
            raise ValueError(f"upstream gradient shape {upstream.shape} != {fwd.risk.shape}")
        da, db = wa * upstream, wb * upstream
    else:
        if upstream.shape != fwd.logits.shape:
            raise ValueError(f"upstream gradient shape {upstream.shape} != {fwd.logits.shape}")
        d_mix = upstream / np.exp(fwd.logits)
        da, db = wa * d_mix, wb * d_mix
    return _head_backward(model.head_a, fwd.cache_a, da) + _head_backward(model.head_b, fwd.cache_b, db)


# ---------------------------------------------------------------- checkpoints
#
# layout: MAGIC | u32 version | u32 header length | JSON header | float64 LE params
# The header carries layer sizes and fusion weights; params follow in params() order.

def dumps_checkpoint(model: RiskModel, meta: dict | None = None) -> bytes:
    header = {
        "layer_sizes_a": model.head_a.layer_sizes,
        "layer_sizes_b": model.head_b.layer_sizes,
        "fusion": [model.fusion.w_nv, model.fusion.w_v],
        "meta": meta or {},
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.params())
    return MAGIC + struct.pack("<II", FORMAT_VERSION, len(hbytes)) + hbytes + body


def loads_checkpoint(blob: bytes, expect_dims: tuple[int, int] | None = None) -> tuple[RiskModel, dict]:
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a wcisurv checkpoint (bad magic)")
    off = len(MAGIC)
    version, hlen = struct.unpack_from("<II", blob, off)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    off += 8
    header = json.loads(blob[off : off + hlen].decode("utf-8"))
    off += hlen
    model = init(0, header["layer_sizes_a"], header["layer_sizes_b"], FusionWeights(*header["fusion"]))
    for p in model.params():
        nbytes = p.size * 8
        if off + nbytes > len(blob):
            raise CheckpointError("checkpoint truncated")
        p[...] = np.frombuffer(blob, dtype="<f8", count=p.size, offset=off).reshape(p.shape)
        off += nbytes
    if off != len(blob):
        raise CheckpointError("trailing bytes after parameters")
    if expect_dims is not None and tuple(expect_dims) != model.input_dims:
        raise CheckpointError(f"checkpoint expects feature dims {model.input_dims}, data has {tuple(expect_dims)}")
    return model, header.get("meta", {})


def save_checkpoint(model: RiskModel, path, meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps_checkpoint(model, meta))


def load_checkpoint(path, expect_dims=None) -> tuple[RiskModel, dict]:
    return loads_checkpoint(Path(path).read_bytes(), expect_dims)
