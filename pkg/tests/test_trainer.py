import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wcisurv import model as mdl
from wcisurv.losses import wci_loss
from wcisurv.survdata import ConfigError, DataError, Dataset, SynthConfig, generate_synthetic
from wcisurv.trainer import (
    OptimConfig,
    SamplerKind,
    SamplerPolicy,
    TrainingError,
    epoch_batches,
    lr_at,
    split,
    train,
)


def small_data(n=128, seed=0):
    return generate_synthetic(SynthConfig(n=n, dim_a=3, dim_b=2, seed=seed))


def small_model(seed=0, out=1):
    return mdl.init(seed, [3, 8, out], [2, 8, out])


# ---------------------------------------------------------------- schedule


def test_lr_endpoints():
    cfg = OptimConfig()
    assert lr_at(cfg, 0, 0, 10) == pytest.approx(2e-4)
    assert lr_at(cfg, 5, 0, 10) == pytest.approx(1e-3)
    assert lr_at(cfg, 59, 9, 10) < 1e-6


def test_lr_warmup_linear_and_decay_monotone():
    cfg = OptimConfig()
    warm = [lr_at(cfg, e, s, 4) for e in range(5) for s in range(4)]
    assert np.allclose(np.diff(warm), np.diff(warm)[0])
    decay = [lr_at(cfg, e, s, 4) for e in range(5, 60) for s in range(4)]
    assert all(a >= b for a, b in zip(decay, decay[1:]))


@pytest.mark.parametrize(
    "kwargs",
    [dict(momentum=1.0), dict(momentum=-0.1), dict(batch_size=60), dict(batch_size=0), dict(lr_peak=0.0),
     dict(weight_decay=-1.0), dict(epochs=-1)],
)
def test_optim_validation(kwargs):
    with pytest.raises(ConfigError):
        OptimConfig(**kwargs).validate()


def test_vanilla_step_without_momentum_or_decay():
    ds = small_data(64)
    m = small_model()
    before = m.copy()
    optim = OptimConfig(epochs=1, warmup_epochs=1, momentum=0.0, weight_decay=0.0, batch_size=64)
    train(m, ds, "wci", optim, SamplerPolicy(seed=3), tau=0.1)
    # one full batch: plain p -= lr * g at the initial learning rate
    order = np.random.default_rng(3).permutation(64)
    batch = ds.subset(order)
    fwd = mdl.forward_batch(before, batch.xa, batch.xb)
    grads = mdl.backward(before, fwd, wci_loss(batch, fwd.risk, 0.1).grad)
    for p0, p1, g in zip(before.params(), m.params(), grads):
        np.testing.assert_allclose(p1, p0 - 2e-4 * g, rtol=1e-12, atol=1e-15)


def test_weight_decay_shrinks_params():
    ds = small_data(64)
    plain, decayed = small_model(), small_model()
    kw = dict(epochs=1, warmup_epochs=1, momentum=0.0, batch_size=64)
    train(plain, ds, "wci", OptimConfig(weight_decay=0.0, **kw), SamplerPolicy(seed=3))
    train(decayed, ds, "wci", OptimConfig(weight_decay=10.0, **kw), SamplerPolicy(seed=3))
    w0 = small_model().params()[0]
    diff = decayed.params()[0] - plain.params()[0]
    np.testing.assert_allclose(diff, -2e-4 * 10.0 * w0, rtol=1e-9, atol=1e-15)


# ---------------------------------------------------------------- samplers


def test_uniform_sampler_covers_each_record_once(rng):
    event = rng.integers(0, 2, 100)
    batches = epoch_batches(SamplerPolicy(), event, 16, rng)
    assert sorted(np.concatenate(batches).tolist()) == list(range(100))
    assert [len(b) for b in batches] == [16] * 6 + [4]


def test_event_balanced_sampler_spreads_events(rng):
    event = np.zeros(64, dtype=int)
    event[:8] = 1
    batches = epoch_batches(SamplerPolicy(SamplerKind.EVENT_BALANCED), event, 16, rng)
    assert [int(event[b].sum()) for b in batches] == [2, 2, 2, 2]
    assert sorted(np.concatenate(batches).tolist()) == list(range(64))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.integers(0, 8), st.integers(0, 8))
def test_skewed_sampler_event_counts_in_range(seed, lo, extra):
    rng = np.random.default_rng(seed)
    event = (rng.uniform(size=400) < 0.4).astype(int)
    hi = lo + extra
    batches = epoch_batches(SamplerPolicy(SamplerKind.SKEWED, (lo, hi)), event, 32, rng)
    assert len(batches) == 400 // 32
    for b in batches:
        assert len(b) == 32 and len(set(b.tolist())) == 32
        assert lo <= event[b].sum() <= hi


def test_skew_range_validated():
    with pytest.raises(ConfigError):
        SamplerPolicy(SamplerKind.SKEWED, (4, 80)).validate(64)


# ---------------------------------------------------------------- split


def test_split_sizes():
    ds = small_data(1000)
    assert tuple(len(p) for p in split(ds, seed=1)) == (670, 120, 210)


def test_split_all_train():
    ds = small_data(50)
    tr, va, te = split(ds, (1.0, 0.0, 0.0))
    assert (len(tr), len(va), len(te)) == (50, 0, 0)


def test_split_is_a_partition():
    ds = small_data(300)
    parts = split(ds, seed=4)
    ids = np.concatenate([p.ids for p in parts])
    assert sorted(ids.tolist()) == sorted(ds.ids.tolist())


def test_split_is_stratified():
    for seed in range(10):
        ds = small_data(1000, seed=seed)
        overall = ds.event.mean()
        for part in split(ds, seed=seed):
            assert abs(part.event.mean() - overall) <= 0.02


def test_split_rejects_eventless_part():
    ds = Dataset(np.arange(10), np.zeros((10, 1)), np.zeros((10, 1)), np.arange(1.0, 11.0), [1] + [0] * 9)
    with pytest.raises(DataError, match="no events"):
        split(ds, (0.5, 0.25, 0.25))


def test_split_rejects_bad_fractions():
    with pytest.raises(ConfigError):
        split(small_data(20), (0.5, 0.5, 0.5))


# ---------------------------------------------------------------- training loop


def test_zero_epochs_leaves_model_unchanged():
    m = small_model()
    ref = m.copy()
    report = train(m, small_data(), "wci", OptimConfig(epochs=0, warmup_epochs=0, batch_size=32), SamplerPolicy())
    assert report.epochs == []
    assert all(np.array_equal(a, b) for a, b in zip(m.params(), ref.params()))


@pytest.mark.parametrize("loss_id", ["wci", "bci", "cox", "ce", "wci_no_tau"])
def test_training_is_deterministic(loss_id):
    optim = OptimConfig(epochs=3, warmup_epochs=1, batch_size=32)
    ds = small_data()
    a, b = small_model(), small_model()
    ra = train(a, ds, loss_id, optim, SamplerPolicy(seed=2), val=ds)
    rb = train(b, ds, loss_id, optim, SamplerPolicy(seed=2), val=ds)
    assert ra.batch_losses == rb.batch_losses
    assert all(np.array_equal(x, y) for x, y in zip(a.params(), b.params()))
    assert len(ra.epochs) == 3 and ra.best_epoch is not None


def test_cce_trains_two_unit_model():
    report = train(small_model(out=2), small_data(), "cce", OptimConfig(epochs=2, batch_size=32), SamplerPolicy())
    assert np.all(np.isfinite(report.batch_losses))


def test_loss_and_head_width_must_agree():
    with pytest.raises(ConfigError):
        train(small_model(out=2), small_data(), "wci", OptimConfig(epochs=1, batch_size=32), SamplerPolicy())


def test_training_reduces_wci():
    ds = small_data(512, seed=3)
    report = train(small_model(), ds, "wci", OptimConfig(epochs=30, batch_size=64), SamplerPolicy(seed=1))
    assert report.epochs[-1]["train_loss"] < report.epochs[0]["train_loss"]


def test_degenerate_sampler_raises():
    ds = small_data(128)
    policy = SamplerPolicy(SamplerKind.SKEWED, (0, 0))
    with pytest.raises(TrainingError, match="degenerate sampler"):
        train(small_model(), ds, "wci", OptimConfig(epochs=1, batch_size=32), policy)


def test_eventless_training_data_rejected():
    ds = small_data(64)
    censored = ds.subset(np.flatnonzero(ds.event == 0))
    with pytest.raises(DataError):
        train(small_model(), censored, "wci", OptimConfig(epochs=1, batch_size=32), SamplerPolicy())
