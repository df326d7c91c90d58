import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from wcisurv.pairing import concordance_index
from wcisurv.survdata import (
    ConfigError,
    DataError,
    Dataset,
    SurvivalRecord,
    SynthConfig,
    censored_fraction,
    dumps_csv,
    generate_synthetic,
    loads_csv,
    oracle_risk,
    oracle_risks,
    read_csv,
    simulate,
    write_csv,
)


def test_generator_is_deterministic():
    cfg = SynthConfig(n=2000, dim_a=8, dim_b=4, seed=7)
    assert generate_synthetic(cfg) == generate_synthetic(SynthConfig(n=2000, dim_a=8, dim_b=4, seed=7))
    assert dumps_csv(generate_synthetic(cfg)) == dumps_csv(generate_synthetic(cfg))


def test_different_seeds_differ():
    assert generate_synthetic(SynthConfig(n=50, seed=1)) != generate_synthetic(SynthConfig(n=50, seed=2))


def test_vanishing_censoring_gives_all_events():
    ds = generate_synthetic(SynthConfig(n=500, censor_rate=1e-12, seed=3))
    assert ds.event.sum() == len(ds)


def test_censoring_fraction_in_band():
    # Monte-Carlo over 10 seeds at the reference rates
    fracs = [
        simulate(SynthConfig(n=2000, baseline_rate=0.02, censor_rate=0.01, seed=s)).censored_fraction
        for s in range(10)
    ]
    assert all(0.25 <= f <= 0.45 for f in fracs)


def test_default_benchmark_near_thirty_percent():
    fracs = [censored_fraction(generate_synthetic(SynthConfig(n=3000, censor_rate=0.006, seed=s))) for s in range(5)]
    assert 0.25 <= np.mean(fracs) <= 0.35


def test_realized_fraction_reported():
    res = simulate(SynthConfig(n=300, seed=4))
    assert res.censored_fraction == pytest.approx(censored_fraction(res.dataset))


@pytest.mark.parametrize(
    "kwargs",
    [dict(n=1), dict(dim_a=0), dict(baseline_rate=0.0), dict(censor_rate=-1.0), dict(time_scale=0.0)],
)
def test_invalid_config(kwargs):
    with pytest.raises(ConfigError):
        generate_synthetic(SynthConfig(**kwargs))


def test_time_and_event_invariants():
    ds = generate_synthetic(SynthConfig(n=1000, seed=9))
    assert np.all(ds.time > 0)
    assert set(np.unique(ds.event)) <= {0, 1}
    assert ds.feature_dims == (8, 4)


def test_proportional_hazards_sanity():
    res = simulate(SynthConfig(n=2000, seed=11))
    tau, _ = stats.kendalltau(oracle_risks(SynthConfig(n=2000, seed=11), res.dataset), res.event_time)
    assert tau < 0


def test_oracle_risk_examples():
    cfg = SynthConfig(dim_a=2, dim_b=1, beta_a=[1.0, 0.0], beta_b=[0.0])
    assert oracle_risk(cfg, SurvivalRecord(0, np.zeros(2), np.zeros(1), 1.0, 1)) == 0.0
    assert oracle_risk(cfg, SurvivalRecord(0, np.array([2.0, 5.0]), np.array([7.0]), 1.0, 1)) == 2.0


def test_oracle_risk_empty_second_group():
    cfg = SynthConfig(dim_a=2, dim_b=1, beta_a=[1.0, 0.0], beta_b=[0.0])
    cfg.beta_b = np.zeros(0)
    assert oracle_risk(cfg, SurvivalRecord(0, np.array([2.0, 5.0]), np.zeros(0), 1.0, 0)) == 2.0


def test_oracle_risk_dimension_mismatch():
    cfg = SynthConfig(dim_a=2, dim_b=1)
    with pytest.raises(DataError):
        oracle_risk(cfg, SurvivalRecord(0, np.zeros(3), np.zeros(1), 1.0, 1))


def test_oracle_beats_noisy_and_random_scores():
    cfg = SynthConfig(n=2000, seed=5)
    ds = generate_synthetic(cfg)
    rng = np.random.default_rng(0)
    oracle = oracle_risks(cfg, ds)
    ci_oracle = concordance_index(ds, oracle)
    ci_noisy = concordance_index(ds, oracle + rng.standard_normal(len(ds)))
    ci_random = concordance_index(ds, rng.standard_normal(len(ds)))
    assert ci_oracle > ci_noisy > ci_random


# ---------------------------------------------------------------- CSV


def test_csv_round_trip(tmp_path):
    ds = generate_synthetic(SynthConfig(n=200, seed=2))
    write_csv(ds, tmp_path / "d.csv")
    assert read_csv(tmp_path / "d.csv") == ds


@settings(max_examples=30, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(min_value=1e-6, max_value=1e6, allow_nan=False),
            st.integers(0, 1),
            st.floats(min_value=-1e9, max_value=1e9, allow_nan=False),
        ),
        min_size=1,
        max_size=20,
    )
)
def test_csv_round_trip_property(rows):
    t, e, x = zip(*rows)
    ds = Dataset(np.arange(len(rows)), np.array(x)[:, None], np.array(x)[:, None] * 0.5, t, e)
    assert loads_csv(dumps_csv(ds)) == ds


def test_csv_header_and_newlines():
    ds = generate_synthetic(SynthConfig(n=3, dim_a=2, dim_b=1, seed=0))
    text = dumps_csv(ds)
    assert text.splitlines()[0] == "id,time,event,a_0,a_1,b_0"
    assert "\r" not in text and text.endswith("\n")


def test_csv_bad_event_names_line():
    text = "id,time,event,a_0,b_0\n0,1.5,1,0.1,0.2\n1,2.0,2,0.3,0.4\n"
    with pytest.raises(DataError, match="line 3"):
        loads_csv(text)


def test_csv_non_positive_time():
    with pytest.raises(DataError, match="line 2"):
        loads_csv("id,time,event,a_0,b_0\n0,0,1,0.1,0.2\n")


def test_csv_missing_column():
    with pytest.raises(DataError, match="missing column 'event'"):
        loads_csv("id,time,a_0,b_0\n0,1,0.1,0.2\n")


def test_csv_empty_file(tmp_path):
    (tmp_path / "e.csv").write_text("")
    with pytest.raises(DataError, match="no records"):
        read_csv(tmp_path / "e.csv")


def test_csv_header_only():
    with pytest.raises(DataError, match="no records"):
        loads_csv("id,time,event,a_0,b_0\n")


def test_csv_skips_leading_comments():
    ds = loads_csv("# provenance\nid,time,event,a_0,b_0\n0,1.5,1,0.1,0.2\n")
    assert len(ds) == 1 and ds.feature_dims == (1, 1)


def test_dataset_rejects_duplicate_ids():
    with pytest.raises(DataError):
        Dataset([0, 0], np.zeros((2, 1)), np.zeros((2, 1)), [1.0, 2.0], [1, 0])


def test_records_view_matches_columns():
    ds = generate_synthetic(SynthConfig(n=5, seed=0))
    again = Dataset.from_records(ds.records)
    assert again == ds
