import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_weights
from edgefilter.filter import (
    BufferPolicy,
    Decision,
    DesyncError,
    FilterConfig,
    FilterError,
    FilterState,
    SyncMode,
    cloud_step,
    edge_step,
    pad_buffer,
    run_session,
)
from edgefilter.ingest import Measurement, SeriesFrame
from edgefilter.predictor import PersistenceModel
from oracles import algorithm1

RESET, SLIDING = BufferPolicy.RESET_ON_TRANSMIT, BufferPolicy.SLIDING
SYNC, FAITHFUL = SyncMode.SYNCHRONIZED, SyncMode.PAPER_FAITHFUL


def test_pad_buffer():
    assert pad_buffer([5.0], 3).tolist() == [5, 5, 5]
    assert pad_buffer([1, 2, 3, 4], 3).tolist() == [2, 3, 4]
    assert pad_buffer([7, 9], 4).tolist() == [7, 7, 7, 9]
    with pytest.raises(FilterError):
        pad_buffer([], 3)


def test_config_validation():
    with pytest.raises(FilterError):
        FilterConfig(0.0, 3)
    with pytest.raises(FilterError):
        FilterConfig(0.5, 0)
    with pytest.raises(ValueError):
        FilterConfig(0.5, 3, buffer_policy="lossy")


def test_first_sample_is_transmitted():
    cfg = FilterConfig(0.5, 2)
    out, state = edge_step(FilterState(), Measurement(None, 10.0), PersistenceModel(2), cfg)
    assert out.decision is Decision.TRANSMIT
    assert out.predicted is None and out.forced
    assert state == FilterState((10.0,), False)


def test_hand_trace_paper_faithful():
    cfg = FilterConfig(0.5, 2, RESET, FAITHFUL)
    model = PersistenceModel(2)
    state = FilterState()
    outs = []
    for x in [10.0, 10.2, 11.5]:
        o, state = edge_step(state, x, model, cfg)
        outs.append(o)
    assert [o.decision for o in outs] == [Decision.TRANSMIT, Decision.SUPPRESS, Decision.TRANSMIT]
    assert outs[1].predicted == 10.0 and outs[1].abs_error == pytest.approx(0.2)
    assert outs[2].predicted == 10.2 and outs[2].abs_error == pytest.approx(1.3)
    assert state.buffer == (11.5,)


def test_sliding_policy_keeps_history():
    cfg = FilterConfig(0.5, 3, SLIDING, FAITHFUL)
    state = FilterState()
    for x in [1.0, 1.1, 3.0, 3.1]:
        _, state = edge_step(state, x, PersistenceModel(3), cfg)
    assert state.buffer == (1.1, 3.0, 3.1)


def test_synchronized_mode_stores_prediction():
    cfg = FilterConfig(0.5, 3, RESET, SYNC)
    state = FilterState()
    for x in [10.0, 10.2, 10.4]:
        _, state = edge_step(state, x, PersistenceModel(3), cfg)
    assert state.buffer == (10.0, 10.0, 10.0)


def test_tie_is_suppressed():
    cfg = FilterConfig(0.5, 1)
    _, s = edge_step(FilterState(), 1.0, PersistenceModel(1), cfg)
    o, _ = edge_step(s, 1.5, PersistenceModel(1), cfg)
    assert o.decision is Decision.SUPPRESS


def test_edge_step_errors():
    with pytest.raises(FilterError):
        edge_step(FilterState(), float("nan"), PersistenceModel(2), FilterConfig(0.5, 2))
    with pytest.raises(FilterError):
        edge_step(FilterState(), 1.0, PersistenceModel(3), FilterConfig(0.5, 2))


def test_constant_series_transmits_once():
    for eps in (1e-9, 0.5, 3.0):
        log, _ = run_session(np.full(100, 7.25), PersistenceModel(4), FilterConfig(eps, 4))
        assert log.transmitted == 1 and log.total == 100


def test_huge_threshold_transmits_once(rng):
    xs = rng.normal(0, 20, 300)
    log, _ = run_session(xs, random_weights(rng, 4, 5), FilterConfig(1e12, 5))
    assert log.transmitted == 1


def test_cloud_passthrough_and_fill():
    cfg = FilterConfig(0.5, 2, RESET, FAITHFUL)
    v, m = cloud_step(FilterState(), 10.0, PersistenceModel(2), cfg)
    assert v == 10.0
    v, m = cloud_step(m, None, PersistenceModel(2), cfg)
    assert v == 10.0
    assert m.buffer == (10.0, 10.0)


def test_paper_faithful_cloud_reconstruction():
    cfg = FilterConfig(0.5, 2, RESET, FAITHFUL)
    log, recon = run_session([10.0, 10.2], PersistenceModel(2), cfg)
    assert recon.values.tolist() == [10.0, 10.0]
    assert recon.is_prediction.tolist() == [False, True]
    assert np.max(np.abs(recon.values - np.array([10.0, 10.2]))) == pytest.approx(0.2)


def test_cloud_detects_desync():
    cfg = FilterConfig(0.5, 2, RESET, SYNC)
    mirror = FilterState((10.0,), False)
    with pytest.raises(DesyncError):
        cloud_step(mirror, 10.1, PersistenceModel(2), cfg)
    with pytest.raises(DesyncError):
        cloud_step(FilterState(), None, PersistenceModel(2), cfg)


def test_gap_forces_retransmission():
    ts = np.array([0, 60, 120, 600, 660])
    fr = SeriesFrame("s", "in_situ", 60, ts, np.full(5, 3.0))
    log, recon = run_session(fr, PersistenceModel(2), FilterConfig(0.5, 2))
    assert log.transmitted_indices() == [0, 3]
    assert log.outcomes[3].forced


def test_exports_are_stable(rng):
    fr = SeriesFrame("s", "in_situ", 3600, np.arange(20) * 3600, rng.normal(10, 1, 20))
    w = random_weights(rng, 3, 4)
    a = run_session(fr, w, FilterConfig(0.5, 4))
    b = run_session(fr, w, FilterConfig(0.5, 4))
    assert a[0].to_csv() == b[0].to_csv()
    assert a[1].to_csv() == b[1].to_csv()
    lines = a[0].to_csv().splitlines()
    assert lines[0] == "index,timestamp,actual,predicted,abs_error,decision"
    assert lines[1].startswith("0,1970-01-01T00:00:00Z,") and lines[1].endswith(",,,transmit")
    assert a[1].to_csv().splitlines()[0] == "timestamp,value,is_prediction"
    assert "\r" not in a[0].to_csv()


def _model_for(kind, rng, k):
    return PersistenceModel(k) if kind == "persistence" else random_weights(rng, int(rng.integers(2, 6)), k)


@pytest.mark.parametrize("policy", [RESET, SLIDING])
@pytest.mark.parametrize("sync", [SYNC, FAITHFUL])
@pytest.mark.parametrize("kind", ["persistence", "lstm"])
def test_session_matches_oracle(policy, sync, kind):
    rng = np.random.default_rng(hash((policy.value, sync.value, kind)) % 2**32)
    for _ in range(10):
        k = int(rng.integers(1, 7))
        model = _model_for(kind, rng, k)
        xs = np.cumsum(rng.normal(0, 0.6, int(rng.integers(1, 120)))) + 10
        eps = float(rng.uniform(0.05, 2.0))
        log, recon = run_session(xs, model, FilterConfig(eps, k, policy, sync))
        dec, preds, rec = algorithm1(xs.tolist(), model.predict_window, eps, k, policy=policy.value, sync=sync.value)
        assert ["T" if o.decision is Decision.TRANSMIT else "S" for o in log.outcomes] == dec
        assert [o.predicted for o in log.outcomes] == preds
        assert recon.values.tolist() == rec


def test_session_with_gap_matches_oracle(rng):
    k = 3
    model = random_weights(rng, 3, k)
    ts = np.concatenate([np.arange(40), np.arange(50, 90)]) * 60
    xs = np.cumsum(rng.normal(0, 0.5, len(ts))) + 5
    fr = SeriesFrame("s", "in_situ", 60, ts, xs)
    log, recon = run_session(fr, model, FilterConfig(0.4, k))
    dec, _, rec = algorithm1(xs.tolist(), model.predict_window, 0.4, k, sync="synchronized", resume={40})
    assert ["T" if o.decision is Decision.TRANSMIT else "S" for o in log.outcomes] == dec
    assert recon.values.tolist() == rec


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(1, 150),
    k=st.integers(1, 6),
    eps=st.floats(1e-3, 5.0),
    policy=st.sampled_from([RESET, SLIDING]),
)
def test_synchronized_reconstruction_bound(seed, n, k, eps, policy):
    rng = np.random.default_rng(seed)
    model = random_weights(rng, int(rng.integers(1, 5)), k)
    xs = rng.normal(model.norm.mean, model.norm.std, n)
    log, recon = run_session(xs, model, FilterConfig(eps, k, policy, SYNC))
    assert np.max(np.abs(recon.values - xs)) <= eps
    for o in log.outcomes:
        if o.decision is Decision.SUPPRESS:
            assert o.abs_error <= eps
    sent = np.array([o.decision is Decision.TRANSMIT for o in log.outcomes])
    assert np.array_equal(recon.values[sent], xs[sent])


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 150), k=st.integers(1, 6))
def test_suppression_bound_paper_faithful(seed, n, k):
    rng = np.random.default_rng(seed)
    model = random_weights(rng, 3, k)
    xs = rng.normal(model.norm.mean, model.norm.std, n)
    eps = float(rng.uniform(0.01, 3))
    log, _ = run_session(xs, model, FilterConfig(eps, k, RESET, FAITHFUL))
    assert all(o.abs_error <= eps for o in log.outcomes if o.decision is Decision.SUPPRESS)
    assert log.total == log.transmitted + log.suppressed
    assert log.outcomes[0].decision is Decision.TRANSMIT


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 150), k=st.integers(1, 6))
def test_sliding_threshold_monotonicity(seed, n, k):
    rng = np.random.default_rng(seed)
    model = random_weights(rng, 3, k)
    xs = rng.normal(model.norm.mean, model.norm.std, n)
    e1 = float(rng.uniform(0.01, 3))
    e2 = e1 + float(rng.uniform(0, 3))
    a, _ = run_session(xs, model, FilterConfig(e1, k, SLIDING, FAITHFUL))
    b, _ = run_session(xs, model, FilterConfig(e2, k, SLIDING, FAITHFUL))
    assert set(b.transmitted_indices()) <= set(a.transmitted_indices())
