import math

import numpy as np
import pytest

from fblbounds.channel import (Channel, ChannelError, Metric, OutputDist, Prior, channel_document,
                               exceed_kernel, exceed_prob, load_channel, load_channel_file,
                               ml_metric, pairwise_stats, pairwise_tables, PairwiseStats,
                               parse_channel_document)


def test_identity_and_bsc_are_valid():
    assert load_channel(np.eye(2)).n_inputs == 2
    ch = load_channel([[0.9, 0.1], [0.1, 0.9]])
    assert ch.w.shape == (2, 2)


def test_bad_row_sum_is_reported():
    with pytest.raises(ChannelError, match="row 0: row sum 1.1"):
        load_channel([[0.6, 0.5], [0.5, 0.5]])


def test_negative_entry_rejected():
    with pytest.raises(ChannelError, match="negative"):
        load_channel([[1.2, -0.2]])


def test_alphabet_size_mismatch():
    with pytest.raises(ChannelError):
        Channel(["a", "b"], ["y"], np.array([[1.0]]))


def test_channel_is_immutable():
    ch = load_channel(np.eye(2))
    with pytest.raises(ValueError):
        ch.w[0, 0] = 0.5


def test_ml_metric_values():
    ch = load_channel([[1.0, 0.0], [math.exp(-1), 1 - math.exp(-1)]])
    m = ml_metric(ch).m
    assert m[0, 0] == 0.0
    assert m[0, 1] == -math.inf
    assert m[1, 0] == pytest.approx(-1.0, abs=1e-15)


def test_metric_rejects_nan_and_plus_inf():
    with pytest.raises(ChannelError):
        Metric(np.array([[np.nan]]))
    with pytest.raises(ChannelError):
        Metric(np.array([[np.inf]]))


def test_pairwise_all_tie():
    s = pairwise_stats(Prior.uniform(2), Metric(np.zeros((2, 1))), 0, 0)
    assert (s.q_gt, s.q_eq) == (0.0, 1.0)


def test_pairwise_strict_order():
    s = pairwise_stats(Prior.uniform(2), Metric(np.array([[1.0], [0.0]])), 0, 0)
    assert (s.q_gt, s.q_eq) == (0.0, 0.5)


def test_pairwise_count_oracle():
    metric = Metric(np.array([[3.0], [2.0], [2.0], [1.0]]))
    s = pairwise_stats(Prior.uniform(4), metric, 1, 0)
    # direct count: one symbol scores above 2, two symbols score exactly 2
    assert (s.q_gt, s.q_eq) == (0.25, 0.5)


def test_pairwise_outside_support():
    with pytest.raises(ChannelError):
        pairwise_stats(Prior([1.0, 0.0]), Metric(np.zeros((2, 1))), 1, 0)


def test_neg_inf_ties_and_ranks_lowest():
    metric = Metric(np.array([[-np.inf], [-np.inf], [0.0]]))
    s = pairwise_stats(Prior.uniform(3), metric, 0, 0)
    assert s.q_gt == pytest.approx(1 / 3)
    assert s.q_eq == pytest.approx(2 / 3)


def test_exceed_prob_examples():
    assert exceed_prob(PairwiseStats(0.3, 0.2), 0.4) == pytest.approx(0.5)
    assert exceed_prob(PairwiseStats(0.5, 0.1), 0.7) == 0.0
    for a, b in [(0.0, 1.0), (0.2, 0.3), (0.9, 0.1)]:
        assert exceed_prob(PairwiseStats(a, b), 0.0) == 1.0


def test_exceed_prob_rejects_bad_threshold():
    with pytest.raises(ValueError):
        exceed_prob(PairwiseStats(0.1, 0.2), 1.5)


def test_exceed_kernel_zero_width():
    assert exceed_kernel(0.4, 0.0, 0.3) == 1.0
    assert exceed_kernel(0.4, 0.0, 0.5) == 0.0


def test_order_preservation(rng):
    for _ in range(20):
        nx, ny = 6, 4
        metric = Metric(rng.integers(0, 3, size=(nx, ny)).astype(float))
        prior = Prior(rng.dirichlet(np.ones(nx)))
        q_gt, q_eq, _ = pairwise_tables(prior, metric)
        for y in range(ny):
            for i in range(nx):
                for j in range(nx):
                    if metric.m[i, y] > metric.m[j, y]:
                        assert q_gt[i, y] + q_eq[i, y] <= q_gt[j, y] + 1e-15


def test_channel_file_roundtrip(write_json):
    doc = {"inputs": ["a", "b"], "outputs": ["u", "v"], "W": [[0.7, 0.3], [0.2, 0.8]],
           "prior": [0.4, 0.6], "metric": [[0, "-inf"], [1, 2]]}
    prob = load_channel_file(write_json("ch.json", doc))
    assert not prob.matched
    assert np.isneginf(prob.metric.m[0, 1])
    again = parse_channel_document(channel_document(prob))
    assert np.array_equal(again.metric.m, prob.metric.m)
    assert np.array_equal(again.prior.q, prob.prior.q)


def test_channel_file_default_ml(write_json):
    prob = load_channel_file(write_json("ch.json", {"W": [[1.0, 0.0], [0.5, 0.5]]}))
    assert prob.matched
    assert np.array_equal(prob.prior.q, [0.5, 0.5])


def test_channel_file_diagnostics(write_json, tmp_path):
    with pytest.raises(ChannelError, match="line 2"):
        load_channel_file(write_json("bad.json", '{"W":\n [[1.0,]]}'))
    with pytest.raises(ChannelError, match="missing.json"):
        load_channel_file(tmp_path / "missing.json")
    with pytest.raises(ChannelError, match="row 1"):
        load_channel_file(write_json("ragged.json", {"W": [[1.0, 0.0], [1.0]]}))


def test_metric_column_without_finite_entry(write_json):
    doc = {"W": [[0.5, 0.5], [0.5, 0.5]], "metric": [[0, "-inf"], [0, "-inf"]]}
    with pytest.raises(ChannelError, match="column 1"):
        load_channel_file(write_json("m.json", doc))


def test_distributions_validate():
    with pytest.raises(ChannelError):
        Prior([0.5, 0.6])
    with pytest.raises(ChannelError):
        OutputDist([-0.1, 1.1])
    assert OutputDist.uniform(4).q.sum() == pytest.approx(1.0)
