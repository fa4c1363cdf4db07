import math

import numpy as np
import pytest

from fblbounds.bounds import exact_rc_error
from fblbounds.channel import ChannelError, Prior, load_channel, ml_metric
from fblbounds.simulator import (Codebook, MC_BLOCK, _credit, converse_equality_check,
                                 evaluate_code_exact, load_codebook_file, random_coding_mc)
from fblbounds.verify import random_channel, random_metric


def test_single_codeword():
    ch = load_channel([[0.7, 0.3], [0.4, 0.6]])
    assert evaluate_code_exact(Codebook((1,)), ch, ml_metric(ch)) == 0.0
    assert converse_equality_check(Codebook((0,)), ch, ml_metric(ch)) == (0.0, 0.0, 0.0)


def test_duplicate_codewords_tie():
    ch = load_channel([[0.7, 0.3], [0.4, 0.6]])
    eps, F, gap = converse_equality_check(Codebook((1, 1)), ch, ml_metric(ch))
    assert eps == pytest.approx(0.5)
    assert F == pytest.approx(0.5)
    assert gap <= 1e-15


def test_bsc_both_symbols(bsc1):
    _, ch, metric = bsc1
    assert evaluate_code_exact(Codebook((0, 1)), ch, metric) == pytest.approx(0.1)


def test_credit_conservation(rng):
    for _ in range(20):
        metric = random_metric(rng, 5, 4)
        code = Codebook(tuple(rng.integers(0, 5, size=7)))
        assert np.allclose(_credit(code, metric).sum(axis=0), 1.0, rtol=0, atol=1e-15)


def test_converse_fleet(rng):
    for _ in range(50):
        nx, ny = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        ch = random_channel(rng, nx, ny, zero_frac=0.2)
        metric = random_metric(rng, nx, ny)
        code = Codebook(tuple(rng.integers(0, nx, size=int(rng.integers(1, 17)))))
        assert converse_equality_check(code, ch, metric)[2] <= 1e-12


def test_codebook_validation():
    ch = load_channel(np.eye(2))
    with pytest.raises(ChannelError):
        Codebook(())
    with pytest.raises(ChannelError):
        Codebook((0, 5)).validate(ch)


def test_codebook_file(write_json):
    ch = load_channel(np.eye(2), ["a", "b"], ["a", "b"])
    code = load_codebook_file(write_json("c.json", {"codewords": ["b", "a", "b"]}), ch)
    assert code.codewords == (1, 0, 1)
    with pytest.raises(ChannelError, match="c2.json"):
        load_codebook_file(write_json("c2.json", {"codewords": ["z"]}), ch)


def test_mc_single_codeword(bsc1):
    est = random_coding_mc(*bsc1, 1, 5000, 3)
    assert est.mean == 0.0 and est.stderr == 0.0


def test_mc_bsc_m2(bsc1):
    est = random_coding_mc(*bsc1, 2, 1_000_000, 11)
    assert abs(est.mean - exact_rc_error(*bsc1, 2)) <= 4 * est.stderr


def test_mc_identity_channel():
    ch = load_channel(np.eye(4))
    prior = Prior([0.1, 0.2, 0.3, 0.4])
    for M in (2, 3, 4):
        est = random_coding_mc(prior, ch, ml_metric(ch), M, 300_000, M)
        assert abs(est.mean - exact_rc_error(prior, ch, ml_metric(ch), M)) <= 4 * est.stderr


def test_mc_deterministic_and_blockwise(bsc1):
    a = random_coding_mc(*bsc1, 3, 50_000, 9)
    b = random_coding_mc(*bsc1, 3, 50_000, 9)
    assert a == b
    assert random_coding_mc(*bsc1, 3, 50_000, 10) != a
    # a prefix of whole blocks reproduces the same trials
    one = random_coding_mc(*bsc1, 3, MC_BLOCK, 9)
    two = random_coding_mc(*bsc1, 3, 2 * MC_BLOCK, 9)
    assert round(one.mean * MC_BLOCK) <= round(two.mean * 2 * MC_BLOCK)


def test_mc_stderr_formula(bsc1):
    est = random_coding_mc(*bsc1, 2, 20_000, 1)
    assert est.stderr == pytest.approx(math.sqrt(est.mean * (1 - est.mean) / est.trials))


def test_mc_rejects_bad_args(bsc1):
    with pytest.raises(ValueError):
        random_coding_mc(*bsc1, 2, 0, 1)
    with pytest.raises(ValueError):
        random_coding_mc(*bsc1, 2.5, 10, 1)
