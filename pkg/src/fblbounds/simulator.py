"""Fixed codes under the randomized max-metric decoder, and random-coding Monte Carlo.

The decoder picks uniformly among all messages whose codeword attains the
largest metric; repeated codewords are distinct messages and each one
counts in the tie. With that rule the average error of any code equals
F(log M) evaluated at the code's empirical input distribution, which
:func:`converse_equality_check` verifies. For other decoders only the
meta-converse bound in :mod:`fblbounds.hypothesis_testing` applies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .bounds import cdf_F
from .channel import Channel, ChannelError, Metric, Prior, _read_json

# Trials per independent random stream. Streams are keyed by (seed, block),
# so changing this constant changes the sample path (not the distribution).
MC_BLOCK = 1 << 14


@dataclass(frozen=True)
class Codebook:
    """Ordered codewords as input-alphabet indices; message ``i`` sends ``codewords[i]``."""

    codewords: tuple

    def __post_init__(self):
        cw = tuple(int(c) for c in self.codewords)
        if not cw:
            raise ChannelError("codebook is empty")
        if min(cw) < 0:
            raise ChannelError("codeword indices must be non-negative")
        object.__setattr__(self, "codewords", cw)

    @property
    def M(self) -> int:
        return len(self.codewords)

    def validate(self, channel: Channel) -> None:
        bad = [c for c in self.codewords if c >= channel.n_inputs]
        if bad:
            raise ChannelError(f"codeword index {bad[0]} outside the input alphabet")

    def empirical_prior(self, n_inputs: int) -> Prior:
        counts = np.bincount(self.codewords, minlength=n_inputs)
        if counts.size > n_inputs:
            raise ChannelError("codeword index outside the input alphabet")
        return Prior(counts / self.M)

    @classmethod
    def from_labels(cls, labels, channel: Channel) -> "Codebook":
        return cls(tuple(channel.input_index(lab) for lab in labels))


def load_codebook_file(path, channel: Channel) -> Codebook:
    """Read ``{"codewords": [input labels]}``."""
    doc = _read_json(path)
    if not isinstance(doc, dict) or not isinstance(doc.get("codewords"), list):
        raise ChannelError(f"{path}: expected an object with a 'codewords' list")
    try:
        return Codebook.from_labels(doc["codewords"], channel)
    except ChannelError as exc:
        raise ChannelError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    trials: int
    seed: int

    def to_json(self, **extra) -> str:
        rec = {"mean": self.mean, "stderr": self.stderr, "trials": self.trials,
               "seed": self.seed}
        rec.update(extra)
        return json.dumps(rec, indent=2) + "\n"


def _credit(code: Codebook, metric: Metric) -> np.ndarray:
    """``credit[i, y] = Pr{decoder outputs i | y}``."""
    v = metric.m[list(code.codewords), :]
    best = v.max(axis=0)
    winners = v == best[None, :]
    return winners / winners.sum(axis=0, keepdims=True)


def decoder_output_probs(code: Codebook, metric: Metric, y: int) -> np.ndarray:
    """Distribution of the decoded message given output index ``y``."""
    return _credit(code, metric)[:, y]


def evaluate_code_exact(code: Codebook, channel: Channel, metric: Metric) -> float:
    """Average error ``1/M sum_i sum_y W(y|x_i) (1 - Pr{decode i | y})``."""
    code.validate(channel)
    if channel.w.shape != metric.m.shape:
        raise ChannelError(f"metric shape {metric.m.shape} != channel shape {channel.w.shape}")
    w = channel.w[list(code.codewords), :]
    return float(np.sum(w * (1.0 - _credit(code, metric))) / code.M)


def converse_equality_check(code: Codebook, channel: Channel,
                            metric: Metric) -> tuple[float, float, float]:
    """``(epsilon, F(log M), |gap|)`` with F taken at the code's empirical prior."""
    eps = evaluate_code_exact(code, channel, metric)
    prior = code.empirical_prior(channel.n_inputs)
    F = cdf_F(prior, channel, metric, math.log(code.M))
    return eps, F, abs(eps - F)


def _block_errors(rng: np.random.Generator, n: int, prior: Prior, cum_w: np.ndarray,
                  metric: np.ndarray, M: int) -> int:
    rows = np.arange(n)
    cw = rng.choice(prior.q.size, size=(n, M), p=prior.q)
    msg = rng.integers(M, size=n)
    x = cw[rows, msg]
    u = rng.random(n)
    y = np.minimum((u[:, None] >= cum_w[x]).sum(axis=1), cum_w.shape[1] - 1)
    v = metric[cw, y[:, None]]
    winners = v == v.max(axis=1, keepdims=True)
    count = winners.sum(axis=1)
    # uniform choice among the winners hits the sent message w.p. 1/count
    correct = winners[rows, msg] & (rng.random(n) * count < 1.0)
    return int(n - correct.sum())


def random_coding_mc(prior: Prior, channel: Channel, metric: Metric, M: int,
                     trials: int, seed: int) -> MCEstimate:
    """Monte Carlo of the full random-coding experiment.

    Each trial draws ``M`` i.i.d. codewords from the prior, a uniform
    message, a channel output and a fresh tie-break. Trials are grouped in
    blocks of :data:`MC_BLOCK`, block ``j`` drawing from a Philox stream keyed
    by ``(seed, j)``, so any block can be computed independently.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if int(M) != M or M < 1:
        raise ValueError(f"codebook size must be a positive integer, got {M!r}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    if channel.w.shape != metric.m.shape or prior.q.size != channel.n_inputs:
        raise ChannelError("prior, channel and metric dimensions disagree")
    cum_w = np.cumsum(channel.w, axis=1)
    errors = 0
    for block, start in enumerate(range(0, trials, MC_BLOCK)):
        n = min(MC_BLOCK, trials - start)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))
        errors += _block_errors(rng, n, prior, cum_w, metric.m, int(M))
    mean = errors / trials
    return MCEstimate(mean, math.sqrt(mean * (1.0 - mean) / trials), trials, seed)
