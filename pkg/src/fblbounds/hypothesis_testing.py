"""Neyman-Pearson tests, the matched-case output distribution, meta-converse.

``np_beta(P, Q, alpha)`` is the smallest Q-mass of a randomized test whose
P-mass is at least ``alpha``. With ``P = Q(x) Q(y)`` and ``Q = Q(x) W(y|x)``
at ``alpha = 1 - e^{-R}`` it never exceeds F(R), and under the ML metric the
output distribution built by :func:`matched_witness` attains F(R).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .bounds import cdf_F
from .channel import (Channel, ChannelError, Metric, OutputDist, Prior, exceed_kernel,
                      ml_metric, pairwise_tables)

MASS_TOL = 1e-12


class WitnessError(ValueError):
    """No valid output distribution can be built for the request."""


@dataclass(frozen=True)
class JointDist:
    """Masses over a finite ground set (flattened; ``shape`` is kept for display)."""

    masses: np.ndarray
    shape: tuple = ()

    def __post_init__(self):
        m = np.array(self.masses, dtype=float)
        shape = self.shape or m.shape
        m = m.ravel()
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "shape", tuple(shape))
        if np.isnan(m).any() or (m < 0).any():
            raise ValueError("joint distribution has negative or NaN masses")
        if abs(float(m.sum()) - 1.0) > MASS_TOL:
            raise ValueError(f"joint distribution sums to {float(m.sum()):.12g}")

    @classmethod
    def product(cls, q_x: np.ndarray, q_y: np.ndarray) -> "JointDist":
        return cls(np.outer(q_x, q_y))

    @classmethod
    def through_channel(cls, q_x: np.ndarray, w: np.ndarray) -> "JointDist":
        return cls(np.asarray(q_x)[:, None] * w)


@dataclass(frozen=True)
class NPResult:
    """Optimal randomized test: accept where ``log(P/Q) > lam``, w.p. ``delta`` at ``= lam``."""

    beta: float
    lam: float
    delta: float
    achieved_alpha: float


def np_beta(P: JointDist, Q: JointDist, alpha: float) -> NPResult:
    """Neyman-Pearson ``beta_alpha(P, Q)``.

    Atoms are visited in decreasing likelihood ratio (``Q == 0 < P`` first).
    Atoms whose cross products agree exactly form one class, and the
    boundary class is taken with a single randomization weight ``delta``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha {alpha!r} outside [0, 1]")
    p = P.masses
    q = Q.masses
    if p.shape != q.shape or P.shape != Q.shape:
        raise ValueError(f"ground sets differ: {P.shape} vs {Q.shape}")

    live = (p > 0) | (q > 0)
    p = p[live]
    q = q[live]
    with np.errstate(divide="ignore"):
        ratio = np.where(q > 0, p / np.where(q > 0, q, 1.0), np.inf)
    order = np.argsort(-ratio, kind="stable")
    p = p[order]
    q = q[order]

    if alpha == 0.0 or p.size == 0:
        lam = math.log(ratio[order[0]]) if p.size and ratio[order[0]] > 0 else math.inf
        return NPResult(0.0, lam, 0.0, 0.0)

    # class boundaries: neighbours whose ratios agree as exact cross products
    same = p[1:] * q[:-1] == p[:-1] * q[1:]
    starts = np.concatenate([[0], np.flatnonzero(~same) + 1])
    ends = np.concatenate([starts[1:], [p.size]])

    acc_p = 0.0
    beta = 0.0
    lam, delta = math.inf, 0.0
    for s, e in zip(starts, ends):
        cls_p = float(p[s:e].sum())
        need = alpha - acc_p
        if cls_p == 0.0 or need <= 0.0:
            break
        cls_q = float(q[s:e].sum())
        r = ratio[order[s]]
        lam = math.log(r)
        if cls_p >= need:
            delta = need / cls_p
            return NPResult(beta + delta * cls_q, lam, delta, acc_p + delta * cls_p)
        acc_p += cls_p
        beta += cls_q
        delta = 1.0
    if alpha - acc_p > MASS_TOL:
        raise ValueError(f"alpha {alpha!r} exceeds the total P-mass {acc_p!r}")
    return NPResult(beta, lam, delta, acc_p)


@dataclass(frozen=True)
class MatchedWitness:
    """Threshold symbol ``x_y`` and randomization ``tau_y`` per output, and ``Q(y)``."""

    R: float
    x_y: tuple
    tau_y: tuple
    eta: float
    q_y: OutputDist

    def to_json(self, channel: Channel) -> str:
        per_y = [{"y": channel.output_alphabet[y], "x_y": channel.input_alphabet[x],
                  "tau": t, "q": float(qq)}
                 for y, (x, t, qq) in enumerate(zip(self.x_y, self.tau_y, self.q_y.q))]
        return json.dumps({"R": self.R, "eta": self.eta, "per_y": per_y}, indent=2) + "\n"


def matched_witness(prior: Prior, channel: Channel, R: float) -> MatchedWitness:
    """Build the output distribution that makes ``beta = F(R)`` under the ML metric.

    For each output ``y`` the support symbols are scanned in decreasing
    likelihood; ``x_y`` is the first class whose cumulative mass reaches
    ``e^{-R}`` (lowest index on ties) and ``tau_y`` splits that class so that
    ``q_gt + tau_y * q_eq = e^{-R}``. Then ``Q(y) = W(y|x_y) / eta``.
    """
    if R < 0:
        raise ValueError(f"rate {R} < 0")
    if prior.q.size != channel.n_inputs:
        raise ChannelError(f"prior has {prior.q.size} entries for {channel.n_inputs} inputs")
    t = math.exp(-R)
    metric = ml_metric(channel)
    support = prior.support
    xs, taus, lik = [], [], []
    for y in range(channel.n_outputs):
        col = metric.m[:, y]
        levels = np.unique(col[support])[::-1]
        q_gt = 0.0
        chosen = None
        for v in levels:
            q_eq = float(prior.q[col == v].sum())
            if q_gt + q_eq >= t - MASS_TOL:
                chosen = v
                break
            q_gt = float(prior.q[col >= v].sum())
        if chosen is None:
            raise WitnessError(f"output {channel.output_alphabet[y]!r}: no symbol brackets "
                               f"e^-R = {t!r}")
        x_y = int(support[np.flatnonzero(col[support] == chosen)[0]])
        q_gt = float(prior.q[col > chosen].sum())
        q_eq = float(prior.q[col == chosen].sum())
        xs.append(x_y)
        taus.append(min(1.0, max(0.0, (t - q_gt) / q_eq)))
        lik.append(channel.w[x_y, y])
    eta = float(np.sum(lik))
    if eta <= 0:
        raise WitnessError(
            f"degenerate threshold at R={R!r}: every output's threshold symbol has "
            "zero likelihood (eta = 0)")
    q_y = OutputDist(np.asarray(lik) / eta)
    return MatchedWitness(float(R), tuple(xs), tuple(taus), eta, q_y)


def witness_residuals(prior: Prior, channel: Channel, wit: MatchedWitness) -> np.ndarray:
    """Per-output ``|q_gt + tau_y q_eq - e^{-R}|`` for the witness's threshold symbols."""
    q_gt, q_eq, _ = pairwise_tables(prior, ml_metric(channel))
    t = math.exp(-wit.R)
    ys = np.arange(channel.n_outputs)
    xs = np.asarray(wit.x_y)
    return np.abs(q_gt[xs, ys] + np.asarray(wit.tau_y) * q_eq[xs, ys] - t)


def threshold_test_levels(prior: Prior, channel: Channel, metric: Metric,
                          q_y: OutputDist, R: float) -> tuple[float, float]:
    """P- and Q-mass of the dithered test ``{p >= e^{-R}}``.

    Returns ``(mass under Q(x)Q(y), mass under Q(x)W(y|x))``; the first is
    ``1 - e^{-R}`` for every ``q_y``, the second is F(R).
    """
    q_gt, q_eq, _ = pairwise_tables(prior, metric)
    ex = exceed_kernel(q_gt, q_eq, math.exp(-R))
    sup = prior.q > 0
    ex = np.where(sup[:, None], ex, 0.0)
    under_p = float(np.sum(prior.q[:, None] * q_y.q[None, :] * ex))
    under_q = float(np.sum(prior.q[:, None] * channel.w * ex))
    return under_p, under_q


def beta_vs_F(prior: Prior, channel: Channel, metric: Metric, q_y: OutputDist,
              R: float) -> tuple[float, float]:
    """``(beta_{1-e^{-R}}(Q(x)Q(y), Q(x)W), F(R))``."""
    if q_y.q.size != channel.n_outputs:
        raise ChannelError(f"Q(y) has {q_y.q.size} entries for {channel.n_outputs} outputs")
    P = JointDist.product(prior.q, q_y.q)
    Q = JointDist.through_channel(prior.q, channel.w)
    alpha = -math.expm1(-R)
    beta = np_beta(P, Q, alpha).beta
    return beta, cdf_F(prior, channel, metric, R)


def meta_converse_code_bound(code, channel: Channel, q_y: OutputDist) -> float:
    """``beta_{1-1/M}(P(x) Q(y), P(x) W)`` with ``P`` the code's empirical input law.

    A lower bound on the average error of the code under any decoder,
    randomized or not.
    """
    from .simulator import Codebook

    if not isinstance(code, Codebook):
        code = Codebook(tuple(code))
    if q_y.q.size != channel.n_outputs:
        raise ChannelError(f"Q(y) has {q_y.q.size} entries for {channel.n_outputs} outputs")
    px = code.empirical_prior(channel.n_inputs).q
    M = code.M
    P = JointDist.product(px, q_y.q)
    Q = JointDist.through_channel(px, channel.w)
    return np_beta(P, Q, 1.0 - 1.0 / M).beta
