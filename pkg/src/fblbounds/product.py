"""BSC^n and BEC^n through their sufficient statistics.

With a uniform prior on ``{0,1}^n`` and the ML metric the pairwise masses
depend on ``(x, y)`` only through one integer:

* BSC: Hamming distance ``d``.  ``q_gt(d) = 2^-n sum_{k<d} C(n,k)``,
  ``q_eq(d) = 2^-n C(n,d)``.
* BEC: erasure count ``e``.  The ``2^e`` sequences consistent with ``y`` tie
  and every other one has likelihood zero, so ``q_gt = 0`` and
  ``q_eq = 2^(e-n)``.

Everything is carried as logarithms so blocklengths in the hundreds neither
overflow nor underflow.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import gammaln

from .bounds import SERIES_CUTOFF, BoundCurve, _check_grid, exact_series, point_from_values
from .channel import Channel

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class BSCSpec:
    n: int
    crossover: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"blocklength must be a positive integer, got {self.n!r}")
        if not 0.0 < self.crossover < 0.5:
            raise ValueError(f"crossover must lie in (0, 0.5), got {self.crossover!r}")


@dataclass(frozen=True)
class BECSpec:
    n: int
    erasure: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"blocklength must be a positive integer, got {self.n!r}")
        if not 0.0 < self.erasure < 1.0:
            raise ValueError(f"erasure probability must lie in (0, 1), got {self.erasure!r}")


@dataclass(frozen=True)
class StatTable:
    """Per-statistic log quantities.

    ``log_one_minus_gt`` is ``log(1 - q_gt)``: ``log1p(-q_gt)`` when
    ``q_gt < 1/2``, otherwise the accumulated upper tail. ``log_q_le`` is
    ``log(q_gt + q_eq)``, pinned to exactly 0 for the last statistic value.
    """

    stat: np.ndarray
    log_weight: np.ndarray
    log_prob: np.ndarray
    log_q_gt: np.ndarray
    log_q_eq: np.ndarray
    log_one_minus_gt: np.ndarray
    log_q_le: np.ndarray

    def normalization_error(self) -> float:
        return abs(float(np.exp(self.log_prob).sum()) - 1.0)


def log_binom(n: int, k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def _exclusive_logcumsum(v: np.ndarray) -> np.ndarray:
    out = np.full(v.shape, -np.inf)
    out[1:] = np.logaddexp.accumulate(v)[:-1]
    return out


def bsc_stats(spec: BSCSpec) -> StatTable:
    n, p = spec.n, spec.crossover
    d = np.arange(n + 1)
    lw = log_binom(n, d)
    log_prob = lw + d * math.log(p) + (n - d) * math.log1p(-p)
    log_q_eq = lw - n * LOG2
    log_q_gt = _exclusive_logcumsum(log_q_eq)
    log_upper = np.logaddexp.accumulate(log_q_eq[::-1])[::-1]
    # log1p keeps log(1 - q_gt) exact for small q_gt; the (c+1) power amplifies any slack.
    small = log_q_gt < -LOG2
    log_upper[small] = np.log1p(-np.exp(log_q_gt[small]))
    log_le = np.logaddexp.accumulate(log_q_eq)
    log_le[-1] = 0.0
    return StatTable(d, lw, log_prob, log_q_gt, log_q_eq, log_upper, log_le)


def bec_stats(spec: BECSpec) -> StatTable:
    n, eps = spec.n, spec.erasure
    e = np.arange(n + 1)
    lw = log_binom(n, e)
    log_prob = lw + e * math.log(eps) + (n - e) * math.log1p(-eps)
    log_q_eq = (e - n) * LOG2
    return StatTable(e, lw, log_prob, np.full(n + 1, -np.inf), log_q_eq, np.zeros(n + 1),
                     log_q_eq)


# --- log-domain kernels ------------------------------------------------------

def _log_exceed(la, lb, lab, lt):
    """``Pr{a + U b >= t}`` from ``log a``, ``log b``, ``log(a + b)``, ``log t``."""
    with np.errstate(over="ignore", invalid="ignore"):
        ramp = np.exp(lab - lb) * -np.expm1(lt - lab)
    return np.where(la >= lt, 1.0, np.where(lt >= lab, 0.0, np.clip(ramp, 0.0, 1.0)))


def _log_clipped(la, lb, lc):
    """``int_0^1 min(1, c (a + b u)) du`` from logs; see ``bounds.clipped_kernel``."""
    if lc == -np.inf:
        return np.zeros_like(la)
    lA = la + lc
    lB = lb + lc
    lAB = np.logaddexp(lA, lB)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        low = np.exp(lA) + 0.5 * np.exp(np.minimum(lB, 0.0))
        one_minus_A = -np.expm1(np.minimum(lA, 0.0))
        cross = 1.0 - np.exp(2.0 * np.log(one_minus_A) - lB - LOG2)
    return np.where(lA >= 0.0, 1.0, np.where(lAB <= 0.0, low, cross))


def _log_exact(la, lb, l1ma, lc):
    """``1 - int_0^1 (1 - a - b u)^c du`` from ``log a``, ``log b``, ``log(1 - a)``, ``log c``."""
    if lc == -np.inf:
        return np.zeros_like(lb)
    c = math.exp(lc)
    k = c + 1.0
    lab = np.logaddexp(la, lb)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        r = np.clip(np.exp(lb - l1ma), 0.0, 1.0)
        log_int = k * l1ma + np.log(-np.expm1(k * np.log1p(-r))) - math.log(k) - lb
        closed = -np.expm1(log_int)
        small = (lab + lc <= math.log(SERIES_CUTOFF)) & (lab <= math.log(SERIES_CUTOFF))
        if np.any(small):
            ls = max(lc, 0.0)
            series = exact_series(np.exp(np.minimum(la + ls, 0.0)),
                                  np.exp(np.minimum(lab + ls, 0.0)), c)
            closed = np.where(small, series, closed)
    return np.clip(closed, 0.0, 1.0)


def _average(table: StatTable, values: np.ndarray) -> float:
    return float(np.sum(np.exp(table.log_prob) * values))


def table_F(table: StatTable, R: float) -> float:
    if R < 0:
        raise ValueError(f"rate {R} < 0")
    return _average(table, _log_exceed(table.log_q_gt, table.log_q_eq, table.log_q_le, -R))


def table_clipped(table: StatTable, log_c: float) -> float:
    """Clipped union bound with ``c = exp(log_c)`` competitors."""
    return _average(table, _log_clipped(table.log_q_gt, table.log_q_eq, log_c))


def table_exact(table: StatTable, log_c: float) -> float:
    """Exact random-coding error with ``c = exp(log_c)`` competitors."""
    return _average(table, _log_exact(table.log_q_gt, table.log_q_eq, table.log_one_minus_gt,
                                      log_c))


def _log_competitors(M: float) -> float:
    if M < 1:
        raise ValueError(f"codebook size {M} < 1")
    return -math.inf if M == 1 else math.log(M - 1.0)


def bsc_F(spec: BSCSpec, R: float) -> float:
    return table_F(bsc_stats(spec), R)


def bsc_P_clipped(spec: BSCSpec, M: float) -> float:
    return table_clipped(bsc_stats(spec), _log_competitors(M))


def bsc_exact_rc(spec: BSCSpec, M: float) -> float:
    return table_exact(bsc_stats(spec), _log_competitors(M))


def bec_F(spec: BECSpec, R: float) -> float:
    return table_F(bec_stats(spec), R)


def bec_P_clipped(spec: BECSpec, M: float) -> float:
    return table_clipped(bec_stats(spec), _log_competitors(M))


def bec_exact_rc(spec: BECSpec, M: float) -> float:
    return table_exact(bec_stats(spec), _log_competitors(M))


def stats_for(spec: BSCSpec | BECSpec) -> StatTable:
    return bsc_stats(spec) if isinstance(spec, BSCSpec) else bec_stats(spec)


def product_sweep(spec: BSCSpec | BECSpec, rate_grid: Iterable[float]) -> BoundCurve:
    """Same columns as :func:`fblbounds.bounds.sweep`, via the statistic table."""
    grid = _check_grid(rate_grid)
    table = stats_for(spec)
    pts = []
    for R in grid:
        # log c = R exactly, so huge codebooks never materialize.
        pts.append(point_from_values(R, table_F(table, R), table_clipped(table, R),
                                     table_exact(table, R)))
    return BoundCurve(tuple(pts))


# --- explicit product channels (enumeration oracles) -------------------------

def bsc_product_channel(spec: BSCSpec) -> Channel:
    """Full ``2^n x 2^n`` BSC^n matrix.

    Entries are formed from the Hamming distance as ``p^d (1-p)^(n-d)`` so
    equal-likelihood pairs are bit-identical and tie under the ML metric.
    """
    n, p = spec.n, spec.crossover
    words = list(itertools.product((0, 1), repeat=n))
    arr = np.array(words)
    dist = (arr[:, None, :] != arr[None, :, :]).sum(axis=2)
    lik = np.array([p ** d * (1 - p) ** (n - d) for d in range(n + 1)])
    w = lik[dist]
    labels = ["".join(map(str, wd)) for wd in words]
    return Channel(labels, labels, w)


def bec_product_channel(spec: BECSpec) -> Channel:
    """Full ``2^n x 3^n`` BEC^n matrix with ``'e'`` marking an erasure."""
    n, eps = spec.n, spec.erasure
    inputs = list(itertools.product("01", repeat=n))
    outputs = list(itertools.product("01e", repeat=n))
    lik = np.array([eps ** e * (1 - eps) ** (n - e) for e in range(n + 1)])
    w = np.zeros((len(inputs), len(outputs)))
    for j, y in enumerate(outputs):
        e = y.count("e")
        for i, x in enumerate(inputs):
            if all(yc == "e" or yc == xc for xc, yc in zip(x, y)):
                w[i, j] = lik[e]
    return Channel(["".join(x) for x in inputs], ["".join(y) for y in outputs], w)
