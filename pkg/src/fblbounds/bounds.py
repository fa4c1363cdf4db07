"""Random-coding bounds built from the dithered pairwise error ``p``.

With ``c`` competitors (``c = M - 1`` for a codebook of ``M`` words):

* ``F(R)          = Pr{ p >= e^{-R} }``         converse / exact code error
* ``P_clipped(c)  = E[ min(1, c * p) ]``        clipped union bound
* ``P_exact(c)    = E[ 1 - (1 - p)^c ]``        exact random-coding error

The expectation runs over ``Q(x) W(y|x)`` and the dither; the dither is
integrated in closed form for every pair. Rate-indexed quantities use
``c = e^R`` so that ``P(R) = e^R * int_R^inf F(z) e^{-z} dz`` holds exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .channel import Channel, ChannelError, Metric, Prior, exceed_kernel, pairwise_tables

_CHUNK = 8192


@dataclass(frozen=True)
class RatePoint:
    """A rate in nats together with its codebook size."""

    rate_nats: float
    codebook_size: float

    def __post_init__(self):
        if self.codebook_size < 1:
            raise ValueError(f"codebook size {self.codebook_size} < 1")
        if self.rate_nats < 0:
            raise ValueError(f"rate {self.rate_nats} < 0")
        if abs(math.log(self.codebook_size) - self.rate_nats) > 1e-12:
            raise ValueError("rate and codebook size disagree")

    @classmethod
    def from_rate(cls, R: float) -> "RatePoint":
        return cls(R, math.exp(R))

    @classmethod
    def from_size(cls, M: int) -> "RatePoint":
        return cls(math.log(M), M)


@dataclass(frozen=True)
class PairTable:
    """Flattened (x, y) pairs with positive weight ``Q(x) W(y|x)``."""

    weight: np.ndarray
    q_gt: np.ndarray
    q_eq: np.ndarray
    q_le: np.ndarray

    @classmethod
    def build(cls, prior: Prior, channel: Channel, metric: Metric) -> "PairTable":
        if channel.w.shape != metric.m.shape:
            raise ChannelError(f"metric shape {metric.m.shape} != channel shape {channel.w.shape}")
        if prior.q.size != channel.n_inputs:
            raise ChannelError(f"prior has {prior.q.size} entries for {channel.n_inputs} inputs")
        q_gt, q_eq, q_le = pairwise_tables(prior, metric)
        w = prior.q[:, None] * channel.w
        keep = w > 0
        return cls(w[keep], q_gt[keep], q_eq[keep], q_le[keep])

    def cdf(self, R) -> np.ndarray | float:
        """F at one rate or at an array of rates."""
        R = np.asarray(R, dtype=float)
        t = np.exp(-R)
        if t.ndim == 0:
            return float(np.sum(self.weight * exceed_kernel(self.q_gt, self.q_eq, t)))
        flat = t.ravel()
        out = np.empty(flat.size)
        for i in range(0, flat.size, _CHUNK):
            tt = flat[i:i + _CHUNK, None]
            out[i:i + _CHUNK] = np.sum(exceed_kernel(self.q_gt, self.q_eq, tt) * self.weight,
                                       axis=1)
        return out.reshape(t.shape)

    def clipped(self, c: float) -> float:
        return float(np.sum(self.weight * clipped_kernel(self.q_gt, self.q_eq, c)))

    def exact(self, c: float) -> float:
        return float(np.sum(self.weight * exact_kernel(self.q_gt, self.q_eq, self.q_le, c)))

    def saturation_rate(self) -> float:
        """Rate beyond which ``F(z) = W - S e^{-z}`` holds exactly."""
        zero_gt = self.q_gt == 0
        t_min = min(np.min(self.q_gt[~zero_gt], initial=1.0),
                    np.min(self.q_eq[zero_gt], initial=1.0))
        return -math.log(t_min)

    def kink_thresholds(self) -> np.ndarray:
        """Values of ``e^{-z}`` where F has a corner (sorted, unique)."""
        t = np.concatenate([self.q_gt[self.q_gt > 0], self.q_gt + self.q_eq])
        return np.unique(t)


# --- per-pair closed forms -------------------------------------------------

def clipped_kernel(a, b, c):
    """``int_0^1 min(1, c*(a + b*u)) du`` for arrays ``a = q_gt``, ``b = q_eq``.

    Three regimes: fully clipped (``c*a >= 1``), never clipped
    (``c*(a+b) <= 1``), and a crossing at ``u* = (1/c - a)/b`` which
    simplifies to ``1 - (1 - c*a)^2 / (2*c*b)``.
    """
    if c < 0:
        raise ValueError(f"competitor count {c} < 0")
    A = c * np.asarray(a, dtype=float)
    B = c * np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        cross = 1.0 - (1.0 - A) ** 2 / (2.0 * B)
    return np.where(A >= 1.0, 1.0, np.where(A + B <= 1.0, A + 0.5 * B, cross))


SERIES_CUTOFF = 0.25
_SERIES_TERMS = 48


def exact_series(x, y, c):
    """``1 - E(1-p)^c`` for ``p ~ Unif[a, a+b]`` given ``x = s*a``, ``y = s*(a+b)``.

    The scale is ``s = max(c, 1)``. Expands ``1 - (1-p)^c = sum_j (-1)^(j+1)
    C(c, j) p^j`` and averages the powers exactly:
    ``E p^j = sum_{i<=j} a^i (a+b)^(j-i) / (j+1)``. No cancellation occurs
    between the leading terms, so tiny errors keep full relative precision.
    Valid for ``c*(a+b) <= SERIES_CUTOFF`` and ``a + b <= SERIES_CUTOFF``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scale = max(c, 1.0)
    total = np.zeros(np.broadcast(x, y).shape)
    powsum = np.ones_like(total)
    xj = np.ones_like(total)
    gamma = 1.0
    for j in range(1, _SERIES_TERMS + 1):
        # gamma = C(c, j) / scale^j
        gamma *= (c - (j - 1)) / (j * scale)
        if gamma == 0.0:
            break
        xj = xj * x
        powsum = y * powsum + xj
        total += (-1.0) ** (j + 1) * gamma * powsum / (j + 1)
    return total


def exact_kernel(a, b, le, c):
    """``1 - int_0^1 (1 - a - b*u)^c du`` with ``le = 1 - a`` supplied directly.

    For ``b > 0`` the integral is ``[le^(c+1) - (le - b)^(c+1)] / ((c+1) b)``,
    evaluated as ``le^(c+1) * (1 - (1 - b/le)^(c+1)) / ((c+1) b)`` through
    ``expm1``/``log1p``; small errors switch to :func:`exact_series`.
    """
    if c < 0:
        raise ValueError(f"competitor count {c} < 0")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    le = np.asarray(le, dtype=float)
    if c == 0:
        return np.zeros(np.broadcast(a, b, le).shape)
    k = c + 1.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = np.clip(b / le, 0.0, 1.0)
        log_int = (k * np.log(le) + np.log(-np.expm1(k * np.log1p(-r)))
                   - np.log(k) - np.log(b))
        tied = -np.expm1(log_int)
        if c < 1.0:
            # one competitor or fewer: every term below is O(c), so nothing cancels
            lo = le - b
            e_hi = np.expm1(c * np.log(le))
            e_lo = np.where(lo > 0, np.expm1(c * np.log(np.where(lo > 0, lo, 1.0))), -1.0)
            tied = (c * b - le * e_hi + lo * e_lo) / (k * b)
        untied = -np.expm1(c * np.log(le))
        closed = np.where(b > 0, tied, untied)
        top = a + b
        small = (c * top <= SERIES_CUTOFF) & (top <= SERIES_CUTOFF)
    if np.any(small):
        scale = max(c, 1.0)
        closed = np.where(small, exact_series(scale * a, scale * top, c), closed)
    return np.clip(closed, 0.0, 1.0)


# --- public operations ---------------------------------------------------

def cdf_F(prior: Prior, channel: Channel, metric: Metric, R: float) -> float:
    """``F(R) = sum_{x,y} Q(x) W(y|x) Pr{p_{x,y} >= e^{-R}}``."""
    if R < 0:
        raise ValueError(f"rate {R} < 0")
    return PairTable.build(prior, channel, metric).cdf(R)


def clipped_union_P(prior: Prior, channel: Channel, metric: Metric, M: float) -> float:
    """Clipped union bound ``E[min(1, (M-1) p)]``; ``M`` may be real."""
    if M < 1:
        raise ValueError(f"codebook size {M} < 1")
    return PairTable.build(prior, channel, metric).clipped(M - 1.0)


def clipped_union_rate(prior: Prior, channel: Channel, metric: Metric, R: float) -> float:
    """Clipped union bound at rate ``R`` with ``M - 1 = e^R`` competitors."""
    return PairTable.build(prior, channel, metric).clipped(math.exp(R))


def exact_rc_error(prior: Prior, channel: Channel, metric: Metric, M: int) -> float:
    """Exact average error of an i.i.d. random code of ``M`` words, randomized decoder."""
    if isinstance(M, bool) or int(M) != M:
        raise ValueError(f"codebook size must be an integer, got {M!r}")
    if M < 1:
        raise ValueError(f"codebook size {M} < 1")
    return PairTable.build(prior, channel, metric).exact(float(M) - 1.0)


def exact_rc_error_rate(prior: Prior, channel: Channel, metric: Metric, R: float) -> float:
    """``E[1 - (1-p)^c]`` with real ``c = e^R`` (the rate-indexed companion)."""
    return PairTable.build(prior, channel, metric).exact(math.exp(R))


def f_pairwise(x: float, M: float) -> float:
    """``1 - (1 - x)^(M-1)``, the error given pairwise error ``x`` and ``M`` words."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"pairwise error {x!r} outside [0, 1]")
    if M < 1:
        raise ValueError(f"codebook size {M} < 1")
    if M == 1:
        return 0.0
    if x == 1.0:
        return 1.0
    # expm1/log1p keeps full relative precision when (M-1)*x is tiny.
    return -math.expm1((M - 1.0) * math.log1p(-x))


def error_exponent(P: float) -> float:
    """``-log P``; ``P == 0`` gives ``inf``."""
    if not 0.0 <= P <= 1.0:
        raise ValueError(f"probability {P!r} outside [0, 1]")
    if P == 0.0:
        return math.inf
    return -math.log(P)


def exponent_derivative(F_at_R: float, P_at_R: float) -> float:
    """Slope of ``-log P(R)``: ``F/P - 1``."""
    if P_at_R <= 0:
        raise ValueError("derivative undefined where P = 0")
    return F_at_R / P_at_R - 1.0


def kink_rates(prior: Prior, channel: Channel, metric: Metric) -> np.ndarray:
    """Rates ``z >= 0`` at which F is not differentiable."""
    t = PairTable.build(prior, channel, metric).kink_thresholds()
    return np.unique(-np.log(t[t > 0]))


def saturation_rate(prior: Prior, channel: Channel, metric: Metric) -> float:
    """Smallest rate past which F has no further corners."""
    return PairTable.build(prior, channel, metric).saturation_rate()


def _trapezoid(g: np.ndarray, z: np.ndarray) -> float:
    return float(np.sum(0.5 * (g[1:] + g[:-1]) * np.diff(z)))


def weighted_tail_integral(prior: Prior, channel: Channel, metric: Metric, R: float,
                           grid_step: float) -> float:
    """``e^R * int_R^inf F(z) e^{-z} dz`` by composite trapezoid plus exact tail.

    Below the smallest threshold ``t_min`` every pair with ``q_gt > 0`` is
    certainly in the event while pairs with ``q_gt == 0`` contribute
    ``1 - t/q_eq``; hence ``F(z) = W - S e^{-z}`` for ``z >= z_max = -log t_min``
    and the tail integrates analytically. Corners of F inside the range are
    inserted as extra nodes.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    tab = PairTable.build(prior, channel, metric)
    zero_gt = tab.q_gt == 0
    z_max = tab.saturation_rate()
    W = float(np.sum(tab.weight))
    S = float(np.sum(tab.weight[zero_gt] / tab.q_eq[zero_gt]))
    lo = max(R, z_max)
    tail = W * math.exp(R - lo) - 0.5 * S * math.exp(R - 2.0 * lo)
    if R >= z_max:
        return tail
    n = max(1, math.ceil((z_max - R) / grid_step))
    kinks = -np.log(tab.kink_thresholds())
    kinks = kinks[(kinks > R) & (kinks < z_max)]
    z = np.union1d(np.linspace(R, z_max, n + 1), kinks)
    g = tab.cdf(z) * np.exp(R - z)
    return _trapezoid(g, z) + tail


def quadrature_identity_residual(prior: Prior, channel: Channel, metric: Metric, R: float,
                                 grid_step: float) -> float:
    """``|weighted_tail_integral - clipped_union_rate|``; both sides use ``M - 1 = e^R``."""
    rhs = weighted_tail_integral(prior, channel, metric, R, grid_step)
    return abs(rhs - clipped_union_rate(prior, channel, metric, R))


# --- bound curves ------------------------------------------------------------

CSV_HEADER = ("R", "F", "P_clipped", "P_exact", "Er", "Er_prime")


@dataclass(frozen=True)
class BoundPoint:
    R: float
    F: float
    P_clipped: float
    P_exact: float
    Er: float
    Er_prime: float | None


@dataclass(frozen=True)
class BoundCurve:
    """Rate-ordered samples of F, both random-coding errors and the exponent."""

    points: tuple[BoundPoint, ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) if getattr(p, name) is not None else np.nan
                         for p in self.points], dtype=float)

    def violations(self, slack: float = 1e-12) -> list[str]:
        """Broken curve invariants, as human-readable strings (empty when sound)."""
        out = []
        for p in self.points:
            for name in ("F", "P_clipped", "P_exact"):
                v = getattr(p, name)
                if not -slack <= v <= 1 + slack:
                    out.append(f"R={p.R!r}: {name}={v!r} outside [0,1]")
            if p.P_exact > p.P_clipped + slack:
                out.append(f"R={p.R!r}: P_exact above P_clipped")
            if p.P_clipped > 2 * p.P_exact + slack:
                out.append(f"R={p.R!r}: P_clipped above 2*P_exact")
            if p.Er_prime is not None and not -1 - slack <= p.Er_prime <= slack:
                out.append(f"R={p.R!r}: exponent slope {p.Er_prime!r} outside [-1,0]")
        for prev, cur in zip(self.points, self.points[1:]):
            if cur.F < prev.F - slack:
                out.append(f"F decreases between R={prev.R!r} and R={cur.R!r}")
            if cur.P_clipped < prev.P_clipped - slack:
                out.append(f"P_clipped decreases between R={prev.R!r} and R={cur.R!r}")
        return out

    def to_records(self, bits: bool = False) -> list[dict]:
        scale = 1.0 / math.log(2.0) if bits else 1.0
        recs = []
        for p in self.points:
            er = p.Er * scale
            recs.append({
                "R": p.R * scale,
                "F": p.F,
                "P_clipped": p.P_clipped,
                "P_exact": p.P_exact,
                "Er": "inf" if math.isinf(er) else er,
                "Er_prime": p.Er_prime,
            })
        return recs

    def to_csv(self, bits: bool = False) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in self.to_records(bits):
            writer.writerow(["" if rec[k] is None else (rec[k] if isinstance(rec[k], str)
                                                        else repr(float(rec[k])))
                             for k in CSV_HEADER])
        return buf.getvalue()

    def to_json(self, bits: bool = False) -> str:
        return json.dumps(self.to_records(bits), indent=2) + "\n"


def point_from_values(R: float, F: float, Pc: float, Pe: float,
                      slope_defined: bool = True) -> BoundPoint:
    Er = error_exponent(min(Pc, 1.0))
    slope = exponent_derivative(F, Pc) if slope_defined and Pc > 0 else None
    return BoundPoint(float(R), F, Pc, Pe, Er, slope)


def _check_grid(rate_grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(list(rate_grid), dtype=float)
    if grid.size == 0:
        raise ValueError("empty rate grid")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("rate grid must be strictly increasing")
    if grid[0] < 0:
        raise ValueError("rates must be non-negative")
    return grid


def sweep(prior: Prior, channel: Channel, metric: Metric,
          rate_grid: Iterable[float]) -> BoundCurve:
    """Evaluate every bound at each rate, with ``M - 1 = e^R`` competitors."""
    grid = _check_grid(rate_grid)
    tab = PairTable.build(prior, channel, metric)
    pts = []
    for R in grid:
        c = math.exp(R)
        pts.append(point_from_values(R, tab.cdf(R), tab.clipped(c), tab.exact(c)))
    return BoundCurve(tuple(pts))


def sweep_sizes(prior: Prior, channel: Channel, metric: Metric,
                sizes: Iterable[int]) -> BoundCurve:
    """Evaluate at explicit integer codebook sizes (``M - 1`` competitors, ``R = log M``).

    The slope column is left empty: with ``M - 1 != e^R`` the clipped bound is
    not the function whose derivative is ``F/P - 1``.
    """
    Ms = [int(M) for M in sizes]
    if not Ms:
        raise ValueError("no codebook sizes given")
    if any(M < 1 for M in Ms) or any(b <= a for a, b in zip(Ms, Ms[1:])):
        raise ValueError("codebook sizes must be >= 1 and strictly increasing")
    tab = PairTable.build(prior, channel, metric)
    pts = []
    for M in Ms:
        R = math.log(M)
        pts.append(point_from_values(R, tab.cdf(R), tab.clipped(M - 1.0), tab.exact(M - 1.0),
                                     slope_defined=False))
    return BoundCurve(tuple(pts))
