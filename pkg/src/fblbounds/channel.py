"""Channels, priors, decoding metrics and pairwise-error statistics.

Every bound in this package is assembled from two prior masses attached to
an (input, output) pair::

    q_gt(x, y) = Q{ m(X, y) >  m(x, y) }
    q_eq(x, y) = Q{ m(X, y) == m(x, y) }

The dithered pairwise error is ``p = q_gt + U * q_eq`` with ``U ~ Unif[0, 1]``.
The dither is never sampled here; every consumer integrates it in closed form.

Metric ties are detected by exact equality of the stored floating point
values. Metrics built arithmetically (sums of per-letter logs, etc.) must be
canonicalized by the caller so that equal scores are bit-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

ROW_SUM_TOL = 1e-12


class ChannelError(ValueError):
    """Raised when a channel, prior, metric or input file is invalid."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_probability_vector(q: np.ndarray, what: str) -> None:
    if q.ndim != 1 or q.size == 0:
        raise ChannelError(f"{what} must be a non-empty vector")
    if np.isnan(q).any():
        raise ChannelError(f"{what} contains NaN")
    bad = np.flatnonzero(q < 0)
    if bad.size:
        raise ChannelError(f"{what} entry {bad[0]} is negative ({q[bad[0]]:.12g})")
    s = float(q.sum())
    if abs(s - 1.0) > ROW_SUM_TOL:
        raise ChannelError(f"{what} sums to {s:.12g}, not 1")


@dataclass(frozen=True)
class Channel:
    """Finite channel ``W(y|x)``; ``w[x, y]`` is row-stochastic."""

    input_alphabet: tuple
    output_alphabet: tuple
    w: np.ndarray

    def __post_init__(self):
        w = _frozen(self.w)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "input_alphabet", tuple(self.input_alphabet))
        object.__setattr__(self, "output_alphabet", tuple(self.output_alphabet))
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ChannelError(f"channel matrix must be 2-D and non-empty, got shape {w.shape}")
        if len(self.input_alphabet) != w.shape[0]:
            raise ChannelError(
                f"{len(self.input_alphabet)} input labels for {w.shape[0]} rows")
        if len(self.output_alphabet) != w.shape[1]:
            raise ChannelError(
                f"{len(self.output_alphabet)} output labels for {w.shape[1]} columns")
        if np.isnan(w).any():
            r, c = np.argwhere(np.isnan(w))[0]
            raise ChannelError(f"row {r}, column {c}: NaN entry")
        neg = np.argwhere(w < 0)
        if neg.size:
            r, c = neg[0]
            raise ChannelError(f"row {r}, column {c}: negative entry {w[r, c]:.12g}")
        big = np.argwhere(w > 1)
        if big.size:
            r, c = big[0]
            raise ChannelError(f"row {r}, column {c}: entry {w[r, c]:.12g} exceeds 1")
        sums = w.sum(axis=1)
        for r, s in enumerate(sums):
            if abs(s - 1.0) > ROW_SUM_TOL:
                raise ChannelError(f"row {r}: row sum {s:.12g} is not 1")

    @property
    def n_inputs(self) -> int:
        return self.w.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.w.shape[1]

    def input_index(self, label) -> int:
        try:
            return self.input_alphabet.index(label)
        except ValueError:
            raise ChannelError(f"unknown input symbol {label!r}") from None

    def output_index(self, label) -> int:
        try:
            return self.output_alphabet.index(label)
        except ValueError:
            raise ChannelError(f"unknown output symbol {label!r}") from None


@dataclass(frozen=True)
class Prior:
    """Input distribution ``Q(x)``."""

    q: np.ndarray

    def __post_init__(self):
        q = _frozen(self.q)
        object.__setattr__(self, "q", q)
        _check_probability_vector(q, "prior")

    @classmethod
    def uniform(cls, n: int) -> "Prior":
        return cls(np.full(n, 1.0 / n))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.q > 0)


@dataclass(frozen=True)
class OutputDist:
    """Auxiliary output distribution ``Q(y)``."""

    q: np.ndarray

    def __post_init__(self):
        q = _frozen(self.q)
        object.__setattr__(self, "q", q)
        _check_probability_vector(q, "output distribution")

    @classmethod
    def uniform(cls, n: int) -> "OutputDist":
        return cls(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class Metric:
    """Decoding score ``m[x, y]``; ``-inf`` ranks below every finite value."""

    m: np.ndarray

    def __post_init__(self):
        m = _frozen(self.m)
        object.__setattr__(self, "m", m)
        if m.ndim != 2:
            raise ChannelError(f"metric must be 2-D, got shape {m.shape}")
        if np.isnan(m).any():
            r, c = np.argwhere(np.isnan(m))[0]
            raise ChannelError(f"metric row {r}, column {c}: NaN entry")
        if np.isposinf(m).any():
            r, c = np.argwhere(np.isposinf(m))[0]
            raise ChannelError(f"metric row {r}, column {c}: +inf entry")

    def check_against(self, prior: Prior) -> None:
        """Require a finite score in every column over the prior's support."""
        sub = self.m[prior.support]
        dead = np.flatnonzero(~np.isfinite(sub).any(axis=0))
        if dead.size:
            raise ChannelError(
                f"metric column {dead[0]} has no finite entry over the prior's support")


@dataclass(frozen=True)
class PairwiseStats:
    """Competitor masses for one (x, y): strictly better and tied."""

    q_gt: float
    q_eq: float


def load_channel(rows, inputs: Sequence | None = None,
                 outputs: Sequence | None = None) -> Channel:
    """Validate a row-stochastic matrix and wrap it as a :class:`Channel`.

    Labels default to ``0..n-1``. Raises :class:`ChannelError` naming the
    offending row (and its sum) or entry.
    """
    try:
        w = np.array(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ChannelError(f"channel matrix is not rectangular/numeric: {exc}") from None
    if w.ndim != 2:
        raise ChannelError(f"channel matrix must be rectangular, got shape {w.shape}")
    if inputs is None:
        inputs = range(w.shape[0])
    if outputs is None:
        outputs = range(w.shape[1])
    return Channel(tuple(inputs), tuple(outputs), w)


def ml_metric(ch: Channel) -> Metric:
    """Matched metric ``log W(y|x)``; zero transitions become ``-inf``."""
    with np.errstate(divide="ignore"):
        return Metric(np.log(ch.w))


def _check_shapes(prior: Prior, metric: Metric, ch: Channel | None = None) -> None:
    if metric.m.shape[0] != prior.q.size:
        raise ChannelError(
            f"metric has {metric.m.shape[0]} rows but prior has {prior.q.size} entries")
    if ch is not None:
        if ch.w.shape != metric.m.shape:
            raise ChannelError(f"metric shape {metric.m.shape} != channel shape {ch.w.shape}")


def pairwise_tables(prior: Prior, metric: Metric) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All competitor masses at once.

    Returns ``(q_gt, q_eq, q_le)`` arrays shaped like the metric, where
    ``q_le = Q{m(X,y) <= m(x,y)}`` is summed directly (not as a complement)
    so that ``1 - q_gt`` stays accurate when it is small. Rows outside the
    prior's support are filled too; their weight is zero wherever they are used.
    """
    _check_shapes(prior, metric)
    m = metric.m
    qc = prior.q[:, None]
    q_gt = np.empty(m.shape)
    q_eq = np.empty(m.shape)
    q_le = np.empty(m.shape)
    for y in range(m.shape[1]):
        col = m[:, y]
        # [x', x] comparison; competitor axis first so sums run in a fixed order.
        gt = col[:, None] > col[None, :]
        eq = col[:, None] == col[None, :]
        q_gt[:, y] = np.where(gt, qc, 0.0).sum(axis=0)
        q_eq[:, y] = np.where(eq, qc, 0.0).sum(axis=0)
        q_le[:, y] = np.where(gt, 0.0, qc).sum(axis=0)
    return q_gt, q_eq, q_le


def pairwise_stats(prior: Prior, metric: Metric, x: int, y: int) -> PairwiseStats:
    """Competitor masses for transmitted ``x`` (index) and received ``y`` (index)."""
    _check_shapes(prior, metric)
    if not 0 <= x < prior.q.size or prior.q[x] <= 0:
        raise ChannelError(f"input {x} is outside the prior's support")
    if not 0 <= y < metric.m.shape[1]:
        raise ChannelError(f"output index {y} out of range")
    col = metric.m[:, y]
    v = col[x]
    q_gt = float(prior.q[col > v].sum())
    q_eq = float(prior.q[col == v].sum())
    return PairwiseStats(q_gt, q_eq)


def exceed_kernel(q_gt, q_eq, t):
    """Vectorized ``Pr{q_gt + U*q_eq >= t}``; ``q_eq == 0`` falls back to the indicator."""
    q_gt = np.asarray(q_gt, dtype=float)
    q_eq = np.asarray(q_eq, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ramp = np.clip((q_gt + q_eq - t) / q_eq, 0.0, 1.0)
    return np.where(q_eq > 0, ramp, (q_gt >= t).astype(float))


def exceed_prob(stats: PairwiseStats, t: float) -> float:
    """Probability that the dithered pairwise error reaches ``t``."""
    if not 0.0 <= t <= 1.0:
        raise ChannelError(f"threshold {t!r} outside [0, 1]")
    return float(exceed_kernel(stats.q_gt, stats.q_eq, t))


# --- channel file format -------------------------------------------------

@dataclass(frozen=True)
class ChannelProblem:
    """Contents of a channel file: channel, prior and metric."""

    channel: Channel
    prior: Prior
    metric: Metric
    matched: bool


def _parse_metric_entry(v, r, c):
    if isinstance(v, str):
        if v.strip().lower() in ("-inf", "-infinity"):
            return -math.inf
        raise ChannelError(f"metric row {r}, column {c}: unsupported string {v!r}")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ChannelError(f"metric row {r}, column {c}: non-numeric entry {v!r}")
    return float(v)


def parse_channel_document(doc: dict, prior_override=None) -> ChannelProblem:
    """Build a :class:`ChannelProblem` from a decoded channel JSON object."""
    if not isinstance(doc, dict):
        raise ChannelError("channel file must contain a JSON object")
    for key in ("W",):
        if key not in doc:
            raise ChannelError(f"channel file is missing required key {key!r}")
    rows = doc["W"]
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise ChannelError("'W' must be a non-empty list of rows")
    width = len(rows[0])
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ChannelError(f"row {r}: has {len(row)} entries, expected {width}")
    inputs = doc.get("inputs", list(range(len(rows))))
    outputs = doc.get("outputs", list(range(width)))
    ch = load_channel(rows, inputs, outputs)

    raw_prior = prior_override if prior_override is not None else doc.get("prior")
    prior = Prior.uniform(ch.n_inputs) if raw_prior is None else Prior(raw_prior)
    if prior.q.size != ch.n_inputs:
        raise ChannelError(f"prior has {prior.q.size} entries for {ch.n_inputs} inputs")

    if doc.get("metric") is None:
        return ChannelProblem(ch, prior, ml_metric(ch), True)
    raw = doc["metric"]
    if not isinstance(raw, list) or len(raw) != ch.n_inputs:
        raise ChannelError(f"metric must have {ch.n_inputs} rows")
    vals = []
    for r, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != ch.n_outputs:
            raise ChannelError(f"metric row {r}: expected {ch.n_outputs} entries")
        vals.append([_parse_metric_entry(v, r, c) for c, v in enumerate(row)])
    metric = Metric(np.array(vals))
    metric.check_against(prior)
    matched = bool(np.array_equal(metric.m, ml_metric(ch).m))
    return ChannelProblem(ch, prior, metric, matched)


def _read_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ChannelError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChannelError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_prior_file(path) -> list:
    """A prior file is either a bare JSON list or ``{"prior": [...]}``."""
    doc = _read_json(path)
    if isinstance(doc, dict):
        doc = doc.get("prior")
    if not isinstance(doc, list):
        raise ChannelError(f"{path}: expected a list of prior probabilities")
    return doc


def load_channel_file(path, prior_path=None) -> ChannelProblem:
    """Read a channel JSON file (optionally overriding its prior)."""
    doc = _read_json(path)
    override = load_prior_file(prior_path) if prior_path is not None else None
    try:
        return parse_channel_document(doc, override)
    except ChannelError as exc:
        raise ChannelError(f"{path}: {exc}") from None


def channel_document(problem: ChannelProblem) -> dict:
    """Inverse of :func:`parse_channel_document`."""
    ch = problem.channel
    doc = {
        "inputs": list(ch.input_alphabet),
        "outputs": list(ch.output_alphabet),
        "W": ch.w.tolist(),
        "prior": problem.prior.q.tolist(),
    }
    if not problem.matched:
        doc["metric"] = [["-inf" if np.isneginf(v) else float(v) for v in row]
                         for row in problem.metric.m]
    return doc
