"""Seeded property fleets that certify the identities and inequalities numerically.

Each ``check_*`` function draws its own instances from
``default_rng([seed, fleet_id])`` and returns a :class:`CheckResult`; the
``verify`` CLI command and the acceptance tests both run them.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bounds import (PairTable, clipped_union_rate, exact_rc_error, kink_rates,
                     weighted_tail_integral, saturation_rate, sweep)
from .channel import Channel, Metric, OutputDist, Prior, exceed_kernel, ml_metric, pairwise_tables
from .hypothesis_testing import (WitnessError, beta_vs_F, matched_witness,
                                 meta_converse_code_bound, witness_residuals)
from .product import (BECSpec, BSCSpec, bec_product_channel, bec_stats, bsc_product_channel,
                      bsc_stats, product_sweep, table_clipped, table_exact, table_F)
from .simulator import Codebook, converse_equality_check, evaluate_code_exact, random_coding_mc


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)
    # wall-clock time is reported but kept out of as_dict() so reports are reproducible
    seconds: float | None = None

    def line(self) -> str:
        tail = "" if self.seconds is None else f" [{self.seconds:.2f}s]"
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}{tail}"

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("seconds")
        return d


# --- random instances ------------------------------------------------------

def random_channel(rng: np.random.Generator, nx: int, ny: int, zero_frac: float = 0.0,
                   concentration: float = 1.0) -> Channel:
    w = rng.dirichlet(np.full(ny, concentration), size=nx)
    if zero_frac > 0 and ny > 1:
        mask = rng.random((nx, ny)) < zero_frac
        mask[np.arange(nx), rng.integers(ny, size=nx)] = False
        w = np.where(mask, 0.0, w)
        w = w / w.sum(axis=1, keepdims=True)
    return Channel(range(nx), range(ny), w)


def random_prior(rng: np.random.Generator, nx: int, full_support: bool = True) -> Prior:
    q = rng.dirichlet(np.full(nx, 2.0))
    # keep every mass away from zero so thresholds stay well separated
    q = 0.5 * q + 0.5 / nx
    if not full_support and nx > 1:
        q[rng.random(nx) < 0.3] = 0.0
        if q.sum() == 0:
            q[rng.integers(nx)] = 1.0
    return Prior(q / q.sum())


def random_metric(rng: np.random.Generator, nx: int, ny: int, levels: int = 3,
                  neg_inf_frac: float = 0.1) -> Metric:
    """Integer-valued scores so that ties are common."""
    m = rng.integers(0, levels, size=(nx, ny)).astype(float)
    m[rng.random((nx, ny)) < neg_inf_frac] = -np.inf
    return Metric(m)


def random_instance(rng: np.random.Generator, max_x: int = 6, max_y: int = 6,
                    matched: bool | None = None, full_support: bool = True):
    nx = int(rng.integers(2, max_x + 1))
    ny = int(rng.integers(2, max_y + 1))
    ch = random_channel(rng, nx, ny, zero_frac=float(rng.choice([0.0, 0.2])))
    prior = random_prior(rng, nx, full_support)
    if matched is None:
        matched = bool(rng.random() < 0.5)
    metric = ml_metric(ch) if matched else random_metric(rng, nx, ny)
    if not matched and not np.isfinite(metric.m[prior.support]).any(axis=0).all():
        metric = Metric(np.where(np.isfinite(metric.m), metric.m, 0.0))
    return prior, ch, metric


def _rng(seed: int, fleet: int) -> np.random.Generator:
    return np.random.default_rng([seed, fleet])


# --- fleets ----------------------------------------------------------------

def check_converse_equality(seed: int = 0, instances: int = 100, tol: float = 1e-12,
                            time_limit: float = 5.0) -> CheckResult:
    rng = _rng(seed, 1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(instances):
        nx = int(rng.integers(1, 9))
        ny = int(rng.integers(1, 9))
        M = int(rng.integers(1, 17))
        ch = random_channel(rng, nx, ny, zero_frac=0.2)
        metric = ml_metric(ch) if rng.random() < 0.3 else random_metric(rng, nx, ny)
        code = Codebook(tuple(rng.integers(0, nx, size=M)))
        worst = max(worst, converse_equality_check(code, ch, metric)[2])
    elapsed = time.perf_counter() - t0
    ok = worst <= tol and elapsed < time_limit
    return CheckResult("converse_equality", ok,
                       f"max |eps - F(log M)| = {worst:.3e} over {instances} codes "
                       f"(time limit {time_limit:g}s)", {"max_gap": worst}, elapsed)


def check_sandwich(seed: int = 0, channels: int = 20, grid_points: int = 50,
                   slack: float = 1e-14) -> CheckResult:
    rng = _rng(seed, 2)
    grid = np.linspace(0.0, 4.0, grid_points)
    violations = 0
    min_ratio = math.inf
    for _ in range(channels):
        prior, ch, metric = random_instance(rng, full_support=bool(rng.random() < 0.7))
        tab = PairTable.build(prior, ch, metric)
        for R in grid:
            c = math.exp(R)
            pc, pe = tab.clipped(c), tab.exact(c)
            if not (0.5 * pc <= pe + slack and pe <= pc + slack):
                violations += 1
            if pc > 0:
                min_ratio = min(min_ratio, pe / pc)
    return CheckResult("sandwich", violations == 0,
                       f"{violations} violations; min P_exact/P_clipped = {min_ratio:.4f}",
                       {"violations": violations, "min_ratio": min_ratio})


def check_quadrature(seed: int = 0, channels: int = 10, step: float = 1e-4,
                     tol: float = 1e-6) -> CheckResult:
    rng = _rng(seed, 3)
    worst = 0.0
    not_shrinking = 0
    ratios = []
    redrawn = 0
    for _ in range(channels):
        prior, ch, metric = random_instance(rng, max_x=5, max_y=5)
        z_max = saturation_rate(prior, ch, metric)
        while z_max <= 0.0:
            # F is already saturated at R = 0: the tail term is the whole integral
            redrawn += 1
            prior, ch, metric = random_instance(rng, max_x=5, max_y=5)
            z_max = saturation_rate(prior, ch, metric)
        R = float(rng.uniform(0.05, 0.9)) * z_max
        exact = clipped_union_rate(prior, ch, metric, R)
        fine = abs(weighted_tail_integral(prior, ch, metric, R, step) - exact)
        coarse = abs(weighted_tail_integral(prior, ch, metric, R, 2 * step) - exact)
        worst = max(worst, fine)
        if not fine < coarse:
            not_shrinking += 1
        if fine > 0:
            ratios.append(coarse / fine)
    ok = worst <= tol and not_shrinking == 0
    med = float(np.median(ratios)) if ratios else math.nan
    return CheckResult("quadrature_identity", ok,
                       f"max residual {worst:.3e} at step {step:g}; {not_shrinking} non-shrinking; "
                       f"median halving ratio {med:.2f}; {redrawn} redrawn",
                       {"max_residual": worst, "not_shrinking": not_shrinking,
                        "median_ratio": med, "redrawn": redrawn})


def check_derivatives(seed: int = 0, channels: int = 10, fd_step: float = 1e-4,
                      tol: float = 1e-4, grid_points: int = 40) -> CheckResult:
    rng = _rng(seed, 4)
    worst_p = worst_e = 0.0
    used = 0
    for _ in range(channels):
        prior, ch, metric = random_instance(rng, max_x=5, max_y=5)
        tab = PairTable.build(prior, ch, metric)
        kinks = kink_rates(prior, ch, metric)
        hi = min(max(tab.saturation_rate() + 1.0, 1.0), 4.0)
        for R in np.linspace(0.05, hi, grid_points):
            if kinks.size and np.min(np.abs(kinks - R)) < 2 * fd_step:
                continue
            P = tab.clipped(math.exp(R))
            Pp = tab.clipped(math.exp(R + fd_step))
            Pm = tab.clipped(math.exp(R - fd_step))
            F = tab.cdf(R)
            worst_p = max(worst_p, abs((Pp - Pm) / (2 * fd_step) - (P - F)))
            de = (-math.log(Pp) + math.log(Pm)) / (2 * fd_step)
            worst_e = max(worst_e, abs(de - (F / P - 1.0)))
            used += 1
    ok = worst_p <= tol and worst_e <= tol and used > 0
    return CheckResult("derivative_identities", ok,
                       f"max |dP/dR - (P-F)| = {worst_p:.2e}, max |dEr/dR - (F/P-1)| = "
                       f"{worst_e:.2e} at {used} points",
                       {"max_dP": worst_p, "max_dEr": worst_e, "points": used})


def check_witness(seed: int = 0, channels: int = 25, random_qy: int = 50,
                  eq_tol: float = 1e-9, le_tol: float = 1e-12) -> CheckResult:
    rng = _rng(seed, 5)
    worst_eq = 0.0
    worst_le = -math.inf
    worst_thr = 0.0
    degenerate = 0
    for _ in range(channels):
        nx = int(rng.integers(2, 7))
        ny = int(rng.integers(2, 7))
        ch = random_channel(rng, nx, ny, zero_frac=float(rng.choice([0.0, 0.15])))
        prior = random_prior(rng, nx)
        metric = ml_metric(ch)
        R = float(rng.uniform(0.02, 2.5))
        try:
            wit = matched_witness(prior, ch, R)
        except WitnessError:
            # all threshold symbols have zero likelihood; draw a zero-free channel instead
            degenerate += 1
            ch = random_channel(rng, nx, ny)
            metric = ml_metric(ch)
            wit = matched_witness(prior, ch, R)
        worst_thr = max(worst_thr, float(np.max(witness_residuals(prior, ch, wit))))
        beta, F = beta_vs_F(prior, ch, metric, wit.q_y, R)
        worst_eq = max(worst_eq, abs(beta - F))
        for _ in range(random_qy):
            qy = OutputDist(rng.dirichlet(np.ones(ny)))
            b, _ = beta_vs_F(prior, ch, metric, qy, R)
            worst_le = max(worst_le, b - F)
    ok = worst_eq <= eq_tol and worst_le <= le_tol and worst_thr <= 1e-12
    return CheckResult("witness_equality", ok,
                       f"max |beta* - F| = {worst_eq:.2e}; max beta(Q_y) - F = {worst_le:.2e}; "
                       f"max threshold residual {worst_thr:.1e}; {degenerate} redrawn",
                       {"max_eq_gap": worst_eq, "max_excess": worst_le,
                        "max_threshold_residual": worst_thr, "redrawn": degenerate})


def check_uniformity(seed: int = 0, configs: int = 20, tol: float = 1e-12) -> CheckResult:
    rng = _rng(seed, 6)
    us = np.round(np.arange(0.05, 0.951, 0.05), 10)
    worst = 0.0
    for _ in range(configs):
        prior, ch, metric = random_instance(rng, full_support=bool(rng.random() < 0.7))
        q_gt, q_eq, _ = pairwise_tables(prior, metric)
        sup = prior.support
        for y in range(ch.n_outputs):
            for u in us:
                below = 1.0 - exceed_kernel(q_gt[sup, y], q_eq[sup, y], u)
                worst = max(worst, abs(float(np.sum(prior.q[sup] * below)) - u))
    return CheckResult("uniformity", worst <= tol,
                       f"max |Pr{{p < u}} - u| = {worst:.2e}", {"max_dev": worst})


def check_product(bsc_max_n: int = 6, bec_max_n: int = 4, grid_points: int = 25,
                  tol: float = 1e-10, big_n: int = 500, time_limit: float = 10.0) -> CheckResult:
    worst = 0.0
    cases = [(BSCSpec(n, 0.11), bsc_stats, bsc_product_channel) for n in range(1, bsc_max_n + 1)]
    cases += [(BECSpec(n, 0.3), bec_stats, bec_product_channel) for n in range(1, bec_max_n + 1)]
    for spec, stats, build in cases:
        table = stats(spec)
        ch = build(spec)
        prior = Prior.uniform(ch.n_inputs)
        tab = PairTable.build(prior, ch, ml_metric(ch))
        for R in np.linspace(0.0, spec.n * math.log(2) + 1.0, grid_points):
            c = math.exp(R)
            worst = max(worst,
                        abs(table_F(table, R) - tab.cdf(R)),
                        abs(table_clipped(table, R) - tab.clipped(c)),
                        abs(table_exact(table, R) - tab.exact(c)))
        for M in (2, 3, 5):
            worst = max(worst, abs(table_exact(table, math.log(M - 1)) - tab.exact(M - 1.0)))
    t0 = time.perf_counter()
    big = bsc_stats(BSCSpec(big_n, 0.11))
    vals = [(table_F(big, R), table_clipped(big, R), table_exact(big, R))
            for R in np.linspace(0.0, big_n * math.log(2), 50)]
    elapsed = time.perf_counter() - t0
    finite = bool(np.all(np.isfinite(vals)))
    norm = big.normalization_error()
    ok = worst <= tol and finite and norm <= 1e-8 and elapsed < time_limit
    return CheckResult("product_fidelity", ok,
                       f"max statistic-vs-enumeration gap {worst:.2e}; n={big_n}: finite={finite}, "
                       f"normalization error {norm:.1e} (time limit {time_limit:g}s)",
                       {"max_gap": worst, "normalization_error": norm}, elapsed)


def check_monte_carlo(seed: int = 0, configs: int = 20, trials: int = 200_000,
                      sigmas: float = 4.0, required: int = 19) -> CheckResult:
    rng = _rng(seed, 8)
    inside = 0
    worst_z = 0.0
    for i in range(configs):
        prior, ch, metric = random_instance(rng, max_x=5, max_y=5)
        M = int(rng.integers(1, 9))
        exact = exact_rc_error(prior, ch, metric, M)
        est = random_coding_mc(prior, ch, metric, M, trials, seed * 1000 + i)
        band = sigmas * est.stderr
        if abs(est.mean - exact) <= band or (est.stderr == 0 and est.mean == exact):
            inside += 1
        if est.stderr > 0:
            worst_z = max(worst_z, abs(est.mean - exact) / est.stderr)
    hi = min(required, configs)
    return CheckResult("monte_carlo", inside >= hi,
                       f"{inside}/{configs} inside the {sigmas:g}-sigma band "
                       f"({trials} trials each); max |z| = {worst_z:.2f}",
                       {"inside": inside, "configs": configs, "max_z": worst_z})


def check_meta_converse(seed: int = 0, pairs: int = 50, tol: float = 1e-12) -> CheckResult:
    rng = _rng(seed, 9)
    worst = -math.inf
    for k in range(pairs):
        nx = int(rng.integers(2, 7))
        ny = int(rng.integers(2, 7))
        ch = random_channel(rng, nx, ny, zero_frac=0.2)
        metric = ml_metric(ch) if k % 2 == 0 else random_metric(rng, nx, ny)
        code = Codebook(tuple(rng.integers(0, nx, size=int(rng.integers(1, 9)))))
        qy = OutputDist.uniform(ny) if k % 5 == 0 else OutputDist(rng.dirichlet(np.ones(ny)))
        bound = meta_converse_code_bound(code, ch, qy)
        worst = max(worst, bound - evaluate_code_exact(code, ch, metric))
    return CheckResult("meta_converse", worst <= tol,
                       f"max bound - epsilon = {worst:.2e} over {pairs} (code, Q_y) pairs",
                       {"max_excess": worst})


def check_slope(seed: int = 0, channels: int = 20, grid_points: int = 50) -> CheckResult:
    rng = _rng(seed, 10)
    lo, hi = math.inf, -math.inf
    points = 0
    curves = []
    for _ in range(channels):
        prior, ch, metric = random_instance(rng, full_support=bool(rng.random() < 0.7))
        curves.append(sweep(prior, ch, metric, np.linspace(0.0, 4.0, grid_points)))
    for n in (1, 5, 20, 100):
        curves.append(product_sweep(BSCSpec(n, 0.11), np.linspace(0.0, n * math.log(2) + 1,
                                                                  grid_points)))
        curves.append(product_sweep(BECSpec(n, 0.3), np.linspace(0.0, n * math.log(2) + 1,
                                                                 grid_points)))
    for curve in curves:
        for p in curve.points:
            if p.Er_prime is None:
                continue
            lo = min(lo, p.Er_prime)
            hi = max(hi, p.Er_prime)
            points += 1
    ok = points > 0 and lo >= -1.0 and hi <= 0.0
    return CheckResult("slope_bound", ok,
                       f"F/P - 1 in [{lo:.6f}, {hi:.3e}] over {points} points",
                       {"min_slope": lo, "max_slope": hi, "points": points})


def check_user_channel(problem, grid_points: int = 40) -> CheckResult:
    """Sandwich, slope and quadrature checks on one user-supplied channel."""
    prior, ch, metric = problem.prior, problem.channel, problem.metric
    curve = sweep(prior, ch, metric, np.linspace(0.0, 4.0, grid_points))
    issues = curve.violations(slack=1e-14)
    z_max = saturation_rate(prior, ch, metric)
    R = 0.5 * z_max
    resid = abs(weighted_tail_integral(prior, ch, metric, R, 1e-4)
                - clipped_union_rate(prior, ch, metric, R))
    if resid > 1e-6:
        issues.append(f"quadrature residual {resid:.2e}")
    detail = "ok" if not issues else "; ".join(issues[:3])
    return CheckResult("user_channel", not issues, detail, {"quadrature_residual": resid})


FLEETS = {
    "converse_equality": check_converse_equality,
    "sandwich": check_sandwich,
    "quadrature_identity": check_quadrature,
    "derivative_identities": check_derivatives,
    "witness_equality": check_witness,
    "uniformity": check_uniformity,
    "product_fidelity": lambda seed=0, **kw: check_product(**kw),
    "monte_carlo": check_monte_carlo,
    "meta_converse": check_meta_converse,
    "slope_bound": check_slope,
}


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("FBL_THREADS", "1")))
    except ValueError:
        return 1


def run_all(seed: int = 0, trials: int = 200_000, problem=None) -> list[CheckResult]:
    """Run every fleet (in registry order) and, optionally, the user-channel check."""
    def timed(name, fn):
        kwargs = {"trials": trials} if name == "monte_carlo" else {}
        t0 = time.perf_counter()
        res = fn(seed=seed, **kwargs)
        if res.seconds is None:
            res.seconds = time.perf_counter() - t0
        return res

    workers = max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(timed, name, fn) for name, fn in FLEETS.items()]
            results = [f.result() for f in futures]
    else:
        results = [timed(name, fn) for name, fn in FLEETS.items()]
    if problem is not None:
        results.append(check_user_channel(problem))
    return results
