"""Acceptance checks, runnable from pytest and from ``commsim check``.

Each ``criterion_*`` function runs one exit criterion at its fixed
tolerance and returns a :class:`CheckResult`; nothing here raises on a
failed check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import (
    complexity_profile,
    geometric,
    geometric_half_norm,
    norm_q,
    point_mass,
    random_distribution,
    sample,
    sparse_random,
    uniform,
    zipf,
)
from .evaluation import FIG1_LEFT, FIG1_RIGHT, bound_thm1, bound_thm2, monte_carlo, run_sweep
from .protocol import SchemeConfig, plan_from_round1, run_scheme, verify_transcript
from .round1 import build_round1_plan, r1_encode_batch, r1_estimate
from . import round2
from .round2 import PiWeights, check_group_plan, gen_groups, r2_encode_batch, r2_estimate


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


class _ContractTally:
    """Violations seen by every checked run in this process."""

    def __init__(self):
        self.runs = 0
        self.violations = 0

    def add(self, runs, violations):
        self.runs += runs
        self.violations += violations


CONTRACTS = _ContractTally()

GEOMETRIC_BETAS = (0.2, 0.5, 0.8, 0.99)
GEOMETRIC_DS = (10, 100, 1000)
ENVELOPE_N = 10**6
ENVELOPE_D = 100
ENVELOPE_TRIALS = 50
ENVELOPE_SEED = 4242


def family_distributions():
    """Named members of every family used across the checks."""
    rng = np.random.default_rng(7)
    dists = {"point(50)": point_mass(50)}
    for d in (2, 10, 100, 1000):
        dists[f"uniform({d})"] = uniform(d)
    for beta in GEOMETRIC_BETAS:
        for d in GEOMETRIC_DS:
            dists[f"geometric({beta},{d})"] = geometric(beta, d)
    for lam in (0.5, 1.0, 1.5, 2.0, 3.0):
        for d in (10, 100, 1000):
            dists[f"zipf({lam},{d})"] = zipf(lam, d)
    for s in (1, 5, 50):
        dists[f"sparse({s},100)"] = sparse_random(s, 100, rng)
    return dists


def envelope_distributions(d=ENVELOPE_D):
    return {
        "uniform": uniform(d),
        "geometric(0.8)": geometric(0.8, d),
        "zipf(2)": zipf(2.0, d),
        "sparse(5)": sparse_random(5, d, np.random.default_rng(ENVELOPE_SEED)),
    }


def criterion_1() -> CheckResult:
    """Half-norm of uniform laws and the geometric closed form, to 1e-9."""
    worst = 0.0
    failures = []
    for d in (2, 10, 1000):
        err = abs(norm_q(uniform(d), 0.5) - d)
        worst = max(worst, err)
        if err > 1e-9:
            failures.append(f"uniform({d}) off by {err:.3g}")
    for beta in GEOMETRIC_BETAS:
        for d in GEOMETRIC_DS:
            err = abs(norm_q(geometric(beta, d), 0.5) - geometric_half_norm(beta, d))
            worst = max(worst, err)
            if err > 1e-9:
                failures.append(f"geometric({beta},{d}) off by {err:.3g}")
    detail = f"max abs error {worst:.3g} (tolerance 1e-9)"
    if failures:
        detail += "; " + ", ".join(failures)
    return CheckResult("1 norm identities", not failures, detail, {"max_error": worst})


def criterion_2(n_random: int = 1000, seed: int = 2) -> CheckResult:
    """``||p||_{1/2} >= max_h h^2 p_(h) >= C_delta ||p||_{(1+delta)/2}``, exactly."""
    rng = np.random.default_rng(seed)
    dists = list(family_distributions().items())
    for k in range(n_random):
        d = int(rng.integers(2, 201))
        dists.append((f"random#{k}(d={d})", random_distribution(d, rng)))
    failures = []
    min_upper_gap = math.inf
    min_lower_ratio = math.inf
    for name, p in dists:
        prof = complexity_profile(p)
        if not prof.q_norm_half >= prof.h_star_value:
            failures.append(f"{name}: upper side {prof.q_norm_half!r} < {prof.h_star_value!r}")
        min_upper_gap = min(min_upper_gap, prof.q_norm_half - prof.h_star_value)
        for delta in (0.5, 1.0):
            c_delta = (delta / (1 + delta)) ** (2 / (1 + delta))
            lower = c_delta * norm_q(p, (1 + delta) / 2)
            if not prof.h_star_value >= lower:
                failures.append(f"{name}: lower side fails at delta={delta}")
            min_lower_ratio = min(min_lower_ratio, prof.h_star_value / lower)
    detail = (
        f"{len(dists)} distributions, smallest upper gap {min_upper_gap:.3g}, "
        f"smallest h*-value / lower bound {min_lower_ratio:.4f}"
    )
    if failures:
        detail += "; " + "; ".join(failures[:5])
    return CheckResult("2 h*-functional sandwich", not failures, detail)


def _mean_var_check(estimates, truth, oracle_var):
    """Indices failing the 3-stderr mean test or the 10% variance test."""
    trials = estimates.shape[0]
    mean = estimates.mean(axis=0)
    var = estimates.var(axis=0, ddof=1)
    stderr = np.sqrt(var / trials)
    mean_bad = np.flatnonzero(np.abs(mean - truth) > 3 * stderr)
    var_bad = np.flatnonzero(np.abs(var - oracle_var) > 0.1 * oracle_var)
    z = np.abs(mean - truth) / np.where(stderr > 0, stderr, np.inf)
    rel = np.abs(var - oracle_var) / oracle_var
    return mean_bad, var_bad, float(z.max()), float(rel.max())


def criterion_3(trials: int = 10_000, seed: int = 3) -> CheckResult:
    """Round-one and plan-conditional round-two estimates: unbiased, binomial variance."""
    d, b, n = 8, 2, 1024
    p = geometric(0.7, d)
    cfg = SchemeConfig(n=n, d=d, b=b, seed=seed)
    rng = np.random.default_rng(seed)

    r1_plan = build_round1_plan(cfg.round1_clients, d, b)
    r1 = np.empty((trials, d))
    for t in range(trials):
        r1[t] = r1_estimate(r1_encode_batch(sample(p, r1_plan.n_clients, rng), r1_plan), r1_plan).p_hat
    counts = r1_plan.group_sizes()[r1_plan.symbol_group() - 1]
    m1, v1, z1, rel1 = _mean_var_check(r1, p.probs, p.probs * (1 - p.probs) / counts)

    first = r1_encode_batch(sample(p, r1_plan.n_clients, rng), r1_plan)
    _, plan = plan_from_round1(first, cfg)
    r2 = np.empty((trials, d))
    for t in range(trials):
        r2[t] = r2_estimate(r2_encode_batch(sample(p, cfg.round2_clients, rng), plan), plan)
    m2, v2, z2, rel2 = _mean_var_check(r2, p.probs, p.probs * (1 - p.probs) / plan.sizes)

    passed = not (m1.size or v1.size or m2.size or v2.size)
    detail = (
        f"round 1: max |bias|/stderr {z1:.2f}, max variance rel. error {rel1:.3f}; "
        f"round 2: max |bias|/stderr {z2:.2f}, max variance rel. error {rel2:.3f} "
        f"(limits 3 and 0.10, {trials} trials)"
    )
    return CheckResult("3 unbiasedness and variance", passed, detail)


def criterion_4(seed: int = 4, n_plans: int = 1000) -> CheckResult:
    """Bit budget, group-plan contract and bit conservation; zero violations."""
    rng = np.random.default_rng(seed)
    problems = []
    for k in range(n_plans):
        b = int(rng.integers(1, 5))
        cap = 2**b - 1
        n_clients = int(rng.integers(1, 60))
        d = int(rng.integers(1, 40))
        sizes = rng.integers(0, n_clients + 1, size=d)
        while sizes.sum() > n_clients * cap:
            sizes = sizes // 2
        for method in ("wraparound", "greedy"):
            plan = gen_groups(sizes, np.arange(1, n_clients + 1), b, method=method)
            problems.extend(f"plan #{k} ({method}): {v}" for v in check_group_plan(plan))

    runs = 0
    cases = [
        (uniform(16), 1), (geometric(0.8, 50), 2), (zipf(1.5, 30), 3),
        (point_mass(9, 4), 2), (sparse_random(3, 40, rng), 4), (geometric(0.5, 7), 5),
    ]
    for p, b in cases:
        for n in (4 * -(-p.d // (2**b - 1)), 1001, 5000):
            cfg = SchemeConfig(n=n, d=p.d, b=b, seed=int(rng.integers(2**32)))
            for scheme in ("minimax", "localize_refine"):
                result = run_scheme(scheme, p, cfg)
                runs += 1
                problems.extend(f"{scheme} n={n} b={b}: {v}" for v in verify_transcript(result.transcript, cfg))
                if result.transcript.total_bits != n * b:
                    problems.append(f"{scheme} n={n} b={b}: total bits {result.transcript.total_bits}")
    CONTRACTS.add(runs, len(problems))
    passed = CONTRACTS.violations == 0
    detail = (
        f"{2 * n_plans} random plans and {runs} runs checked here; "
        f"{CONTRACTS.violations} violations over {CONTRACTS.runs} checked runs this session"
    )
    if problems:
        detail += "; " + "; ".join(problems[:5])
    return CheckResult("4 protocol contracts", passed, detail)


def check_allocation(seed: int = 5, instances: int = 1000) -> CheckResult:
    """Group sizes: worked values, the coverage floor and monotonicity."""
    problems = []
    for pi_j, b, expected in ((0.5, 2, 225), (0.0, 2, 37), (1.0, 3, 500)):
        pi = np.full(10, (1 - pi_j) / 9)
        pi[0] = pi_j
        got = int(round2.allocate(PiWeights(pi, 2.0), 1000, 10, b)[0])
        if got != expected:
            problems.append(f"n=1000 d=10 b={b} pi={pi_j}: size {got}, expected {expected}")
    rng = np.random.default_rng(seed)
    for _ in range(instances):
        d = int(rng.integers(1, 300))
        b = int(rng.integers(1, 6))
        n = int(rng.integers(2 * d, 20 * d * 2**b))
        pi = rng.standard_exponential(d) * (rng.random(d) < 0.7)
        pi = pi / pi.sum() if pi.sum() > 0 else np.full(d, 1.0 / d)
        try:
            sizes = round2.allocate(PiWeights(pi, 2.0), n, d, b)
        except ValueError:
            continue
        half, cap = n // 2, 2**b - 1
        floor = max(1, min(half, (half * cap) // (4 * d)))
        if (sizes < floor).any():
            problems.append(f"n={n} d={d} b={b}: size below coverage floor {floor}")
        order = np.argsort(pi, kind="stable")
        if (np.diff(sizes[order]) < 0).any():
            problems.append(f"n={n} d={d} b={b}: sizes not monotone in the weights")
        if sizes.max() > half or sizes.sum() > half * cap:
            problems.append(f"n={n} d={d} b={b}: sizes exceed client capacity")
    detail = f"worked values and {instances} random instances checked"
    if problems:
        detail += "; " + "; ".join(problems[:5])
    return CheckResult("allocation and grouping", not problems, detail)


def _envelope(q, bound, label, threads):
    failures = []
    worst = 0.0
    violations = 0
    for name, p in envelope_distributions().items():
        for b in (1, 2, 3):
            cfg = SchemeConfig(n=ENVELOPE_N, d=ENVELOPE_D, b=b, q=q, seed=ENVELOPE_SEED + b)
            cell = monte_carlo("localize_refine", p, cfg, ENVELOPE_TRIALS, threads=threads)
            violations += cell.violations
            limit = bound(p, ENVELOPE_N, ENVELOPE_D, b)
            ratio = cell.mean_loss / limit
            worst = max(worst, ratio)
            if not cell.mean_loss <= limit:
                failures.append(f"{name} b={b}: {cell.mean_loss:.3g} > {limit:.3g}")
    CONTRACTS.add(12 * ENVELOPE_TRIALS, violations)
    detail = f"largest mean {label} / bound = {worst:.3f} over 12 cells"
    if failures:
        detail += "; " + "; ".join(failures)
    return not failures, detail


def criterion_5(threads=None) -> CheckResult:
    """Mean squared l2 error under the explicit-constant l2 bound."""
    ok, detail = _envelope(2.0, bound_thm1, "l2", threads)
    return CheckResult("5 l2 envelope", ok, detail)


def criterion_6(threads=None) -> CheckResult:
    """Mean l1 error of the cube-root variant under the explicit-constant l1 bound."""
    ok, detail = _envelope(1.0, bound_thm2, "l1", threads)
    return CheckResult("6 l1 envelope", ok, detail)


_FIG1_CACHE = {}


def figure1_summaries(threads=None) -> dict:
    """Preset sweep results keyed by preset name, computed once per process."""
    if not _FIG1_CACHE:
        for spec in (FIG1_LEFT, FIG1_RIGHT):
            rows = run_sweep(spec, threads)
            CONTRACTS.add(sum(r.trials for r in rows), sum(r.violations for r in rows))
            _FIG1_CACHE[spec.name] = rows
    return _FIG1_CACHE


def figure1_rows(threads=None) -> dict:
    return {
        name: {(r.scheme, r.d, r.n): r.mean_loss for r in rows}
        for name, rows in figure1_summaries(threads).items()
    }


def criterion_7a(threads=None) -> CheckResult:
    """Localize-and-refine strictly below minimax in every figure cell."""
    cells = figure1_rows(threads)
    losing = []
    total = 0
    for name, table in cells.items():
        for (scheme, d, n), loss in sorted(table.items()):
            if scheme != "localize_refine":
                continue
            total += 1
            mm = table[("minimax", d, n)]
            if not loss < mm:
                losing.append(f"{name} d={d} n={n} ({loss:.3g} vs {mm:.3g})")
    detail = f"{total - len(losing)}/{total} cells won"
    if losing:
        detail += "; not won: " + ", ".join(losing)
    return CheckResult("7a dominance over minimax", not losing, detail)


def criterion_7b(threads=None) -> CheckResult:
    """Error growth from d=100 to d=800 at n=5e4."""
    table = figure1_rows(threads)["fig1-right"]
    n = FIG1_RIGHT.n_grid[0]
    mm = table[("minimax", 800, n)] / table[("minimax", 100, n)]
    lr = table[("localize_refine", 800, n)] / table[("localize_refine", 100, n)]
    passed = mm >= 4 and lr <= 2
    detail = f"minimax ratio {mm:.2f} (need >= 4), localize-and-refine ratio {lr:.2f} (need <= 2)"
    return CheckResult("7b dimension scaling", passed, detail, {"minimax": mm, "lr": lr})


def criterion_7c(threads=None) -> CheckResult:
    """At the largest n of the left panel the gap is at least fivefold."""
    table = figure1_rows(threads)["fig1-left"]
    n = max(FIG1_LEFT.n_grid)
    gaps = {d: table[("minimax", d, n)] / table[("localize_refine", d, n)] for d in FIG1_LEFT.d_grid}
    passed = all(g >= 5 for g in gaps.values())
    detail = ", ".join(f"d={d}: {g:.2f}x" for d, g in gaps.items()) + f" at n={n} (need >= 5x)"
    return CheckResult("7c gap at largest n", passed, detail, gaps)


def criterion_8(threads=None, trials: int = 50) -> CheckResult:
    """One bit per client: the error barely moves between d=200 and d=800."""
    n, b = 10**6, 1
    means = {}
    for d in (200, 800):
        cfg = SchemeConfig(n=n, d=d, b=b, seed=8000 + d)
        cell = monte_carlo("localize_refine", geometric(0.8, d), cfg, trials, threads=threads)
        CONTRACTS.add(trials, cell.violations)
        means[d] = cell.mean_loss
    spread = abs(means[800] - means[200]) / min(means.values())
    detail = f"l2 at d=200 {means[200]:.4g}, d=800 {means[800]:.4g}, relative difference {spread:.3f} (limit 0.5)"
    return CheckResult("8 dimension-free regime", spread <= 0.5, detail, means)


FAST_SUITE = (criterion_1, criterion_2, check_allocation, criterion_4)
FULL_SUITE = (
    criterion_1, criterion_2, check_allocation, criterion_3, criterion_5, criterion_6,
    criterion_7a, criterion_7b, criterion_7c, criterion_8, criterion_4,
)
SUITES = {"fast": FAST_SUITE, "full": FULL_SUITE}


def run_suite(name: str, threads=None, report=None) -> list[CheckResult]:
    results = []
    for check in SUITES[name]:
        kwargs = {"threads": threads} if "threads" in check.__code__.co_varnames else {}
        try:
            result = check(**kwargs)
        except Exception as exc:  # a crashing check is a failed check
            result = CheckResult(check.__name__, False, f"raised {type(exc).__name__}: {exc}")
        if report is not None:
            report(result.line())
        results.append(result)
    return results
