"""Monte Carlo error measurement, explicit-constant error bounds, sweeps and
CSV output.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .distributions import Distribution, make_family, norm_q
from .exceptions import ConfigurationError
from .protocol import SchemeConfig, canonical_scheme, run_scheme, verify_transcript

CSV_HEADER = (
    "scheme", "family", "param", "d", "n", "b", "q",
    "trials", "seed", "mean_loss", "stderr", "theory_bound",
)


def resolve_threads(threads: int | None = None) -> int:
    env = os.environ.get("COMMSIM_THREADS")
    if env:
        threads = int(env)
    if threads is None:
        threads = os.cpu_count() or 1
    return max(1, int(threads))


def concentration_radius(n: int, d: int, b: int) -> float:
    """Round-one deviation radius ``3 d log(n d) / (n 2^b)``."""
    return 3.0 * d * math.log(n * d) / (n * 2.0**b)


def conditional_error_bound(p: Distribution, n: int, d: int, b: int) -> float:
    """Squared error of the refined estimate given a well-localized round one."""
    nb = n * 2.0**b
    return 6.0 * norm_q(p, 0.5) / nb + 10.0 * d * d * concentration_radius(n, d, b) / nb + 1.0 / n


def bound_thm1(p: Distribution, n: int, d: int, b: int) -> float:
    """Upper bound on the expected squared l2 error of localize-and-refine.

    ``3/n + 6 ||p||_{1/2} / (n 2^b) + 30 d^3 log(nd) / (n 2^b)^2``: the
    conditional bound plus ``2/n`` for the event that round one misses.
    """
    nb = n * 2.0**b
    return 3.0 / n + 6.0 * norm_q(p, 0.5) / nb + 30.0 * d**3 * math.log(n * d) / nb**2


def bound_thm2(p: Distribution, n: int, d: int, b: int) -> float:
    """Upper bound on the expected l1 error of the cube-root variant.

    Terms: ``2/n`` for the failure event, ``sqrt(2 ||p||_{1/2} / n)`` from
    saturated groups, ``sqrt(16 ||p||_{1/3} / (n 2^b))`` from the refined
    symbols and ``sqrt(48 d^3 eps_n / (n 2^b))`` from the rest.
    """
    nb = n * 2.0**b
    eps = concentration_radius(n, d, b)
    return (
        2.0 / n
        + math.sqrt(2.0 * norm_q(p, 0.5) / n)
        + math.sqrt(16.0 * norm_q(p, 1.0 / 3.0) / nb)
        + math.sqrt(48.0 * d**3 * eps / nb)
    )


def theory_bound(scheme: str, p: Distribution, cfg: SchemeConfig) -> float | None:
    if canonical_scheme(scheme) != "localize_refine":
        return None
    if cfg.q == 2:
        return bound_thm1(p, cfg.n, cfg.d, cfg.b)
    if cfg.q == 1:
        return bound_thm2(p, cfg.n, cfg.d, cfg.b)
    return None


def loss_name(q: float) -> str:
    return {2.0: "l2", 1.0: "l1"}.get(float(q), "lq")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for ``trial``, whatever order trials run in."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


@dataclass(frozen=True)
class CellSummary:
    scheme: str
    family: str
    param: float | None
    d: int
    n: int
    b: int
    q: float
    trials: int
    seed: int
    mean_loss: float
    stderr: float
    theory_bound: float | None = None
    loss: str = "l2"
    degenerate: bool = False
    violations: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> list[str]:
        return [
            self.scheme, self.family, _fmt(self.param), str(self.d), str(self.n),
            str(self.b), _fmt(self.q), str(self.trials), str(self.seed),
            _fmt(self.mean_loss), _fmt(self.stderr), _fmt(self.theory_bound),
        ]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def monte_carlo(
    scheme: str,
    p: Distribution,
    cfg: SchemeConfig,
    trials: int,
    *,
    family: str = "custom",
    param: float | None = None,
    threads: int | None = 1,
    verify: bool = True,
    losses_out: list | None = None,
) -> CellSummary:
    """Mean and standard error of the configured loss over seeded trials.

    Trial ``t`` draws from ``trial_rng(cfg.seed, t)``. With ``verify`` every
    transcript is checked and the number of contract violations recorded.
    """
    if trials < 1:
        raise ConfigurationError(f"need at least one trial, got {trials}")
    scheme = canonical_scheme(scheme)
    cfg.check(scheme)
    key = loss_name(cfg.q)

    def one(t):
        result = run_scheme(scheme, p, cfg, trial_rng(cfg.seed, t))
        bad = len(verify_transcript(result.transcript, cfg)) if verify else 0
        return result.losses[key], bad

    workers = resolve_threads(threads)
    if workers > 1 and trials > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, range(trials)))
    else:
        outcomes = [one(t) for t in range(trials)]
    values = np.array([v for v, _ in outcomes])
    if losses_out is not None:
        losses_out.extend(values.tolist())
    degenerate = trials == 1
    stderr = 0.0 if degenerate else float(values.std(ddof=1) / math.sqrt(trials))
    return CellSummary(
        scheme=scheme,
        family=family,
        param=param,
        d=cfg.d,
        n=cfg.n,
        b=cfg.b,
        q=float(cfg.q),
        trials=trials,
        seed=cfg.seed,
        mean_loss=float(values.mean()),
        stderr=stderr,
        theory_bound=theory_bound(scheme, p, cfg),
        loss=key,
        degenerate=degenerate,
        violations=sum(b for _, b in outcomes),
    )


_SPEC_KEYS = {"schemes", "family", "param", "n", "d", "b", "trials", "seed", "q", "name"}


@dataclass(frozen=True)
class SweepSpec:
    schemes: tuple
    family: str
    param: float | None
    n_grid: tuple
    d_grid: tuple
    b_grid: tuple = (2,)
    trials: int = 50
    seed: int = 0
    q: float = 2.0
    name: str = "sweep"

    def __post_init__(self):
        for label, grid in (("schemes", self.schemes), ("n", self.n_grid),
                            ("d", self.d_grid), ("b", self.b_grid)):
            if len(grid) == 0:
                raise ConfigurationError(f"sweep key {label!r} must be a nonempty list")
        if self.trials < 1:
            raise ConfigurationError("sweep key 'trials' must be at least 1")
        for s in self.schemes:
            canonical_scheme(s)

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepSpec":
        if not isinstance(raw, dict):
            raise ConfigurationError("sweep spec must be a JSON object")
        unknown = sorted(set(raw) - _SPEC_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown sweep key(s): {', '.join(unknown)}")
        for key in ("schemes", "family", "n", "d"):
            if key not in raw:
                raise ConfigurationError(f"sweep spec is missing key {key!r}")

        def grid(key, default=None):
            value = raw.get(key, default)
            if isinstance(value, (int, float, str)):
                value = [value]
            if not isinstance(value, list):
                raise ConfigurationError(f"sweep key {key!r} must be a list")
            return tuple(value)

        try:
            return cls(
                schemes=tuple(canonical_scheme(s) for s in grid("schemes")),
                family=str(raw["family"]),
                param=None if raw.get("param") is None else float(raw["param"]),
                n_grid=tuple(int(v) for v in grid("n")),
                d_grid=tuple(int(v) for v in grid("d")),
                b_grid=tuple(int(v) for v in grid("b", [2])),
                trials=int(raw.get("trials", 50)),
                seed=int(raw.get("seed", 0)),
                q=float(raw.get("q", 2.0)),
                name=str(raw.get("name", "sweep")),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"malformed sweep spec: {exc}") from exc

    def cells(self):
        """``(cell_index, scheme, d, n, b)`` in output order."""
        index = 0
        for d in self.d_grid:
            for n in self.n_grid:
                for b in self.b_grid:
                    for scheme in self.schemes:
                        yield index, scheme, d, n, b
                    index += 1


def cell_seed(base_seed: int, index: int) -> int:
    # Both schemes of one grid point share a seed (common random numbers).
    return int(np.random.SeedSequence(base_seed, spawn_key=(index,)).generate_state(1, np.uint64)[0])


def run_sweep(spec: SweepSpec, threads: int | None = None) -> list[CellSummary]:
    rows = []
    for index, scheme, d, n, b in spec.cells():
        seed = cell_seed(spec.seed, index)
        p = make_family(spec.family, spec.param, d, rng=np.random.default_rng(seed))
        cfg = SchemeConfig(n=n, d=d, b=b, q=spec.q, seed=seed)
        rows.append(
            monte_carlo(scheme, p, cfg, spec.trials, family=spec.family,
                        param=spec.param, threads=threads)
        )
    return rows


def emit_csv(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.csv_row())
    return path


# Qualitative reproductions; the exact grids behind the published figure are unknown.
FIG1_LEFT = SweepSpec(
    schemes=("localize_refine", "minimax"),
    family="geometric",
    param=0.8,
    n_grid=(2_000, 5_000, 10_000, 20_000, 50_000, 100_000),
    d_grid=(100, 500),
    b_grid=(2,),
    trials=50,
    seed=20210601,
    name="fig1-left",
)

FIG1_RIGHT = SweepSpec(
    schemes=("localize_refine", "minimax"),
    family="geometric",
    param=0.8,
    n_grid=(50_000,),
    d_grid=(100, 200, 400, 800),
    b_grid=(2,),
    trials=50,
    seed=20210602,
    name="fig1-right",
)

PRESETS = {"fig1-left": FIG1_LEFT, "fig1-right": FIG1_RIGHT}


def _run_preset(spec, outdir, trials, threads):
    if trials is not None:
        spec = SweepSpec(**{**_fields(spec), "trials": trials})
    rows = run_sweep(spec, threads)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = emit_csv(rows, outdir / f"{spec.name}.csv")
    return path, rows


def _fields(spec):
    return {f: getattr(spec, f) for f in spec.__dataclass_fields__}


def figure1_left(outdir, trials: int | None = None, threads: int | None = None):
    """Error against n at d in {100, 500}; returns ``(csv_path, rows)``."""
    return _run_preset(FIG1_LEFT, outdir, trials, threads)


def figure1_right(outdir, trials: int | None = None, threads: int | None = None):
    """Error against d at n = 5e4; returns ``(csv_path, rows)``."""
    return _run_preset(FIG1_RIGHT, outdir, trials, threads)
