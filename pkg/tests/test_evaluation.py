import csv
import math

import numpy as np
import pytest

from commsim.distributions import geometric, norm_q, point_mass, uniform
from commsim.evaluation import (
    CSV_HEADER,
    FIG1_LEFT,
    FIG1_RIGHT,
    CellSummary,
    SweepSpec,
    bound_thm1,
    bound_thm2,
    cell_seed,
    concentration_radius,
    emit_csv,
    figure1_left,
    figure1_right,
    monte_carlo,
    resolve_threads,
    run_sweep,
    theory_bound,
    trial_rng,
)
from commsim.exceptions import ConfigurationError
from commsim.protocol import SchemeConfig


class TestBounds:
    def test_radius(self):
        assert concentration_radius(1000, 10, 2) == pytest.approx(30 * math.log(10**4) / 4000)

    @pytest.mark.parametrize("bound", [bound_thm1, bound_thm2])
    @pytest.mark.parametrize("p", [uniform(50), geometric(0.8, 50), point_mass(50)])
    def test_decreasing_in_n_and_b(self, bound, p):
        for n in (10**3, 10**4, 10**5):
            assert bound(p, 2 * n, 50, 2) < bound(p, n, 50, 2)
        for b in (1, 2, 3):
            assert bound(p, 10**5, 50, b + 1) < bound(p, 10**5, 50, b)

    def test_thm1_uniform_terms(self):
        n, d, b = 10**5, 20, 2
        nb = n * 4
        expected = 3 / n + 6 * d / nb + 30 * d**3 * math.log(n * d) / nb**2
        assert bound_thm1(uniform(d), n, d, b) == pytest.approx(expected, rel=1e-14)

    def test_thm1_point_mass_asymptotics(self):
        n, b = 10**12, 2
        leading = 3 / n + 6 / (n * 4)
        assert bound_thm1(point_mass(10), n, 10, b) / leading == pytest.approx(1, rel=1e-6)

    def test_thm2_uniform_third_norm(self):
        n, d, b = 10**5, 20, 2
        nb = n * 4
        assert norm_q(uniform(d), 1 / 3) == pytest.approx(d**2, rel=1e-12)
        eps = 3 * d * math.log(n * d) / nb
        expected = 2 / n + math.sqrt(2 * d / n) + math.sqrt(16 * d**2 / nb) + math.sqrt(48 * d**3 * eps / nb)
        assert bound_thm2(uniform(d), n, d, b) == pytest.approx(expected, rel=1e-12)

    def test_theory_bound_dispatch(self):
        p = uniform(10)
        assert theory_bound("minimax", p, SchemeConfig(n=1000, d=10)) is None
        assert theory_bound("lr", p, SchemeConfig(n=1000, d=10)) == bound_thm1(p, 1000, 10, 2)
        assert theory_bound("lr", p, SchemeConfig(n=1000, d=10, q=1)) == bound_thm2(p, 1000, 10, 2)
        assert theory_bound("lr", p, SchemeConfig(n=1000, d=10, q=1.5)) is None


class TestMonteCarlo:
    def test_point_mass(self):
        cell = monte_carlo("lr", point_mass(30, 2), SchemeConfig(n=2000, d=30), 100)
        assert 0 <= cell.mean_loss <= 10 / 2000
        assert cell.violations == 0

    def test_single_trial_is_flagged(self):
        cell = monte_carlo("minimax", uniform(10), SchemeConfig(n=500, d=10), 1)
        assert cell.degenerate and cell.stderr == 0.0

    def test_deterministic_and_thread_independent(self):
        p, cfg = geometric(0.8, 60), SchemeConfig(n=3000, d=60, seed=9)
        a = monte_carlo("lr", p, cfg, 12, threads=1)
        b = monte_carlo("lr", p, cfg, 12, threads=1)
        c = monte_carlo("lr", p, cfg, 12, threads=4)
        assert a == b == c

    def test_trial_streams_differ(self):
        assert trial_rng(1, 0).random() != trial_rng(1, 1).random()

    def test_losses_out_and_stderr(self):
        out = []
        cell = monte_carlo("minimax", uniform(10), SchemeConfig(n=500, d=10), 7, losses_out=out)
        assert len(out) == 7
        assert cell.mean_loss == pytest.approx(np.mean(out))
        assert cell.stderr == pytest.approx(np.std(out, ddof=1) / math.sqrt(7))

    def test_zero_trials(self):
        with pytest.raises(ConfigurationError):
            monte_carlo("lr", uniform(4), SchemeConfig(n=100, d=4), 0)

    def test_q1_reports_l1(self):
        cell = monte_carlo("lr", uniform(4), SchemeConfig(n=400, d=4, q=1), 3)
        assert cell.loss == "l1"
        assert cell.theory_bound == bound_thm2(uniform(4), 400, 4, 2)

    def test_error_grows_with_half_norm(self):
        cfg = SchemeConfig(n=10**6, d=100, b=2, seed=5)
        family = [point_mass(100), geometric(0.5, 100), geometric(0.9, 100), uniform(100)]
        assert np.all(np.diff([norm_q(p, 0.5) for p in family]) > 0)
        means = [monte_carlo("lr", p, cfg, 20).mean_loss for p in family]
        assert np.all(np.diff(means) >= 0)


class TestThreads:
    def test_env_overrides(self, monkeypatch):
        monkeypatch.setenv("COMMSIM_THREADS", "3")
        assert resolve_threads(8) == 3

    def test_default(self, monkeypatch):
        monkeypatch.delenv("COMMSIM_THREADS", raising=False)
        assert resolve_threads(None) >= 1
        assert resolve_threads(0) == 1


class TestSweepSpec:
    def test_from_dict(self):
        spec = SweepSpec.from_dict(
            {"schemes": ["lr", "minimax"], "family": "geometric", "param": 0.8, "n": [1000], "d": 10}
        )
        assert spec.schemes == ("localize_refine", "minimax")
        assert spec.d_grid == (10,) and spec.b_grid == (2,)

    @pytest.mark.parametrize(
        "raw, needle",
        [
            ({"schemes": ["lr"], "family": "uniform", "n": [], "d": [5]}, "'n'"),
            ({"schemes": ["lr"], "family": "uniform", "d": [5]}, "'n'"),
            ({"schemes": ["lr"], "family": "uniform", "n": [9], "d": [5], "bits": 2}, "bits"),
            ({"schemes": ["rappor"], "family": "uniform", "n": [9], "d": [5]}, "rappor"),
            ({"schemes": ["lr"], "family": "uniform", "n": ["x"], "d": [5]}, "malformed"),
            ([], "object"),
        ],
    )
    def test_rejects(self, raw, needle):
        with pytest.raises(ConfigurationError, match=needle):
            SweepSpec.from_dict(raw)

    def test_cell_order_and_shared_seed(self):
        spec = SweepSpec(schemes=("lr", "minimax"), family="uniform", param=None,
                         n_grid=(100, 200), d_grid=(4, 8), trials=2)
        cells = list(spec.cells())
        assert [(s, d, n) for _, s, d, n, _ in cells[:3]] == [
            ("lr", 4, 100), ("minimax", 4, 100), ("lr", 4, 200)
        ]
        assert cells[0][0] == cells[1][0] != cells[2][0]
        assert cell_seed(1, 0) != cell_seed(1, 1)


class TestCsv:
    def test_header_only(self, tmp_path):
        path = emit_csv([], tmp_path / "x.csv")
        assert path.read_bytes() == (",".join(CSV_HEADER) + "\n").encode()

    def test_one_row(self, tmp_path):
        row = CellSummary("minimax", "geometric", 0.8, 10, 100, 2, 2.0, 5, 7, 0.1, 0.01, None)
        text = emit_csv([row], tmp_path / "x.csv").read_text()
        lines = text.split("\n")
        assert len(lines) == 3 and lines[2] == ""
        assert lines[1] == "minimax,geometric,0.80000000000000004,10,100,2,2,5,7,0.10000000000000001,0.01,"

    def test_quoting(self, tmp_path):
        row = CellSummary("minimax", 'a,"b', None, 1, 1, 1, 2.0, 1, 0, 0.0, 0.0)
        path = emit_csv([row], tmp_path / "x.csv")
        with path.open(newline="") as fh:
            assert list(csv.reader(fh))[1][1] == 'a,"b'

    def test_reemit_identical(self, tmp_path):
        spec = SweepSpec(schemes=("lr", "minimax"), family="geometric", param=0.8,
                         n_grid=(600,), d_grid=(10, 20), trials=3, seed=4)
        a = emit_csv(run_sweep(spec), tmp_path / "a.csv").read_bytes()
        b = emit_csv(run_sweep(spec, threads=2), tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            emit_csv([], tmp_path / "missing" / "x.csv")


@pytest.fixture(scope="module")
def figure_rows(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig")
    _, left = figure1_left(out)
    _, right = figure1_right(out)
    return out, left, right


@pytest.mark.slow
class TestFigurePresets:
    def test_grids(self):
        assert FIG1_LEFT.n_grid == (2_000, 5_000, 10_000, 20_000, 50_000, 100_000)
        assert FIG1_RIGHT.d_grid == (100, 200, 400, 800) and FIG1_RIGHT.n_grid == (50_000,)
        assert FIG1_LEFT.trials >= 50 and FIG1_RIGHT.trials >= 50

    def test_csv_shape(self, figure_rows):
        out, left, right = figure_rows
        assert len(left) == 2 * 6 * 2 and len(right) == 2 * 4
        assert len((out / "fig1-right.csv").read_text().splitlines()) == 9

    def test_minimax_doubling(self, figure_rows):
        _, left, _ = figure_rows
        mm = {(r.d, r.n): r.mean_loss for r in left if r.scheme == "minimax"}
        for d in (100, 500):
            for n in (5_000, 10_000, 50_000):
                assert 1.6 <= mm[(d, n)] / mm[(d, 2 * n)] <= 2.5

    def test_lr_within_bound(self, figure_rows):
        _, _, right = figure_rows
        for r in right:
            if r.scheme == "localize_refine":
                assert r.mean_loss <= r.theory_bound

    def test_all_finite(self, figure_rows):
        _, left, right = figure_rows
        for r in left + right:
            assert math.isfinite(r.mean_loss) and r.mean_loss >= 0 and r.violations == 0
