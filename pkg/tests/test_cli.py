import json
import math

import numpy as np
import pytest

from commsim import round2
from commsim.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


SIMULATE = (
    "simulate", "--scheme", "lr", "--family", "geometric", "--param", "0.8",
    "--d", "100", "--n", "20000", "--b", "2", "--trials", "20", "--seed", "7",
)


class TestSimulate:
    def test_json(self, capsys):
        code, out, _ = run(capsys, *SIMULATE)
        assert code == 0
        payload = json.loads(out)
        assert payload["mean_loss"] > 0
        assert payload["scheme"] == "localize_refine" and payload["trials"] == 20

    def test_deterministic(self, capsys):
        assert run(capsys, *SIMULATE)[1] == run(capsys, *SIMULATE)[1]

    @pytest.mark.parametrize(
        "argv",
        [
            ("--family", "zipf", "--param", "-1"),
            ("--family", "geometric", "--param", "1.5"),
            ("--family", "geometric"),
            ("--family", "cauchy", "--param", "1"),
        ],
    )
    def test_bad_family(self, capsys, argv):
        code, out, err = run(
            capsys, "simulate", "--scheme", "minimax", *argv, "--d", "10", "--n", "100", "--b", "2"
        )
        assert code == 1 and out == "" and "error" in err

    def test_too_small_n(self, capsys):
        code, _, err = run(
            capsys, "simulate", "--scheme", "lr", "--family", "uniform", "--d", "100", "--n", "10", "--b", "2"
        )
        assert code == 1 and "too small" in err

    def test_unknown_flag(self, capsys):
        assert run(capsys, *SIMULATE, "--verbose")[0] == 1


class TestSweep:
    def test_preset(self, capsys, tmp_path):
        out = tmp_path / "out.csv"
        code, stdout, err = run(capsys, "sweep", "--preset", "fig1-right", "--out", str(out), "--trials", "2")
        assert code == 0 and stdout == ""
        lines = out.read_text().splitlines()
        assert lines[0] == "scheme,family,param,d,n,b,q,trials,seed,mean_loss,stderr,theory_bound"
        assert len(lines) == 1 + 2 * 4
        assert "wrote 8 rows" in err

    def test_missing_out(self, capsys):
        assert run(capsys, "sweep", "--preset", "fig1-right")[0] == 1

    def test_spec(self, capsys, tmp_path):
        spec = tmp_path / "s.json"
        spec.write_text(json.dumps(
            {"schemes": ["lr", "minimax"], "family": "zipf", "param": 1.0, "n": [500, 1000], "d": [10], "trials": 2}
        ))
        code, _, _ = run(capsys, "sweep", "--spec", str(spec), "--out", str(tmp_path / "o.csv"))
        assert code == 0
        assert len((tmp_path / "o.csv").read_text().splitlines()) == 5

    @pytest.mark.parametrize(
        "content, needle",
        [
            ({"schemes": ["lr"], "family": "uniform", "n": [], "d": [10]}, "'n'"),
            ({"schemes": ["lr"], "family": "uniform", "n": [100], "d": [10], "grid": 1}, "grid"),
            ("{not json", "JSON"),
        ],
    )
    def test_bad_spec(self, capsys, tmp_path, content, needle):
        spec = tmp_path / "s.json"
        spec.write_text(content if isinstance(content, str) else json.dumps(content))
        code, _, err = run(capsys, "sweep", "--spec", str(spec), "--out", str(tmp_path / "o.csv"))
        assert code == 1 and needle in err

    def test_missing_spec_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "sweep", "--spec", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o.csv"))
        assert code == 1


class TestComplexity:
    def test_geometric_closed_form(self, capsys):
        code, out, _ = run(capsys, "complexity", "--family", "geometric", "--param", "0.8", "--d", "1000")
        payload = json.loads(out)
        assert code == 0 and payload["closed_form_abs_diff"] < 1e-9

    def test_uniform(self, capsys):
        payload = json.loads(run(capsys, "complexity", "--family", "uniform", "--d", "50")[1])
        assert payload["half_norm"] == pytest.approx(50, abs=1e-9)
        assert payload["renyi_half"] == pytest.approx(math.log(50))

    def test_zipf(self, capsys):
        payload = json.loads(run(capsys, "complexity", "--family", "zipf", "--param", "3", "--d", "1000")[1])
        assert payload["h_star_value"] <= payload["half_norm"]
        assert "closed_form_half_norm" not in payload

    def test_bounds(self, capsys):
        payload = json.loads(
            run(capsys, "complexity", "--family", "uniform", "--d", "10", "--n", "1000", "--b", "2")[1]
        )
        assert payload["bound_thm1"] > 0 and payload["bound_thm2"] > 0

    @pytest.mark.parametrize("extra", [("--n", "1000"), ("--n", "0", "--b", "2")])
    def test_bad_bound_args(self, capsys, extra):
        assert run(capsys, "complexity", "--family", "uniform", "--d", "10", *extra)[0] == 1

    def test_seeded_sparse(self, capsys):
        argv = ("complexity", "--family", "sparse", "--param", "5", "--d", "100", "--seed", "3")
        assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


class TestCheck:
    def test_fast_suite(self, capsys):
        code, out, err = run(capsys, "check", "--suite", "fast")
        assert code == 0
        assert json.loads(out)["failed"] == []
        assert err.count("PASS") == 4

    def test_unknown_suite(self, capsys):
        assert run(capsys, "check", "--suite", "bogus")[0] == 1

    def test_corrupted_allocation_is_caught(self, capsys, monkeypatch):
        real = round2.allocate

        def off_by_one(pi, n, d, b):
            sizes = real(pi, n, d, b)
            return np.maximum(1, sizes - 1)

        monkeypatch.setattr(round2, "allocate", off_by_one)
        code, out, _ = run(capsys, "check", "--suite", "fast")
        assert code == 2
        assert "allocation and grouping" in json.loads(out)["failed"]


def test_no_command(capsys):
    assert run(capsys)[0] == 1
