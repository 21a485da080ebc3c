import numpy as np
import pytest

from selective_bayes import parse_report, selection_context
from selective_bayes.cli import main
from selective_bayes.rng import task_rng

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _write_data(tmp_path, header=False):
    rng = task_rng(5, 0)
    X = rng.standard_normal((30, 6))
    X /= np.linalg.norm(X, axis=0)
    beta = np.array([1.5, -1.0, 0.0, 0.0, 0.0, 0.0])
    y = X @ beta + 0.7 * rng.standard_normal(30)
    xp, yp = tmp_path / "X.csv", tmp_path / "y.csv"
    lines = [",".join(repr(float(v)) for v in row) for row in X]
    if header:
        lines.insert(0, ",".join(f"c{j}" for j in range(6)))
    xp.write_text("\n".join(lines) + "\n")
    yp.write_text("\n".join(repr(float(v)) for v in y) + "\n")
    return xp, yp, X, y


class TestFit:
    def test_writes_report_tables_and_figure(self, tmp_path):
        xp, yp, X, y = _write_data(tmp_path)
        out = tmp_path / "fit.txt"
        code = main(["fit", "--x", str(xp), "--y", str(yp), "--lambda", "0.3",
                     "--seed", "7", "--draws", "1500", "--out", str(out)])
        assert code == 0
        tree = parse_report(out.read_text())
        assert tree["command"] == "fit"
        ctx, _ = selection_context(X, y, 0.3)
        assert tree["selection"]["active_set"] == list(ctx.E)
        post = tree["posterior"]
        for i in range(len(ctx.E)):
            assert post["lower"][i] < post["mean"][i] < post["upper"][i]
        assert "map" in tree["estimates"] and "mle" in tree["estimates"]
        csv_path = tmp_path / "fit_intervals.csv"
        assert csv_path.exists()
        first = csv_path.read_text().splitlines()[0]
        assert first == "index,mean,lower,upper"
        assert (tmp_path / "fit.png").read_bytes()[:8] == PNG_MAGIC

    def test_stdout_when_no_out(self, tmp_path, capsys):
        xp, yp, _, _ = _write_data(tmp_path)
        code = main(["fit", "--x", str(xp), "--y", str(yp), "--lambda", "0.3",
                     "--seed", "7", "--draws", "1200"])
        assert code == 0
        tree = parse_report(capsys.readouterr().out)
        assert tree["command"] == "fit"
        assert not list(tmp_path.glob("*.png"))

    def test_seed_makes_reports_byte_identical(self, tmp_path):
        xp, yp, _, _ = _write_data(tmp_path)
        outs = []
        for name in ("a.txt", "b.txt"):
            out = tmp_path / name
            code = main(["fit", "--x", str(xp), "--y", str(yp), "--lambda",
                         "0.3", "--seed", "11", "--draws", "1200", "--out",
                         str(out)])
            assert code == 0
            outs.append(out)
        assert outs[0].read_bytes() == outs[1].read_bytes()
        assert (tmp_path / "a.png").read_bytes() \
            == (tmp_path / "b.png").read_bytes()
        assert (tmp_path / "a_intervals.csv").read_bytes() \
            == (tmp_path / "b_intervals.csv").read_bytes()

    def test_header_rows_are_detected(self, tmp_path):
        xp, yp, _, _ = _write_data(tmp_path, header=True)
        code = main(["fit", "--x", str(xp), "--y", str(yp), "--lambda", "0.3",
                     "--seed", "7", "--draws", "1200"])
        assert code == 0

    def test_burn_in_echoed(self, tmp_path):
        xp, yp, _, _ = _write_data(tmp_path)
        out = tmp_path / "fit.txt"
        code = main(["fit", "--x", str(xp), "--y", str(yp), "--lambda", "0.3",
                     "--seed", "7", "--draws", "1200", "--burn-in", "300",
                     "--out", str(out)])
        assert code == 0
        assert parse_report(out.read_text())["config"]["burn_in"] == 300


class TestEstimate:
    def test_flat_prior_reports_map_and_mle(self, tmp_path):
        xp, yp, _, _ = _write_data(tmp_path)
        out = tmp_path / "est.txt"
        code = main(["estimate", "--x", str(xp), "--y", str(yp), "--lambda",
                     "0.3", "--out", str(out)])
        assert code == 0
        tree = parse_report(out.read_text())
        est = tree["estimates"]
        assert set(est) == {"map", "mle"}
        assert est["map"]["residual"] < 1e-6
        assert (tmp_path / "est_estimates.csv").exists()

    def test_randomized_adds_third_estimator(self, tmp_path):
        xp, yp, _, _ = _write_data(tmp_path)
        out = tmp_path / "est.txt"
        code = main(["estimate", "--x", str(xp), "--y", str(yp), "--lambda",
                     "0.3", "--gamma2", "0.5", "--seed", "3", "--out",
                     str(out)])
        assert code == 0
        tree = parse_report(out.read_text())
        assert "randomized_mle" in tree["estimates"]
        assert tree["config"]["regime"] == "randomized"

    def test_stochastic_run_requires_seed(self, tmp_path, capsys):
        xp, yp, _, _ = _write_data(tmp_path)
        code = main(["estimate", "--x", str(xp), "--y", str(yp), "--lambda",
                     "0.3", "--gamma2", "0.5"])
        assert code == 2
        assert "category=input" in capsys.readouterr().err

    def test_mixture_prior_has_no_estimate(self, tmp_path, capsys):
        xp, yp, _, _ = _write_data(tmp_path)
        code = main(["estimate", "--x", str(xp), "--y", str(yp), "--lambda",
                     "0.3", "--prior", "mixture"])
        assert code == 2

    def test_carving_and_randomization_exclusive(self, tmp_path, capsys):
        xp, yp, _, _ = _write_data(tmp_path)
        code = main(["estimate", "--x", str(xp), "--y", str(yp), "--lambda",
                     "0.3", "--gamma2", "0.5", "--carve-frac", "0.3",
                     "--seed", "1"])
        assert code == 2


class TestErrorPaths:
    def test_missing_file(self, tmp_path, capsys):
        xp, yp, _, _ = _write_data(tmp_path)
        code = main(["estimate", "--x", str(tmp_path / "nope.csv"), "--y",
                     str(yp), "--lambda", "0.3"])
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("error: category=input exit=2")

    def test_empty_selection_is_exit_3(self, tmp_path, capsys):
        xp, yp, _, _ = _write_data(tmp_path)
        code = main(["estimate", "--x", str(xp), "--y", str(yp), "--lambda",
                     "50.0"])
        assert code == 3
        assert "category=selection" in capsys.readouterr().err

    def test_row_mismatch(self, tmp_path, capsys):
        xp, yp, _, _ = _write_data(tmp_path)
        yp.write_text("1.0\n2.0\n")
        code = main(["estimate", "--x", str(xp), "--y", str(yp), "--lambda",
                     "0.3"])
        assert code == 2

    def test_malformed_csv(self, tmp_path, capsys):
        xp, yp, _, _ = _write_data(tmp_path)
        xp.write_text("1.0,2.0\n3.0,not-a-number\n")
        code = main(["estimate", "--x", str(xp), "--y", str(yp), "--lambda",
                     "0.3"])
        assert code == 2

    def test_non_finite_csv(self, tmp_path, capsys):
        xp, yp, _, _ = _write_data(tmp_path)
        yp.write_text("\n".join(["1.0"] * 29 + ["nan"]) + "\n")
        code = main(["estimate", "--x", str(xp), "--y", str(yp), "--lambda",
                     "0.3"])
        assert code == 2

    def test_bad_log_level_env(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("SELECTIVE_BAYES_LOG", "chatty")
        xp, yp, _, _ = _write_data(tmp_path)
        code = main(["estimate", "--x", str(xp), "--y", str(yp), "--lambda",
                     "0.3"])
        assert code == 2
        assert "SELECTIVE_BAYES_LOG" in capsys.readouterr().err

    def test_bad_flag_value_exits_via_argparse(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["estimate", "--x", "a", "--y", "b", "--lambda", "soft"])
        assert exc.value.code == 2


class TestDemoUnivariate:
    def test_deterministic_outputs(self, tmp_path):
        for sub in ("r1", "r2"):
            d = tmp_path / sub
            d.mkdir()
            code = main(["demo-univariate", "--mu-grid=-1:1:0.5",
                         "--y-grid", "0.5:2:0.5", "--out",
                         str(d / "demo.txt")])
            assert code == 0
        for name in ("demo.txt", "demo.png", "demo_probability.csv",
                     "demo_estimators.csv"):
            assert (tmp_path / "r1" / name).read_bytes() \
                == (tmp_path / "r2" / name).read_bytes()

    def test_report_contents(self, tmp_path):
        out = tmp_path / "demo.txt"
        code = main(["demo-univariate", "--mu-grid=-1:1:1", "--y-grid",
                     "0.5:2:0.5", "--out", str(out)])
        assert code == 0
        tree = parse_report(out.read_text())
        assert tree["probability"]["mu"] == [-1.0, 0.0, 1.0]
        assert len(tree["estimators"]["y"]) == 4

    def test_bad_grid(self, capsys):
        code = main(["demo-univariate", "--mu-grid", "backwards"])
        assert code == 2
        code = main(["demo-univariate", "--mu-grid=2:1:0.5"])
        assert code == 2


class TestConsistencyCommand:
    def test_too_few_replications(self, capsys):
        code = main(["consistency", "--n-values", "100", "--replications",
                     "50", "--seed", "1"])
        assert code == 2
        assert "200" in capsys.readouterr().err

    def test_bad_n_values(self, capsys):
        code = main(["consistency", "--n-values", "100;200", "--seed", "1"])
        assert code == 2
