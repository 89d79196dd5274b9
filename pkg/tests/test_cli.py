import csv
import json

import numpy as np
import pytest

from onionkit import cli
from onionkit.data_core import CovariateSet, Dataset, read_matrix, write_dataset, write_matrix
from onionkit.onion import load_basis


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--n", 200, "--d", 4, "--p", 12, "--seed", 3, "--out-dir", out) == 0
    return out


FAST = ["--override", "trials=1", "--override", "folds_per_trial=1",
        "--override", "train.iterations=50", "--workers", "1"]


class TestSimulate:
    def test_default_manifest(self, tmp_path):
        assert run("simulate", "--n", 50, "--out-dir", tmp_path) == 0
        doc = json.loads((tmp_path / "manifest.json").read_text())
        sim = doc["config"]["sim"]
        assert (sim["d"], sim["p"], sim["sigma"], sim["concentration"]) == (20, 300, 2.0, [40, 50])
        assert len(doc["config"]["alpha"]) == 2
        X, _ = read_matrix(tmp_path / "train.csv")
        assert X.shape == (50, 300)

    @pytest.mark.parametrize("n", [0, -3])
    def test_bad_n(self, tmp_path, n, capsys):
        assert run("simulate", "--n", n, "--out-dir", tmp_path) == 2
        assert "--n" in capsys.readouterr().err

    def test_same_seed_same_hashes(self, tmp_path):
        for name in ("a", "b"):
            assert run("simulate", "--n", 80, "--p", 9, "--seed", 4, "--out-dir",
                       tmp_path / name) == 0
        outs = [json.loads((tmp_path / n / "manifest.json").read_text())["outputs"]
                for n in ("a", "b")]
        assert sorted(outs[0].values()) == sorted(outs[1].values())

    def test_replay(self, tmp_path):
        assert run("simulate", "--n", 30, "--p", 5, "--out-dir", tmp_path) == 0
        before = json.loads((tmp_path / "manifest.json").read_text())["outputs"]
        for f in tmp_path.glob("*.csv"):
            f.unlink()
        assert cli.replay_manifest(tmp_path / "manifest.json") == 0
        after = json.loads((tmp_path / "manifest.json").read_text())["outputs"]
        assert before == after

    def test_unknown_flag(self):
        assert run("simulate", "--bogus") == 2


class TestOnion:
    def test_fit_and_verify(self, simulated, tmp_path):
        basis_path = tmp_path / "basis.json"
        assert run("onion-fit", "--matrix", simulated / "train.csv", "--covariates",
                   simulated / "train_covariates.csv", "--out", basis_path) == 0
        basis, report = load_basis(basis_path)
        assert basis.m == 1
        X, _ = read_matrix(simulated / "train.csv")
        from onionkit.data_core import read_covariates

        y = read_covariates(simulated / "train_covariates.csv").column("Y1")
        Xc = X - X.mean(axis=0)
        direct = np.sum((Xc.T @ (y - y.mean())) ** 2)
        assert report["captured_covariance"][0] == pytest.approx(direct, rel=1e-10)

        out = tmp_path / "xn.csv"
        assert run("onion-transform", "--matrix", simulated / "train.csv", "--basis",
                   basis_path, "--out", out, "--verify") == 0
        Xn, _ = read_matrix(out)
        assert np.abs(Xn @ basis.W).max() < 1e-8 * np.abs(X).max()

    def test_transform_takes_no_covariates(self, simulated, tmp_path):
        assert run("onion-transform", "--matrix", simulated / "train.csv", "--basis", "b",
                   "--out", tmp_path / "x.csv", "--covariates", "c.csv") == 2

    def test_mismatched_p(self, simulated, tmp_path, capsys):
        basis_path = tmp_path / "basis.json"
        run("onion-fit", "--matrix", simulated / "train.csv", "--covariates",
            simulated / "train_covariates.csv", "--out", basis_path)
        write_matrix(tmp_path / "narrow.csv", np.ones((3, 5)))
        assert run("onion-transform", "--matrix", tmp_path / "narrow.csv", "--basis",
                   basis_path, "--out", tmp_path / "o.csv") == 2
        assert "p=12" in capsys.readouterr().err


class TestTrainEvaluate:
    @pytest.mark.parametrize("method", ["logreg", "mlp", "dann"])
    def test_round_trip(self, simulated, tmp_path, method, capsys):
        cfg = tmp_path / "train.json"
        cfg.write_text(json.dumps({"iterations": 200, "hidden_units": 4}))
        model = tmp_path / "model.json"
        flags = ["--standardize", "--onion"] if method == "logreg" else []
        assert run("train", "--matrix", simulated / "train.csv", "--covariates",
                   simulated / "train_covariates.csv", "--method", method, "--config", cfg,
                   "--out", model, *flags) == 0
        assert (tmp_path / "model.loss.csv").exists()
        out = tmp_path / "auc.json"
        assert run("evaluate", "--model", model, "--matrix", simulated / "test.csv",
                   "--covariates", simulated / "test_covariates.csv", "--out", out) == 0
        assert 0 <= json.loads(out.read_text())["auc"] <= 1

    def test_bad_train_config(self, simulated, tmp_path):
        cfg = tmp_path / "train.json"
        cfg.write_text(json.dumps({"learning_rte": 0.1}))
        assert run("train", "--matrix", simulated / "train.csv", "--covariates",
                   simulated / "train_covariates.csv", "--config", cfg,
                   "--out", tmp_path / "m.json") == 2


class TestExperiment:
    def test_figure1_csv_columns(self, tmp_path):
        assert run("experiment", "figure1", "--out-dir", tmp_path, *FAST,
                   "--override", "sweep={\"data.sim.n\": [150]}",
                   "--override", "data.sim.p=30") == 0
        with open(tmp_path / "n_150" / "report.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["method", "trial", "fold", "test_set_kind", "auc"]
        assert {r[0] for r in rows[1:]} == {"logreg", "logreg+ONION", "logreg+ANCOVA", "MLP",
                                            "DANN"}

    def test_table1_layout(self, tmp_path, capsys):
        assert run("experiment", "table1_style", "--out-dir", tmp_path, *FAST,
                   "--override", "data.cohort.n_autosomal=40") == 0
        table = capsys.readouterr().out
        assert "entire test set" in table and "confounded test set" in table
        rows = [line.split()[0] for line in table.splitlines()[2:] if line.strip()]
        assert rows == ["logreg", "logreg+ONION", "MLP", "DANN"]

    def test_missing_data_file(self, tmp_path, capsys):
        cfg = {"data": {"source": "files", "matrix": str(tmp_path / "nope.csv"),
                        "covariates": str(tmp_path / "nope_cov.csv")},
               "methods": [{"name": "a", "model": "logreg"}]}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert run("experiment", path, "--out-dir", tmp_path) == 2
        assert "nope.csv" in capsys.readouterr().err

    def test_schema_errors_name_paths(self, tmp_path, capsys):
        cfg = {"data": {"source": "simulate", "sim": {"sigma": -1}},
               "methods": [{"name": "a", "model": "svm"}], "trials": 0}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert run("experiment", path) == 2
        err = capsys.readouterr().err
        for where in ("$.data.sim.sigma", "$.methods[0].model", "$.trials"):
            assert where in err

    def test_files_source(self, tmp_path):
        rng = np.random.default_rng(0)
        n = 120
        y = np.arange(n) % 2
        X = rng.normal(size=(n, 6)) + y[:, None]
        cov = CovariateSet([rng.normal(size=n)], y.astype(float), ["age"], ["continuous"])
        mx, cv = write_dataset(tmp_path / "d", Dataset(X, cov))
        cfg = {"trials": 1, "data": {"source": "files", "matrix": str(mx), "covariates": str(cv)},
               "confounding": {"kind": "none"}, "train": {"iterations": 100},
               "methods": [{"name": "lr", "model": "logreg", "onion": True}]}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert run("experiment", path, "--out-dir", tmp_path / "out", "--workers", "1") == 0
        doc = json.loads((tmp_path / "out" / "report.json").read_text())
        assert doc["aggregates"]["lr"]["entire"]["mean"] > 0.8

    def test_output_dir_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
        assert run("simulate", "--n", 20, "--p", 4) == 0
        assert (tmp_path / "env" / "manifest.json").exists()
