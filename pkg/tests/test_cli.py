import json

import numpy as np
import pandas as pd
import pytest

from damex import DamexParams, fit_damex, score_batch
from damex.cli import main
from damex.io import read_csv, write_dataset
from damex.simulation import two_d_benchmark


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    train, test = two_d_benchmark(n_train=3000, n_test_normal=500, n_anomalies=50, rng=11)
    write_dataset(root / "train.csv", train)
    write_dataset(root / "test.csv", test)
    return root, train, test


class TestFitScore:
    def test_matches_library(self, files, capsys):
        root, train, test = files
        assert main(["fit", str(root / "train.csv"), "--out", str(root / "m.json"),
                     "--epsilon", "0.1", "--census-out", str(root / "census.csv")]) == 0
        out = capsys.readouterr().out
        assert "charged cones:" in out and "mass by cone dimension:" in out
        assert main(["score", str(root / "m.json"), str(root / "test.csv"),
                     "--label-col", "label", "--out", str(root / "s.csv")]) == 0
        scored = pd.read_csv(root / "s.csv", dtype={"cone": str, "assigned_cone": str})
        reread = read_csv(root / "train.csv")
        model = fit_damex(reread, DamexParams(epsilon=0.1))
        expected = score_batch(model, read_csv(root / "test.csv", label_col="label"))
        got = np.array([float(v) for v in open(root / "s.csv").read().split("\n")[1:-1]
                        for v in [v.split(",")[1]]])
        np.testing.assert_array_equal(got, expected)
        assert list(scored.columns) == ["row", "score", "is_extreme", "cone", "assigned_cone"]
        uncharged = scored["score"] == 0
        assert (scored.loc[uncharged, "cone"] == "none-charged").all()
        assert (scored.loc[~uncharged, "cone"] == scored.loc[~uncharged, "assigned_cone"]).all()
        assert pd.read_csv(root / "census.csv").columns.tolist() == ["dimension", "mass", "fraction"]

    def test_empty_test_file(self, files, capsys):
        root, _, _ = files
        main(["fit", str(root / "train.csv"), "--out", str(root / "m2.json")])
        (root / "empty.csv").write_text("x1,x2\n")
        capsys.readouterr()
        assert main(["score", str(root / "m2.json"), str(root / "empty.csv")]) == 0
        assert capsys.readouterr().out == "row,score,is_extreme,cone,assigned_cone\n"

    def test_wrong_dimension(self, files):
        root, _, _ = files
        main(["fit", str(root / "train.csv"), "--out", str(root / "m3.json")])
        (root / "three.csv").write_text("a,b,c\n1,2,3\n")
        assert main(["score", str(root / "m3.json"), str(root / "three.csv")]) == 2

    def test_k_too_large(self, files, tmp_path):
        root, _, _ = files
        assert main(["fit", str(root / "train.csv"), "--out", str(tmp_path / "m.json"),
                     "--k", "100000"]) == 2
        assert not (tmp_path / "m.json").exists()

    def test_missing_required_flag(self, files):
        root, _, _ = files
        with pytest.raises(SystemExit) as exc:
            main(["fit", str(root / "train.csv")])
        assert exc.value.code == 1

    def test_bad_input_file(self, tmp_path):
        (tmp_path / "bad.csv").write_text("x,y\n1,zz\n")
        assert main(["fit", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "m.json")]) == 2
        assert main(["fit", str(tmp_path / "absent.csv"), "--out", str(tmp_path / "m.json")]) == 2

    def test_conflicting_k_options(self, files, tmp_path):
        root, _, _ = files
        assert main(["fit", str(root / "train.csv"), "--out", str(tmp_path / "m.json"),
                     "--k", "10", "--k-power", "0.5"]) == 1

    def test_mu_min_frac_sweep_monotone(self, tmp_path, capsys):
        assert main(["simulate", "--d", "6", "--n", "20000", "--K", "5", "--seed", "2",
                     "--out", str(tmp_path / "sim.csv")]) == 0
        counts = []
        for frac in ("0", "0.002", "0.01", "0.05"):
            capsys.readouterr()
            main(["fit", str(tmp_path / "sim.csv"), "--out", str(tmp_path / "m.json"),
                  "--epsilon", "0.05", "--mu-min-frac", frac])
            line = [s for s in capsys.readouterr().out.splitlines() if s.startswith("charged cones:")][0]
            counts.append(int(line.split()[2]))
        assert counts == sorted(counts, reverse=True)
        assert counts[0] > counts[-1]


class TestOtherCommands:
    def test_simulate_subsets(self, tmp_path):
        assert main(["simulate", "--d", "4", "--n", "200", "--subsets", "1,2;3;4",
                     "--out", str(tmp_path / "s.csv"), "--support-out", str(tmp_path / "sup.txt")]) == 0
        assert read_csv(tmp_path / "s.csv").values.shape == (200, 4)
        assert (tmp_path / "sup.txt").read_text() == "1 2\n3\n4\n"

    def test_simulate_needs_support(self, tmp_path):
        assert main(["simulate", "--d", "4", "--n", "10", "--out", str(tmp_path / "s.csv")]) == 1

    def test_recover(self, tmp_path):
        assert main(["recover", "--d", "5", "--K", "2,3", "--n", "5000", "--runs", "2",
                     "--out", str(tmp_path / "r.csv")]) == 0
        table = pd.read_csv(tmp_path / "r.csv")
        assert table[["K", "n", "runs"]].values.tolist() == [[2, 5000, 2], [3, 5000, 2]]

    def test_evaluate(self, files, tmp_path):
        root, train, test = files
        data = type(train)(np.vstack([train.values[:1000], test.values]),
                           np.r_[np.zeros(1000, int), test.labels])
        write_dataset(tmp_path / "all.csv", data)
        assert main(["evaluate", str(tmp_path / "all.csv"), "--splits", "2", "--trees", "10",
                     "--epsilon", "0.1", "--out", str(tmp_path / "e.csv"),
                     "--curves-dir", str(tmp_path / "curves")]) == 0
        table = pd.read_csv(tmp_path / "e.csv")
        assert {"metric", "mean", "std"} == set(table.columns)
        assert (tmp_path / "curves" / "pr_combined.csv").exists()

    def test_stability(self, files, tmp_path, capsys):
        root, _, _ = files
        assert main(["stability", str(root / "train.csv"), "--k-grid", "30,60,120",
                     "--epsilon-grid", "0.1,0.2", "--out", str(tmp_path / "st.csv")]) == 0
        assert len(pd.read_csv(tmp_path / "st.csv")) == 6
        assert "recommended" in capsys.readouterr().err

    def test_levelsets(self, tmp_path):
        assert main(["levelsets", "--n", "2000", "--grid", "5", "--out", str(tmp_path / "l.csv")]) == 0
        grid = pd.read_csv(tmp_path / "l.csv")
        assert len(grid) == 25 and (grid["score"] >= 0).all()

    def test_prepare_missing_raw(self, tmp_path):
        assert main(["prepare", "shuttle", str(tmp_path / "nope"), "--out-dir", str(tmp_path)]) == 2

    def test_manifest_printed(self, tmp_path, capsys):
        rows = np.column_stack([np.arange(30).reshape(-1, 1) * np.ones((1, 9)), np.r_[np.ones(28), 2, 3]])
        np.savetxt(tmp_path / "shuttle.trn", rows, fmt="%d")
        assert main(["prepare", "shuttle", str(tmp_path / "shuttle.trn"), "--out-dir", str(tmp_path)]) == 0
        assert json.loads(capsys.readouterr().out)["n_anomalies"] == 2
