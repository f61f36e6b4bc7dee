import json
import os
from pathlib import Path

import numpy as np
import pytest

from damex import DamexParams, DataError, Dataset, fit_damex, score_batch
from damex.io import (
    KDD_COLUMNS,
    RecipeError,
    load_model,
    load_model_feature_names,
    model_from_dict,
    model_to_dict,
    prepare_dataset,
    read_csv,
    save_model,
    write_dataset,
)


class TestCsv:
    def test_round_trip_exact(self, tmp_path, rng):
        X = rng.standard_cauchy(size=(50, 3)) * 10.0 ** rng.integers(-8, 8, size=(50, 3))
        data = Dataset(X, rng.integers(0, 2, size=50), ("a", "b", "c"))
        write_dataset(tmp_path / "d.csv", data)
        back = read_csv(tmp_path / "d.csv", label_col="label")
        np.testing.assert_allclose(back.values, X, rtol=0)
        np.testing.assert_array_equal(back.labels, data.labels)
        assert back.feature_names == ("a", "b", "c")

    def test_bad_value_location(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("x,y\n1,2\n3,oops\n")
        with pytest.raises(DataError, match=r"invalid value at \(1, 1\)"):
            read_csv(p)

    def test_nan_rejected(self, tmp_path):
        p = tmp_path / "nan.csv"
        p.write_text("x,y\n1,nan\n")
        with pytest.raises(DataError, match=r"\(0, 1\)"):
            read_csv(p)

    def test_labels_must_be_binary(self, tmp_path):
        p = tmp_path / "lab.csv"
        p.write_text("x,label\n1,0\n2,3\n")
        with pytest.raises(DataError, match="row 1"):
            read_csv(p, label_col="label")

    def test_header_only(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("x,y\n")
        assert read_csv(p).n == 0

    def test_usecols(self, tmp_path):
        p = tmp_path / "u.csv"
        p.write_text("x,y,z\n1,2,3\n")
        assert read_csv(p, usecols=["z", "x"]).values.tolist() == [[3.0, 1.0]]
        with pytest.raises(DataError, match="missing"):
            read_csv(p, usecols=["w"])


class TestModelFile:
    def test_round_trip_bitwise(self, tmp_path, small_model, rng):
        small_model = small_model[1]
        save_model(small_model, tmp_path / "m.json", ["p", "q", "r"][: small_model.d])
        back = load_model(tmp_path / "m.json")
        X = rng.pareto(1.0, size=(500, small_model.d))
        np.testing.assert_array_equal(score_batch(back, X), score_batch(small_model, X))
        assert dict(back.masses.counts) == dict(small_model.masses.counts)
        assert back.mu_min_value == small_model.mu_min_value
        assert load_model_feature_names(tmp_path / "m.json") is not None

    def test_cones_one_based(self, small_model):
        small_model = small_model[1]
        doc = model_to_dict(small_model)
        for cone in doc["cones"]:
            assert min(cone["features"]) >= 1
            assert cone["mass"] == cone["count"] / doc["params"]["k"]

    def test_version_check(self, small_model):
        small_model = small_model[1]
        doc = model_to_dict(small_model)
        doc["version"] = 99
        with pytest.raises(DataError, match="version"):
            model_from_dict(doc)

    def test_mass_mismatch(self, small_model):
        small_model = small_model[1]
        doc = json.loads(json.dumps(model_to_dict(small_model)))
        doc["cones"][0]["mass"] += 1.0
        with pytest.raises(DataError, match="mass"):
            model_from_dict(doc)

    def test_malformed(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text("{not json")
        with pytest.raises(DataError, match="malformed"):
            load_model(p)

    def test_write_is_atomic(self, tmp_path, small_model):
        small_model = small_model[1]
        p = tmp_path / "m.json"
        p.write_text("old")
        with pytest.raises(TypeError):
            save_model(small_model, p, feature_names=[object()])
        assert p.read_text() == "old"
        assert os.listdir(tmp_path) == ["m.json"]


def _shuttle_file(path, rng):
    cls = np.r_[np.ones(40, int), [2, 3, 4, 4, 5, 6, 7]]
    rows = np.column_stack([rng.integers(-50, 100, size=(len(cls), 9)), cls])
    np.savetxt(path, rows, fmt="%d")


def _kdd_file(path, rng, n=60):
    lines = []
    for i in range(n):
        vals = [str(rng.integers(0, 500)) for _ in KDD_COLUMNS]
        vals[1] = ["tcp", "udp"][i % 2]
        vals[2] = ["http", "smtp", "ftp"][i % 3]
        vals[3] = "SF"
        vals[KDD_COLUMNS.index("logged_in")] = str(i % 4 != 0)
        vals[KDD_COLUMNS.index("logged_in")] = "1" if i % 4 else "0"
        lines.append(",".join(vals + ["normal." if i % 5 else "smurf."]))
    Path(path).write_text("\n".join(lines) + "\n")


class TestRecipes:
    def test_shuttle(self, tmp_path, rng):
        _shuttle_file(tmp_path / "shuttle.trn", rng)
        m = prepare_dataset("shuttle", [tmp_path / "shuttle.trn"], tmp_path / "out")
        assert m["n_samples"] == 45 and m["n_anomalies"] == 5
        data = read_csv(tmp_path / "out" / "shuttle.csv", label_col="label")
        assert data.d == 9
        assert json.loads((tmp_path / "out" / "shuttle.manifest.json").read_text())["dataset"] == "shuttle"

    def test_split_files(self, tmp_path, rng):
        _shuttle_file(tmp_path / "s.trn", rng)
        m = prepare_dataset("shuttle", [tmp_path / "s.trn"], tmp_path, test_fraction=0.3, seed=4)
        train = read_csv(tmp_path / "shuttle_train.csv", label_col="label")
        test = read_csv(tmp_path / "shuttle_test.csv", label_col="label")
        assert train.labels.sum() == 0
        assert m["n_train"] == train.n and m["n_test"] == test.n

    def test_forestcover_missing_class(self, tmp_path, rng):
        rows = np.column_stack([rng.integers(0, 9, size=(20, 54)), np.full(20, 4)])
        np.savetxt(tmp_path / "covtype.data", rows, fmt="%d", delimiter=",")
        with pytest.raises(RecipeError, match="recipe precondition failed"):
            prepare_dataset("forestcover", [tmp_path / "covtype.data"], tmp_path)

    def test_forestcover(self, tmp_path, rng):
        cls = np.r_[np.full(30, 2), np.full(3, 4), np.full(5, 1)]
        rows = np.column_stack([rng.integers(0, 9, size=(len(cls), 54)), cls])
        np.savetxt(tmp_path / "covtype.data", rows, fmt="%d", delimiter=",")
        m = prepare_dataset("forestcover", [tmp_path / "covtype.data"], tmp_path)
        assert (m["n_samples"], m["n_anomalies"], m["n_features"]) == (33, 3, 54)

    @pytest.mark.parametrize("name,d", [("SA", 41), ("SF", 4), ("http", 3), ("smtp", 3)])
    def test_kdd(self, tmp_path, rng, name, d):
        _kdd_file(tmp_path / "kdd.csv", rng)
        m = prepare_dataset(name, [tmp_path / "kdd.csv"], tmp_path)
        assert m["n_features"] == d
        data = read_csv(tmp_path / f"{name}.csv", label_col="label")
        assert np.isfinite(data.values).all()

    def test_missing_raw_file(self, tmp_path):
        with pytest.raises(RecipeError, match="not found"):
            prepare_dataset("shuttle", [tmp_path / "nope"], tmp_path)

    def test_unknown_name(self, tmp_path):
        with pytest.raises(ValueError, match="unknown dataset"):
            prepare_dataset("mnist", [], tmp_path)
