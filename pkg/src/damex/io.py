"""CSV ingestion, model persistence and benchmark dataset preparation."""

from __future__ import annotations

import json
import os
import tempfile
from collections.abc import Sequence
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pandas as pd

from .core import (
    AUTO,
    ConeMassMap,
    DamexModel,
    DamexParams,
    DataError,
    Dataset,
    EmpiricalMarginals,
    FeatureSubset,
)

MODEL_FORMAT = "damex-model"
MODEL_VERSION = 1


@contextmanager
def atomic_write(path):
    """Write text to a temporary file next to ``path``, then rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- CSV ---------------------------------------------------------------------


def read_csv(path, label_col: str | None = None, usecols: Sequence[str] | None = None) -> Dataset:
    """Read a comma-separated file with a header row into a :class:`Dataset`.

    Every non-label column must be numeric; the first offending cell is
    reported by (data row, column) position, both 0-based.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: no header row") from None
    except pd.errors.ParserError as exc:
        raise DataError(f"{path}: {exc}") from None
    labels = None
    if label_col is not None:
        if label_col not in frame.columns:
            raise DataError(f"{path}: label column {label_col!r} not found")
        raw = pd.to_numeric(frame.pop(label_col), errors="coerce")
        if raw.isna().any() or not raw.isin([0, 1]).all():
            bad = int(np.flatnonzero(raw.isna() | ~raw.isin([0, 1]))[0])
            raise DataError(f"{path}: label at row {bad} must be 0 or 1")
        labels = raw.to_numpy().astype(np.int8)
    if usecols is not None:
        missing = [c for c in usecols if c not in frame.columns]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        frame = frame[list(usecols)]
    if frame.shape[1] == 0:
        raise DataError(f"{path}: no feature columns")
    values = np.empty(frame.shape, dtype=np.float64)
    for j, name in enumerate(frame.columns):
        col = _parse_floats(frame[name].to_numpy(dtype=str))
        bad = np.flatnonzero(~np.isfinite(col))
        if len(bad):
            i = int(bad[0])
            raise DataError(
                f"{path}: invalid value at ({i}, {j}) [column {name!r}]: {frame[name].iloc[i]!r}"
            )
        values[:, j] = col
    return Dataset(values, labels, tuple(frame.columns))


def _parse_floats(cells: np.ndarray) -> np.ndarray:
    # numpy's string-to-float conversion is correctly rounded, unlike pandas'
    # fast parser, so values written with 17 digits come back bit-exact
    try:
        return cells.astype(np.float64)
    except ValueError:
        out = np.empty(len(cells))
        for i, cell in enumerate(cells):
            try:
                out[i] = float(cell)
            except ValueError:
                out[i] = np.nan
        return out


def write_csv(path, columns: dict[str, Sequence]) -> None:
    """Write named columns; floats are written with 17 significant digits."""
    frame = pd.DataFrame(columns)
    with atomic_write(path) as fh:
        frame.to_csv(fh, index=False, float_format="%.17g", lineterminator="\n")


def write_dataset(path, data: Dataset, label_col: str = "label") -> None:
    names = data.feature_names or tuple(f"x{j + 1}" for j in range(data.d))
    cols = {name: data.values[:, j] for j, name in enumerate(names)}
    if data.labels is not None:
        cols[label_col] = data.labels.astype(int)
    write_csv(path, cols)


# -- model persistence ---------------------------------------------------------


def model_to_dict(model: DamexModel, feature_names: Sequence[str] | None = None) -> dict:
    p = model.params
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "params": {
            "k": p.k,
            "epsilon": p.epsilon,
            "mu_min": p.mu_min,
            "mu_min_value": model.mu_min_value,
            "n": model.n,
            "d": model.d,
        },
        "n_extreme": model.masses.n_extreme,
        "raw_n_charged": model.raw_n_charged,
        "feature_names": list(feature_names) if feature_names else None,
        "marginals": model.marginals.sorted_columns.tolist(),
        "cones": [
            {"features": list(s.one_based()), "mass": c / p.k, "count": c}
            for s, c in model.masses.counts.items()
        ],
    }


def model_from_dict(doc: dict) -> DamexModel:
    if doc.get("format") != MODEL_FORMAT:
        raise DataError("not a DAMEX model file")
    if doc.get("version") != MODEL_VERSION:
        raise DataError(f"unsupported model version {doc.get('version')!r}")
    p = doc["params"]
    mu_min = p["mu_min"] if p["mu_min"] == AUTO else float(p["mu_min"])
    params = DamexParams(int(p["k"]), float(p["epsilon"]), mu_min)
    cols = np.array(doc["marginals"], dtype=np.float64).reshape(int(p["d"]), int(p["n"]))
    counts = {}
    for cone in doc["cones"]:
        subset = FeatureSubset.from_one_based(cone["features"])
        count = int(cone["count"])
        if cone["mass"] != count / params.k:
            raise DataError(f"cone {subset}: mass does not match count / k")
        counts[subset] = count
    masses = ConeMassMap(counts, params.k, int(doc["n_extreme"]))
    return DamexModel(
        EmpiricalMarginals(cols), masses, params,
        mu_min_value=float(p["mu_min_value"]), raw_n_charged=int(doc.get("raw_n_charged", 0)),
    )


def save_model(model: DamexModel, path, feature_names: Sequence[str] | None = None) -> None:
    with atomic_write(path) as fh:
        json.dump(model_to_dict(model, feature_names), fh)


def load_model(path) -> DamexModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed model file ({exc})") from None
    return model_from_dict(doc)


def load_model_feature_names(path) -> list[str] | None:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh).get("feature_names")


# -- benchmark preparation -------------------------------------------------------

KDD_COLUMNS = (
    "duration protocol_type service flag src_bytes dst_bytes land wrong_fragment urgent "
    "hot num_failed_logins logged_in num_compromised root_shell su_attempted num_root "
    "num_file_creations num_shells num_access_files num_outbound_cmds is_host_login "
    "is_guest_login count srv_count serror_rate srv_serror_rate rerror_rate "
    "srv_rerror_rate same_srv_rate diff_srv_rate srv_diff_host_rate dst_host_count "
    "dst_host_srv_count dst_host_same_srv_rate dst_host_diff_srv_rate "
    "dst_host_same_src_port_rate dst_host_srv_diff_host_rate dst_host_serror_rate "
    "dst_host_srv_serror_rate dst_host_rerror_rate dst_host_srv_rerror_rate"
).split()
KDD_CATEGORICAL = ("protocol_type", "service", "flag")

# anomaly ratios quoted for the benchmarks, in percent
EXPECTED_ANOMALY_PERCENT = {"shuttle": 7.15, "forestcover": 0.9, "SF": 0.3}


class RecipeError(DataError):
    pass


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise RecipeError(f"recipe precondition failed: {message}")


def _read_table(paths, sep, header=None) -> pd.DataFrame:
    frames = []
    for p in paths:
        if not Path(p).exists():
            raise RecipeError(f"recipe precondition failed: raw file {p} not found")
        frames.append(pd.read_csv(p, sep=sep, header=header, engine="c" if sep == "," else "python"))
    return pd.concat(frames, ignore_index=True)


def _shuttle(paths, rng) -> tuple[pd.DataFrame, np.ndarray, dict]:
    df = _read_table(paths, sep=r"\s+")
    _require(df.shape[1] == 10, f"shuttle rows need 10 columns, got {df.shape[1]}")
    cls = df.pop(9).astype(int)
    _require((cls == 1).any(), "no class-1 (normal) rows in shuttle data")
    keep = (cls != 4).to_numpy()
    df.columns = [f"A{j + 1}" for j in range(9)]
    labels = (cls[keep] != 1).to_numpy()
    return df[keep], labels, {"normal": "class 1", "anomaly": "classes 2,3,5,6,7", "dropped": "class 4"}


def _forestcover(paths, rng):
    df = _read_table(paths, sep=",")
    _require(df.shape[1] == 55, f"covertype rows need 55 columns, got {df.shape[1]}")
    cls = df.pop(54).astype(int)
    _require((cls == 2).any(), "no class-2 rows in covertype data")
    _require((cls == 4).any(), "no class-4 rows in covertype data")
    keep = cls.isin([2, 4]).to_numpy()
    df.columns = [f"A{j + 1}" for j in range(54)]
    return df[keep], (cls[keep] == 4).to_numpy(), {"normal": "class 2", "anomaly": "class 4"}


def _kdd_frame(paths) -> tuple[pd.DataFrame, np.ndarray]:
    df = _read_table(paths, sep=",")
    _require(df.shape[1] == 42, f"KDD rows need 42 columns, got {df.shape[1]}")
    df.columns = [*KDD_COLUMNS, "label"]
    attack = (df.pop("label").astype(str).str.rstrip(".") != "normal").to_numpy()
    _require((~attack).any(), "no normal connections in KDD data")
    return df, attack


def _encode(df: pd.DataFrame, columns) -> pd.DataFrame:
    df = df.copy()
    for c in columns:
        if c in df.columns:
            df[c] = pd.Categorical(df[c].astype(str)).codes.astype(float)
    return df


def _sa(paths, rng):
    df, attack = _kdd_frame(paths)
    keep = ~attack | (rng.random(len(attack)) < 0.01)
    return (
        _encode(df[keep], KDD_CATEGORICAL), attack[keep],
        {"normal": "all normal connections", "anomaly": "1% random sample of attacks",
         "categorical": "protocol_type, service, flag as ordinal codes"},
    )


def _sf_base(paths):
    df, attack = _kdd_frame(paths)
    keep = (pd.to_numeric(df["logged_in"]) > 0).to_numpy()
    _require(keep.any(), "no rows with logged_in > 0")
    return df[keep], attack[keep]


def _sf(paths, rng):
    df, attack = _sf_base(paths)
    cols = ["duration", "service", "src_bytes", "dst_bytes"]
    return (
        _encode(df[cols], ["service"]), attack,
        {"filter": "logged_in > 0", "columns": cols, "categorical": "service as ordinal codes"},
    )


def _service(name):
    def recipe(paths, rng):
        df, attack = _sf_base(paths)
        keep = (df["service"].astype(str) == name).to_numpy()
        _require(keep.any(), f"no {name} rows after the SF filter")
        cols = ["duration", "src_bytes", "dst_bytes"]
        return df.loc[keep, cols], attack[keep], {"filter": f"logged_in > 0 and service == {name}", "columns": cols}
    return recipe


RECIPES = {
    "shuttle": _shuttle,
    "forestcover": _forestcover,
    "SA": _sa,
    "SF": _sf,
    "http": _service("http"),
    "smtp": _service("smtp"),
}


def prepare_dataset(name: str, raw_files: Sequence, out_dir, seed: int = 0,
                    test_fraction: float | None = None) -> dict:
    """Apply a benchmark recipe to local raw files and write labelled CSVs.

    Writes ``<name>.csv`` (features plus a ``label`` column, 1 = anomaly) and
    ``<name>.manifest.json``. With ``test_fraction``, also writes a random
    ``<name>_train.csv`` holding only the normal rows of the training part and
    ``<name>_test.csv`` holding the rest.
    """
    if name not in RECIPES:
        raise ValueError(f"unknown dataset {name!r}; choose from {sorted(RECIPES)}")
    rng = np.random.default_rng(seed)
    frame, labels, notes = RECIPES[name]([Path(p) for p in raw_files], rng)
    values = frame.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    if not np.isfinite(values).all():
        r, c = np.argwhere(~np.isfinite(values))[0]
        raise RecipeError(f"recipe precondition failed: non-numeric value at ({r}, {c})")
    data = Dataset(values, labels.astype(np.int8), tuple(str(c) for c in frame.columns))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_dataset(out_dir / f"{name}.csv", data)
    manifest = {
        "dataset": name,
        "raw_files": [str(p) for p in raw_files],
        "n_samples": data.n,
        "n_features": data.d,
        "n_anomalies": int(data.labels.sum()),
        "anomaly_percent": 100.0 * float(data.labels.mean()),
        "expected_anomaly_percent": EXPECTED_ANOMALY_PERCENT.get(name),
        "columns": list(data.feature_names),
        "seed": seed,
        **notes,
    }
    if test_fraction is not None:
        if not 0.0 < test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        perm = rng.permutation(data.n)
        cut = int(round((1.0 - test_fraction) * data.n))
        train, test = data.subset(np.sort(perm[:cut])), data.subset(np.sort(perm[cut:]))
        train = train.subset(train.labels == 0)
        write_dataset(out_dir / f"{name}_train.csv", train)
        write_dataset(out_dir / f"{name}_test.csv", test)
        manifest.update(n_train=train.n, n_test=test.n)
    with atomic_write(out_dir / f"{name}.manifest.json") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest
