"""Dataset loading, validation and first-stage design construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .basis import SieveSpec
from .design import sieve_design


class DataError(ValueError):
    """The input file violates a dataset invariant."""


@dataclass(frozen=True)
class Dataset:
    """Observed sample ``(y, X, d)``.

    ``y`` is NaN exactly where ``d == 0``. ``kinds[j]`` is ``continuous``
    or ``binary``; one-hot columns of categorical inputs are binary.
    """

    y: np.ndarray
    X: np.ndarray
    d: np.ndarray
    names: tuple
    kinds: tuple

    @property
    def n(self):
        return self.d.size

    @property
    def K(self):
        return int(self.d.max())

    @property
    def continuous(self):
        return tuple(k == "continuous" for k in self.kinds)


def _rows(mask):
    # 1-based data row numbers (header excluded)
    return (np.flatnonzero(mask) + 1).tolist()


def validate(y, X, d, names=None):
    """Check the dataset invariants, raising :class:`DataError` on failure."""
    d = np.asarray(d)
    if d.ndim != 1 or d.size == 0:
        raise DataError("category column must be a nonempty vector")
    if not np.all(np.isfinite(d.astype(float))) or np.any(d != np.round(d)) or np.any(d < 0):
        raise DataError("category column must hold non-negative integers")
    d = d.astype(int)
    y = np.asarray(y, dtype=float)
    bad = (d == 0) & ~np.isnan(y)
    if bad.any():
        raise DataError(f"outcome present with category 0 in rows {_rows(bad)}")
    bad = (d > 0) & np.isnan(y)
    if bad.any():
        raise DataError(f"outcome missing with category >= 1 in rows {_rows(bad)}")
    if np.any(np.isinf(y)):
        raise DataError(f"outcome not finite in rows {_rows(np.isinf(y))}")
    K = int(d.max())
    missing = sorted(set(range(K + 1)) - set(np.unique(d).tolist()))
    if missing:
        raise DataError(f"categories {missing} unobserved between 0 and {K}")
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != d.size:
        raise DataError("covariate matrix does not match the category column")
    bad = ~np.all(np.isfinite(X), axis=1)
    if bad.any():
        raise DataError(f"non-finite covariates in rows {_rows(bad)}")
    A = np.hstack([np.ones((d.size, 1)), X])
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise DataError("covariates are perfectly collinear (with the intercept)")
    return y, X, d


def load_dataset(path, schema: dict) -> Dataset:
    """Read a CSV and build a validated :class:`Dataset`.

    Parameters
    ----------
    path : str or path-like
    schema : dict
        ``outcome`` and ``category`` name the Y and D columns;
        ``continuous``, ``binary`` and ``categorical`` list covariates.
        Categorical columns are one-hot encoded with the first sorted level
        dropped. A missing outcome is an empty field.
    """
    for key in ("outcome", "category"):
        if key not in schema:
            raise DataError(f"schema lacks the {key!r} column")
    df = pd.read_csv(path, float_precision="round_trip")
    need = ([schema["outcome"], schema["category"]] + list(schema.get("continuous", []))
            + list(schema.get("binary", [])) + list(schema.get("categorical", [])))
    absent = [c for c in need if c not in df.columns]
    if absent:
        raise DataError(f"columns not found: {absent}")
    blocks, names, kinds = [], [], []
    for c in schema.get("continuous", []):
        blocks.append(df[c].to_numpy(float)[:, None])
        names.append(c)
        kinds.append("continuous")
    for c in schema.get("binary", []):
        v = df[c].to_numpy(float)
        if not np.all(np.isin(v, (0.0, 1.0))):
            raise DataError(f"binary column {c!r} has values other than 0/1")
        blocks.append(v[:, None])
        names.append(c)
        kinds.append("binary")
    for c in schema.get("categorical", []):
        col = df[c]
        if col.isna().any():
            raise DataError(f"categorical column {c!r} has missing values in rows {_rows(col.isna())}")
        levels = sorted(col.astype(str).unique())
        for lev in levels[1:]:
            blocks.append((col.astype(str) == lev).to_numpy(float)[:, None])
            names.append(f"{c}={lev}")
            kinds.append("binary")
    n = len(df)
    X = np.hstack(blocks) if blocks else np.empty((n, 0))
    dcol = df[schema["category"]]
    if dcol.isna().any():
        raise DataError(f"category missing in rows {_rows(dcol.isna())}")
    y, X, d = validate(df[schema["outcome"]].to_numpy(float), X, dcol.to_numpy(float))
    return Dataset(y, X, d, tuple(names), tuple(kinds))


def write_dataset(ds: Dataset, path, outcome: str = "y", category: str = "d") -> dict:
    """Write ``ds`` as CSV; returns the schema that reloads it exactly."""
    df = pd.DataFrame(ds.X, columns=list(ds.names))
    df.insert(0, category, ds.d)
    df.insert(0, outcome, ds.y)
    df.to_csv(path, index=False, float_format="%.17g", na_rep="")
    return {
        "outcome": outcome,
        "category": category,
        "continuous": [n for n, k in zip(ds.names, ds.kinds) if k == "continuous"],
        "binary": [n for n, k in zip(ds.names, ds.kinds) if k == "binary"],
    }


def build_first_stage_design(ds: Dataset, spec: SieveSpec, linear_index: bool = False,
                             pair_spec: SieveSpec | None = None,
                             interact_binary: bool = False) -> np.ndarray:
    """Selection-equation design from raw covariates (no intercept added).

    Continuous columns get univariate spline blocks, each pair of them a
    tensor block; binary columns are appended linearly. With
    ``linear_index`` the covariates are returned unchanged.
    """
    if linear_index:
        return ds.X.copy()
    if not any(ds.continuous):
        raise DataError("a sieve first stage needs at least one continuous covariate")
    return sieve_design(ds.X, ds.continuous, spec, interact_binary, pair_spec)


def from_simulation(sim) -> Dataset:
    """View a simulated sample as a :class:`Dataset`."""
    kinds = tuple("continuous" if c else "binary" for c in sim.continuous)
    y, X, d = validate(sim.y, sim.X, sim.d)
    return Dataset(y, X, d, tuple(sim.names), kinds)
