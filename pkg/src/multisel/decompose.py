"""Three-way decomposition of a between-group mean outcome gap."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

COMPONENTS = ("raw", "structural_within", "covariate_composition", "between_sorting")


@dataclass(frozen=True)
class GroupStats:
    """Category-level summaries for groups A and B.

    Parameters
    ----------
    mean_a, mean_b : array_like
        Mean outcome of each category within group A and group B.
    share_a, share_b : array_like
        Category shares of each group; each must sum to one.
    group_coef : array_like
        Coefficient on the group-A indicator in each category's outcome
        regression (any estimator).
    categories : tuple, optional
        Labels, default ``1..K``.
    """

    mean_a: np.ndarray
    mean_b: np.ndarray
    share_a: np.ndarray
    share_b: np.ndarray
    group_coef: np.ndarray
    categories: tuple = ()

    def __post_init__(self):
        arrs = {}
        for name in ("mean_a", "mean_b", "share_a", "share_b", "group_coef"):
            a = np.asarray(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite values")
            arrs[name] = a
            object.__setattr__(self, name, a)
        K = arrs["mean_a"].size
        if any(a.size != K for a in arrs.values()):
            raise ValueError("category counts differ across inputs")
        for name in ("share_a", "share_b"):
            s = arrs[name]
            if np.any(s < 0) or abs(s.sum() - 1.0) > 1e-9:
                raise ValueError(f"{name} must be non-negative and sum to one")
        cats = tuple(self.categories) or tuple(range(1, K + 1))
        if len(cats) != K:
            raise ValueError("category labels do not match the inputs")
        object.__setattr__(self, "categories", cats)


def decompose(gs: GroupStats) -> dict:
    """Split ``raw = sum_k s_k^A w_k^A - sum_k s_k^B w_k^B`` into three parts.

    * structural within: ``sum_k s_k^A (-b_k)``
    * covariate composition: ``sum_k s_k^A ((w_k^A - w_k^B) + b_k)``
    * between-category sorting: ``sum_k w_k^B (s_k^A - s_k^B)``

    The three parts add up to ``raw`` identically.
    """
    sa, sb = gs.share_a, gs.share_b
    wa, wb, b = gs.mean_a, gs.mean_b, gs.group_coef
    return {
        "raw": float(sa @ wa - sb @ wb),
        "structural_within": float(sa @ (-b)),
        "covariate_composition": float(sa @ ((wa - wb) + b)),
        "between_sorting": float(wb @ (sa - sb)),
    }


def read_group_stats(path) -> GroupStats:
    """Load ``category, mean_a, mean_b, share_a, share_b, group_coef`` from CSV."""
    df = pd.read_csv(path)
    need = ["mean_a", "mean_b", "share_a", "share_b", "group_coef"]
    missing = [c for c in need if c not in df.columns]
    if missing:
        raise ValueError(f"group statistics file lacks columns {missing}")
    cats = tuple(df["category"].tolist()) if "category" in df.columns else ()
    return GroupStats(*(df[c].to_numpy(float) for c in need), categories=cats)


def write_components(components: dict, path=None) -> str:
    df = pd.DataFrame({"component": list(COMPONENTS),
                       "value": [components[c] for c in COMPONENTS]})
    text = df.to_csv(index=False, float_format="%.17g")
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
