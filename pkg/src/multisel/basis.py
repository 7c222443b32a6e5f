"""Clamped B-spline bases and their tensor products.

Univariate bases are built on knot vectors whose interior knots sit at
equally spaced sample quantiles. Multivariate bases are row-wise tensor
products, flattened with the first dimension varying slowest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .kernels import bspline_basis


@dataclass(frozen=True)
class KnotVector:
    """Clamped knot sequence of a univariate B-spline basis.

    Parameters
    ----------
    order : int
        Spline order ``r`` (polynomial degree plus one).
    lo, hi : float
        Boundary of the support.
    interior : tuple of float
        Strictly increasing interior knots inside ``(lo, hi)``.
    requested_interior : int, optional
        Number of interior knots asked for before duplicate quantiles were
        collapsed. Defaults to ``len(interior)``.
    """

    order: int
    lo: float
    hi: float
    interior: tuple = ()
    requested_interior: int | None = None

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if not self.hi > self.lo:
            raise ValueError("degenerate index support")
        t = np.asarray(self.interior, dtype=float)
        if t.size and (np.any(np.diff(t) <= 0) or t[0] <= self.lo or t[-1] >= self.hi):
            raise ValueError("interior knots must be strictly increasing inside (lo, hi)")
        object.__setattr__(self, "interior", tuple(float(v) for v in t))
        if self.requested_interior is None:
            object.__setattr__(self, "requested_interior", len(self.interior))

    @property
    def knots(self) -> np.ndarray:
        r = self.order
        return np.concatenate([np.full(r, self.lo), self.interior, np.full(r, self.hi)])

    @property
    def dim(self) -> int:
        return len(self.interior) + self.order

    @property
    def collapsed(self) -> int:
        """Interior knots lost to tied quantiles."""
        return self.requested_interior - len(self.interior)


def place_knots(samples, n_interior: int, order: int = 4) -> KnotVector:
    """Knot vector on the sample range with interior knots at quantiles.

    Interior knots sit at the sample quantiles ``t / (n_interior + 1)``.
    Tied quantiles, and quantiles landing on the boundary, are dropped, so
    heavily tied samples yield a smaller basis.
    """
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("samples must be nonempty")
    if n_interior < 0:
        raise ValueError("n_interior must be >= 0")
    lo, hi = float(s.min()), float(s.max())
    if not hi > lo:
        raise ValueError("degenerate index support")
    q = np.arange(1, n_interior + 1) / (n_interior + 1)
    interior = np.unique(np.quantile(s, q)) if n_interior else np.empty(0)
    interior = interior[(interior > lo) & (interior < hi)]
    return KnotVector(order, lo, hi, tuple(interior), requested_interior=n_interior)


def basis_matrix(kv: KnotVector, s) -> np.ndarray:
    """Evaluate the basis at each point of ``s``; returns ``(len(s), kv.dim)``.

    Points outside ``[lo, hi]`` are evaluated at the nearest boundary.
    """
    s = np.ascontiguousarray(np.asarray(s, dtype=float).ravel())
    return bspline_basis(kv.knots, kv.order, s)


def bspline_row(kv: KnotVector, s: float) -> np.ndarray:
    return basis_matrix(kv, [s])[0]


def n_clamped(kv: KnotVector, s) -> int:
    s = np.asarray(s, dtype=float)
    return int(np.count_nonzero((s < kv.lo) | (s > kv.hi)))


def tensor_row(rows) -> np.ndarray:
    """Flattened outer product of univariate basis rows (first index slowest)."""
    rows = list(rows)
    if not rows:
        raise ValueError("tensor_row needs at least one basis row")
    if len(rows) > 3:
        raise ValueError("tensor products are limited to three dimensions")
    out = np.asarray(rows[0], dtype=float)
    for r in rows[1:]:
        out = np.kron(out, np.asarray(r, dtype=float))
    return out


def tensor_matrix(blocks) -> np.ndarray:
    """Row-wise :func:`tensor_row` over stacked basis matrices."""
    blocks = [np.asarray(b, dtype=float) for b in blocks]
    if not blocks:
        raise ValueError("tensor_matrix needs at least one block")
    out = blocks[0]
    for b in blocks[1:]:
        n = out.shape[0]
        out = (out[:, :, None] * b[:, None, :]).reshape(n, -1)
    return out


def default_interior_knots(n: int, n_indices: int = 1) -> int:
    """Knot-growth rule: ``max(2, ceil(n**0.2))`` univariate, ``ceil(n**0.15)`` per
    dimension otherwise."""
    if n_indices <= 1:
        return max(2, math.ceil(n**0.2))
    return max(1, math.ceil(n**0.15))


@dataclass(frozen=True)
class SieveSpec:
    """Sieve configuration shared by both estimation stages.

    ``n_interior=None`` applies :func:`default_interior_knots` to the sample
    at hand. ``full_tensor`` switches three-or-more-index expansions from
    marginals plus pairwise tensors to the full tensor product.
    """

    order: int = 4
    n_interior: int | None = None
    full_tensor: bool = False

    def interior_for(self, n: int, n_indices: int) -> int:
        if self.n_interior is not None:
            return self.n_interior
        return default_interior_knots(n, n_indices)


@dataclass
class Expansion:
    """Spline expansion of a small matrix of indices."""

    matrix: np.ndarray
    knots: list = field(default_factory=list)
    labels: list = field(default_factory=list)
    n_clamped: int = 0


def expand(S, spec: SieveSpec, knots=None) -> Expansion:
    """Spline expansion of the columns of ``S``.

    One column gives its univariate basis. Two columns give both marginal
    bases plus their tensor product. Three or more give the marginals plus
    every pairwise tensor, or the full tensor when ``spec.full_tensor``.
    Knots are placed on ``S`` unless ``knots`` is supplied.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    n, L = S.shape
    if L == 0:
        return Expansion(np.empty((n, 0)))
    if knots is None:
        J = spec.interior_for(n, L)
        knots = [place_knots(S[:, j], J, spec.order) for j in range(L)]
    marg = [basis_matrix(kv, S[:, j]) for j, kv in enumerate(knots)]
    clamped = sum(n_clamped(kv, S[:, j]) for j, kv in enumerate(knots))
    blocks = list(marg)
    labels = [f"s{j}" for j in range(L)]
    if L == 2 or (L >= 3 and spec.full_tensor):
        blocks.append(tensor_matrix(marg))
        labels.append("x".join(f"s{j}" for j in range(L)))
    elif L >= 3:
        for a, b in combinations(range(L), 2):
            blocks.append(tensor_matrix([marg[a], marg[b]]))
            labels.append(f"s{a}xs{b}")
    return Expansion(np.hstack(blocks), list(knots), labels, clamped)
