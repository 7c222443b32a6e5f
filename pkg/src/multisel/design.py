"""Sieve designs for the selection equation built from raw covariates."""

from __future__ import annotations

from itertools import combinations

import numpy as np
from scipy import linalg

from .basis import SieveSpec, basis_matrix, place_knots, tensor_matrix


def _marginals(X, cols, spec):
    J = spec.interior_for(X.shape[0], 2)
    return [basis_matrix(place_knots(X[:, j], J, spec.order), X[:, j]) for j in cols]


def sieve_design(X, continuous, spec: SieveSpec, interact_binary: bool = False,
                 pair_spec: SieveSpec | None = None):
    """Spline expansion of a covariate matrix.

    Each continuous column contributes a univariate spline block and every
    pair of continuous columns a tensor block. Remaining columns are
    appended linearly. With ``interact_binary`` each linear column is also
    multiplied into every continuous marginal block.

    Parameters
    ----------
    X : (n, p) array
    continuous : sequence of bool
        Which columns get spline blocks.
    spec : SieveSpec
        Marginal bases. An unset ``n_interior`` follows the multi-index
        growth rule ``ceil(n**0.15)``.
    interact_binary : bool
    pair_spec : SieveSpec, optional
        Bases multiplied into the pairwise tensors. Defaults to ``spec``;
        a coarser choice (say linear splines without interior knots, which
        give the plain products ``x_a x_b``) keeps the design small.

    Returns
    -------
    ndarray
        No intercept column is added.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    cont = np.asarray(continuous, dtype=bool)
    if cont.shape != (X.shape[1],):
        raise ValueError("continuous mask must have one entry per column")
    cols = np.flatnonzero(cont)
    marg = _marginals(X, cols, spec)
    pair = marg if pair_spec is None else _marginals(X, cols, pair_spec)
    blocks = list(marg)
    blocks += [tensor_matrix([pair[a], pair[b]]) for a, b in combinations(range(len(pair)), 2)]
    lin = X[:, ~cont]
    if lin.shape[1]:
        blocks.append(lin)
        if interact_binary:
            blocks += [m * lin[:, [j]] for j in range(lin.shape[1]) for m in marg]
    if not blocks:
        return np.empty((X.shape[0], 0))
    return np.hstack(blocks)


def with_intercept(Q, tol: float = 1e-10, min_mass: float = 0.0):
    """Prepend a constant and keep a maximal linearly independent column set.

    Columns whose absolute column sum is below ``min_mass`` are dropped
    first: spline cells holding almost no data make logit coefficients
    diverge. The rest are centred (residualized on the constant) before a
    pivoted QR, so the intercept is always retained. Returns the pruned
    design and the indices of the kept columns of ``Q``.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    one = np.ones((n, 1))
    cand = np.flatnonzero(np.abs(Q).sum(axis=0) >= min_mass)
    if cand.size == 0:
        return one, np.arange(0)
    Qc = Q[:, cand] - Q[:, cand].mean(axis=0)
    _, R, piv = linalg.qr(Qc, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return one, np.arange(0)
    rank = int(np.count_nonzero(diag > tol * diag[0]))
    keep = cand[np.sort(piv[:rank])]
    return np.hstack([one, Q[:, keep]]), keep
