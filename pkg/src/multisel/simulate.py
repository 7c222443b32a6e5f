"""Simulation designs for ordered and multinomial selection.

Every generator is a pure function of ``(dgp, n, seed)`` (plus ``delta`` for
ordered design 3): the seed, an int or a sequence of ints, feeds
``numpy.random.default_rng`` and draws happen in a fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import logsumexp, ndtr

from .first_stage import truncated_correction

# ordered designs -----------------------------------------------------------

ORDERED_THRESHOLDS = {1: (-1.5, 0.5), 2: (-1.5, 0.5), 3: (-1.0, 0.5, 1.5)}
ORDERED_RHO = {1: (0.75, 0.75), 2: (0.75, 0.75), 3: (0.3, 0.5, 0.7)}
# Outcome-error scale. Design 1 uses 2: with unit variance its OLS bias is
# half the published value, while design 2 matches with unit variance.
ORDERED_SIGMA = {1: 2.0, 2: 1.0, 3: 1.0}
ORDERED_INTERCEPT = {1: (0.5, 0.6), 2: (0.5, 0.6), 3: (0.0, 0.0, 0.0)}
ORDERED_BETA = {
    1: ((0.5, 0.25), (0.7, 0.5)),
    2: ((0.5, 0.25), (0.7, 0.5)),
    # design 3 slopes are not published; frozen at (0.5, 0.3, 0.8) + 0.1 k
    3: tuple(tuple(b + 0.1 * k for b in (0.5, 0.3, 0.8)) for k in (1, 2, 3)),
}

# multinomial designs -------------------------------------------------------
# Utility polynomials are not published. The coefficients below were fixed
# once so that category shares are balanced and selection bias is sizable.
# Rows are alternatives 1..K (alternative 0 has f = 0); columns follow
# MNL1_TERMS / MNL3_TERMS.

MNL1_TERMS = ("1", "x", "x2", "x3", "z", "z2", "xz")
MNL1_UTILITY = np.array([
    [0.2, 0.8, -0.4, 0.15, 0.6, -0.3, 0.4],
    [-0.1, -0.6, 0.3, 0.25, 1.0, 0.2, -0.5],
])
MNL3_TERMS = ("1", "x", "z", "w", "x2", "z2", "w2", "xz", "xw", "zw")
MNL3_UTILITY = np.array([
    [0.1, 0.9, -0.5, 0.4, -0.3, 0.2, 0.1, 0.4, -0.2, 0.3],
    [0.0, -0.4, 0.8, 0.6, 0.2, -0.4, 0.2, -0.3, 0.5, 0.2],
    [-0.2, 0.5, 0.4, -0.8, 0.3, 0.1, -0.3, 0.2, 0.3, -0.5],
])

MNL_INTERCEPT = {1: (0.0, 0.0), 2: (0.4, 0.6, 0.5)}
MNL_BETA = {
    1: ((0.5, 0.7), (0.8, 0.5)),
    2: ((0.5, 0.7, 0.3), (0.8, 0.5, 0.4), (0.3, 0.9, 0.6)),
}
EQUICORRELATION = 0.5
FACTOR_LOADINGS = (0.0, 0.3, 0.8, -0.5)
SPECIALIZATION = {3: 1.0, 4: 2.0}
SPECIALIZATION_NOISE = 0.2


@dataclass(frozen=True)
class SimDataset:
    """Simulated sample with its ground truth.

    ``y`` is NaN exactly where ``d == 0``. ``beta[k-1]`` and
    ``intercept[k-1]`` are the true outcome coefficients of category ``k``.
    ``truth`` holds the selection index and thresholds (ordered designs) or
    the systematic utilities ``f`` of shape ``(n, K+1)`` (multinomial).
    """

    family: str
    dgp: int
    n: int
    K: int
    X: np.ndarray
    names: tuple
    continuous: tuple
    d: np.ndarray
    y: np.ndarray
    beta: np.ndarray
    intercept: np.ndarray
    truth: dict = field(default_factory=dict)
    seed: object = None
    delta: float = 1.0

    def rows(self, k):
        return np.flatnonzero(self.d == k)


def _rng(seed):
    return np.random.default_rng(seed)


def _outcomes(d, X, intercept, beta, V):
    n = d.size
    y = np.full(n, np.nan)
    for k in range(1, len(beta) + 1):
        m = d == k
        y[m] = intercept[k - 1] + X[m] @ np.asarray(beta[k - 1]) + V[m, k - 1]
    return y


def ordered_index(dgp: int, X, delta: float = 1.0):
    """Systematic part of the latent selection index."""
    if dgp == 1:
        x, z = X[:, 0], X[:, 1]
        return 0.5 * x - 0.5 * x**2 + 0.2 * x**3 + 0.5 * x * z + z - 0.5 * z**2
    if dgp == 2:
        x, z = X[:, 0], X[:, 1]
        return (-0.2 * x - 0.5 * x**2 + 0.3 * x**3 + 0.1 * x * z + 0.5 * z
                - 0.3 * x**2 * z + 0.2 * x**3 * z)
    if dgp == 3:
        x, z, w = X[:, 0], X[:, 1], X[:, 2]
        return 0.5 * x + 0.3 * z + 0.8 * w + delta * (-0.5 * x**2 + 0.2 * z**2 - 0.4 * x * z)
    raise ValueError(f"unknown ordered DGP {dgp}")


def generate_ordered(dgp: int, n: int, seed, delta: float = 1.0) -> SimDataset:
    """Ordered threshold-crossing selection with jointly normal errors.

    ``D = k`` when ``c_k <= index + U < c_{k+1}``; outcome errors are
    ``V_k = sigma (rho_k U + sqrt(1 - rho_k^2) e_k)`` with independent ``e_k``.
    """
    if dgp not in ORDERED_THRESHOLDS:
        raise ValueError(f"unknown ordered DGP {dgp}")
    rng = _rng(seed)
    p = 3 if dgp == 3 else 2
    X = rng.standard_normal((n, p))
    if dgp == 2:
        X[:, 1] = (X[:, 1] > 0).astype(float)
    c = np.asarray(ORDERED_THRESHOLDS[dgp])
    rho = np.asarray(ORDERED_RHO[dgp])
    K = c.size
    U = rng.standard_normal(n)
    E = rng.standard_normal((n, K))
    sigma = ORDERED_SIGMA[dgp]
    V = sigma * (rho * U[:, None] + np.sqrt(1 - rho**2) * E)
    index = ordered_index(dgp, X, delta)
    d = np.searchsorted(c, index + U, side="right")
    y = _outcomes(d, X, ORDERED_INTERCEPT[dgp], ORDERED_BETA[dgp], V)
    names = ("x", "z", "w")[:p]
    cont = (True, dgp != 2) + ((True,) if p == 3 else ())
    return SimDataset(
        "ordered", dgp, n, K, X, names, cont, d, y,
        np.array(ORDERED_BETA[dgp]), np.array(ORDERED_INTERCEPT[dgp], dtype=float),
        {"index": index, "thresholds": c, "rho": rho, "sigma": sigma},
        seed, float(delta),
    )


def mnl_utilities(dgp: int, X):
    """Systematic utilities ``(f_0..f_K)`` with ``f_0 = 0``."""
    if dgp == 1:
        x, z = X[:, 0], X[:, 1]
        T = np.column_stack([np.ones_like(x), x, x**2, x**3, z, z**2, x * z])
        coef = MNL1_UTILITY
    elif dgp in (2, 3, 4):
        x, z, w = X[:, 0], X[:, 1], X[:, 2]
        T = np.column_stack([np.ones_like(x), x, z, w, x**2, z**2, w**2, x * z, x * w, z * w])
        coef = MNL3_UTILITY
    else:
        raise ValueError(f"unknown multinomial DGP {dgp}")
    return np.hstack([np.zeros((X.shape[0], 1)), T @ coef.T])


def draw_shocks(dgp: int, rng, n: int, K: int):
    """Utility shocks ``(n, K+1)`` of a multinomial design."""
    if dgp in (1, 2):
        return rng.gumbel(size=(n, K + 1))
    if dgp == 3:
        common = rng.standard_normal((n, 1))
        return (np.sqrt(EQUICORRELATION) * common
                + np.sqrt(1 - EQUICORRELATION) * rng.standard_normal((n, K + 1)))
    if dgp == 4:
        factor = rng.standard_normal((n, 1))
        return factor * np.asarray(FACTOR_LOADINGS) + rng.standard_normal((n, K + 1))
    raise ValueError(f"unknown multinomial DGP {dgp}")


def generate_multinomial(dgp: int, n: int, seed) -> SimDataset:
    """Utility-maximizing choice among ``K + 1`` alternatives.

    Shocks are i.i.d. Gumbel (designs 1, 2), equicorrelated normal
    (design 3) or a heterogeneous one-factor normal model (design 4).
    Outcome errors are the own shock plus an independent Gumbel draw
    (designs 1, 2) or the specialization form
    ``e_k + g e_k (e_k - mean_{j != k} e_j) + 0.2 eta`` (designs 3, 4).
    """
    if dgp not in (1, 2, 3, 4):
        raise ValueError(f"unknown multinomial DGP {dgp}")
    rng = _rng(seed)
    p = 2 if dgp == 1 else 3
    K = 2 if dgp == 1 else 3
    X = rng.standard_normal((n, p))
    F = mnl_utilities(dgp, X)
    eps = draw_shocks(dgp, rng, n, K)
    if dgp in (1, 2):
        V = eps[:, 1:] + rng.gumbel(size=(n, K))
    else:
        gamma = SPECIALIZATION[dgp]
        others = (eps.sum(axis=1, keepdims=True) - eps) / K
        own = eps[:, 1:]
        V = (own + gamma * own * (own - others[:, 1:])
             + SPECIALIZATION_NOISE * rng.standard_normal((n, K)))
    d = np.argmax(F + eps, axis=1)
    key = 1 if dgp == 1 else 2
    y = _outcomes(d, X, MNL_INTERCEPT[key], MNL_BETA[key], V)
    names = ("x", "z", "w")[:p]
    return SimDataset(
        "multinomial", dgp, n, K, X, names, (True,) * p, d, y,
        np.array(MNL_BETA[key]), np.array(MNL_INTERCEPT[key], dtype=float),
        {"utilities": F}, seed, 1.0,
    )


def generate(family: str, dgp: int, n: int, seed, delta: float = 1.0) -> SimDataset:
    if family == "ordered":
        return generate_ordered(dgp, n, seed, delta)
    if family == "multinomial":
        return generate_multinomial(dgp, n, seed)
    raise ValueError(f"unknown DGP family {family!r}")


# choice probabilities by quadrature ----------------------------------------


def equicorrelated_probs(F, rho: float = EQUICORRELATION, nodes: int = 48):
    """Choice probabilities under equicorrelated normal shocks.

    The common factor cancels in utility differences, leaving
    ``p_k = E_t[prod_{j != k} Phi(t + (f_k - f_j)/sqrt(1 - rho))]``.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    t, w = hermegauss(nodes)
    w = w / np.sqrt(2 * np.pi)
    scale = np.sqrt(1 - rho)
    out = np.empty_like(F)
    for k in range(F.shape[1]):
        gap = (F[:, [k]] - F) / scale  # (n, K+1)
        arg = t[None, :, None] + gap[:, None, :]
        prod = ndtr(arg)
        prod[:, :, k] = 1.0
        out[:, k] = prod.prod(axis=2) @ w
    return out


def factor_probs(F, loadings=FACTOR_LOADINGS, nodes: int = 24):
    """Choice probabilities under the one-factor normal shock model.

    ``p_k = E_s E_t[prod_{j != k} Phi(t + f_k - f_j + (l_k - l_j) s)]``,
    evaluated with nested Gauss-Hermite rules.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    lam = np.asarray(loadings, dtype=float)
    t, w = hermegauss(nodes)
    w = w / np.sqrt(2 * np.pi)
    out = np.zeros_like(F)
    for s, ws in zip(t, w):
        out += ws * equicorrelated_probs(F + lam * s, rho=0.0, nodes=nodes)
    return out


def true_probs(ds: SimDataset):
    """Exact choice probabilities for every row of a multinomial dataset."""
    if ds.family != "multinomial":
        raise ValueError("choice probabilities are defined for multinomial designs")
    F = ds.truth.get("utilities")
    if F is None:
        raise ValueError("dataset carries no ground truth")
    if ds.dgp in (1, 2):
        return np.exp(F - logsumexp(F, axis=1, keepdims=True))
    if ds.dgp == 3:
        return equicorrelated_probs(F)
    return factor_probs(F)


def oracle_controls(ds: SimDataset, k: int):
    """Infeasible controls for the rows with ``D = k``.

    Ordered designs: ``sigma rho_k`` times the truncated-normal mean at the
    true index. Multinomial designs 1-2: the true inclusive value. Designs 3-4:
    the true probability vector ``(p_1..p_K)``.
    """
    if not 1 <= k <= ds.K:
        raise ValueError(f"outcome category must lie in 1..{ds.K}")
    rows = ds.rows(k)
    if ds.family == "ordered":
        if "index" not in ds.truth:
            raise ValueError("dataset carries no ground truth")
        c = np.concatenate([[-np.inf], ds.truth["thresholds"], [np.inf]])
        lam = truncated_correction(ds.truth["index"][rows], c[k], c[k + 1])
        scale = ds.truth["sigma"] * ds.truth["rho"][k - 1]
        return (scale * lam).reshape(-1, 1)
    if "utilities" not in ds.truth:
        raise ValueError("dataset carries no ground truth")
    F = ds.truth["utilities"][rows]
    if ds.dgp in (1, 2):
        return (logsumexp(F, axis=1) - F[:, k]).reshape(-1, 1)
    sub = SimDataset(ds.family, ds.dgp, rows.size, ds.K, ds.X[rows], ds.names,
                     ds.continuous, ds.d[rows], ds.y[rows], ds.beta, ds.intercept,
                     {"utilities": F}, ds.seed, ds.delta)
    return true_probs(sub)[:, 1:]
