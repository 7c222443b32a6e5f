"""Selection-equation estimators and the control quantities derived from them.

Three architectures are supported:

* ordered probit with strictly increasing thresholds (:func:`fit_ordered`),
* cumulative threshold probabilities ``P[D <= k-1 | x]`` estimated by
  separate logits (:func:`fit_thresholds`),
* multinomial logit with category 0 as baseline (:func:`fit_mnl`).

All fitters are agnostic about the design matrix; building a sieve expansion
of raw covariates is the caller's job.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_ndtr, logsumexp, ndtr, ndtri

from .kernels import elementary_symmetric_rows
from .optimize import OptResult, maximize

PROB_FLOOR = 1e-6
SEPARATION_BOUND = 50.0
SEPARATED_FIT = 0.999  # smallest fitted probability of the observed outcome
_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)


class FirstStageError(RuntimeError):
    """A selection model failed to converge."""

    def __init__(self, message, opt: OptResult | None = None):
        super().__init__(message)
        self.opt = opt


class SeparationError(FirstStageError):
    """Coefficients diverged, indicating (quasi-)complete separation."""


# ---------------------------------------------------------------------------
# helpers


def _check_categories(d, K):
    d = np.asarray(d)
    if d.ndim != 1:
        raise ValueError("category vector must be one-dimensional")
    if not np.issubdtype(d.dtype, np.integer):
        if not np.all(d == np.round(d)):
            raise ValueError("categories must be integer coded")
        d = d.astype(int)
    if K < 1:
        raise ValueError("K must be >= 1")
    if d.size and (d.min() < 0 or d.max() > K):
        raise ValueError(f"categories must lie in 0..{K}")
    counts = np.bincount(d, minlength=K + 1)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ValueError(f"categories not observed: {missing.tolist()}")
    return d


def _as_design(Q, n):
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 1:
        Q = Q[:, None]
    if Q.shape[0] != n:
        raise ValueError("design and category vector have different lengths")
    if not np.all(np.isfinite(Q)):
        raise ValueError("design contains non-finite entries")
    return Q


def _intercept_column(Q):
    const = np.all(Q == Q[:1], axis=0) & (Q[0] != 0)
    idx = np.flatnonzero(const)
    return int(idx[0]) if idx.size else None


def _log_interval_prob(a, b):
    """``log(Phi(b) - Phi(a))`` for ``a < b``, accurate in both tails."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    out = np.empty(a.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        upper = a > 0
        lower = b < 0
        mid = ~(upper | lower)
        if np.any(upper):
            la, lb = log_ndtr(-a[upper]), log_ndtr(-b[upper])
            out[upper] = la + np.log1p(-np.exp(lb - la))
        if np.any(lower):
            la, lb = log_ndtr(a[lower]), log_ndtr(b[lower])
            out[lower] = lb + np.log1p(-np.exp(la - lb))
        if np.any(mid):
            out[mid] = np.log(ndtr(b[mid]) - ndtr(a[mid]))
    return out


def _log_pdf(t):
    with np.errstate(over="ignore"):
        return -0.5 * np.square(t) - _LOG_SQRT_2PI


def truncated_correction(index, c_lo, c_hi):
    """Mean of a standard normal truncated to ``[c_lo - index, c_hi - index)``.

    Equals ``(phi(a) - phi(b)) / (Phi(b) - Phi(a))`` with ``a = c_lo - index``
    and ``b = c_hi - index``. Either threshold may be infinite. Broadcasts
    over array arguments.

    Raises
    ------
    ValueError
        If ``c_lo >= c_hi`` or the cell probability is below 1e-300.
    """
    index = np.asarray(index, dtype=float)
    a = np.asarray(c_lo, dtype=float) - index
    b = np.asarray(c_hi, dtype=float) - index
    if np.any(~(a < b)):
        raise ValueError("truncation cell requires c_lo < c_hi")
    logP = _log_interval_prob(a, b)
    if np.any(~(logP > np.log(1e-300))):
        raise ValueError("empty truncation cell")
    out = np.exp(_log_pdf(a) - logP) - np.exp(_log_pdf(b) - logP)
    return out if out.ndim else float(out)


def rearrange(h):
    """Sorted copy, used to restore monotone threshold probabilities."""
    return np.sort(np.asarray(h, dtype=float), axis=-1)


# ---------------------------------------------------------------------------
# ordered probit


@dataclass(frozen=True)
class OrderedFit:
    """Ordered probit fit: ``D = k`` iff ``c_k <= Q'alpha + e < c_{k+1}``."""

    alpha: np.ndarray
    thresholds: np.ndarray
    loglik: float
    opt: OptResult
    link: str = "probit"

    @property
    def K(self):
        return self.thresholds.size

    @property
    def n_features(self):
        return self.alpha.size

    def index(self, Q):
        return np.asarray(Q, dtype=float) @ self.alpha

    def cell(self, k):
        """Thresholds ``(c_k, c_{k+1})`` bounding category ``k``."""
        c = np.concatenate([[-np.inf], self.thresholds, [np.inf]])
        return c[k], c[k + 1]

    def probs(self, Q):
        eta = self.index(Q)
        c = np.concatenate([[-np.inf], self.thresholds, [np.inf]])
        a = c[None, :-1] - eta[:, None]
        b = c[None, 1:] - eta[:, None]
        return np.exp(_log_interval_prob(a, b))


def _thresholds_from(theta_c):
    c = np.empty(theta_c.size)
    c[0] = theta_c[0]
    if c.size > 1:
        c[1:] = theta_c[0] + np.cumsum(np.exp(theta_c[1:]))
    return c


def _ordered_objective(d, Q, K):
    n, p = Q.shape
    lo_idx = d  # threshold index of the lower cell edge (0 means -inf)
    hi_idx = d + 1  # K + 1 means +inf

    def fun(theta):
        alpha, tc = theta[:p], theta[p:]
        c = _thresholds_from(tc)
        call = np.concatenate([[-np.inf], c, [np.inf]])
        eta = Q @ alpha
        a = call[lo_idx] - eta
        b = call[hi_idx] - eta
        logP = _log_interval_prob(a, b)
        ra = np.exp(_log_pdf(a) - logP)
        rb = np.exp(_log_pdf(b) - logP)
        f = float(np.mean(logP))
        g_alpha = Q.T @ (ra - rb) / n
        Gc = (np.bincount(hi_idx, weights=rb, minlength=K + 2)
              - np.bincount(lo_idx, weights=ra, minlength=K + 2))[1:K + 1] / n
        g_c = np.empty(K)
        g_c[0] = Gc.sum()
        if K > 1:
            tail = np.cumsum(Gc[::-1])[::-1]
            g_c[1:] = np.exp(tc[1:]) * tail[1:]
        return f, np.concatenate([g_alpha, g_c])

    return fun


def fit_ordered(d, Q, K: int, gtol: float = 1e-8, max_iter: int = 200) -> OrderedFit:
    """Ordered probit MLE of ``d`` on the design ``Q``.

    ``Q`` must not contain an intercept column: the thresholds absorb it.
    Thresholds are parameterized as ``(c_1, log(c_2 - c_1), ...)`` so every
    iterate keeps them strictly increasing. Slopes start at zero and
    thresholds at the normal quantiles of the empirical cumulative shares.
    """
    d = _check_categories(d, K)
    Q = _as_design(Q, d.size)
    if _intercept_column(Q) is not None:
        raise ValueError("ordered design must not contain an intercept column")
    n, p = Q.shape
    cum = np.cumsum(np.bincount(d, minlength=K + 1))[:K] / n
    c0 = ndtri(cum)
    theta0 = np.concatenate([np.zeros(p), [c0[0]], np.log(np.diff(c0))])
    fun = _ordered_objective(d, Q, K)
    opt = maximize(fun, theta0, gtol=gtol, max_iter=max_iter)
    if not opt.converged:
        raise FirstStageError("ordered probit did not converge", opt)
    alpha = opt.x[:p].copy()
    c = _thresholds_from(opt.x[p:])
    return OrderedFit(alpha, c, opt.fun * n, opt)


# ---------------------------------------------------------------------------
# cumulative logits


@dataclass(frozen=True)
class ThresholdFit:
    """Separate logits for ``h_k(x) = P[D <= k-1 | x]``, ``k = 1..K``."""

    coefs: np.ndarray  # (K, p)
    loglik: np.ndarray
    opts: tuple
    link: str = "logit"

    @property
    def K(self):
        return self.coefs.shape[0]

    @property
    def n_features(self):
        return self.coefs.shape[1]

    def raw(self, Q):
        """Unrearranged ``h_1..h_K`` at each row of ``Q``."""
        return expit(np.asarray(Q, dtype=float) @ self.coefs.T)

    def thresholds(self, Q):
        """Rearranged (sorted) threshold probabilities, shape ``(n, K)``."""
        return rearrange(self.raw(Q))

    def probs(self, Q):
        h = self.thresholds(Q)
        n = h.shape[0]
        edges = np.hstack([np.zeros((n, 1)), h, np.ones((n, 1))])
        p = np.maximum(np.diff(edges, axis=1), PROB_FLOOR)
        return p / p.sum(axis=1, keepdims=True)


def _check_separation(opt, p_obs, what):
    # Local quasi-separation in sparse sieve cells is routine and harmless
    # for predictions, so large coefficients alone are not an error. They
    # are when the iterates diverge or every observation is fitted almost
    # exactly (complete separation).
    big = np.max(np.abs(opt.x)) > SEPARATION_BOUND
    if big and (not opt.converged or np.min(p_obs) > SEPARATED_FIT):
        raise SeparationError(f"{what} coefficients diverged (separation)", opt)
    if not opt.converged:
        raise FirstStageError(f"{what} did not converge", opt)


def _logit_objective(y, Q):
    n = Q.shape[0]

    def fun(a):
        eta = Q @ a
        f = float(np.mean(y * eta - np.logaddexp(0.0, eta)))
        return f, Q.T @ (y - expit(eta)) / n

    def hess(a):
        w = expit(Q @ a)
        w = w * (1 - w)
        return -(Q.T * w) @ Q / n

    return fun, hess


def _fit_binary_logit(y, Q, icol, gtol, max_iter):
    p = Q.shape[1]
    share = float(np.clip(y.mean(), 1e-12, 1 - 1e-12))
    a0 = np.zeros(p)
    a0[icol] = np.log(share / (1 - share)) / Q[0, icol]
    fun, hess = _logit_objective(y, Q)
    opt = maximize(fun, a0, hess=hess, gtol=gtol, max_iter=max_iter)
    p_obs = np.where(y > 0, expit(Q @ opt.x), expit(-(Q @ opt.x)))
    _check_separation(opt, p_obs, "threshold logit")
    return opt


def fit_thresholds(d, Q, K: int, gtol: float = 1e-8, max_iter: int = 200) -> ThresholdFit:
    """Fit ``h_k(x) = Lambda(Q'alpha_k)`` on ``1[D <= k-1]`` for ``k = 1..K``.

    ``Q`` must contain an intercept column. The K logits are fitted
    independently; monotonicity across ``k`` is restored at prediction time
    by rearrangement.
    """
    d = _check_categories(d, K)
    Q = _as_design(Q, d.size)
    icol = _intercept_column(Q)
    if icol is None:
        raise ValueError("threshold design must contain an intercept column")
    coefs, ll, opts = [], [], []
    for k in range(1, K + 1):
        y = (d <= k - 1).astype(float)
        opt = _fit_binary_logit(y, Q, icol, gtol, max_iter)
        coefs.append(opt.x)
        ll.append(opt.fun * d.size)
        opts.append(opt)
    return ThresholdFit(np.array(coefs), np.array(ll), tuple(opts))


# ---------------------------------------------------------------------------
# multinomial logit


@dataclass(frozen=True)
class MnlFit:
    """Multinomial logit with baseline ``alpha_0 = 0``; ``coefs`` is ``(K, p)``."""

    coefs: np.ndarray
    loglik: float
    opt: OptResult | None = None

    @property
    def K(self):
        return self.coefs.shape[0]

    @property
    def n_features(self):
        return self.coefs.shape[1]

    def utilities(self, Q):
        U = np.asarray(Q, dtype=float) @ self.coefs.T
        U = np.atleast_2d(U)
        return np.hstack([np.zeros((U.shape[0], 1)), U])

    def probs(self, Q):
        U = self.utilities(Q)
        U = U - U.max(axis=1, keepdims=True)
        E = np.exp(U)
        return E / E.sum(axis=1, keepdims=True)

    def inclusive_value(self, Q, k):
        if not 0 <= k <= self.K:
            raise ValueError(f"category must lie in 0..{self.K}")
        U = self.utilities(Q)
        return logsumexp(U, axis=1) - U[:, k]


def _mnl_objective(d, Q, K):
    n, p = Q.shape
    Y = np.zeros((n, K + 1))
    Y[np.arange(n), d] = 1.0

    def probs(theta):
        U = np.hstack([np.zeros((n, 1)), Q @ theta.reshape(K, p).T])
        lse = logsumexp(U, axis=1)
        return U, lse, np.exp(U - lse[:, None])

    def fun(theta):
        U, lse, P = probs(theta)
        f = float(np.mean(U[np.arange(n), d] - lse))
        g = ((Y[:, 1:] - P[:, 1:]).T @ Q) / n
        return f, g.ravel()

    def hess(theta):
        _, _, P = probs(theta)
        H = np.empty((K * p, K * p))
        for j in range(K):
            pj = P[:, j + 1]
            for l in range(j, K):
                w = pj * ((1.0 if j == l else 0.0) - P[:, l + 1])
                B = -(Q.T * w) @ Q / n
                H[j * p:(j + 1) * p, l * p:(l + 1) * p] = B
                if l != j:
                    H[l * p:(l + 1) * p, j * p:(j + 1) * p] = B.T
        return H

    return fun, hess


def fit_mnl(d, Q, K: int, gtol: float = 1e-8, max_iter: int = 200) -> MnlFit:
    """Multinomial logit MLE with category 0 as the baseline.

    ``Q`` must contain an intercept column. The log-likelihood is globally
    concave, so a converged Newton solution is the global maximum.
    Intercepts start at ``log(s_k / s_0)``, all other coefficients at zero.
    """
    d = _check_categories(d, K)
    Q = _as_design(Q, d.size)
    icol = _intercept_column(Q)
    if icol is None:
        raise ValueError("multinomial design must contain an intercept column")
    n, p = Q.shape
    shares = np.bincount(d, minlength=K + 1) / n
    theta0 = np.zeros((K, p))
    theta0[:, icol] = np.log(shares[1:] / shares[0]) / Q[0, icol]
    fun, hess = _mnl_objective(d, Q, K)
    opt = maximize(fun, theta0.ravel(), hess=hess, gtol=gtol, max_iter=max_iter)
    fit = MnlFit(opt.x.reshape(K, p).copy(), opt.fun * n, opt)
    _check_separation(opt, fit.probs(Q)[np.arange(n), d], "multinomial logit")
    return fit


# ---------------------------------------------------------------------------
# predictions and derived controls


def predict_probs(fit, Q):
    """Category probabilities ``(p_0..p_K)`` at a design row or matrix.

    Works for :class:`MnlFit`, :class:`OrderedFit` and :class:`ThresholdFit`.
    A 1-d row returns a 1-d simplex vector.
    """
    Q = np.asarray(Q, dtype=float)
    row = Q.ndim == 1
    Q2 = np.atleast_2d(Q)
    if Q2.shape[1] != fit.n_features:
        raise ValueError(f"design row has {Q2.shape[1]} entries, fit expects {fit.n_features}")
    P = fit.probs(Q2)
    return P[0] if row else P


def inclusive_value(fit: MnlFit, Q, k: int):
    """``log sum_j exp(u_j) - u_k``; equals ``-log p_k`` under the logit."""
    Q = np.asarray(Q, dtype=float)
    if Q.shape[-1] != fit.n_features:
        raise ValueError("design row dimension does not match the fit")
    nu = fit.inclusive_value(np.atleast_2d(Q), k)
    return float(nu[0]) if Q.ndim == 1 else nu


def elementary_symmetric(p, k: int, L: int):
    """First ``L`` elementary symmetric polynomials of ``{p_j : j != k}``.

    ``p`` is a simplex vector ``(p_0..p_K)`` or a matrix of such rows.
    Uses the product recurrence for ``prod_j (1 + p_j t)``, which only adds
    non-negative terms; ``e_1`` is returned as ``1 - p_k``.
    """
    p = np.asarray(p, dtype=float)
    row = p.ndim == 1
    P = np.atleast_2d(p)
    K = P.shape[1] - 1
    if not 0 <= k <= K:
        raise ValueError(f"category must lie in 0..{K}")
    if not 1 <= L <= K:
        raise ValueError(f"truncation order must lie in 1..{K}")
    rest = np.ascontiguousarray(np.delete(P, k, axis=1))
    E = elementary_symmetric_rows(rest, L)
    # on the simplex the first polynomial is 1 - p_k; use it exactly
    E[:, 0] = 1.0 - P[:, k]
    return E[0] if row else E
