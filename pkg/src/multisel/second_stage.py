"""Control functions, the augmented outcome regression and its variance.

The outcome equation for category ``k`` is estimated on the selected rows as
``y = x beta + B(controls) delta + error`` where ``B`` is either the controls
themselves plus an intercept (parametric corrections) or a spline expansion
whose span already contains the constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .basis import Expansion, SieveSpec, expand
from .first_stage import (
    MnlFit,
    OrderedFit,
    ThresholdFit,
    elementary_symmetric,
    truncated_correction,
)

VARIANTS = ("none", "parametric-ordered", "sieve-ordered", "mlogit-iv", "sieve-probs", "exch-L")
PIVOT_TOL = 1e-10


class IdentificationError(ValueError):
    """The slope block is collinear with the control basis."""


@dataclass(frozen=True)
class ControlSpec:
    """Which control function enters the outcome regression and how.

    Parameters
    ----------
    variant : str
        One of ``none``, ``parametric-ordered``, ``sieve-ordered``,
        ``mlogit-iv``, ``sieve-probs``, ``exch-L``.
    L : int
        Truncation order for ``exch-L``.
    sieve : SieveSpec
        Basis used when the controls are expanded.
    linear : bool
        Enter the controls linearly next to an intercept instead of through
        a spline expansion. Always on for ``none`` and ``parametric-ordered``.
    """

    variant: str = "none"
    L: int = 2
    sieve: SieveSpec = field(default_factory=SieveSpec)
    linear: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown control variant {self.variant!r}")
        if self.variant == "exch-L" and self.L < 1:
            raise ValueError("exch-L needs L >= 1")

    @property
    def enters_linearly(self) -> bool:
        return self.linear or self.variant in ("none", "parametric-ordered")


_REQUIRED_FIT = {
    "parametric-ordered": OrderedFit,
    "sieve-ordered": ThresholdFit,
    "mlogit-iv": MnlFit,
    "sieve-probs": MnlFit,
    "exch-L": MnlFit,
}


def build_controls(spec: ControlSpec, fs, x_design, k: int) -> np.ndarray:
    """Raw control indices for the rows of ``x_design`` (already restricted to ``D = k``).

    Returns an ``(n_k, L_ctrl)`` matrix: no columns for ``none``; the
    truncated-normal mean for ``parametric-ordered``; ``(h_k, h_{k+1})`` or
    ``h_K`` alone in the top category for ``sieve-ordered``; the inclusive
    value for ``mlogit-iv``; ``(p_1..p_K)`` for ``sieve-probs``; the first
    ``L`` elementary symmetric polynomials for ``exch-L``.
    """
    Q = np.atleast_2d(np.asarray(x_design, dtype=float))
    n = Q.shape[0]
    if spec.variant == "none":
        return np.empty((n, 0))
    need = _REQUIRED_FIT[spec.variant]
    if not isinstance(fs, need):
        raise TypeError(f"variant {spec.variant!r} needs a {need.__name__}, got {type(fs).__name__}")
    if not 1 <= k <= fs.K:
        raise ValueError(f"outcome category must lie in 1..{fs.K}")
    if Q.shape[1] != fs.n_features:
        raise ValueError("design dimension does not match the first-stage fit")
    if spec.variant == "parametric-ordered":
        lo, hi = fs.cell(k)
        return truncated_correction(fs.index(Q), lo, hi).reshape(n, 1)
    if spec.variant == "sieve-ordered":
        H = fs.thresholds(Q)
        cols = [k - 1, k] if k < fs.K else [k - 1]
        return H[:, cols]
    if spec.variant == "mlogit-iv":
        return fs.inclusive_value(Q, k).reshape(n, 1)
    P = fs.probs(Q)
    if spec.variant == "sieve-probs":
        return P[:, 1:]
    if spec.L > fs.K:
        raise ValueError(f"exch-L truncation {spec.L} exceeds K = {fs.K}")
    return elementary_symmetric(P, k, spec.L)


@dataclass(frozen=True)
class FitResult:
    """Outcome regression for one category.

    ``delta`` holds the coefficients of the retained basis columns;
    ``dropped`` indexes columns of the augmented design ``[x, basis]``
    removed as collinear, so ``len(beta) + len(delta) + len(dropped)``
    equals the number of augmented columns.
    """

    beta: np.ndarray
    delta: np.ndarray
    vcov: np.ndarray
    vcov_hom: np.ndarray
    resid: np.ndarray
    n: int
    kappa: int
    cond: float
    dropped: tuple
    sigma: np.ndarray
    omega: np.ndarray
    expansion: Expansion | None = None

    @property
    def se(self):
        return np.sqrt(np.diag(self.vcov))

    @property
    def se_hom(self):
        return np.sqrt(np.diag(self.vcov_hom))


def _basis_block(controls, spec: ControlSpec, knots=None):
    controls = np.asarray(controls, dtype=float)
    if controls.ndim == 1:
        controls = controls[:, None]
    n = controls.shape[0]
    if spec.enters_linearly or controls.shape[1] == 0:
        return np.hstack([np.ones((n, 1)), controls]), None
    ex = expand(controls, spec.sieve, knots=knots)
    return ex.matrix, ex


def _independent_columns(A, tol=PIVOT_TOL):
    """Indices (in original order) of a maximal well-conditioned column subset."""
    if A.shape[1] == 0:
        return np.arange(0)
    _, R, piv = linalg.qr(A, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return np.arange(0)
    rank = int(np.count_nonzero(diag > tol * diag[0]))
    return np.sort(piv[:rank])


def _residualize(x, B):
    if B.shape[1] == 0:
        return x.copy()
    Qb, _ = linalg.qr(B, mode="economic", check_finite=False)
    return x - Qb @ (Qb.T @ x)


def robust_vcov(x, basis, resid):
    """Sandwich and homoskedastic covariances of the slope block.

    ``x`` is residualized on ``basis`` (Frisch-Waugh-Lovell); with
    ``Sigma = Xt'Xt/n`` and ``Omega = sum_i e_i^2 Xt_i Xt_i'/n`` the robust
    covariance is ``Sigma^-1 Omega Sigma^-1 / n``. The homoskedastic version
    uses ``sum e^2 / (n - d_x - kappa)``.

    Returns
    -------
    sigma, omega, vcov, vcov_hom : ndarray
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    basis = np.asarray(basis, dtype=float).reshape(x.shape[0], -1)
    resid = np.asarray(resid, dtype=float)
    n, dx = x.shape
    kappa = basis.shape[1]
    xt = _residualize(x, basis)
    sigma = xt.T @ xt / n
    xe = xt * resid[:, None]
    omega = xe.T @ xe / n
    try:
        cf = linalg.cho_factor(sigma, check_finite=False)
    except linalg.LinAlgError as exc:
        raise IdentificationError("residualized slope design is singular") from exc
    sinv = linalg.cho_solve(cf, np.eye(dx), check_finite=False)
    vcov = sinv @ omega @ sinv / n
    vcov = 0.5 * (vcov + vcov.T)
    dof = n - dx - kappa
    if dof <= 0:
        raise IdentificationError("no residual degrees of freedom")
    s2 = float(resid @ resid) / dof
    vcov_hom = s2 * sinv / n
    return sigma, omega, vcov, 0.5 * (vcov_hom + vcov_hom.T)


def fit_outcome(y, x, controls, spec: ControlSpec, knots=None) -> FitResult:
    """Least squares of ``y`` on ``[x, basis(controls)]`` for one category.

    Collinear basis columns are dropped by a pivoted QR with relative
    tolerance 1e-10. If the slope block is collinear with the retained basis
    an :class:`IdentificationError` is raised instead: ``beta`` is the
    estimand, so its columns are never dropped.

    Parameters
    ----------
    y : (n,) array
    x : (n, d) array
        Slope regressors without an intercept.
    controls : (n, L) array
        Raw control indices from :func:`build_controls` or an oracle.
    spec : ControlSpec
    knots : list of KnotVector, optional
        Reuse a fixed knot placement instead of placing knots on ``controls``.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, dx = x.shape
    if y.shape != (n,):
        raise ValueError("y and x have different lengths")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
        raise ValueError("outcome data contain non-finite values")
    controls = np.asarray(controls, dtype=float).reshape(n, -1)
    if not np.all(np.isfinite(controls)):
        raise ValueError("controls contain non-finite values")

    B, ex = _basis_block(controls, spec, knots)
    keep = _independent_columns(B)
    Bk = B[:, keep]
    dropped = tuple(int(dx + j) for j in np.setdiff1d(np.arange(B.shape[1]), keep))

    xt = _residualize(x, Bk)
    xnorm = np.linalg.norm(x, axis=0)
    _, Rx, _ = linalg.qr(xt, mode="economic", pivoting=True, check_finite=False)
    rdiag = np.abs(np.diag(Rx))
    if rdiag.size < dx or np.any(rdiag <= PIVOT_TOL * max(1.0, float(xnorm.max()))):
        raise IdentificationError("outcome coefficients unidentified in sample")

    A = np.hstack([x, Bk])
    Qa, Ra = linalg.qr(A, mode="economic", check_finite=False)
    coef = linalg.solve_triangular(Ra, Qa.T @ y, check_finite=False)
    resid = y - A @ coef
    sv = linalg.svd(Ra, compute_uv=False, check_finite=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf

    sigma, omega, vcov, vcov_hom = robust_vcov(x, Bk, resid)
    return FitResult(
        beta=coef[:dx],
        delta=coef[dx:],
        vcov=vcov,
        vcov_hom=vcov_hom,
        resid=resid,
        n=n,
        kappa=Bk.shape[1],
        cond=cond,
        dropped=dropped,
        sigma=sigma,
        omega=omega,
        expansion=ex,
    )
