"""Damped Newton ascent for smooth concave log-likelihoods."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg


class OptimizationError(RuntimeError):
    """Raised when the objective becomes non-finite or fails a gradient check."""

    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


@dataclass(frozen=True)
class OptResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    n_iter: int
    converged: bool
    path: tuple = ()


def gradient_error(fun, x, eps: float = 1e-6) -> float:
    """Relative error between ``fun``'s reported gradient and central differences.

    ``fun`` returns ``(value, gradient)``. The error is
    ``max|g - g_fd| / max(1, max|g_fd|)``.
    """
    x = np.asarray(x, dtype=float)
    _, g = fun(x)
    fd = np.empty_like(x)
    for j in range(x.size):
        h = eps * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        fd[j] = (fun(xp)[0] - fun(xm)[0]) / (2 * h)
    return float(np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(fd))))


def fd_hessian(grad, x, eps: float = 1e-5) -> np.ndarray:
    """Symmetrized central-difference Jacobian of ``grad`` at ``x``."""
    x = np.asarray(x, dtype=float)
    H = np.empty((x.size, x.size))
    for j in range(x.size):
        h = eps * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        H[:, j] = (grad(xp) - grad(xm)) / (2 * h)
    return 0.5 * (H + H.T)


def _ascent_direction(H, g):
    # Newton step on -H + eps*I; eps doubles from 1e-8 until Cholesky succeeds
    A = -np.asarray(H, dtype=float)
    scale = max(1.0, float(np.max(np.abs(np.diag(A)))) if A.size else 1.0)
    eps = 0.0
    while eps <= 1e8 * scale:
        try:
            c = linalg.cho_factor(A + eps * np.eye(A.shape[0]), check_finite=False)
            d = linalg.cho_solve(c, g, check_finite=False)
            if np.all(np.isfinite(d)):
                return d
        except linalg.LinAlgError:
            pass
        eps = 1e-8 if eps == 0.0 else 2.0 * eps
    return g.copy()


def maximize(fun, x0, hess=None, gtol: float = 1e-8, max_iter: int = 200,
             check_grad: bool = False, record_path: bool = False) -> OptResult:
    """Maximize ``fun`` from ``x0`` by damped Newton steps.

    Parameters
    ----------
    fun : callable
        ``fun(x) -> (value, gradient)``.
    x0 : array_like
        Starting point; the objective must be finite there.
    hess : callable, optional
        ``hess(x) -> Hessian``. Without it the Hessian is a central
        difference of the gradient.
    gtol : float
        Convergence threshold on the sup-norm of the gradient.
    max_iter : int
        Iteration cap; hitting it returns ``converged=False``.
    check_grad : bool
        Compare the gradient against central differences at ``x0`` and
        raise :class:`OptimizationError` when the relative error exceeds 1e-4.
    record_path : bool
        Keep every accepted iterate in ``OptResult.path``.

    Notes
    -----
    Steps are backtracked until the Armijo condition holds, so accepted
    objective values never decrease. If ``-H`` cannot be made positive
    definite the step falls back to the gradient.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise OptimizationError("objective or gradient not finite at the initial point", x)
    if g.shape != x.shape:
        raise ValueError("gradient dimension does not match the parameter vector")
    if check_grad:
        err = gradient_error(fun, x)
        if err > 1e-4:
            raise OptimizationError(f"gradient check failed: relative error {err:.3g}", x)
    if hess is None:
        def hess(z):
            return fd_hessian(lambda w: fun(w)[1], z)
    path = [x.copy()] if record_path else []
    it = 0
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    while gnorm > gtol and it < max_iter:
        it += 1
        H = hess(x)
        if not np.all(np.isfinite(H)):
            raise OptimizationError("Hessian not finite", x)
        d = _ascent_direction(H, g)
        slope = float(g @ d)
        if slope <= 0:
            d, slope = g.copy(), float(g @ g)
        t = 1.0
        accepted = False
        for _ in range(60):
            xn = x + t * d
            fn, gn = fun(xn)
            if np.isfinite(fn) and fn >= f + 1e-4 * t * slope:
                if not np.all(np.isfinite(gn)):
                    raise OptimizationError("gradient not finite", xn)
                accepted = True
                break
            # objective flat to rounding: take the step if it shrinks the gradient
            if (np.isfinite(fn) and fn >= f and np.all(np.isfinite(gn))
                    and np.max(np.abs(gn)) < gnorm):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # no representable ascent left along d
            break
        x, f, g = xn, fn, gn
        gnorm = float(np.max(np.abs(g)))
        if record_path:
            path.append(x.copy())
    return OptResult(x, float(f), gnorm, it, gnorm <= gtol, tuple(path))
