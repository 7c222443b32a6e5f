import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multisel.optimize import OptimizationError, gradient_error, maximize


def quadratic(a):
    a = np.asarray(a, dtype=float)

    def fun(x):
        return -float(np.sum((x - a) ** 2)), -2.0 * (x - a)

    return fun


def test_quadratic_argmax():
    res = maximize(quadratic([1.0, -2.0]), np.zeros(2))
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, -2.0], atol=1e-8)
    assert res.grad_norm <= 1e-8


def test_logistic_intercept_closed_form():
    y = np.r_[np.ones(30), np.zeros(70)]

    def fun(a):
        eta = a[0]
        f = float(np.mean(y * eta - np.logaddexp(0.0, eta)))
        return f, np.array([np.mean(y) - 1 / (1 + np.exp(-eta))])

    target = np.log(0.3 / 0.7)
    res = maximize(fun, np.zeros(1))
    assert res.converged
    # |grad| <= gtol bounds the argmax error by gtol / curvature, curvature = 0.3 * 0.7
    assert abs(res.x[0] - target) <= 1e-8 / 0.21
    tight = maximize(fun, np.zeros(1), gtol=1e-13)
    assert abs(tight.x[0] - target) < 1e-12


def test_wrong_gradient_flagged():
    def fun(x):
        return -float(x @ x), -2.0 * x + 0.5

    assert gradient_error(fun, np.ones(3)) > 1e-4
    with pytest.raises(OptimizationError, match="gradient check"):
        maximize(fun, np.ones(3), check_grad=True)


def test_nonfinite_start_raises():
    def fun(x):
        return float("nan"), np.zeros_like(x)

    with pytest.raises(OptimizationError) as exc:
        maximize(fun, np.ones(2))
    np.testing.assert_array_equal(exc.value.iterate, np.ones(2))


def test_max_iter_reports_unconverged():
    def fun(x):
        # concave but very flat: needs many steps from far away
        return -float(np.sum(np.sqrt(1 + x**2))), -x / np.sqrt(1 + x**2)

    res = maximize(fun, np.full(2, 1e6), max_iter=1)
    assert not res.converged
    assert res.n_iter == 1


def test_indefinite_hessian_falls_back():
    # Newton on this objective would move toward a saddle; ascent must still hold
    def fun(x):
        return float(-x[0] ** 4 + x[0] ** 2 - x[1] ** 2), np.array([-4 * x[0] ** 3 + 2 * x[0], -2 * x[1]])

    res = maximize(fun, np.array([0.1, 1.0]), record_path=True)
    assert res.converged
    assert abs(abs(res.x[0]) - np.sqrt(0.5)) < 1e-6
    vals = [fun(p)[0] for p in res.path]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_path_is_deterministic():
    f = quadratic([3.0, 1.0, -1.0])
    a = maximize(f, np.zeros(3), record_path=True)
    b = maximize(f, np.zeros(3), record_path=True)
    assert len(a.path) == len(b.path)
    for u, v in zip(a.path, b.path):
        np.testing.assert_array_equal(u, v)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=5),
       st.lists(st.floats(0.1, 10), min_size=5, max_size=5))
def test_monotone_ascent_on_concave_quartics(center, weights):
    c = np.array(center)
    w = np.array(weights[: c.size])

    def fun(x):
        z = x - c
        return -float(np.sum(w * (z**2 + z**4))), -w * (2 * z + 4 * z**3)

    res = maximize(fun, np.zeros(c.size), record_path=True)
    vals = [fun(p)[0] for p in res.path]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert res.converged
    np.testing.assert_allclose(res.x, c, atol=1e-6)
