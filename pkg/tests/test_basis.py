import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multisel.basis import (
    KnotVector,
    SieveSpec,
    basis_matrix,
    bspline_row,
    default_interior_knots,
    expand,
    n_clamped,
    place_knots,
    tensor_matrix,
    tensor_row,
)
from oracles import cox_de_boor_row

GRID = np.linspace(0.0, 1.0, 101)


def test_no_interior_knots_gives_order_dimension():
    kv = place_knots(GRID, 0, 4)
    assert kv.interior == ()
    assert kv.dim == 4
    np.testing.assert_array_equal(kv.knots, [0, 0, 0, 0, 1, 1, 1, 1])


def test_quantile_knots_on_grid():
    kv = place_knots(GRID, 3, 4)
    np.testing.assert_allclose(kv.interior, [0.25, 0.5, 0.75], atol=1e-15)
    assert kv.dim == 7


def test_degenerate_support_rejected():
    with pytest.raises(ValueError, match="degenerate index support"):
        place_knots(np.full(10, 2.0), 2, 4)


def test_tied_quantiles_collapse():
    s = np.r_[np.zeros(90), np.ones(10)]
    kv = place_knots(s, 3, 4)
    assert kv.dim == 4
    assert kv.collapsed == 3


def test_knot_vector_validates_interior():
    with pytest.raises(ValueError):
        KnotVector(4, 0.0, 1.0, (0.6, 0.4))
    with pytest.raises(ValueError):
        KnotVector(4, 0.0, 1.0, (1.0,))


def test_piecewise_constant_indicator():
    kv = KnotVector(1, 0.0, 1.0, (0.5,))
    np.testing.assert_array_equal(bspline_row(kv, 0.25), [1.0, 0.0])
    np.testing.assert_array_equal(bspline_row(kv, 0.75), [0.0, 1.0])


def test_cubic_matches_recursive_oracle(rng):
    s = rng.standard_normal(500)
    kv = place_knots(s, 5, 4)
    pts = np.r_[rng.uniform(kv.lo, kv.hi, 20), kv.lo, kv.hi]
    B = basis_matrix(kv, pts)
    for row, x in zip(B, pts):
        np.testing.assert_allclose(row, cox_de_boor_row(kv.knots, 4, x), rtol=0, atol=1e-12)


@pytest.mark.parametrize("order", [1, 2, 3, 4, 5])
def test_other_orders_match_oracle(rng, order):
    kv = place_knots(rng.uniform(size=200), 3, order)
    pts = rng.uniform(kv.lo, kv.hi, 10)
    for x in pts:
        np.testing.assert_allclose(bspline_row(kv, x), cox_de_boor_row(kv.knots, order, x),
                                   atol=1e-12)


def test_out_of_support_is_clamped(rng):
    kv = place_knots(rng.uniform(size=100), 2, 4)
    np.testing.assert_array_equal(bspline_row(kv, kv.hi + 5), bspline_row(kv, kv.hi))
    np.testing.assert_array_equal(bspline_row(kv, kv.lo - 5), bspline_row(kv, kv.lo))
    assert n_clamped(kv, [kv.lo - 1, 0.5, kv.hi + 1]) == 2


@pytest.mark.parametrize("L", [1, 2, 3])
def test_partition_of_unity_and_local_support(rng, L):
    order = 4
    kvs = [place_knots(rng.standard_normal(300), 3 + j, order) for j in range(L)]
    pts = [rng.uniform(kv.lo, kv.hi, 1000) for kv in kvs]
    blocks = [basis_matrix(kv, p) for kv, p in zip(kvs, pts)]
    T = tensor_matrix(blocks)
    assert np.max(np.abs(T.sum(axis=1) - 1.0)) < 1e-12
    assert T.min() >= 0
    assert np.max(np.count_nonzero(T, axis=1)) <= order**L


def test_tensor_row_ordering():
    np.testing.assert_array_equal(tensor_row([[1, 0], [0, 1]]), [0, 1, 0, 0])
    np.testing.assert_array_equal(tensor_row([[0, 1], [1, 0]]), [0, 0, 1, 0])


def test_tensor_row_errors():
    with pytest.raises(ValueError):
        tensor_row([])
    with pytest.raises(ValueError):
        tensor_row([[1.0]] * 4)


def test_tensor_dimension_formula(rng):
    kvs = [place_knots(rng.standard_normal(100), 2, 4) for _ in range(2)]
    row = tensor_row([bspline_row(kv, 0.1) for kv in kvs])
    assert row.size == 36 == (2 + 4) * (2 + 4)


def test_tensor_matrix_agrees_with_rows(rng):
    A, B = rng.uniform(size=(5, 3)), rng.uniform(size=(5, 4))
    T = tensor_matrix([A, B])
    for i in range(5):
        np.testing.assert_array_equal(T[i], tensor_row([A[i], B[i]]))


def test_default_knot_growth():
    assert default_interior_knots(5000, 1) == 6  # ceil(5000**0.2) = 6
    assert default_interior_knots(5000, 2) == 4  # ceil(5000**0.15) = 4
    assert default_interior_knots(10, 1) == 2
    assert SieveSpec(n_interior=3).interior_for(5000, 2) == 3


def test_expand_shapes(rng):
    S = rng.standard_normal((400, 3))
    spec = SieveSpec(order=4, n_interior=2)
    assert expand(S[:, 0], spec).matrix.shape == (400, 6)
    assert expand(S[:, :2], spec).matrix.shape == (400, 6 + 6 + 36)
    assert expand(S, spec).matrix.shape == (400, 3 * 6 + 3 * 36)
    full = SieveSpec(order=4, n_interior=2, full_tensor=True)
    assert expand(S, full).matrix.shape == (400, 3 * 6 + 216)


def test_expand_reuses_knots(rng):
    S = rng.standard_normal((200, 1))
    e = expand(S, SieveSpec(n_interior=2))
    e2 = expand(S * 3.0, SieveSpec(n_interior=2), knots=e.knots)
    assert e2.n_clamped > 0
    np.testing.assert_array_equal(e2.matrix.shape, e.matrix.shape)


def test_lipschitz_constant_stable_under_refinement(rng):
    # ||B(s) - B(s')|| / (J ||s - s'||) should not blow up as J grows
    consts = []
    for J in (2, 4, 8, 16):
        kv = place_knots(np.linspace(0, 1, 2001), J, 4)
        s = rng.uniform(0, 1, 2000)
        ds = rng.uniform(-1e-3, 1e-3, 2000)
        s2 = np.clip(s + ds, 0, 1)
        diff = np.linalg.norm(basis_matrix(kv, s) - basis_matrix(kv, s2), axis=1)
        step = np.abs(s - s2)
        ok = step > 0
        consts.append(np.max(diff[ok] / (J * step[ok])))
    assert max(consts) < 2.0 * min(consts)
    assert max(consts) < 10.0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=5, max_size=60, unique=True),
       st.integers(0, 6), st.integers(1, 5), st.floats(0, 1))
def test_partition_of_unity_property(samples, J, order, u):
    kv = place_knots(samples, J, order)
    x = kv.lo + u * (kv.hi - kv.lo)
    row = bspline_row(kv, x)
    assert abs(row.sum() - 1.0) < 1e-12
    assert row.min() >= 0
    assert np.count_nonzero(row) <= order
