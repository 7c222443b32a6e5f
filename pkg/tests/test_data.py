import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multisel.basis import SieveSpec
from multisel.data import (
    DataError,
    Dataset,
    build_first_stage_design,
    from_simulation,
    load_dataset,
    validate,
    write_dataset,
)
from multisel.simulate import generate

SCHEMA = {"outcome": "y", "category": "d", "continuous": ["x"], "binary": ["b"]}


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_small_csv(tmp_path):
    p = write(tmp_path, "y,d,x,b\n1.5,1,0.2,0\n,0,0.1,1\n2.5,2,-0.3,1\n0.5,1,0.9,0\n,0,0.4,1\n")
    ds = load_dataset(p, SCHEMA)
    assert ds.X.shape == (5, 2) and ds.n == 5 and ds.K == 2
    assert ds.names == ("x", "b") and ds.continuous == (True, False)
    np.testing.assert_array_equal(np.isnan(ds.y), [False, True, False, False, True])


def test_outcome_with_category_zero(tmp_path):
    p = write(tmp_path, "y,d,x,b\n1.5,1,0.2,0\n3.0,0,0.1,1\n2.5,2,-0.3,1\n,0,0.9,0\n")
    with pytest.raises(DataError, match=r"rows \[2\]"):
        load_dataset(p, SCHEMA)


def test_missing_outcome_with_positive_category(tmp_path):
    p = write(tmp_path, "y,d,x,b\n,1,0.2,0\n,0,0.1,1\n2.5,2,-0.3,1\n")
    with pytest.raises(DataError, match=r"rows \[1\]"):
        load_dataset(p, SCHEMA)


def test_category_gap(tmp_path):
    p = write(tmp_path, "y,d,x,b\n1.5,2,0.2,0\n,0,0.1,1\n2.5,2,-0.3,1\n")
    with pytest.raises(DataError, match="unobserved"):
        load_dataset(p, SCHEMA)


def test_nonfinite_and_collinear():
    y = np.array([1.0, np.nan, 2.0, 1.0])
    d = np.array([1, 0, 2, 1])
    with pytest.raises(DataError, match="non-finite"):
        validate(y, np.array([[0.1], [np.inf], [0.3], [0.2]]), d)
    with pytest.raises(DataError, match="collinear"):
        validate(y, np.array([[1.0, 2.0], [1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]), d)


def test_schema_errors(tmp_path):
    p = write(tmp_path, "y,d,x\n1.0,1,0.2\n,0,0.1\n")
    with pytest.raises(DataError):
        load_dataset(p, {"outcome": "y"})
    with pytest.raises(DataError, match="not found"):
        load_dataset(p, {"outcome": "y", "category": "d", "continuous": ["w"]})
    p2 = write(tmp_path, "y,d,b\n1.0,1,2\n,0,0\n", "b.csv")
    with pytest.raises(DataError, match="0/1"):
        load_dataset(p2, {"outcome": "y", "category": "d", "binary": ["b"]})


def test_categorical_one_hot_drop_first(tmp_path):
    p = write(tmp_path, "y,d,x,region\n1,1,0.1,north\n,0,0.5,south\n2,1,0.3,east\n,0,0.7,north\n")
    ds = load_dataset(p, {"outcome": "y", "category": "d", "continuous": ["x"],
                          "categorical": ["region"]})
    assert ds.names == ("x", "region=north", "region=south")
    np.testing.assert_array_equal(ds.X[:, 1], [1, 0, 0, 1])
    np.testing.assert_array_equal(ds.X[:, 2], [0, 1, 0, 0])
    assert ds.kinds == ("continuous", "binary", "binary")


def test_round_trip_exact(tmp_path):
    ds = from_simulation(generate("multinomial", 2, 500, 3))
    schema = write_dataset(ds, tmp_path / "sim.csv")
    back = load_dataset(tmp_path / "sim.csv", schema)
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.d, ds.d)
    np.testing.assert_array_equal(back.y, ds.y)
    assert back.names == ds.names and back.kinds == ds.kinds


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_subnormal=False), min_size=6, max_size=30))
def test_round_trip_property(tmp_path_factory, values):
    n = len(values)
    d = np.arange(n) % 3
    y = np.where(d > 0, np.array(values)[::-1], np.nan)
    X = np.column_stack([values, np.arange(n) % 2])
    if np.linalg.matrix_rank(np.hstack([np.ones((n, 1)), X])) < 3:
        return
    ds = Dataset(y, X, d, ("x", "b"), ("continuous", "binary"))
    path = tmp_path_factory.mktemp("rt") / "rt.csv"
    schema = write_dataset(ds, path)
    back = load_dataset(path, schema)
    np.testing.assert_array_equal(back.X, X)
    np.testing.assert_array_equal(back.y, y)


def test_design_dimensions():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((400, 3))
    ds = Dataset(np.where(np.arange(400) % 2, 1.0, np.nan), X, np.arange(400) % 2,
                 ("a", "b", "c"), ("continuous",) * 3)
    Q = build_first_stage_design(ds, SieveSpec(order=4, n_interior=2))
    assert Q.shape == (400, 3 * 6 + 3 * 36)
    one = Dataset(ds.y, X[:, :1], ds.d, ("a",), ("continuous",))
    assert build_first_stage_design(one, SieveSpec(order=4, n_interior=2)).shape == (400, 6)


def test_design_binary_only():
    X = np.column_stack([np.arange(10) % 2, (np.arange(10) // 2) % 2]).astype(float)
    d = np.arange(10) % 2
    ds = Dataset(np.where(d > 0, 1.0, np.nan), X, d, ("p", "q"), ("binary", "binary"))
    np.testing.assert_array_equal(build_first_stage_design(ds, SieveSpec(), linear_index=True), X)
    with pytest.raises(DataError, match="continuous"):
        build_first_stage_design(ds, SieveSpec())


def test_design_binary_columns_appended():
    ds = from_simulation(generate("ordered", 2, 1000, 0))
    Q = build_first_stage_design(ds, SieveSpec(order=4, n_interior=2))
    assert Q.shape == (1000, 6 + 1)
    np.testing.assert_array_equal(Q[:, -1], ds.X[:, 1])
