"""Round-trip tests for the JSON parameter format and CSV datasets."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tppca.io import (
    dof_from_dict,
    dof_to_dict,
    load_dataset,
    load_params,
    params_from_dict,
    params_to_dict,
    save_dataset,
    save_params,
)
from tppca.params import Dataset, DofSpec, ModelParams

finite = st.floats(
    min_value=-1e12, max_value=1e12, allow_nan=False, allow_infinity=False
)
positive = st.floats(min_value=1e-9, max_value=1e9, allow_nan=False)


def dof_strategy():
    nu = st.floats(min_value=0.1, max_value=400.0, allow_nan=False)
    return st.one_of(
        st.just(DofSpec.gaussian()),
        nu.map(DofSpec.single),
        nu.map(lambda v: DofSpec.single_estimated(v)),
        st.tuples(nu, nu).map(lambda t: DofSpec.pair(*t)),
        st.tuples(nu, nu).map(lambda t: DofSpec.pair_estimated(*t)),
    )


@st.composite
def params_strategy(draw):
    q = draw(st.integers(min_value=1, max_value=4))
    d = draw(st.integers(min_value=1, max_value=q))
    W = draw(arrays(float, (q, d), elements=finite))
    mu = draw(arrays(float, (q,), elements=finite))
    sigma2 = draw(positive)
    return ModelParams(W=W, mu=mu, sigma2=sigma2, dof=draw(dof_strategy()))


@given(params_strategy())
@settings(max_examples=60, deadline=None)
def test_params_dict_round_trip_is_exact(p):
    out = params_from_dict(params_to_dict(p))
    np.testing.assert_array_equal(out.W, p.W)
    np.testing.assert_array_equal(out.mu, p.mu)
    assert out.sigma2 == p.sigma2
    assert out.dof == p.dof


@given(dof_strategy())
@settings(max_examples=40, deadline=None)
def test_dof_dict_round_trip(dof):
    assert dof_from_dict(dof_to_dict(dof)) == dof


def test_params_file_round_trip(tmp_path):
    p = ModelParams(
        W=[[2.0], [1.0]],
        mu=[0.1, -0.2],
        sigma2=0.5,
        dof=DofSpec.pair_estimated(3.0, 5.0, lower=0.05, upper=500.0),
    )
    path = tmp_path / "params.json"
    save_params(p, path)
    out = load_params(path)
    np.testing.assert_array_equal(out.W, p.W)
    np.testing.assert_array_equal(out.mu, p.mu)
    assert out.sigma2 == p.sigma2
    assert out.dof == p.dof


def test_save_params_validates(tmp_path):
    bad = ModelParams(W=[[1.0]], mu=[0.0], sigma2=-1.0)
    with pytest.raises(ValueError):
        save_params(bad, tmp_path / "bad.json")


@given(
    arrays(
        float,
        st.tuples(st.integers(1, 12), st.integers(1, 4)),
        elements=st.floats(-1e6, 1e6, allow_nan=False),
    ),
    st.booleans(),
    st.booleans(),
)
@settings(max_examples=40, deadline=None)
def test_dataset_round_trip(tmp_path_factory, X, with_mask, header):
    tmp_path = tmp_path_factory.mktemp("ds")
    mask = None
    if with_mask:
        mask = np.zeros(X.shape[0], dtype=bool)
        mask[X.shape[0] // 2 :] = True
    ds = Dataset(X=X, outlier_mask=mask)
    path = tmp_path / "data.csv"
    save_dataset(ds, path, header=header)
    out = load_dataset(path)
    np.testing.assert_array_equal(out.X, ds.X)
    if with_mask:
        np.testing.assert_array_equal(out.outlier_mask, mask)
    else:
        assert out.outlier_mask is None


def test_load_dataset_headerless(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("1.5,2.5\n-0.5,0.25\n")
    ds = load_dataset(path)
    np.testing.assert_array_equal(ds.X, [[1.5, 2.5], [-0.5, 0.25]])


def test_load_dataset_numeric_last_column_not_mask(tmp_path):
    # a 0/1 numeric column without an "outlier" header stays part of X
    path = tmp_path / "plain.csv"
    path.write_text("1.5,1\n-0.5,0\n")
    ds = load_dataset(path)
    assert ds.q == 2
    assert ds.outlier_mask is None


def test_load_dataset_bool_tokens_imply_mask(tmp_path):
    path = tmp_path / "masked.csv"
    path.write_text("1.5,2.5,false\n-0.5,0.25,true\n")
    ds = load_dataset(path)
    assert ds.q == 2
    np.testing.assert_array_equal(ds.outlier_mask, [False, True])


def test_load_dataset_empty_file_errors(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ValueError, match="empty"):
        load_dataset(path)
