import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbacd import dataio
from mbacd.dataio import Dataset, ParseError


def write(tmp_path, text, name="d.svm"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_example(tmp_path):
    ds = dataio.parse_libsvm(write(tmp_path, "+1 1:2.0 3:1.5\n-1 2:1.0"))
    assert (ds.rows, ds.cols) == (2, 3)
    assert set(ds.entries) == {(0, 0, 2.0), (0, 2, 1.5), (1, 1, 1.0)}
    assert ds.labels.tolist() == [1.0, -1.0]
    assert np.array_equal(dataio.to_dense(ds), [[2.0, 0.0, 1.5], [0.0, 1.0, 0.0]])


def test_empty_row_comments_and_zero_labels(tmp_path):
    ds = dataio.parse_libsvm(write(tmp_path, "# header\n+1\n0 2:3  # trailing\n\n1 1:1\n"))
    assert ds.rows == 3 and ds.cols == 2
    assert ds.labels.tolist() == [1.0, -1.0, 1.0]
    assert np.array_equal(dataio.to_dense(ds)[0], [0.0, 0.0])


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("+1 1:2\n-1 2:1 2:3\n", 2),
        ("+1 3:1 2:1\n", 1),
        ("+1 1:2\nabc 1:1\n", 2),
        ("+1 1:2\n+1 0:1\n", 2),
        ("+1 1:2\n-1 1-2\n", 2),
        ("+1 1:x\n", 1),
        ("2 1:1\n", 1),
    ],
)
def test_parse_errors_carry_line_numbers(tmp_path, text, lineno):
    with pytest.raises(ParseError) as err:
        dataio.parse_libsvm(write(tmp_path, text))
    assert err.value.lineno == lineno
    assert f":{lineno}:" in str(err.value)


def test_dims_override(tmp_path):
    path = write(tmp_path, "+1 1:2\n-1 2:1\n")
    assert dataio.parse_libsvm(path, dims=(2, 5)).cols == 5
    with pytest.raises(ValueError):
        dataio.parse_libsvm(path, dims=(2, 1))
    with pytest.raises(ValueError):
        dataio.parse_libsvm(path, dims=(3, 5))


def test_to_dense_budget_and_zero():
    ds = Dataset(3, 4, (), np.array([1.0, -1.0, 1.0]))
    assert np.array_equal(dataio.to_dense(ds), np.zeros((3, 4)))
    with pytest.raises(MemoryError, match="diagonal"):
        dataio.to_dense(ds, budget=5)


def test_column_norms_match_sparse_sum():
    ds = dataio.make_toy_dataset(30, 7, seed=4)
    acc = np.zeros(ds.cols)
    for _, c, x in ds.entries:
        acc[c] += x * x
    assert np.allclose((dataio.to_dense(ds) ** 2).sum(axis=0), acc, rtol=1e-15)


def test_toy_dataset_deterministic():
    assert dataio.make_toy_dataset(10, 4, 1) == dataio.make_toy_dataset(10, 4, 1)
    assert dataio.make_toy_dataset(10, 4, 1) != dataio.make_toy_dataset(10, 4, 2)


@settings(max_examples=30, deadline=None)
@given(m=st.integers(1, 12), n=st.integers(1, 8), seed=st.integers(0, 10_000))
def test_round_trip(tmp_path_factory, m, n, seed):
    ds = dataio.make_toy_dataset(m, n, seed, density=0.5)
    path = tmp_path_factory.mktemp("rt") / "x.svm"
    dataio.write_libsvm(ds, path)
    back = dataio.parse_libsvm(path, dims=(m, n))
    assert back == ds
