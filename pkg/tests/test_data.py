"""Data containers and text data files."""

import numpy as np
import pytest

from anchorinv.data import (
    ErrorDist,
    TypeAData,
    TypeBData,
    assign_typeA_anchors,
    perturb_forward_output,
    read_typeA_file,
    read_typeB_file,
    write_typeA_file,
    write_typeB_file,
)
from anchorinv.field import Grid1D


def test_error_dist_validation():
    with pytest.raises(ValueError):
        ErrorDist("weird")
    with pytest.raises(ValueError):
        ErrorDist.normal([-1.0])
    with pytest.raises(ValueError):
        ErrorDist("none", sd=np.array([1.0]))
    assert ErrorDist.none().is_none
    assert ErrorDist.none().is_degenerate
    assert ErrorDist.normal([0.0, 0.0]).is_degenerate
    assert not ErrorDist.normal([0.0, 0.5]).is_degenerate


def test_error_dist_sampling():
    rng = np.random.default_rng(1)
    err = ErrorDist.normal([0.0, 2.0])
    draws = np.array([err.sample(rng) for _ in range(8000)])
    assert np.all(draws[:, 0] == 0.0)
    assert draws[:, 1].std() == pytest.approx(2.0, rel=0.05)
    zero = ErrorDist.none().sample(rng, size=3)
    np.testing.assert_array_equal(zero, np.zeros(3))
    with pytest.raises(ValueError):
        ErrorDist.none().sample(rng)


def test_typeA_from_points():
    grid = Grid1D.regular(10)
    data = TypeAData.from_points(grid, [2.0, 5.0, 9.0], [0.1, 0.2, 0.3])
    np.testing.assert_array_equal(data.node_indices(), [1, 4, 8])
    assert data.error.is_none
    assert data.size == 3
    # off-node location
    with pytest.raises(ValueError, match="do not match grid nodes"):
        TypeAData.from_points(grid, [2.5], [0.1])
    with pytest.raises(ValueError, match="distinct"):
        TypeAData.from_points(grid, [2.0, 2.0], [0.1, 0.2])


def test_typeA_zero_sd_collapses_to_error_free():
    grid = Grid1D.regular(6)
    data = TypeAData.from_points(grid, [2.0, 4.0], [0.1, 0.2], sd=[0.0, 0.0])
    assert data.error.is_none


def test_typeB_validation():
    TypeBData([0, 3], [1.0, 2.0], ErrorDist.none())
    with pytest.raises(ValueError, match="distinct"):
        TypeBData([1, 1], [1.0, 2.0], ErrorDist.none())
    with pytest.raises(ValueError, match="nonnegative"):
        TypeBData([-1], [1.0], ErrorDist.none())


def test_assign_typeA_anchors():
    grid = Grid1D.regular(8)
    exact = TypeAData.from_points(grid, [2.0, 6.0], [0.5, -0.5])
    rng = np.random.default_rng(2)
    va = assign_typeA_anchors(exact, rng)
    np.testing.assert_array_equal(va, exact.values)
    noisy = TypeAData.from_points(grid, [2.0, 6.0], [0.5, -0.5], sd=[0.3, 0.3])
    draws = np.array([assign_typeA_anchors(noisy, rng) for _ in range(8000)])
    np.testing.assert_allclose(draws.mean(axis=0), noisy.values, atol=0.02)
    np.testing.assert_allclose(draws.std(axis=0), [0.3, 0.3], rtol=0.06)


def test_perturb_forward_output():
    rng = np.random.default_rng(3)
    m = np.array([1.0, 2.0])
    same = perturb_forward_output(m, ErrorDist.none(), rng)
    np.testing.assert_array_equal(same, m)
    err = ErrorDist.normal([0.0, 1.0])
    out = perturb_forward_output(m, err, rng)
    assert out[0] == 1.0 and out[1] != 2.0
    with pytest.raises(ValueError):
        perturb_forward_output(np.ones(3), err, rng)


def test_typeA_file_round_trip(tmp_path):
    grid = Grid1D.regular(12)
    path = tmp_path / "a.txt"
    write_typeA_file(path, [3.0, 7.0, 11.0], [0.25, -1.5, 2.0], sd=[0.1, 0.0, 0.2])
    data = read_typeA_file(path, grid)
    np.testing.assert_array_equal(data.node_indices(), [2, 6, 10])
    np.testing.assert_allclose(data.values, [0.25, -1.5, 2.0])
    np.testing.assert_allclose(data.error.sd, [0.1, 0.0, 0.2])


def test_typeA_file_without_sd(tmp_path):
    grid = Grid1D.regular(12)
    path = tmp_path / "a.txt"
    write_typeA_file(path, [3.0, 7.0], [0.25, -1.5])
    data = read_typeA_file(path, grid)
    assert data.error.is_none


def test_typeB_file_round_trip_one_based(tmp_path):
    path = tmp_path / "b.txt"
    write_typeB_file(path, [0, 4, 9], [10.0, 20.0, 30.0])
    first = path.read_text().splitlines()[1]
    assert first.split()[0] == "1"  # written 1-based
    data = read_typeB_file(path)
    np.testing.assert_array_equal(data.indices, [0, 4, 9])  # read back 0-based
    np.testing.assert_allclose(data.values, [10.0, 20.0, 30.0])
    assert data.error.is_none


def test_data_file_comments_and_errors(tmp_path):
    path = tmp_path / "b.txt"
    path.write_text("# header\n\n2 5.5  # trailing comment\n7 1.25 0.5\n")
    data = read_typeB_file(path)
    np.testing.assert_array_equal(data.indices, [1, 6])
    np.testing.assert_allclose(data.error.sd, [0.0, 0.5])

    bad = tmp_path / "bad.txt"
    bad.write_text("1 2 3 4\n")
    with pytest.raises(ValueError):
        read_typeB_file(bad)
    empty = tmp_path / "empty.txt"
    empty.write_text("# nothing\n")
    with pytest.raises(ValueError, match="no data records"):
        read_typeB_file(empty)
    zero_based = tmp_path / "zero.txt"
    zero_based.write_text("0 1.0\n")
    with pytest.raises(ValueError, match="1-based"):
        read_typeB_file(zero_based)
