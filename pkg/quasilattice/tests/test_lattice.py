import itertools

import numpy as np
import pytest

from quasilattice.exceptions import (
    EnumerationLimitError,
    PreconditionError,
    SpecParseError,
    StructuralError,
    UndefinedResultError,
)
from quasilattice.lattice import Box, covering_radius, enumerate_lattice, nearest_pair, product_min_distance


def brute_force(B, target, shift, reach):
    n = B.shape[0]
    grid = np.array(list(itertools.product(range(-reach, reach + 1), repeat=n)), dtype=np.int64)
    keep = target.contains(grid @ B.T + shift)
    z = grid[keep]
    return z[np.lexsort(z.T[::-1])]


def test_box_basics():
    box = Box([0.0, 1.0], [2.0, 4.0])
    assert box.dim == 2
    assert box.volume == 6.0
    assert box.contains([[0.0, 1.0], [2.0, 1.0], [1.0, 3.999]]).tolist() == [True, False, True]
    assert Box().volume == 1.0
    assert Box([1.0], [0.0]).is_empty
    assert Box([0.0], [1.0]).dilate(3.0) == Box([-1.0], [2.0])
    assert Box([0.0], [1.0]).negate() == Box([-1.0], [0.0])
    assert not Box([0.0], [1.0]).overlaps(Box([1.0], [2.0]))
    assert Box([0.0], [1.0]).overlaps(Box([0.5], [2.0]))


def test_box_parse_and_json():
    assert Box.parse("0:1,2:3") == Box([0.0, 2.0], [1.0, 3.0])
    assert Box.parse("-1:1", dim=3) == Box([-1.0] * 3, [1.0] * 3)
    assert Box.from_json({"lo": [0], "hi": [1]}) == Box([0.0], [1.0])
    assert Box.from_json([[0], [1]]) == Box([0.0], [1.0])
    assert Box.from_json("0:1") == Box([0.0], [1.0])
    with pytest.raises(SpecParseError):
        Box.parse("0-1")
    with pytest.raises(SpecParseError):
        Box.parse("0:1,0:1", dim=3)
    with pytest.raises(StructuralError):
        Box([0.0], [1.0, 2.0])


@pytest.mark.parametrize("seed", range(6))
def test_enumeration_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 2
    B = np.eye(n) + 0.2 * rng.uniform(-1, 1, (n, n))
    lo = rng.uniform(-2, 0, n)
    target = Box(lo, lo + rng.uniform(0.5, 2, n))
    shift = rng.uniform(-0.5, 0.5, n)
    z = enumerate_lattice(B, target, shift=shift)
    expected = brute_force(B, target, shift, reach=8)
    assert z.dtype == np.int64
    assert np.array_equal(z, expected)


def test_enumeration_unit_lattice_is_half_open():
    z = enumerate_lattice(np.eye(1), Box([0.0], [3.0]))
    assert z.ravel().tolist() == [0, 1, 2]
    z = enumerate_lattice(np.eye(2), Box([0.0, 0.0], [2.0, 2.0]))
    assert z.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_enumeration_of_a_thin_strip():
    # golden-ratio strip: few points, wide index range along one axis
    phi = (1 + 5 ** 0.5) / 2
    B = np.array([[1.0, phi], [1.0, -1.0 / phi]])
    target = Box([0.0, -1.0], [200.0, 1.0])
    z = enumerate_lattice(B, target)
    assert np.array_equal(z, brute_force(B, target, np.zeros(2), reach=200))
    assert len(z) > 100


def test_enumeration_errors():
    with pytest.raises(PreconditionError):
        enumerate_lattice(np.array([[1.0, 2.0], [2.0, 4.0]]), Box([0.0, 0.0], [1.0, 1.0]))
    with pytest.raises(PreconditionError):
        enumerate_lattice(np.eye(1), Box([0.0], [np.inf]))
    with pytest.raises(StructuralError):
        enumerate_lattice(np.eye(2), Box([0.0], [1.0]))
    with pytest.raises(EnumerationLimitError):
        enumerate_lattice(np.eye(3), Box([0.0] * 3, [100.0] * 3), max_candidates=100)
    assert enumerate_lattice(np.eye(2), Box([1.0, 0.0], [0.0, 1.0])).shape == (0, 2)


def test_nearest_pair():
    d, i, j = nearest_pair([[0.0], [5.0], [5.25], [9.0]])
    assert d == pytest.approx(0.25)
    assert {i, j} == {1, 2}
    with pytest.raises(UndefinedResultError):
        nearest_pair([[1.0]])


def test_product_distance_wraps_the_torus():
    real = [[0.0], [0.0], [10.0]]
    torus = [[0.05], [0.95], [0.5]]
    disc = [[0], [0], [0]]
    d, pair = product_min_distance(real, torus, disc)
    assert d == pytest.approx(0.1)
    assert set(pair) == {0, 1}


def test_product_distance_counts_disc_mismatch():
    d, pair = product_min_distance([[0.0], [0.5], [3.0]], np.zeros((3, 0)), [[0], [1], [0]])
    assert d == pytest.approx(1.5)
    assert set(pair) == {0, 1}
    d, _ = product_min_distance(np.zeros((2, 0)), np.zeros((2, 0)), [[0], [1]])
    assert d == 1.0
    d, _ = product_min_distance(np.zeros((2, 0)), np.zeros((2, 0)), [[1], [1]])
    assert d == 0.0


def test_covering_radius():
    assert covering_radius([0.0, 0.5]) == pytest.approx(0.25)
    assert covering_radius([0.1, 1.2, 2.3]) == pytest.approx((1.0 - 0.2) / 2)
    grid = np.array(list(itertools.product(np.arange(4) / 4, repeat=2)))
    r = covering_radius(grid)
    assert 0.15 < r <= np.sqrt(2) / 8 + 1e-12
    assert covering_radius(np.zeros((0, 2))) == pytest.approx(np.sqrt(2) / 2)
