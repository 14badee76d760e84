import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gphlr.errors import DataError
from gphlr.geo import (
    AxisScale, Location, LocationSet, Ordering, PastNeighborIndex, distance, generate_perturbed_grid,
    nearest_past_neighbors, order_locations,
)


def brute_neighbors(pts, perm, j, k):
    """Independent oracle: sort past positions by (distance, position)."""
    seq = pts[perm]
    d = np.hypot(*(seq[:j] - seq[j]).T)
    order = sorted(range(j), key=lambda i: (d[i], i))
    return [int(perm[i]) for i in order[:k]]


def test_grid_shape_and_spacing():
    locs = generate_perturbed_grid(900, 1)
    assert locs.n == 900
    c = locs.coords
    assert c.min() > -0.5 / 30 and c.max() < 1.0
    # each point stays within its jittered cell
    side = 30
    centers = np.stack(np.meshgrid(np.arange(side), np.arange(side), indexing="ij"), -1).reshape(-1, 2) + 0.5
    assert np.all(np.abs(c * side - centers) <= 0.4 + 1e-12)


def test_grid_is_seeded():
    a = generate_perturbed_grid(100, 5).coords
    b = generate_perturbed_grid(100, 5).coords
    c = generate_perturbed_grid(100, 6).coords
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_grid_requires_square():
    with pytest.raises(DataError):
        generate_perturbed_grid(99, 1)


def test_scaled_distance():
    a, b = Location(0.0, 0.0), Location(3.0, 4.0)
    assert distance(a, b) == pytest.approx(5.0)
    assert distance(a, b, AxisScale(2.0, 1.0)) == pytest.approx(np.hypot(6.0, 4.0))


def test_coordinate_ordering_is_lexicographic():
    pts = np.array([[0.5, 0.2], [0.1, 0.9], [0.5, 0.1], [0.1, 0.3]])
    o = order_locations(LocationSet(pts), "coordinate")
    assert list(o.perm) == [3, 1, 2, 0]
    assert list(o.position[o.perm]) == [0, 1, 2, 3]


def test_random_ordering_is_seeded_permutation():
    locs = generate_perturbed_grid(64, 2)
    a = order_locations(locs, "random", seed=3)
    b = order_locations(locs, "random", seed=3)
    assert np.array_equal(a.perm, b.perm)
    assert sorted(a.perm) == list(range(64))
    assert list(order_locations(locs, "as-given").perm) == list(range(64))


def test_unknown_ordering():
    with pytest.raises(DataError):
        order_locations(generate_perturbed_grid(4, 1), "spiral")


@pytest.mark.parametrize("strategy", ["coordinate", "random"])
def test_neighbors_match_brute_force(strategy):
    locs = generate_perturbed_grid(225, 11)
    o = order_locations(locs, strategy, seed=1)
    for j in (1, 2, 5, 30, 100, 224):
        for k in (1, 4, 16):
            got = nearest_past_neighbors(locs, o, j, k)
            assert got == brute_neighbors(locs.scaled, o.perm, j, k)[: min(k, j)]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12))
def test_tree_index_equals_brute(seed, k):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(120, 2))
    idx = PastNeighborIndex(pts)
    q = np.arange(k + 1, 120)
    got = idx.query(pts[q], q, k)
    for row, j in zip(got, q):
        d = np.hypot(*(pts[:j] - pts[j]).T)
        want = sorted(range(j), key=lambda i: (d[i], i))[:k]
        assert list(row) == want


def test_locationset_is_read_only():
    locs = generate_perturbed_grid(16, 1)
    with pytest.raises(ValueError):
        locs.coords[0, 0] = 3.0


def test_ordering_identity():
    o = Ordering.identity(5)
    assert list(o.perm) == list(range(5)) and list(o.position) == list(range(5))
