import numpy as np

from utils.spatial_index import UniformCellHash


def _brute_pairs(centers, distance):
    n = len(centers)
    out = []
    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(centers[i] - centers[j]) <= distance:
                out.append((i, j))
    return out


def test_pairs_within_matches_brute_force():
    rng = np.random.default_rng(3)
    centers = rng.uniform(0.0, 1.0, size=(300, 3))
    index = UniformCellHash(centers, cell_size=0.1)
    pairs = index.pairs_within(0.1)
    assert [tuple(p) for p in pairs.tolist()] == _brute_pairs(centers, 0.1)


def test_pairs_within_with_cell_smaller_than_distance():
    rng = np.random.default_rng(4)
    centers = rng.uniform(-2.0, 2.0, size=(200, 3))
    pairs = UniformCellHash(centers, cell_size=0.05).pairs_within(0.4)
    assert [tuple(p) for p in pairs.tolist()] == _brute_pairs(centers, 0.4)


def test_candidates_cover_every_containing_ball():
    rng = np.random.default_rng(5)
    centers = rng.uniform(0.0, 1.0, size=(100, 3))
    radii = rng.uniform(0.01, 0.08, size=100)
    index = UniformCellHash(centers, radii)
    queries = rng.uniform(0.0, 1.0, size=(2000, 3))
    qi, items = index.candidates(queries)
    found = set(zip(qi.tolist(), items.tolist()))
    d = np.linalg.norm(queries[:, None, :] - centers[None, :, :], axis=2)
    for q, i in zip(*np.nonzero(d <= radii[None, :])):
        assert (int(q), int(i)) in found


def test_query_ball_returns_superset():
    centers = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [5.0, 5.0, 5.0]])
    index = UniformCellHash(centers, cell_size=0.5)
    hits = index.query_ball([0.1, 0.0, 0.0], 1.0)
    assert {0, 1} <= set(hits.tolist())


def test_empty_index():
    index = UniformCellHash(np.empty((0, 3)))
    assert len(index) == 0
    assert index.pairs_within(1.0).shape == (0, 2)
    qi, items = index.candidates(np.zeros((4, 3)))
    assert len(qi) == 0 and len(items) == 0
