"""Initial matching, median K-NN graphs, GTM, RANSAC, validation."""

import numpy as np
import pytest

from georeg.errors import DegenerateInput, NoConsensus, NoMutualPairs, TooFewPoints
from georeg.matching import (
    CenterSet,
    MatchSet,
    angle_distance_mod_pi,
    area_direction_validate,
    gtm_filter,
    initial_match,
    median_knn_graph,
    ransac_filter,
)


def _centers(pts, areas=None, angles=None, ids=None):
    pts = np.asarray(pts, dtype=np.float64)
    n = len(pts)
    return CenterSet(
        ids=tuple(ids) if ids is not None else tuple(range(n)),
        centers=pts,
        areas=np.ones(n) if areas is None else np.asarray(areas, float),
        angles=np.zeros(n) if angles is None else np.asarray(angles, float),
    )


def test_center_set_validation():
    with pytest.raises(ValueError):
        _centers([[0, 0], [1, 1]], ids=[3, 3])
    with pytest.raises(ValueError):
        CenterSet((0,), np.array([[np.nan, 0.0]]), np.ones(1), np.zeros(1))


def test_match_set_one_to_one():
    with pytest.raises(ValueError):
        MatchSet(((1, 2), (1, 3)), (True, True))
    with pytest.raises(ValueError):
        MatchSet(((1, 2), (3, 2)), (True, True))
    ms = MatchSet(((1, 2), (3, 4)), (True, False))
    assert ms.inlier_pairs() == ((1, 2),)
    # with_inliers clears live pairs outside the kept set and never revives dead ones
    assert ms.with_inliers({1}).inlier == (False, False)
    assert ms.with_inliers({0}).inlier == (True, False)


def test_initial_match_identity():
    a = _centers([[0, 0], [10, 0], [0, 10]])
    b = _centers([[0, 0], [10, 0], [0, 10]], ids=[7, 8, 9])
    matches, t = initial_match(a, b)
    assert matches.pairs == ((0, 7), (1, 8), (2, 9))
    assert np.allclose(t, 0.0)
    assert all(matches.inlier)


def test_initial_match_unbalanced_sets():
    a = _centers([[0, 0], [10, 0]])
    b = _centers([[0.2, 0.1], [10.1, -0.2], [50.0, 50.0]])
    matches, _ = initial_match(a, b)
    assert matches.pairs == ((0, 0), (1, 1))  # the extra center stays unmatched


def test_initial_match_always_uses_largest_displacement():
    a = _centers([[0, 0], [20, 0], [0, 20]], areas=[100, 5, 5])
    shift = np.array([300.0, -40.0])
    b = _centers([p + shift for p in a.centers], areas=[100, 5, 5])
    matches, t = initial_match(a, b, mode="always")
    assert np.allclose(t, shift)
    assert matches.pairs == ((0, 0), (1, 1), (2, 2))


def test_initial_match_auto_triggers_on_collapse():
    # tight row far from its displaced copy: plain mutual NN yields a single
    # pair, which is under half of min(|a|, |b|) and triggers pre-translation
    a = _centers([[0, 0], [1, 0], [2, 0]], areas=[9, 1, 1])
    b = _centers([[100, 0], [101, 0], [102, 0]], areas=[9, 1, 1])
    plain, t0 = initial_match(a, b, mode="never")
    assert len(plain) == 1
    assert np.allclose(t0, 0.0)
    matches, t = initial_match(a, b, mode="auto")
    assert np.allclose(t, [100.0, 0.0])
    assert matches.pairs == ((0, 0), (1, 1), (2, 2))


def test_initial_match_explicit_translation_overrides():
    a = _centers([[0, 0], [5, 5]])
    b = _centers([[1000, 0], [1005, 5]])
    matches, t = initial_match(a, b, pre_translation=np.array([1000.0, 0.0]), mode="never")
    assert np.allclose(t, [1000.0, 0.0])
    assert matches.pairs == ((0, 0), (1, 1))


def test_initial_match_errors():
    a = _centers([[0, 0]])
    with pytest.raises(NoMutualPairs):
        initial_match(a, CenterSet((), np.empty((0, 2)), np.empty(0), np.empty(0)))
    with pytest.raises(ValueError):
        initial_match(a, a, mode="sometimes")


def test_median_knn_chain():
    pts = np.array([[0, 0], [1, 0], [2, 0], [3, 0], [4, 0]], float)
    g = median_knn_graph(pts, K=2)
    adj = g.adjacency
    assert not adj.diagonal().any()
    assert (adj == adj.T).all()
    # median directed 2-NN distance is 1.x: only unit-spaced neighbors remain
    for i in range(4):
        assert adj[i, i + 1]
    assert not adj[0, 2]


def test_median_knn_isolates_far_outlier():
    pts = np.array([[0, 0], [1, 0], [0, 1], [1, 1], [500, 500]], float)
    g = median_knn_graph(pts, K=2)
    assert not g.adjacency[4].any()
    assert not g.adjacency[:, 4].any()


def test_median_knn_matches_brute_force():
    rng = np.random.default_rng(13)
    for _ in range(20):
        pts = rng.uniform(0, 100, size=(30, 2))
        K = int(rng.integers(2, 6))
        g = median_knn_graph(pts, K=K)
        d = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        np.fill_diagonal(d, np.inf)
        knn = np.argsort(d, axis=1, kind="stable")[:, :K]
        dists = np.take_along_axis(d, knn, axis=1)
        med = np.median(dists)
        expected = np.zeros((30, 30), dtype=bool)
        for i in range(30):
            for j in knn[i]:
                if i in knn[j] and d[i, j] <= med:
                    expected[i, j] = expected[j, i] = True
        assert np.array_equal(g.adjacency, expected)
        assert g.median_distance == pytest.approx(med)


def test_median_knn_too_few_points():
    with pytest.raises(TooFewPoints):
        median_knn_graph(np.zeros((4, 2)), K=4)


def _identity_matches(n):
    return MatchSet(tuple((i, i) for i in range(n)), (True,) * n)


def test_gtm_keeps_consistent_sets():
    rng = np.random.default_rng(14)
    pts = rng.uniform(0, 100, size=(12, 2))
    a = _centers(pts)
    b = _centers(pts + np.array([15.0, -7.0]) + rng.normal(0, 0.1, pts.shape))
    out = gtm_filter(_identity_matches(12), a, b, K=4)
    assert all(out.inlier)


def test_gtm_removes_wrong_assignment():
    rng = np.random.default_rng(15)
    # ladder layout: every node has distant partners for a wrong pairing
    base = np.array([[40.0 * i, 40.0 * j] for j in range(2) for i in range(8)])
    pts = base + rng.uniform(-6, 6, base.shape)
    b_pts = pts + np.array([10.0, 5.0])
    swapped = b_pts.copy()
    swapped[[2, 13]] = swapped[[13, 2]]  # two far-apart nodes trade places
    a = _centers(pts)
    b = _centers(swapped)
    out = gtm_filter(_identity_matches(16), a, b, K=4)
    assert not out.inlier[2]
    assert not out.inlier[13]
    assert sum(out.inlier) >= 12


def test_gtm_needs_enough_pairs():
    pts = np.random.default_rng(16).uniform(0, 50, size=(5, 2))
    a = _centers(pts)
    b = _centers(pts)
    with pytest.raises(DegenerateInput):
        gtm_filter(_identity_matches(5), a, b, K=4)  # needs K + 2 live pairs


def test_gtm_degenerates_on_structureless_pairing():
    rng = np.random.default_rng(17)
    a = _centers(rng.uniform(0, 100, size=(10, 2)))
    b = _centers(rng.uniform(0, 100, size=(10, 2)))  # unrelated geometry
    with pytest.raises(DegenerateInput):
        gtm_filter(_identity_matches(10), a, b, K=4)


def test_ransac_recovers_translation_inliers():
    rng = np.random.default_rng(18)
    pts = rng.uniform(0, 200, size=(15, 2))
    moved = pts + np.array([12.0, -3.0])
    moved[4] += np.array([60.0, 44.0])
    moved[9] += np.array([-80.0, 31.0])
    a = _centers(pts)
    b = _centers(moved)
    out = ransac_filter(_identity_matches(15), a, b, model="similarity", inlier_tol=1.0, seed=0)
    assert not out.inlier[4] and not out.inlier[9]
    assert sum(out.inlier) == 13


def test_ransac_affine_model():
    rng = np.random.default_rng(19)
    pts = rng.uniform(0, 100, size=(12, 2))
    A = np.array([[1.1, 0.2], [-0.1, 0.9]])
    mapped = pts @ A.T + np.array([5.0, 7.0])
    mapped[3] += 40.0
    a = _centers(pts)
    b = _centers(mapped)
    out = ransac_filter(_identity_matches(12), a, b, model="affine", inlier_tol=0.5, seed=1)
    assert not out.inlier[3]
    assert sum(out.inlier) == 11


def test_ransac_no_consensus():
    rng = np.random.default_rng(20)
    a = _centers(rng.uniform(0, 100, size=(8, 2)))
    b = _centers(rng.uniform(0, 100, size=(8, 2)))
    with pytest.raises(NoConsensus):
        ransac_filter(_identity_matches(8), a, b, model="similarity", inlier_tol=1e-6, seed=2)


def test_ransac_seeded_determinism():
    rng = np.random.default_rng(21)
    pts = rng.uniform(0, 100, size=(10, 2))
    moved = pts + 5.0
    moved[2] += 30.0
    a = _centers(pts)
    b = _centers(moved)
    r1 = ransac_filter(_identity_matches(10), a, b, model="similarity", seed=7)
    r2 = ransac_filter(_identity_matches(10), a, b, model="similarity", seed=7)
    assert r1.inlier == r2.inlier


def test_angle_distance_mod_pi():
    assert angle_distance_mod_pi(np.radians(5), np.radians(178)) == pytest.approx(np.radians(7))
    assert angle_distance_mod_pi(0.0, np.pi) == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(22)
    for _ in range(200):
        x, y = rng.uniform(-10, 10, 2)
        d = angle_distance_mod_pi(x, y)
        assert 0.0 <= d <= np.pi / 2 + 1e-12
        assert d == pytest.approx(angle_distance_mod_pi(y, x))


def test_area_direction_validation():
    a = _centers([[0, 0], [10, 0], [20, 0], [30, 0], [40, 0], [50, 0]],
                 areas=[100, 100, 100, 100, 100, 100],
                 angles=[0.0, 0.2, np.radians(5), 0.0, 1.0, 0.5])
    b = _centers([[0, 0], [10, 0], [20, 0], [30, 0], [40, 0], [50, 0]],
                 areas=[120, 150, 100, 250, 100, 100],
                 angles=[0.05, 0.2, np.radians(178), 0.0, 1.0 + np.radians(25), 0.5])
    matches = _identity_matches(6)
    out = area_direction_validate(matches, a, b, area_ratio_tol=2.0, angle_tol=np.radians(20))
    assert out.inlier[0]  # ratio 1.2, angle 0.05
    assert out.inlier[1]
    assert out.inlier[2]  # 5 deg vs 178 deg is 7 deg apart mod pi
    assert not out.inlier[3]  # ratio 2.5 over the x2 tolerance
    assert not out.inlier[4]  # 25 deg over the 20 deg tolerance
    assert out.inlier[5]
