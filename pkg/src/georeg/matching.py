"""Correspondence finding between LiDAR region centers and image segment
centers.

Initial one-to-one matching by mutual nearest neighbors (optionally after a
pre-translation derived from the largest regions), outlier rejection with
graph transformation matching (GTM), a seeded RANSAC baseline, and a final
validation on region area ratio and MBR axis direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateInput, NoConsensus, NoMutualPairs, TooFewPoints
from .model import _readonly


@dataclass(frozen=True)
class CenterSet:
    """Region centers with the attributes used for matching and validation."""

    ids: tuple[int, ...]
    centers: np.ndarray
    areas: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 2)
        n = len(centers)
        ids = tuple(int(i) for i in self.ids)
        if len(set(ids)) != len(ids):
            raise ValueError("ids must be unique")
        if len(ids) != n:
            raise ValueError("ids and centers length mismatch")
        if not np.isfinite(centers).all():
            raise ValueError("centers must be finite")
        areas = np.asarray(self.areas, dtype=np.float64).reshape(n)
        angles = np.asarray(self.angles, dtype=np.float64).reshape(n)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "centers", _readonly(centers))
        object.__setattr__(self, "areas", _readonly(areas))
        object.__setattr__(self, "angles", _readonly(angles))

    def __len__(self) -> int:
        return len(self.ids)

    def index_of(self, id_: int) -> int:
        return self.ids.index(id_)


@dataclass(frozen=True)
class MatchSet:
    """Ordered one-to-one pairs (id_lidar, id_image) with inlier flags."""

    pairs: tuple[tuple[int, int], ...]
    inlier: tuple[bool, ...]

    def __post_init__(self):
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        inlier = tuple(bool(v) for v in self.inlier)
        if len(pairs) != len(inlier):
            raise ValueError("pairs and inlier flags length mismatch")
        a_ids = [p[0] for p in pairs]
        b_ids = [p[1] for p in pairs]
        if len(set(a_ids)) != len(a_ids) or len(set(b_ids)) != len(b_ids):
            raise ValueError("matching must be one-to-one")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "inlier", inlier)

    def __len__(self) -> int:
        return len(self.pairs)

    def inlier_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(p for p, ok in zip(self.pairs, self.inlier) if ok)

    def with_inliers(self, keep_positions: set[int]) -> "MatchSet":
        """Clear the inlier flag of every live pair not in ``keep_positions``
        (positions index into the pairs tuple)."""
        flags = tuple(
            ok and (i in keep_positions) for i, ok in enumerate(self.inlier)
        )
        return MatchSet(self.pairs, flags)


@dataclass(frozen=True)
class MedianKnnGraph:
    """K-nearest-neighbor graph keeping only mutual edges no longer than the
    median of all directed K-NN distances."""

    adjacency: np.ndarray
    K: int
    median_distance: float

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        object.__setattr__(self, "adjacency", _readonly(adj))


def _mutual_nn(ca: np.ndarray, cb: np.ndarray) -> list[tuple[int, int]]:
    d = cdist(ca, cb)
    nn_ab = d.argmin(axis=1)
    nn_ba = d.argmin(axis=0)
    return [(i, int(j)) for i, j in enumerate(nn_ab) if nn_ba[j] == i]


def initial_match(
    a: CenterSet,
    b: CenterSet,
    pre_translation: np.ndarray | None = None,
    mode: str = "auto",
) -> tuple[MatchSet, np.ndarray]:
    """Mutual nearest-neighbor matching of two center sets.

    ``pre_translation`` (added to a's centers) overrides the mode. Modes:
    "never" matches in place; "always" first translates by the displacement
    of the two largest-area regions; "auto" applies that translation only
    when plain matching pairs up less than half of min(|a|, |b|) centers.
    Returns the match set and the translation actually used.
    """
    if mode not in ("auto", "always", "never"):
        raise ValueError(f"unknown pre-translation mode: {mode}")
    if len(a) == 0 or len(b) == 0:
        raise NoMutualPairs("cannot match empty center sets")

    def largest_shift() -> np.ndarray:
        ia = int(np.argmax(a.areas))
        ib = int(np.argmax(b.areas))
        return b.centers[ib] - a.centers[ia]

    if pre_translation is not None:
        t = np.asarray(pre_translation, dtype=np.float64).reshape(2)
        pairs = _mutual_nn(a.centers + t, b.centers)
    elif mode == "always":
        t = largest_shift()
        pairs = _mutual_nn(a.centers + t, b.centers)
    else:
        t = np.zeros(2)
        pairs = _mutual_nn(a.centers, b.centers)
        if mode == "auto" and len(pairs) < 0.5 * min(len(a), len(b)):
            t = largest_shift()
            pairs = _mutual_nn(a.centers + t, b.centers)
    if not pairs:
        raise NoMutualPairs("no mutual nearest-neighbor pairs")
    id_pairs = tuple((a.ids[i], b.ids[j]) for i, j in pairs)
    return MatchSet(id_pairs, (True,) * len(id_pairs)), t


def median_knn_graph(centers: np.ndarray, K: int = 4) -> MedianKnnGraph:
    """Median-filtered mutual K-NN graph of a 2D point set.

    Edge (i, j) exists iff j is among the K nearest neighbors of i, i among
    the K nearest of j, and d(i, j) does not exceed the median of all n*K
    directed K-NN distances.
    """
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    n = len(centers)
    if n <= K:
        raise TooFewPoints(f"need more than K={K} points, got {n}")
    d = cdist(centers, centers)
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")[:, :K]
    knn_dists = np.take_along_axis(d, order, axis=1)
    median = float(np.median(knn_dists))
    in_knn = np.zeros((n, n), dtype=bool)
    np.put_along_axis(in_knn, order, True, axis=1)
    adjacency = in_knn & in_knn.T & (d <= median)
    return MedianKnnGraph(adjacency, K, median)


def gtm_filter(matches: MatchSet, a: CenterSet, b: CenterSet, K: int = 4) -> MatchSet:
    """Graph transformation matching.

    Repeatedly builds the median K-NN graphs of the currently matched
    centers on both sides and removes the pair whose vertex has the largest
    column sum in |A_a - A_b| (lowest pair index on ties) until the graphs
    agree. Survivors keep their inlier flag; removed pairs lose it.
    """
    live = [i for i, ok in enumerate(matches.inlier) if ok]
    if len(live) < K + 2:
        raise DegenerateInput(f"GTM needs at least K+2={K + 2} pairs, got {len(live)}")
    idx_a = {id_: i for i, id_ in enumerate(a.ids)}
    idx_b = {id_: i for i, id_ in enumerate(b.ids)}
    while True:
        if len(live) < K + 1:
            raise DegenerateInput("GTM removed too many pairs to continue")
        sel_a = [idx_a[matches.pairs[i][0]] for i in live]
        sel_b = [idx_b[matches.pairs[i][1]] for i in live]
        ga = median_knn_graph(a.centers[sel_a], K)
        gb = median_knn_graph(b.centers[sel_b], K)
        residual = ga.adjacency != gb.adjacency
        if not residual.any():
            break
        worst = int(np.argmax(residual.sum(axis=0)))
        live.pop(worst)
    return matches.with_inliers(set(live))


def _fit_similarity(src: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    """Least-squares 2D similarity (rotation, uniform scale, translation) as
    complex z' = alpha*z + beta; returns (a, b, tx, ty) for
    [[a, -b], [b, a]] @ p + t, or None if degenerate."""
    zs = src[:, 0] + 1j * src[:, 1]
    zd = dst[:, 0] + 1j * dst[:, 1]
    A = np.stack([zs, np.ones_like(zs)], axis=1)
    if len(src) == 2 and abs(zs[0] - zs[1]) < 1e-12:
        return None
    sol, *_ = np.linalg.lstsq(A, zd, rcond=None)
    alpha, beta = sol
    if abs(alpha) < 1e-15:
        return None
    return np.array([alpha.real, alpha.imag, beta.real, beta.imag])


def _apply_similarity(params: np.ndarray, pts: np.ndarray) -> np.ndarray:
    a, b, tx, ty = params
    rot = np.array([[a, -b], [b, a]])
    return pts @ rot.T + np.array([tx, ty])


def _fit_affine(src: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    A = np.hstack([src, np.ones((len(src), 1))])
    if len(src) >= 3:
        # collinear sample cannot determine an affinity
        if np.linalg.matrix_rank(A, tol=1e-9) < 3:
            return None
    sol, *_ = np.linalg.lstsq(A, dst, rcond=None)
    return sol  # (3, 2)


def _apply_affine(params: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return np.hstack([pts, np.ones((len(pts), 1))]) @ params


_MODELS = {
    "similarity": (2, _fit_similarity, _apply_similarity),
    "affine": (3, _fit_affine, _apply_affine),
}


def ransac_filter(
    matches: MatchSet,
    a: CenterSet,
    b: CenterSet,
    model: str = "similarity",
    inlier_tol: float = 1.0,
    iterations: int = 500,
    seed: int = 0,
) -> MatchSet:
    """RANSAC over a 2D transform between matched centers.

    The best hypothesis maximizes (inlier count, -inlier residual sum,
    earliest iteration); it is refit on its consensus set and pairs within
    ``inlier_tol`` of the refit keep their inlier flag. Deterministic under
    ``seed``.
    """
    if model not in _MODELS:
        raise ValueError(f"unknown RANSAC model: {model}")
    sample_size, fit, apply_model = _MODELS[model]
    live = [i for i, ok in enumerate(matches.inlier) if ok]
    if len(live) < max(3, sample_size):
        raise DegenerateInput(f"RANSAC needs at least {max(3, sample_size)} pairs")
    idx_a = {id_: i for i, id_ in enumerate(a.ids)}
    idx_b = {id_: i for i, id_ in enumerate(b.ids)}
    pts_a = a.centers[[idx_a[matches.pairs[i][0]] for i in live]]
    pts_b = b.centers[[idx_b[matches.pairs[i][1]] for i in live]]
    rng = np.random.default_rng(seed)
    best = None  # (count, -residual_sum, -iteration, inlier_bool)
    for it in range(iterations):
        pick = rng.choice(len(live), size=sample_size, replace=False)
        params = fit(pts_a[pick], pts_b[pick])
        if params is None:
            continue
        res = np.linalg.norm(apply_model(params, pts_a) - pts_b, axis=1)
        inl = res <= inlier_tol
        count = int(inl.sum())
        if count < sample_size:
            continue
        key = (count, -float(res[inl].sum()), -it)
        if best is None or key > best[0]:
            best = (key, inl)
    if best is None or best[0][0] <= sample_size:
        raise NoConsensus("no transform with sufficient inlier support")
    consensus = best[1]
    params = fit(pts_a[consensus], pts_b[consensus])
    if params is not None:
        res = np.linalg.norm(apply_model(params, pts_a) - pts_b, axis=1)
        consensus = res <= inlier_tol
    keep = {live[i] for i in np.flatnonzero(consensus)}
    return matches.with_inliers(keep)


def angle_distance_mod_pi(a1: float, a2: float) -> float:
    """Distance between two undirected axis angles, in [0, pi/2]."""
    d = abs(a1 - a2) % np.pi
    return float(min(d, np.pi - d))


def area_direction_validate(
    matches: MatchSet,
    a: CenterSet,
    b: CenterSet,
    area_ratio_tol: float,
    angle_tol: float,
) -> MatchSet:
    """Keep pairs whose area ratio and MBR long-axis directions agree.

    A pair survives iff max(area)/min(area) <= area_ratio_tol and the mod-pi
    distance between axis angles is <= angle_tol (radians).
    """
    if area_ratio_tol < 1:
        raise ValueError("area_ratio_tol must be >= 1")
    idx_a = {id_: i for i, id_ in enumerate(a.ids)}
    idx_b = {id_: i for i, id_ in enumerate(b.ids)}
    keep = set()
    for pos, (ok, (ia, ib)) in enumerate(zip(matches.inlier, matches.pairs)):
        if not ok:
            continue
        area_a = a.areas[idx_a[ia]]
        area_b = b.areas[idx_b[ib]]
        ratio = max(area_a, area_b) / min(area_a, area_b)
        dang = angle_distance_mod_pi(a.angles[idx_a[ia]], b.angles[idx_b[ib]])
        if ratio <= area_ratio_tol and dang <= angle_tol:
            keep.add(pos)
    return matches.with_inliers(keep)
