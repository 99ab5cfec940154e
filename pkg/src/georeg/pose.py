"""Camera resectioning from 3D-2D correspondences.

Isotropic point normalization, DLT estimation of the projection matrix,
Gold Standard refinement (damped least squares on the geometric
reprojection error over all 12 entries of P), and decomposition into the
exterior orientation of the core camera model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import rq

from .errors import DegenerateConfiguration, PointAtInfinity
from .model import (
    CameraPose,
    Point3,
    ProjectionMatrix,
    _readonly,
    opk_from_rotation,
    project_points,
)


@dataclass(frozen=True)
class Correspondence32:
    """One 3D region center with its 2D image observation (pixels)."""

    X: Point3
    x: tuple[float, float]

    def __post_init__(self):
        u, v = self.x
        if not (np.isfinite(u) and np.isfinite(v)):
            raise ValueError("image observation must be finite")
        object.__setattr__(self, "x", (float(u), float(v)))


@dataclass(frozen=True)
class PoseEstimate:
    """Refined projection matrix with its decomposed camera pose.

    ``P`` is the least-squares optimum over all 12 entries; ``pose`` is its
    square-pixel, zero-skew reading. For data consistent with that camera
    model the two agree to float precision; ``converged`` is False when the
    refinement stopped on the iteration budget instead of the error
    criterion.
    """

    P: ProjectionMatrix
    pose: CameraPose
    rms_reprojection: float
    per_point_residuals: np.ndarray
    converged: bool
    iterations: int

    def __post_init__(self):
        object.__setattr__(
            self, "per_point_residuals", _readonly(np.asarray(self.per_point_residuals, dtype=np.float64))
        )


def _stack(correspondences) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([c.X.as_array() for c in correspondences], dtype=np.float64)
    x = np.array([c.x for c in correspondences], dtype=np.float64)
    return X, x


def _from_arrays(X: np.ndarray, x: np.ndarray) -> list[Correspondence32]:
    return [
        Correspondence32(Point3(*Xi), (xi[0], xi[1])) for Xi, xi in zip(X, x)
    ]


def normalize_points(correspondences) -> tuple[np.ndarray, np.ndarray, list[Correspondence32]]:
    """Similarity-normalize both sides of a correspondence set.

    2D points are translated to zero centroid and scaled to RMS distance
    sqrt(2); 3D points likewise to sqrt(3). Returns (T_2d 3x3, T_3d 4x4,
    normalized correspondences) with x_n = T_2d x and X_n = T_3d X.
    """
    if len(correspondences) < 2:
        raise DegenerateConfiguration("need at least 2 correspondences to normalize")
    X, x = _stack(correspondences)
    cx = x.mean(axis=0)
    cX = X.mean(axis=0)
    rms2 = np.sqrt(((x - cx) ** 2).sum(axis=1).mean())
    rms3 = np.sqrt(((X - cX) ** 2).sum(axis=1).mean())
    if rms2 <= 0 or rms3 <= 0:
        raise DegenerateConfiguration("all points coincident")
    s2 = np.sqrt(2.0) / rms2
    s3 = np.sqrt(3.0) / rms3
    T2 = np.array([[s2, 0, -s2 * cx[0]], [0, s2, -s2 * cx[1]], [0, 0, 1]])
    T3 = np.eye(4)
    T3[:3, :3] *= s3
    T3[:3, 3] = -s3 * cX
    return T2, T3, _from_arrays((X - cX) * s3, (x - cx) * s2)


def _check_not_coplanar(X: np.ndarray) -> None:
    centered = X - X.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s[2] <= 1e-10 * max(s[0], 1e-300):
        raise DegenerateConfiguration("3D points are coplanar or collinear")


def dlt(correspondences) -> ProjectionMatrix:
    """Direct linear transform: algebraic least-squares P from >= 6
    correspondences in general position."""
    n = len(correspondences)
    if n < 6:
        raise DegenerateConfiguration(f"DLT needs at least 6 correspondences, got {n}")
    X_raw, _ = _stack(correspondences)
    _check_not_coplanar(X_raw)
    T2, T3, norm = normalize_points(correspondences)
    X, x = _stack(norm)
    Xh = np.hstack([X, np.ones((n, 1))])
    A = np.zeros((2 * n, 12))
    A[0::2, 4:8] = -Xh
    A[0::2, 8:12] = x[:, 1:2] * Xh
    A[1::2, 0:4] = Xh
    A[1::2, 8:12] = -x[:, 0:1] * Xh
    _, _, vt = np.linalg.svd(A)
    Pn = vt[-1].reshape(3, 4)
    P = np.linalg.inv(T2) @ Pn @ T3
    return ProjectionMatrix(_normalize_p(P))


def _normalize_p(P: np.ndarray) -> np.ndarray:
    """Unit Frobenius norm with a deterministic sign (first entry of largest
    magnitude made positive)."""
    P = P / np.linalg.norm(P)
    flat = P.ravel()
    lead = flat[np.argmax(np.abs(flat))]
    return P if lead >= 0 else -P


def reprojection_residuals(P: ProjectionMatrix | np.ndarray, correspondences) -> np.ndarray:
    """Stacked (2n,) residuals (u_hat - u, v_hat - v) in pixels."""
    Pm = P.P if isinstance(P, ProjectionMatrix) else np.asarray(P, dtype=np.float64)
    X, x = _stack(correspondences)
    h = Pm @ np.hstack([X, np.ones((len(X), 1))]).T
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = (h[:2] / h[2]).T
    return (uv - x).ravel()


def reprojection_jacobian(P: ProjectionMatrix | np.ndarray, correspondences) -> np.ndarray:
    """Analytic (2n, 12) Jacobian of the residuals w.r.t. the row-major
    entries of P."""
    Pm = P.P if isinstance(P, ProjectionMatrix) else np.asarray(P, dtype=np.float64)
    X, _ = _stack(correspondences)
    n = len(X)
    Xh = np.hstack([X, np.ones((n, 1))])
    a = Xh @ Pm[0]
    b = Xh @ Pm[1]
    w = Xh @ Pm[2]
    J = np.zeros((2 * n, 12))
    J[0::2, 0:4] = Xh / w[:, None]
    J[0::2, 8:12] = -(a / w**2)[:, None] * Xh
    J[1::2, 4:8] = Xh / w[:, None]
    J[1::2, 8:12] = -(b / w**2)[:, None] * Xh
    return J


def gold_standard(
    correspondences,
    init: ProjectionMatrix | None = None,
    max_iterations: int = 200,
    convergence_tol: float = 1e-10,
) -> PoseEstimate:
    """Minimize the geometric reprojection error over P.

    Damped least squares from ``init`` (DLT of the data when omitted):
    damping grows x10 on a rejected step and shrinks /10 on an accepted
    one; iteration stops when the relative error change drops below
    ``convergence_tol`` or when no damping level can lower the error any
    further. Accepted steps never increase the error. The optimization runs
    in normalized coordinates and ``P`` is denormalized afterward.
    """
    n = len(correspondences)
    if n < 6:
        raise DegenerateConfiguration(f"need at least 6 correspondences, got {n}")
    X_raw, x_raw = _stack(correspondences)
    _check_not_coplanar(X_raw)
    if init is None:
        init = dlt(correspondences)
    T2, T3, norm = normalize_points(correspondences)
    p = _normalize_p(T2 @ init.P @ np.linalg.inv(T3)).ravel()

    def error_of(pvec: np.ndarray) -> tuple[float, np.ndarray]:
        r = reprojection_residuals(pvec.reshape(3, 4), norm)
        if not np.isfinite(r).all():
            return np.inf, r
        return float(r @ r), r

    err, r = error_of(p)
    lam = 1e-3
    converged = err < 1e-24
    iterations = 0
    while not converged and iterations < max_iterations:
        iterations += 1
        J = reprojection_jacobian(p.reshape(3, 4), norm)
        g = J.T @ r
        H = J.T @ J
        accepted = False
        while lam < 1e14:
            try:
                delta = np.linalg.solve(H + lam * np.eye(12), -g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            cand = _normalize_p((p + delta).reshape(3, 4)).ravel()
            cand_err, cand_r = error_of(cand)
            if cand_err < err:
                rel_change = (err - cand_err) / max(err, 1e-300)
                p, err, r = cand, cand_err, cand_r
                lam = max(lam / 10, 1e-15)
                accepted = True
                if rel_change < convergence_tol or err < 1e-24:
                    converged = True
                break
            lam *= 10
        if not accepted:
            # the whole damping ladder produced no float-representable
            # decrease: numerically a stationary point (near-planar scenes
            # make the expected gain ~|g|^2/lam underflow the error's ulp)
            converged = True
            break

    P_final = ProjectionMatrix(_normalize_p(np.linalg.inv(T2) @ p.reshape(3, 4) @ T3))
    res = reprojection_residuals(P_final, correspondences).reshape(-1, 2)
    dists = np.linalg.norm(res, axis=1)
    rms = float(np.sqrt((dists**2).mean()))
    pose = decompose_projection(P_final)
    return PoseEstimate(P_final, pose, rms, dists, converged, iterations)


def camera_center(P: ProjectionMatrix | np.ndarray) -> np.ndarray:
    """Finite camera center: the dehomogenized null vector of P."""
    Pm = P.P if isinstance(P, ProjectionMatrix) else np.asarray(P, dtype=np.float64)
    _, _, vt = np.linalg.svd(Pm)
    c = vt[-1]
    if abs(c[3]) <= 1e-12 * np.linalg.norm(c):
        raise DegenerateConfiguration("camera center at infinity")
    return c[:3] / c[3]


def decompose_projection(P: ProjectionMatrix) -> CameraPose:
    """Split P into the square-pixel camera model.

    RQ factorization of the left 3x3 block with signs fixed so K has a
    positive diagonal and det(R) = +1; focal is the mean of K's two focal
    entries after normalizing K[2,2] = 1.
    """
    C = camera_center(P)
    K, R = rq(P.M)
    signs = np.sign(np.diag(K))
    signs[signs == 0] = 1.0
    D = np.diag(signs)
    K = K @ D
    R = D @ R
    if np.linalg.det(R) < 0:
        R = -R  # overall sign absorbed by P's scale freedom
    if K[2, 2] <= 0:
        raise DegenerateConfiguration("degenerate calibration matrix")
    K = K / K[2, 2]
    omega, phi, kappa = opk_from_rotation(R)
    focal = float((K[0, 0] + K[1, 1]) / 2)
    return CameraPose(
        float(C[0]), float(C[1]), float(C[2]),
        omega, phi, kappa,
        focal, (float(K[0, 2]), float(K[1, 2])),
    )


def backproject_to_height(P: ProjectionMatrix, uv: np.ndarray, z: float) -> np.ndarray:
    """Intersect the viewing ray of pixel (u, v) with the plane of altitude z."""
    C = camera_center(P)
    d = np.linalg.solve(P.M, np.array([uv[0], uv[1], 1.0]))
    if abs(d[2]) <= 1e-15 * np.linalg.norm(d):
        raise PointAtInfinity("viewing ray parallel to the height plane")
    t = (z - C[2]) / d[2]
    return C + t * d
