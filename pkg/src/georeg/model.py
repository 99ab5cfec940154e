"""Core geometric types and the pinhole camera model shared by the pipeline.

Conventions, fixed package-wide:

* World frame: x = easting, y = northing, z = altitude, all in meters of a
  single projected CRS.
* Rasters are row-major with row 0 at the northern edge. ``origin`` is the
  world position of the *center* of pixel (0, 0), so
  ``world_x = origin_x + col * resolution`` and
  ``world_y = origin_y - row * resolution``.
* Image pixel coordinates are (u, v) = (column, row); v grows southward.
* Camera angles (omega, phi, kappa) rotate about the camera X, Y, Z axes and
  compose as R = Rz(kappa) @ Ry(phi) @ Rx(omega). R maps world directions
  into the camera frame: x_cam = R @ (X - C).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PointAtInfinity

CLASS_UNCLASSIFIED = 0
CLASS_NON_GROUND = 1
CLASS_GROUND = 2


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Point3:
    """A single world point (easting, northing, altitude) in meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError("Point3 coordinates must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class PointCloud:
    """Immutable point cloud with optional classification and intensity.

    Classification codes: 0 = unclassified, 1 = non-ground, 2 = ground.
    """

    xyz: np.ndarray
    classification: np.ndarray | None = None
    intensity: np.ndarray | None = None

    def __post_init__(self):
        xyz = np.asarray(self.xyz, dtype=np.float64)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ValueError("xyz must have shape (n, 3)")
        if not np.isfinite(xyz).all():
            raise ValueError("xyz must be finite")
        object.__setattr__(self, "xyz", _readonly(xyz))
        for name in ("classification", "intensity"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=np.uint8)
            if arr.shape != (len(xyz),):
                raise ValueError(f"{name} must have shape (n,)")
            object.__setattr__(self, name, _readonly(arr))

    def __len__(self) -> int:
        return self.xyz.shape[0]

    @property
    def z(self) -> np.ndarray:
        return self.xyz[:, 2]

    def subset(self, index: np.ndarray) -> "PointCloud":
        return PointCloud(
            self.xyz[index],
            None if self.classification is None else self.classification[index],
            None if self.intensity is None else self.intensity[index],
        )


@dataclass(frozen=True)
class GeoRaster:
    """Georeferenced raster; single band (h, w) or multi-band (h, w, b)."""

    data: np.ndarray
    origin: tuple[float, float]
    resolution: float

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim not in (2, 3):
            raise ValueError("raster data must be 2-d or 3-d")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError("raster must be at least 1x1")
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise ValueError("resolution must be positive and finite")
        ox, oy = self.origin
        if not (math.isfinite(ox) and math.isfinite(oy)):
            raise ValueError("origin must be finite")
        object.__setattr__(self, "data", _readonly(data))
        object.__setattr__(self, "origin", (float(ox), float(oy)))
        object.__setattr__(self, "resolution", float(self.resolution))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]

    def cell_to_world(self, row, col):
        """World coordinates of pixel centers."""
        row = np.asarray(row, dtype=np.float64)
        col = np.asarray(col, dtype=np.float64)
        return self.origin[0] + col * self.resolution, self.origin[1] - row * self.resolution

    def world_to_cell(self, x, y):
        """Indices of the pixel whose cell contains (x, y).

        Pixel (r, c) spans the half-open square of side ``resolution``
        centered on its center coordinates.
        """
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        col = np.floor((x - self.origin[0]) / self.resolution + 0.5).astype(np.int64)
        row = np.floor((self.origin[1] - y) / self.resolution + 0.5).astype(np.int64)
        return row, col

    def contains_cell(self, row, col):
        row = np.asarray(row)
        col = np.asarray(col)
        return (row >= 0) & (row < self.height) & (col >= 0) & (col < self.width)

    def with_data(self, data: np.ndarray) -> "GeoRaster":
        """Same georeferencing, new pixel data."""
        return GeoRaster(data, self.origin, self.resolution)


@dataclass(frozen=True)
class LabeledMask:
    """Integer label raster; 0 is background, labels are positive."""

    raster: GeoRaster
    labels: tuple[int, ...] = field(default=())

    def __post_init__(self):
        data = self.raster.data
        if data.ndim != 2 or not np.issubdtype(data.dtype, np.integer):
            raise ValueError("labeled mask needs a single integer band")
        if data.min() < 0:
            raise ValueError("labels must be non-negative")
        present = tuple(int(v) for v in np.unique(data) if v > 0)
        labels = tuple(int(v) for v in self.labels) if self.labels else present
        if set(labels) != set(present):
            raise ValueError("labels do not match raster contents")
        object.__setattr__(self, "labels", labels)

    @property
    def data(self) -> np.ndarray:
        return self.raster.data

    @property
    def resolution(self) -> float:
        return self.raster.resolution


@dataclass(frozen=True)
class CameraPose:
    """Exterior orientation plus minimal interior parameters (square pixels,
    zero skew)."""

    x0: float
    y0: float
    z0: float
    omega: float
    phi: float
    kappa: float
    focal: float
    principal_point: tuple[float, float]

    def __post_init__(self):
        vals = (self.x0, self.y0, self.z0, self.omega, self.phi, self.kappa, self.focal)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("pose parameters must be finite")
        if not self.focal > 0:
            raise ValueError("focal length must be positive")
        u0, v0 = self.principal_point
        object.__setattr__(self, "principal_point", (float(u0), float(v0)))

    def center(self) -> np.ndarray:
        return np.array([self.x0, self.y0, self.z0], dtype=np.float64)

    def rotation(self) -> np.ndarray:
        return rotation_from_opk(self.omega, self.phi, self.kappa)

    def calibration(self) -> np.ndarray:
        u0, v0 = self.principal_point
        return np.array(
            [[self.focal, 0.0, u0], [0.0, self.focal, v0], [0.0, 0.0, 1.0]],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class ProjectionMatrix:
    """3x4 finite projection matrix, defined up to scale."""

    P: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        if P.shape != (3, 4):
            raise ValueError("projection matrix must be 3x4")
        if not np.isfinite(P).all():
            raise ValueError("projection matrix must be finite")
        s = np.linalg.svd(P, compute_uv=False)
        if s[2] <= 1e-12 * s[0]:
            raise ValueError("projection matrix must have rank 3")
        object.__setattr__(self, "P", _readonly(P))

    @property
    def M(self) -> np.ndarray:
        """Left 3x3 submatrix."""
        return self.P[:, :3]


def rotation_from_opk(omega: float, phi: float, kappa: float) -> np.ndarray:
    """Rotation matrix R = Rz(kappa) @ Ry(phi) @ Rx(omega)."""
    co, so = math.cos(omega), math.sin(omega)
    cp, sp = math.cos(phi), math.sin(phi)
    ck, sk = math.cos(kappa), math.sin(kappa)
    rx = np.array([[1, 0, 0], [0, co, -so], [0, so, co]], dtype=np.float64)
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]], dtype=np.float64)
    rz = np.array([[ck, -sk, 0], [sk, ck, 0], [0, 0, 1]], dtype=np.float64)
    return rz @ ry @ rx


def opk_from_rotation(R: np.ndarray) -> tuple[float, float, float]:
    """Invert :func:`rotation_from_opk`.

    phi is returned in (-pi/2, pi/2]; at the gimbal singularity
    (|cos phi| ~ 0) omega is fixed to 0 and kappa absorbs the remainder.
    """
    R = np.asarray(R, dtype=np.float64)
    phi = math.asin(max(-1.0, min(1.0, -R[2, 0])))
    if abs(math.cos(phi)) < 1e-12:
        omega = 0.0
        kappa = math.atan2(-R[0, 1], R[1, 1])
    else:
        omega = math.atan2(R[2, 1], R[2, 2])
        kappa = math.atan2(R[1, 0], R[0, 0])
    return omega, phi, kappa


def compose_projection(pose: CameraPose) -> ProjectionMatrix:
    """P = K @ [R | -R C] for the finite pinhole camera."""
    R = pose.rotation()
    K = pose.calibration()
    C = pose.center()
    P = K @ np.hstack([R, (-R @ C).reshape(3, 1)])
    return ProjectionMatrix(P)


def project_points(P: ProjectionMatrix, xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project (n, 3) world points; returns ((n, 2) pixel coords, (n,) w).

    Rows with w ~ 0 contain non-finite pixel coordinates; callers decide
    whether that is an error (:func:`project_point`) or skippable (overlay).
    """
    xyz = np.asarray(xyz, dtype=np.float64)
    h = P.P @ np.hstack([xyz, np.ones((len(xyz), 1))]).T
    norm = np.linalg.norm(h, axis=0)
    w = h[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = (h[:2] / w).T
    bad = np.abs(w) <= 1e-12 * np.maximum(norm, 1e-300)
    if bad.any():
        uv[bad] = np.nan
    return uv, w


def project_point(P: ProjectionMatrix, X: Point3 | np.ndarray) -> tuple[float, float]:
    """Dehomogenized projection of a single world point."""
    xyz = X.as_array() if isinstance(X, Point3) else np.asarray(X, dtype=np.float64)
    uv, _ = project_points(P, xyz.reshape(1, 3))
    if not np.isfinite(uv).all():
        raise PointAtInfinity("point projects to infinity (w ~ 0)")
    return float(uv[0, 0]), float(uv[0, 1])
