"""2D computational geometry: convex hulls, rotating-calipers minimal
bounding rectangles, and pixel-set variants used by both modalities.

Pixel sets are arrays of (row, col) indices. For rectangle fitting each
pixel is treated as a unit square (its four corners at center +- 0.5), so an
axis-aligned h x w block has MBR area exactly h*w and filling percentages
never exceed 100 up to float error.
"""

from __future__ import annotations

import math

import numpy as np


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull; returns vertices in CCW order.

    Degenerate inputs (all points collinear or coincident) return the two
    extreme points, or a single point.
    """
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    # pts is lexicographically sorted by np.unique
    def half(iterable):
        chain: list[np.ndarray] = []
        for p in iterable:
            while len(chain) >= 2 and cross(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:  # collinear input
        return np.vstack([pts[0], pts[-1]])
    return np.asarray(hull)


def min_area_rect(points: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Minimal-area enclosing rectangle of a 2D point set.

    Returns (corners, angle, area). Corners are the rectangle vertices in
    order; angle is the direction of the rectangle's long axis, folded to
    [0, pi); area is exact for the hull. The optimum has one edge collinear
    with a convex-hull edge, so only hull-edge directions are searched.
    """
    pts = np.asarray(points, dtype=np.float64)
    hull = convex_hull(pts)
    if len(hull) == 1:
        c = np.repeat(hull, 4, axis=0)
        return c, 0.0, 0.0
    if len(hull) == 2:
        d = hull[1] - hull[0]
        angle = math.atan2(d[1], d[0]) % math.pi
        return np.array([hull[0], hull[1], hull[1], hull[0]]), angle, 0.0

    edges = np.roll(hull, -1, axis=0) - hull
    thetas = np.arctan2(edges[:, 1], edges[:, 0])
    best = None
    for theta in thetas:
        c, s = math.cos(-theta), math.sin(-theta)
        rot = np.array([[c, -s], [s, c]])
        q = hull @ rot.T
        lo = q.min(axis=0)
        hi = q.max(axis=0)
        ext = hi - lo
        area = float(ext[0] * ext[1])
        if best is None or area < best[0] - 1e-12 * max(best[0], 1.0):
            best = (area, theta, lo, hi, ext)
    area, theta, lo, hi, ext = best
    corners_local = np.array(
        [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]]
    )
    c, s = math.cos(theta), math.sin(theta)
    rot_back = np.array([[c, -s], [s, c]])
    corners = corners_local @ rot_back.T
    # long axis: the rectangle side of greater extent
    if ext[0] >= ext[1]:
        angle = theta % math.pi
    else:
        angle = (theta + math.pi / 2) % math.pi
    return corners, float(angle), area


def pixel_corners(pixels: np.ndarray) -> np.ndarray:
    """Unit-square corner points of a pixel set, as (x=col, y=row) pairs."""
    px = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    xy = px[:, ::-1]  # (row, col) -> (x, y)
    offsets = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
    return (xy[:, None, :] + offsets[None, :, :]).reshape(-1, 2)


def minimal_bounding_rectangle(pixels: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Minimal-area bounding rectangle of a pixel set in pixel coordinates.

    Pixels are (row, col) pairs; corners come back as (x=col, y=row) points
    with the angle measured from the +col axis toward +row, folded to
    [0, pi), and the area in px^2. A single pixel yields its own unit
    square (area 1, angle 0).
    """
    px = np.asarray(pixels)
    if px.size == 0:
        raise ValueError("pixel set must be non-empty")
    return min_area_rect(pixel_corners(px))


def filling_percentage(pixels: np.ndarray, mbr_area: float) -> float:
    """Segment area over MBR area, in percent."""
    if not mbr_area > 0:
        raise ValueError("mbr_area must be positive")
    n = len(np.asarray(pixels).reshape(-1, 2))
    return 100.0 * n / mbr_area


def polygon_area(ring: np.ndarray) -> float:
    """Signed shoelace area; positive for CCW rings in a y-up frame."""
    ring = np.asarray(ring, dtype=np.float64)
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
