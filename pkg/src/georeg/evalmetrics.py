"""Evaluation metrics and overlay rendering.

Precision/recall of extraction or matching tallies, mean control-point
shift before/after registration with its gain, and back-projection of the
cloud over the image for visual inspection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, EmptyList, UndefinedMetric, ZeroBefore
from .model import GeoRaster, PointCloud, ProjectionMatrix, project_points


@dataclass(frozen=True)
class Tally:
    """Counts of true positives, false alarms and misses."""

    tp: int
    fa: int
    m: int

    def __post_init__(self):
        if self.tp < 0 or self.fa < 0 or self.m < 0:
            raise ValueError("tally counts must be non-negative")


@dataclass(frozen=True)
class ControlPointPair:
    """One control point located in both frames (world meters, planimetric)."""

    p_image: tuple[float, float]
    p_lidar: tuple[float, float]

    def __post_init__(self):
        pi = (float(self.p_image[0]), float(self.p_image[1]))
        pl = (float(self.p_lidar[0]), float(self.p_lidar[1]))
        if not all(np.isfinite(v) for v in pi + pl):
            raise ValueError("control points must be finite")
        object.__setattr__(self, "p_image", pi)
        object.__setattr__(self, "p_lidar", pl)


def precision_recall(t: Tally) -> tuple[float, float]:
    """precision = TP/(TP+FA) * 100, recall = TP/(TP+M) * 100."""
    if t.tp + t.fa == 0 or t.tp + t.m == 0:
        raise UndefinedMetric("precision/recall denominator is zero")
    return 100.0 * t.tp / (t.tp + t.fa), 100.0 * t.tp / (t.tp + t.m)


def relative_shift(pairs: list[ControlPointPair]) -> float:
    """Mean planimetric distance between the paired control points."""
    if not pairs:
        raise EmptyList("no control point pairs")
    d = [
        np.hypot(p.p_image[0] - p.p_lidar[0], p.p_image[1] - p.p_lidar[1])
        for p in pairs
    ]
    return float(np.mean(d))


def shift_gain(before: float, after: float) -> float:
    """(before - after) / before * 100."""
    if not before > 0:
        raise ZeroBefore("gain undefined for zero before-shift")
    return 100.0 * (before - after) / before


def render_overlay(
    image: GeoRaster,
    cloud: PointCloud,
    P: ProjectionMatrix,
    color_by: str = "elevation",
) -> GeoRaster:
    """Project the cloud through P and splat 1-pixel markers on the image.

    Elevation maps blue (lowest) to red (highest); intensity maps to gray.
    Out-of-bounds and degenerate projections are skipped. Image size and
    georeferencing are preserved.
    """
    if color_by not in ("elevation", "intensity"):
        raise ValueError(f"unknown overlay coloring: {color_by}")
    data = image.data
    if data.ndim == 2:
        data = np.stack([data] * 3, axis=2)
    out = data.copy()
    if len(cloud) == 0:
        return image.with_data(out)
    if color_by == "intensity":
        if cloud.intensity is None:
            raise DataError("cloud has no intensity values")
        gray = cloud.intensity
        colors = np.stack([gray, gray, gray], axis=1).astype(np.uint8)
    else:
        z = cloud.z
        span = z.max() - z.min()
        t = (z - z.min()) / span if span > 0 else np.full(len(z), 0.5)
        r = np.rint(255 * t).astype(np.uint8)
        colors = np.stack([r, np.zeros_like(r), 255 - r], axis=1)
    uv, w = project_points(P, cloud.xyz)
    with np.errstate(invalid="ignore"):
        ok = np.isfinite(uv).all(axis=1) & (w > 0)
        cols = np.rint(uv[:, 0]).astype(np.int64, casting="unsafe")
        rows = np.rint(uv[:, 1]).astype(np.int64, casting="unsafe")
    ok &= (rows >= 0) & (rows < out.shape[0]) & (cols >= 0) & (cols < out.shape[1])
    out[rows[ok], cols[ok]] = colors[ok]
    return image.with_data(out)
