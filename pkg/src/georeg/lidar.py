"""Building extraction from a classified LiDAR point cloud.

Stages: elevation-threshold split, vertical projection of non-ground points
to a binary mask, morphological opening with a diamond structuring element,
8-connected labeling, small-region removal, and per-region point collection
with outer-boundary tracing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyCloud, NoGroundPoints
from .geometry import polygon_area
from .model import CLASS_GROUND, GeoRaster, LabeledMask, PointCloud, _readonly
from .rasterops import label_eight_connected, keep_labels, relabel_raster_order


@dataclass(frozen=True)
class ElevationSplit:
    """Partition of a cloud at the elevation threshold T_e."""

    threshold: float
    ground: PointCloud
    non_ground: PointCloud


@dataclass(frozen=True)
class Region3D:
    """One extracted building: its points, footprint pixels and boundary.

    ``footprint`` holds (row, col) indices into the originating mask;
    ``boundary`` is a closed ring of world coordinates (first vertex
    repeated at the end), ordered clockwise in the world frame.
    """

    label: int
    points: np.ndarray
    footprint: np.ndarray
    boundary: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _readonly(np.asarray(self.points, dtype=np.float64)))
        object.__setattr__(self, "footprint", _readonly(np.asarray(self.footprint, dtype=np.int64)))
        object.__setattr__(self, "boundary", _readonly(np.asarray(self.boundary, dtype=np.float64)))
        if len(self.points) == 0:
            raise ValueError("region must contain points")

    @property
    def center(self) -> np.ndarray:
        """Mean of the region's 3D points."""
        return self.points.mean(axis=0)


def elevation_threshold(cloud: PointCloud, fallback_lowest_decile: bool = False) -> ElevationSplit:
    """Split a cloud at T_e = mean(z_G) + max(2.5, std(z_G)).

    z_G are the altitudes of ground-classified points; std is the population
    standard deviation. Without class labels (or without any ground points),
    the lowest decile of altitudes stands in for z_G when
    ``fallback_lowest_decile`` is set; otherwise this is an error.
    Points with z > T_e become ``non_ground``, the remainder ``ground``.
    """
    if len(cloud) == 0:
        raise EmptyCloud("cannot threshold an empty cloud")
    z = cloud.z
    if cloud.classification is not None and (cloud.classification == CLASS_GROUND).any():
        zg = z[cloud.classification == CLASS_GROUND]
    elif fallback_lowest_decile:
        k = max(1, math.ceil(0.1 * len(cloud)))
        zg = np.sort(z)[:k]
    else:
        raise NoGroundPoints("no ground-classified points and decile fallback disabled")
    te = float(zg.mean() + max(2.5, float(zg.std())))
    above = z > te
    return ElevationSplit(te, cloud.subset(~above), cloud.subset(above))


def default_resolution(cloud: PointCloud) -> float:
    """Mask resolution from point density: 1/sqrt(density), rounded up to
    the next 0.5 m step (1 m for a 2 pts/m^2 cloud)."""
    if len(cloud) == 0:
        raise EmptyCloud("cannot derive a resolution from an empty cloud")
    spans = cloud.xyz[:, :2].max(axis=0) - cloud.xyz[:, :2].min(axis=0)
    area = float(spans[0] * spans[1])
    if area <= 0:
        return 1.0
    density = len(cloud) / area
    return 0.5 * math.ceil(1.0 / (0.5 * math.sqrt(density)))


def vertical_project(non_ground: PointCloud, resolution: float | None = None) -> GeoRaster:
    """Binary occupancy mask of the points projected onto z = 0.

    The raster covers the cloud's xy bounding box; a pixel is 1 iff at
    least one point falls inside its cell.
    """
    if len(non_ground) == 0:
        raise EmptyCloud("no points to project")
    if resolution is None:
        resolution = default_resolution(non_ground)
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    xy = non_ground.xyz[:, :2]
    x_min, y_min = xy.min(axis=0)
    x_max, y_max = xy.max(axis=0)
    width = int((x_max - x_min) / resolution) + 1
    height = int((y_max - y_min) / resolution) + 1
    col = np.minimum(((xy[:, 0] - x_min) / resolution).astype(np.int64), width - 1)
    row = np.minimum(((y_max - xy[:, 1]) / resolution).astype(np.int64), height - 1)
    data = np.zeros((height, width), dtype=np.uint8)
    data[row, col] = 1
    origin = (float(x_min + resolution / 2), float(y_max - resolution / 2))
    return GeoRaster(data, origin, resolution)


def diamond_element(se_size: int) -> np.ndarray:
    """Diamond structuring element: pixels within L1 radius (se_size-1)/2."""
    if se_size < 3 or se_size % 2 == 0:
        raise ValueError("structuring element size must be odd and >= 3")
    r = (se_size - 1) // 2
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (np.abs(yy) + np.abs(xx)) <= r


def morphological_open(mask: GeoRaster, se_size: int = 5) -> GeoRaster:
    """Erosion then dilation with a diamond element, zero-padded borders."""
    se = diamond_element(se_size)
    binary = mask.data.astype(bool)
    eroded = ndimage.binary_erosion(binary, structure=se, border_value=0)
    opened = ndimage.binary_dilation(eroded, structure=se, border_value=0)
    return mask.with_data(opened.astype(np.uint8))


def label_connected(mask: GeoRaster) -> LabeledMask:
    """8-connected components, labeled 1..n in raster-scan first-pixel order."""
    labels = label_eight_connected(mask.data.astype(bool))
    return LabeledMask(mask.with_data(labels))


def remove_small_regions(mask: LabeledMask, min_area: float = 20.0) -> LabeledMask:
    """Drop regions whose footprint area (px * resolution^2) is below
    ``min_area`` square meters; survivors are relabeled contiguously."""
    data = mask.data
    counts = np.bincount(data.ravel())
    px_area = mask.resolution ** 2
    keep = np.flatnonzero(counts * px_area >= min_area)
    keep = keep[keep > 0]
    return LabeledMask(mask.raster.with_data(keep_labels(data, keep)))


_MOORE_OFFS = [(0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1)]
_MOORE_INDEX = {off: i for i, off in enumerate(_MOORE_OFFS)}


def _trace_moore(grid: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Outer boundary pixels of the region containing ``start`` (its first
    raster-scan pixel), via Moore neighbor tracing with Jacob's stopping
    criterion. The neighborhood is scanned clockwise in screen orientation
    (row index growing downward)."""
    h, w = grid.shape

    def at(p):
        return 0 <= p[0] < h and 0 <= p[1] < w and grid[p]

    b0 = (start[0], start[1] - 1)  # background: start is the raster-first pixel
    boundary = [start]
    p, b = start, b0
    for _ in range(4 * grid.size + 8):
        base = _MOORE_INDEX[(b[0] - p[0], b[1] - p[1])]
        for k in range(1, 9):
            d = (base + k) % 8
            c = (p[0] + _MOORE_OFFS[d][0], p[1] + _MOORE_OFFS[d][1])
            if at(c):
                prev = (base + k - 1) % 8
                new_b = (p[0] + _MOORE_OFFS[prev][0], p[1] + _MOORE_OFFS[prev][1])
                break
        else:
            return boundary  # isolated pixel
        if c == start and new_b == b0:
            return boundary
        boundary.append(c)
        p, b = c, new_b
    return boundary


def trace_boundary(footprint: np.ndarray, raster: GeoRaster) -> np.ndarray:
    """Closed outer boundary of a footprint, in world coordinates.

    Returns pixel-center vertices with the first vertex repeated at the
    end; orientation is clockwise in the world frame (negative shoelace).
    """
    fp = np.asarray(footprint, dtype=np.int64).reshape(-1, 2)
    rmin, cmin = fp.min(axis=0)
    rmax, cmax = fp.max(axis=0)
    grid = np.zeros((rmax - rmin + 1, cmax - cmin + 1), dtype=bool)
    grid[fp[:, 0] - rmin, fp[:, 1] - cmin] = True
    start_flat = np.flatnonzero(grid.ravel())[0]
    start = (int(start_flat // grid.shape[1]), int(start_flat % grid.shape[1]))
    ring_px = _trace_moore(grid, start)
    rows = np.array([p[0] + rmin for p in ring_px], dtype=np.float64)
    cols = np.array([p[1] + cmin for p in ring_px], dtype=np.float64)
    x, y = raster.cell_to_world(rows, cols)
    ring = np.stack([x, y], axis=1)
    if len(ring) >= 3 and polygon_area(ring) > 0:
        ring = ring[::-1]
    return np.vstack([ring, ring[:1]])


def extract_building_points(non_ground: PointCloud, mask: LabeledMask) -> list[Region3D]:
    """Collect the non-ground points over each labeled footprint.

    A point belongs to the region whose label its vertical projection hits;
    points over background or outside the raster are dropped, as are labels
    that end up with no points.
    """
    data = mask.data
    row, col = mask.raster.world_to_cell(non_ground.xyz[:, 0], non_ground.xyz[:, 1])
    inside = mask.raster.contains_cell(row, col)
    point_label = np.zeros(len(non_ground), dtype=np.int64)
    point_label[inside] = data[row[inside], col[inside]]
    regions = []
    for label in mask.labels:
        sel = point_label == label
        if not sel.any():
            continue
        footprint = np.argwhere(data == label)
        boundary = trace_boundary(footprint, mask.raster)
        regions.append(Region3D(int(label), non_ground.xyz[sel], footprint, boundary))
    return regions


def extract_buildings(
    cloud: PointCloud,
    se_size: int = 5,
    min_area: float = 20.0,
    resolution: float | None = None,
    fallback_lowest_decile: bool = False,
) -> tuple[ElevationSplit, LabeledMask, list[Region3D]]:
    """Full extraction chain from a classified cloud to building regions."""
    split = elevation_threshold(cloud, fallback_lowest_decile=fallback_lowest_decile)
    if len(split.non_ground) == 0:
        raise EmptyCloud("no points above the elevation threshold")
    if resolution is None:
        # grid step from the nominal density of the whole survey, not the
        # sparse non-ground subset
        resolution = default_resolution(cloud)
    binary = vertical_project(split.non_ground, resolution)
    opened = morphological_open(binary, se_size)
    labeled = label_connected(opened)
    labeled = remove_small_regions(labeled, min_area)
    regions = extract_building_points(split.non_ground, labeled)
    # drop labels that lost all their points so mask and regions agree
    if len(regions) != len(labeled.labels):
        survivors = np.array([r.label for r in regions], dtype=np.int64)
        relabeled = LabeledMask(labeled.raster.with_data(keep_labels(labeled.data, survivors)))
        regions = extract_building_points(split.non_ground, relabeled)
        labeled = relabeled
    return split, labeled, regions
