"""Optical-image building segmentation.

CIE L*a*b* conversion of the (optionally pansharpened) image, flat-kernel
mean-shift clustering in color (or color + scaled spatial) feature space,
and segment refinement by pixel count and minimal-bounding-rectangle
filling percentage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import NoOverlap, NotThreeBands, ResolutionMismatch
from .geometry import filling_percentage, min_area_rect, minimal_bounding_rectangle, pixel_corners
from .model import GeoRaster, LabeledMask, _readonly
from .rasterops import EIGHT_CONNECTED, keep_labels, relabel_raster_order

# sRGB (D65) -> XYZ, IEC 61966-2-1
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])


@dataclass(frozen=True)
class LabImage:
    """Per-pixel (L*, a*, b*) triplets with the source georeferencing."""

    lab: np.ndarray
    origin: tuple[float, float]
    resolution: float
    use_L: bool = False

    def __post_init__(self):
        lab = np.asarray(self.lab, dtype=np.float64)
        if lab.ndim != 3 or lab.shape[2] != 3:
            raise ValueError("lab must have shape (h, w, 3)")
        object.__setattr__(self, "lab", _readonly(lab))

    @property
    def height(self) -> int:
        return self.lab.shape[0]

    @property
    def width(self) -> int:
        return self.lab.shape[1]


@dataclass(frozen=True)
class MeanShiftConfig:
    """Parameters of the flat-kernel mean shift.

    ``bandwidth`` is the feature-space window radius in color units. When
    ``spatial_bandwidth`` is positive, pixel coordinates scaled by
    bandwidth/spatial_bandwidth join the feature vector, so the single
    radius covers both domains. ``min_merge_distance`` defaults to half the
    bandwidth.
    """

    bandwidth: float
    spatial_bandwidth: float = 0.0
    use_L: bool = False
    max_iterations: int = 100
    convergence_tol: float = 1e-3
    min_merge_distance: float | None = None

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.spatial_bandwidth < 0:
            raise ValueError("spatial_bandwidth must be >= 0")
        if self.min_merge_distance is not None and not self.min_merge_distance > 0:
            raise ValueError("min_merge_distance must be positive")

    @property
    def merge_distance(self) -> float:
        return self.min_merge_distance if self.min_merge_distance is not None else self.bandwidth / 2


@dataclass(frozen=True)
class Segment2D:
    """One image segment with world-frame centroid and MBR attributes."""

    label: int
    pixels: np.ndarray
    centroid: tuple[float, float]
    centroid_px: tuple[float, float]
    area_px: int
    area_m2: float
    mbr: np.ndarray
    mbr_angle: float
    filling_pct: float

    def __post_init__(self):
        object.__setattr__(self, "pixels", _readonly(np.asarray(self.pixels, dtype=np.int64)))
        object.__setattr__(self, "mbr", _readonly(np.asarray(self.mbr, dtype=np.float64)))
        if self.area_px <= 0:
            raise ValueError("segment must have positive pixel area")


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _lab_f(t: np.ndarray) -> np.ndarray:
    delta = 6.0 / 29.0
    return np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)


def rgb_to_lab(image: GeoRaster) -> LabImage:
    """Convert an 8-bit sRGB raster to CIE L*a*b* (D65 white)."""
    data = image.data
    if data.ndim != 3 or data.shape[2] != 3:
        raise NotThreeBands("rgb_to_lab needs a three-band raster")
    rgb = data.astype(np.float64) / 255.0
    xyz = _srgb_to_linear(rgb) @ _SRGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE_D65)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return LabImage(lab, image.origin, image.resolution)


def pansharpen(pan: GeoRaster, ms: GeoRaster) -> GeoRaster:
    """Brovey fusion of a fine panchromatic band with 4-band multispectral.

    MS bands (R, G, B, NIR order) are bilinearly resampled to the pan grid
    and each visible band is scaled by pan / mean(R, G, B). Output is
    clipped to [0, 255] on the pan grid over the overlapping extent.
    """
    if pan.bands != 1:
        raise ValueError("pan must be single-band")
    if ms.bands != 4:
        raise ValueError("ms must have 4 bands (R, G, B, NIR)")
    ratio = ms.resolution / pan.resolution
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ResolutionMismatch(
            f"resolution ratio {ratio:g} is not a positive integer"
        )
    # overlapping extent, expressed in pan pixel rows/cols
    half_p, half_m = pan.resolution / 2, ms.resolution / 2
    x0 = max(pan.origin[0] - half_p, ms.origin[0] - half_m)
    x1 = min(
        pan.origin[0] + (pan.width - 1) * pan.resolution + half_p,
        ms.origin[0] + (ms.width - 1) * ms.resolution + half_m,
    )
    y1 = min(pan.origin[1] + half_p, ms.origin[1] + half_m)
    y0 = max(
        pan.origin[1] - (pan.height - 1) * pan.resolution - half_p,
        ms.origin[1] - (ms.height - 1) * ms.resolution - half_m,
    )
    if x0 >= x1 or y0 >= y1:
        raise NoOverlap("pan and ms extents do not intersect")
    c0 = max(0, int(math.ceil((x0 - pan.origin[0]) / pan.resolution - 0.5)))
    c1 = min(pan.width - 1, int(math.floor((x1 - pan.origin[0]) / pan.resolution + 0.5)))
    r0 = max(0, int(math.ceil((pan.origin[1] - y1) / pan.resolution - 0.5)))
    r1 = min(pan.height - 1, int(math.floor((pan.origin[1] - y0) / pan.resolution + 0.5)))

    rows = np.arange(r0, r1 + 1)
    cols = np.arange(c0, c1 + 1)
    x = pan.origin[0] + cols * pan.resolution
    y = pan.origin[1] - rows * pan.resolution
    # fractional ms pixel coordinates, clamped for edge pixels
    fc = np.clip((x - ms.origin[0]) / ms.resolution, 0, ms.width - 1)
    fr = np.clip((ms.origin[1] - y) / ms.resolution, 0, ms.height - 1)
    c_lo = np.clip(np.floor(fc).astype(int), 0, ms.width - 2) if ms.width > 1 else np.zeros_like(fc, int)
    r_lo = np.clip(np.floor(fr).astype(int), 0, ms.height - 2) if ms.height > 1 else np.zeros_like(fr, int)
    wc = (fc - c_lo)[None, :, None]
    wr = (fr - r_lo)[:, None, None]
    md = ms.data.astype(np.float64)
    c_hi = np.minimum(c_lo + 1, ms.width - 1)
    r_hi = np.minimum(r_lo + 1, ms.height - 1)
    upsampled = (
        md[np.ix_(r_lo, c_lo)] * (1 - wr) * (1 - wc)
        + md[np.ix_(r_lo, c_hi)] * (1 - wr) * wc
        + md[np.ix_(r_hi, c_lo)] * wr * (1 - wc)
        + md[np.ix_(r_hi, c_hi)] * wr * wc
    )
    pv = pan.data[np.ix_(rows, cols)].astype(np.float64)
    intensity = upsampled[..., :3].mean(axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(intensity > 0, pv / intensity, 0.0)
    fused = upsampled[..., :3] * scale[..., None]
    out = np.clip(np.rint(fused), 0, 255).astype(np.uint8)
    origin = (pan.origin[0] + c0 * pan.resolution, pan.origin[1] - r0 * pan.resolution)
    return GeoRaster(out, origin, pan.resolution)


def _features(img: LabImage, cfg: MeanShiftConfig) -> np.ndarray:
    h, w = img.height, img.width
    chans = [img.lab[..., 1].ravel(), img.lab[..., 2].ravel()]
    if cfg.use_L:
        chans.insert(0, img.lab[..., 0].ravel())
    if cfg.spatial_bandwidth > 0:
        scale = cfg.bandwidth / cfg.spatial_bandwidth
        rr, cc = np.mgrid[0:h, 0:w]
        chans.extend([cc.ravel() * scale, rr.ravel() * scale])
    return np.stack(chans, axis=1)


def mode_seek_path(
    features: np.ndarray,
    start: np.ndarray,
    bandwidth: float,
    max_iterations: int = 100,
    convergence_tol: float = 1e-3,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Mean-shift trajectory of one window center; returns the visited
    positions, start first, mode last."""
    features = np.asarray(features, dtype=np.float64)
    if weights is None:
        weights = np.ones(len(features))
    tree = cKDTree(features)
    pos = np.asarray(start, dtype=np.float64)
    path = [pos]
    for _ in range(max_iterations):
        idx = tree.query_ball_point(pos, bandwidth, return_sorted=True)
        w = weights[idx]
        nxt = (features[idx] * w[:, None]).sum(axis=0) / w.sum()
        path.append(nxt)
        if np.linalg.norm(nxt - pos) <= convergence_tol:
            break
        pos = nxt
    return np.asarray(path)


def _seek_modes(uniq: np.ndarray, weights: np.ndarray, cfg: MeanShiftConfig) -> np.ndarray:
    """Converged window position for every unique feature vector.

    Weighted iteration over unique rows is exactly the per-pixel iteration:
    a window mean over the pixel multiset equals the multiplicity-weighted
    mean over unique vectors.
    """
    tree = cKDTree(uniq)
    pos = uniq.copy()
    active = np.arange(len(uniq))
    for _ in range(cfg.max_iterations):
        lists = tree.query_ball_point(pos[active], cfg.bandwidth, return_sorted=True, workers=1)
        counts = np.fromiter((len(l) for l in lists), dtype=np.int64, count=len(lists))
        flat = np.concatenate(lists) if len(lists) else np.array([], dtype=np.int64)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        w = weights[flat]
        wsum = np.add.reduceat(w, starts)
        nxt = np.add.reduceat(uniq[flat] * w[:, None], starts, axis=0) / wsum[:, None]
        moved = np.linalg.norm(nxt - pos[active], axis=1)
        pos[active] = nxt
        active = active[moved > cfg.convergence_tol]
        if len(active) == 0:
            break
    return pos


def _merge_modes(converged: np.ndarray, merge_distance: float) -> tuple[np.ndarray, np.ndarray]:
    """Greedy first-come merging of converged positions.

    Each position joins the nearest existing mode within ``merge_distance``
    (earliest mode on ties) or founds a new one. Returns (mode positions,
    per-position mode index).
    """
    reps: list[np.ndarray] = []
    assign = np.empty(len(converged), dtype=np.int64)
    for i, p in enumerate(converged):
        if reps:
            d = np.linalg.norm(np.asarray(reps) - p, axis=1)
            j = int(np.argmin(d))
            if d[j] <= merge_distance:
                assign[i] = j
                continue
        reps.append(p)
        assign[i] = len(reps) - 1
    return np.asarray(reps), assign


def mean_shift_segment(img: LabImage, cfg: MeanShiftConfig) -> LabeledMask:
    """Flat-kernel mean-shift segmentation of a Lab image.

    Every pixel's feature vector is iterated to its density mode; modes
    closer than the merge distance collapse; pixels sharing a mode are then
    split into 8-connected spatial components and labeled in raster order.
    """
    feats = _features(img, cfg)
    uniq, inverse = np.unique(feats, axis=0, return_inverse=True)
    weights = np.bincount(inverse).astype(np.float64)
    converged = _seek_modes(uniq, weights, cfg)
    _, mode_of_uniq = _merge_modes(converged, cfg.merge_distance)
    mode_map = mode_of_uniq[inverse].reshape(img.height, img.width)
    labels = np.zeros(mode_map.shape, dtype=np.int32)
    offset = 0
    for m in range(mode_of_uniq.max() + 1):
        comp, n = ndimage.label(mode_map == m, structure=EIGHT_CONNECTED)
        labels[comp > 0] = comp[comp > 0] + offset
        offset += n
    labels = relabel_raster_order(labels)
    raster = GeoRaster(labels, img.origin, img.resolution)
    return LabeledMask(raster)


def size_filter(mask: LabeledMask, min_px: int, max_px: int) -> LabeledMask:
    """Remove segments whose pixel count falls outside [min_px, max_px]."""
    if min_px > max_px:
        raise ValueError("min_px must be <= max_px")
    counts = np.bincount(mask.data.ravel())
    keep = np.flatnonzero((counts >= min_px) & (counts <= max_px))
    keep = keep[keep > 0]
    return LabeledMask(mask.raster.with_data(keep_labels(mask.data, keep)))


def segments_from_mask(mask: LabeledMask) -> list[Segment2D]:
    """Build Segment2D records (world centroid, MBR, filling) per label."""
    raster = mask.raster
    res = raster.resolution
    segments = []
    for label in mask.labels:
        pixels = np.argwhere(mask.data == label)
        cy, cx = pixels.mean(axis=0)  # (row, col)
        wx, wy = raster.cell_to_world(cy, cx)
        corners_px = pixel_corners(pixels)
        world = np.stack(
            raster.cell_to_world(corners_px[:, 1], corners_px[:, 0]), axis=1
        )
        mbr, angle, area = min_area_rect(world)
        area_px = len(pixels)
        filling = 100.0 * (area_px * res * res) / area
        segments.append(
            Segment2D(
                label=int(label),
                pixels=pixels,
                centroid=(float(wx), float(wy)),
                centroid_px=(float(cx), float(cy)),
                area_px=int(area_px),
                area_m2=float(area_px * res * res),
                mbr=mbr,
                mbr_angle=float(angle),
                filling_pct=float(filling),
            )
        )
    return segments


def filling_filter(segments: list[Segment2D], threshold: float = 50.0) -> list[Segment2D]:
    """Keep segments whose MBR filling percentage strictly exceeds the
    threshold."""
    return [s for s in segments if s.filling_pct > threshold]
