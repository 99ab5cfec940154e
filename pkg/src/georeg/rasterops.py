"""Shared raster labeling helpers.

Label rasters across the package follow one numbering rule: labels are
contiguous positive integers assigned in raster-scan order of each region's
first pixel (row-major, top-left to bottom-right).
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def relabel_raster_order(labels: np.ndarray) -> np.ndarray:
    """Renumber positive labels to 1..n by first-pixel raster-scan order."""
    labels = np.asarray(labels)
    flat = labels.ravel()
    nz = np.flatnonzero(flat)
    if nz.size == 0:
        return np.zeros_like(labels, dtype=np.int32)
    old = flat[nz]
    maxlab = int(old.max())
    first = np.full(maxlab + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, old, nz)
    present = np.flatnonzero(first < flat.size)
    order = present[np.argsort(first[present], kind="stable")]
    remap = np.zeros(maxlab + 1, dtype=np.int32)
    remap[order] = np.arange(1, len(order) + 1, dtype=np.int32)
    return remap[labels]


def label_eight_connected(mask: np.ndarray) -> np.ndarray:
    """8-connected components of a boolean mask, numbered in raster order."""
    raw, _ = ndimage.label(np.asarray(mask, dtype=bool), structure=EIGHT_CONNECTED)
    return relabel_raster_order(raw)


def keep_labels(labels: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Zero out all labels not in ``keep``, then renumber contiguously."""
    labels = np.asarray(labels)
    keep = np.asarray(keep, dtype=np.int64)
    lut = np.zeros(int(labels.max()) + 1, dtype=bool) if labels.size else np.zeros(1, bool)
    lut[keep] = True
    kept = np.where(lut[labels], labels, 0)
    return relabel_raster_order(kept)
