"""Exception hierarchy for the registration pipeline.

Every exception carries the process exit code the CLI maps it to:

* 2  configuration problems (unknown keys, out-of-range values)
* 3  broken or unusable input data
* 4  degenerate geometry (too few / ill-posed correspondences)
* 5  failed convergence of the pose refinement
"""

from __future__ import annotations


class GeoregError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


class ConfigError(GeoregError):
    """Invalid configuration file or parameter value."""

    exit_code = 2


class DataError(GeoregError):
    """Input data cannot be used (missing, malformed, or empty)."""

    exit_code = 3


class EmptyCloud(DataError):
    """Point cloud contains no points where at least one is required."""


class NoGroundPoints(DataError):
    """No ground-classified points to estimate the elevation threshold from."""


class NotThreeBands(DataError):
    """Color operation received a raster without exactly three bands."""


class ResolutionMismatch(DataError):
    """Raster resolutions are not related by an integer ratio."""


class NoOverlap(DataError):
    """Raster extents do not intersect."""


class NoMutualPairs(DataError):
    """Initial matching produced no mutual nearest-neighbor pairs."""


class EmptyList(DataError):
    """Metric requested over an empty collection."""


class UndefinedMetric(DataError):
    """Precision or recall denominator is zero."""


class ZeroBefore(DataError):
    """Shift gain undefined because the before-registration shift is zero."""


class SpecInfeasible(DataError):
    """Synthetic scene specification cannot be satisfied."""


class GeometryError(GeoregError):
    """Degenerate geometric configuration."""

    exit_code = 4


class PointAtInfinity(GeometryError):
    """Homogeneous projection produced a point with w ~ 0."""


class TooFewPoints(GeometryError):
    """Not enough points for the requested construction."""


class DegenerateConfiguration(GeometryError):
    """Point configuration does not determine the model (coplanar, coincident,
    or below the minimum count)."""


class DegenerateInput(GeometryError):
    """Matching filter ran out of usable pairs."""


class NoConsensus(GeometryError):
    """RANSAC found no model with sufficient inlier support."""


class NonConvergence(GeoregError):
    """Iterative refinement exhausted its budget without converging."""

    exit_code = 5
