"""Stage runners: file in, artifacts out.

Each runner reads its inputs, executes one pipeline stage and writes the
stage artifacts into an output directory, returning the written summary.
``run_register`` is literally the four stages run back to back on the same
directory, plus the overlay rendering and control-point metrics.
"""

from __future__ import annotations

import logging
import math
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import lidar, imageseg, matching, pose as posemod, synth
from .config import PipelineConfig
from .errors import ConfigError, DegenerateConfiguration, NonConvergence
from .evalmetrics import render_overlay, shift_gain
from .geometry import min_area_rect, pixel_corners
from .io_utils import (
    load_cloud,
    load_image,
    read_json,
    write_json,
    write_pgm,
    write_ply,
    write_png,
)
from .matching import CenterSet
from .model import GeoRaster, Point3, ProjectionMatrix
from .rasterops import keep_labels

log = logging.getLogger("georeg")

MASK_LIDAR = "building_mask.pgm"
REGIONS = "regions.json"
MASK_IMAGE = "segment_mask.pgm"
SEGMENTS = "segments.json"
MATCHES = "matches.json"
POSE = "pose.json"
OVERLAY = "overlay.png"
METRICS = "metrics.json"
CLOUD = "cloud.ply"
IMAGE = "image.png"
TRUTH = "truth.json"
CONTROL = "control_points.json"


def _outdir(out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_extract_lidar(cloud_path: str | Path, out_dir: str | Path, cfg: PipelineConfig) -> dict:
    """Extract building regions from a cloud; writes the labeled mask and
    per-region attributes."""
    out = _outdir(out_dir)
    cloud = load_cloud(cloud_path)
    resolution = cfg.lidar_resolution if cfg.lidar_resolution > 0 else None
    split, mask, regions = lidar.extract_buildings(
        cloud,
        se_size=cfg.lidar_se_size,
        min_area=cfg.lidar_min_area,
        resolution=resolution,
        fallback_lowest_decile=cfg.lidar_ground_fallback,
    )
    res = mask.resolution
    raster = mask.raster
    entries = []
    for r in regions:
        world = np.stack(
            raster.cell_to_world(*_pixel_corner_rows_cols(r.footprint)), axis=1
        )
        mbr, angle, mbr_area = min_area_rect(world)
        area_m2 = len(r.footprint) * res * res
        entries.append(
            {
                "id": r.label,
                "center": [float(v) for v in r.center],
                "n_points": int(len(r.points)),
                "area_m2": float(area_m2),
                "mbr": mbr.tolist(),
                "mbr_angle_rad": float(angle),
                "filling_pct": float(100.0 * area_m2 / mbr_area) if mbr_area > 0 else 100.0,
                "boundary": r.boundary.tolist(),
            }
        )
    summary = {
        "threshold": split.threshold,
        "resolution": res,
        "n_ground": len(split.ground),
        "n_non_ground": len(split.non_ground),
        "count": len(entries),
        "regions": entries,
    }
    write_pgm(out / MASK_LIDAR, raster)
    write_json(out / REGIONS, summary)
    log.info("extract-lidar: %d regions (T_e=%.3f, res=%.2f m)", len(entries), split.threshold, res)
    return summary


def _pixel_corner_rows_cols(pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    corners = pixel_corners(pixels)  # (x=col, y=row)
    return corners[:, 1], corners[:, 0]


def run_segment_image(image_path: str | Path, out_dir: str | Path, cfg: PipelineConfig) -> dict:
    """Segment an optical image into candidate building segments."""
    out = _outdir(out_dir)
    image = load_image(image_path)
    lab = imageseg.rgb_to_lab(image)
    mscfg = imageseg.MeanShiftConfig(
        bandwidth=cfg.image_bandwidth,
        spatial_bandwidth=cfg.image_spatial_bandwidth,
        use_L=cfg.image_use_l,
        max_iterations=cfg.image_max_iterations,
        convergence_tol=cfg.image_convergence_tol,
        min_merge_distance=cfg.image_merge_distance if cfg.image_merge_distance > 0 else None,
    )
    mask = imageseg.mean_shift_segment(lab, mscfg)
    n_raw = len(mask.labels)
    mask = imageseg.size_filter(mask, cfg.image_min_px, cfg.image_max_px)
    segments = imageseg.segments_from_mask(mask)
    kept = imageseg.filling_filter(segments, cfg.image_filling_threshold)
    keep_ids = np.array([s.label for s in kept], dtype=np.int64)
    final_mask = mask.raster.with_data(keep_labels(mask.data, keep_ids))
    # relabeling is contiguous in raster order, so ids map by rank
    order = {s.label: i + 1 for i, s in enumerate(kept)}
    entries = [
        {
            "id": order[s.label],
            "centroid_world": [float(v) for v in s.centroid],
            "centroid_px": [float(v) for v in s.centroid_px],
            "area_px": s.area_px,
            "area_m2": s.area_m2,
            "mbr": s.mbr.tolist(),
            "mbr_angle_rad": s.mbr_angle,
            "filling_pct": s.filling_pct,
        }
        for s in kept
    ]
    summary = {
        "resolution": image.resolution,
        "n_modes_segments": n_raw,
        "count": len(entries),
        "segments": entries,
    }
    write_pgm(out / MASK_IMAGE, final_mask)
    write_json(out / SEGMENTS, summary)
    log.info("segment-image: %d of %d segments kept", len(entries), n_raw)
    return summary


def centers_from_regions(summary: dict) -> CenterSet:
    regs = summary["regions"]
    return CenterSet(
        ids=tuple(r["id"] for r in regs),
        centers=np.array([r["center"][:2] for r in regs], dtype=np.float64).reshape(-1, 2),
        areas=np.array([r["area_m2"] for r in regs]),
        angles=np.array([r["mbr_angle_rad"] for r in regs]),
    )


def centers_from_segments(summary: dict) -> CenterSet:
    segs = summary["segments"]
    return CenterSet(
        ids=tuple(s["id"] for s in segs),
        centers=np.array([s["centroid_world"] for s in segs], dtype=np.float64).reshape(-1, 2),
        areas=np.array([s["area_m2"] for s in segs]),
        angles=np.array([s["mbr_angle_rad"] for s in segs]),
    )


def run_match(
    regions_path: str | Path,
    segments_path: str | Path,
    out_dir: str | Path,
    cfg: PipelineConfig,
) -> dict:
    """Match LiDAR regions against image segments and filter outliers.

    The matches artifact embeds the matched coordinates, so pose estimation
    needs no other input.
    """
    out = _outdir(out_dir)
    regions = {r["id"]: r for r in read_json(regions_path)["regions"]}
    segments = {s["id"]: s for s in read_json(segments_path)["segments"]}
    a = centers_from_regions({"regions": list(regions.values())})
    b = centers_from_segments({"segments": list(segments.values())})
    matches, translation = matching.initial_match(a, b, mode=cfg.match_pre_translation)
    rejected_by: list[str | None] = [None] * len(matches)

    def apply_stage(name, new):
        nonlocal matches
        for i, (was, now) in enumerate(zip(matches.inlier, new.inlier)):
            if was and not now:
                rejected_by[i] = name
        matches = new

    if cfg.match_method == "gtm":
        apply_stage("gtm", matching.gtm_filter(matches, a, b, K=cfg.match_k))
    elif cfg.match_method == "ransac":
        apply_stage(
            "ransac",
            matching.ransac_filter(
                matches, a, b,
                model=cfg.match_ransac_model,
                inlier_tol=cfg.match_ransac_tol,
                iterations=cfg.match_ransac_iterations,
                seed=cfg.seed,
            ),
        )
    apply_stage(
        "area_direction",
        matching.area_direction_validate(
            matches, a, b,
            area_ratio_tol=cfg.match_area_ratio_tol,
            angle_tol=math.radians(cfg.match_angle_tol_deg),
        ),
    )
    summary = {
        "method": cfg.match_method,
        "pre_translation": [float(v) for v in translation],
        "n_pairs": len(matches),
        "n_inliers": sum(matches.inlier),
        "pairs": [
            {
                "lidar_id": ia,
                "image_id": ib,
                "lidar_center": regions[ia]["center"],
                "image_centroid_px": segments[ib]["centroid_px"],
                "inlier": ok,
                "rejected_by": rej,
            }
            for (ia, ib), ok, rej in zip(matches.pairs, matches.inlier, rejected_by)
        ],
    }
    write_json(out / MATCHES, summary)
    log.info("match: %d/%d pairs survive (%s)", summary["n_inliers"], len(matches), cfg.match_method)
    return summary


def run_estimate_pose(
    matches_path: str | Path,
    out_dir: str | Path,
    cfg: PipelineConfig,
) -> dict:
    """Estimate the camera from matched region centers.

    The pose artifact is written even when refinement hits the iteration
    budget; non-convergence is raised afterwards.
    """
    out = _outdir(out_dir)
    pairs = [p for p in read_json(matches_path)["pairs"] if p["inlier"]]
    if len(pairs) < 6:
        raise DegenerateConfiguration(
            f"pose estimation needs at least 6 matched pairs, got {len(pairs)}"
        )
    corrs = [
        posemod.Correspondence32(
            Point3(*p["lidar_center"]),
            tuple(p["image_centroid_px"]),
        )
        for p in pairs
    ]
    estimate = posemod.gold_standard(
        corrs,
        max_iterations=cfg.pose_max_iterations,
        convergence_tol=cfg.pose_convergence_tol,
    )
    cam = estimate.pose
    summary = {
        "P": [float(v) for v in estimate.P.P.ravel()],
        "pose": {
            "x0": cam.x0, "y0": cam.y0, "z0": cam.z0,
            "omega": cam.omega, "phi": cam.phi, "kappa": cam.kappa,
            "focal": cam.focal,
            "principal_point": list(cam.principal_point),
        },
        "rms_px": estimate.rms_reprojection,
        "residuals_px": [float(v) for v in estimate.per_point_residuals],
        "converged": estimate.converged,
        "iterations": estimate.iterations,
        "n_correspondences": len(corrs),
    }
    write_json(out / POSE, summary)
    log.info(
        "estimate-pose: rms=%.4f px over %d correspondences (%d iterations)",
        estimate.rms_reprojection, len(corrs), estimate.iterations,
    )
    if not estimate.converged:
        raise NonConvergence(
            f"pose refinement hit the {cfg.pose_max_iterations}-iteration budget"
        )
    return summary


def _control_metrics(image, cloud_unused, P, control_points) -> dict:
    per_point = []
    ox, oy = image.origin
    res = image.resolution
    for cp in control_points:
        u, v = cp["pixel"]
        x, y, z = cp["lidar"]
        gx = ox + u * res
        gy = oy - v * res
        before = math.hypot(gx - x, gy - y)
        world = posemod.backproject_to_height(P, np.array([u, v]), z)
        after = math.hypot(world[0] - x, world[1] - y)
        per_point.append({"pixel": [float(u), float(v)], "before_m": before, "after_m": after})
    before = float(np.mean([p["before_m"] for p in per_point]))
    after = float(np.mean([p["after_m"] for p in per_point]))
    # sub-nanometer initial shift is georeferencing float residue, not a
    # displacement a gain percentage could meaningfully describe
    gain = shift_gain(before, after) if before > 1e-9 else None
    return {
        "n_control_points": len(per_point),
        "before_shift_m": before,
        "after_shift_m": after,
        "gain_pct": gain,
        "per_point": per_point,
    }


def run_register(
    cloud_path: str | Path,
    image_path: str | Path,
    out_dir: str | Path,
    cfg: PipelineConfig,
    control_points_path: str | Path | None = None,
) -> dict:
    """Full pipeline: extract, segment, match, estimate, overlay, metrics."""
    out = _outdir(out_dir)
    run_extract_lidar(cloud_path, out, cfg)
    run_segment_image(image_path, out, cfg)
    run_match(out / REGIONS, out / SEGMENTS, out, cfg)
    pose_summary = run_estimate_pose(out / MATCHES, out, cfg)
    P = ProjectionMatrix(np.asarray(pose_summary["P"]).reshape(3, 4))
    cloud = load_cloud(cloud_path)
    image = load_image(image_path)
    overlay = render_overlay(image, cloud, P, color_by=cfg.overlay_color_by)
    write_png(out / OVERLAY, overlay)
    metrics = {
        "n_control_points": 0,
        "before_shift_m": None,
        "after_shift_m": None,
        "gain_pct": None,
    }
    if control_points_path is not None:
        control_points = read_json(control_points_path)
        metrics = _control_metrics(image, cloud, P, control_points)
        log.info(
            "register: shift %.3f m -> %.3f m (gain %s)",
            metrics["before_shift_m"], metrics["after_shift_m"],
            "n/a" if metrics["gain_pct"] is None else f"{metrics['gain_pct']:.2f}%",
        )
    write_json(out / METRICS, metrics)
    return metrics


_SCENE_INT = {"n_buildings", "n_trees", "seed"}
_SCENE_FLOAT = {
    "extent", "tree_radius", "density", "image_resolution",
    "point_jitter", "color_noise", "camera_height_factor",
}
_SCENE_PAIR = {"height_range", "size_range", "origin"}
_SCENE_NAMES = {f.name for f in fields(synth.SceneSpec)}


def parse_scene_spec(text: str, overrides: dict | None = None, source: str = "<scene>") -> synth.SceneSpec:
    """Parse a flat ``key = value`` scene description into a SceneSpec.

    Pairs are comma-separated ("5, 15"); shapes is a comma-separated list.
    """
    values: dict = {}

    def convert(key: str, raw: str):
        raw = raw.strip()
        try:
            if key in _SCENE_INT:
                return int(raw)
            if key in _SCENE_FLOAT:
                return float(raw)
            if key in _SCENE_PAIR:
                parts = [float(p) for p in raw.split(",")]
                if len(parts) != 2:
                    raise ValueError("expected two values")
                return tuple(parts)
            if key == "shapes":
                return tuple(p.strip() for p in raw.split(",") if p.strip())
        except ValueError as exc:
            raise ConfigError(f"invalid value for {key}: {raw!r} ({exc})") from None
        raise ConfigError(f"unknown scene key {key!r}")

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in _SCENE_NAMES:
            raise ConfigError(f"{source}:{lineno}: unknown scene key {key!r}")
        values[key] = convert(key, raw)
    for key, val in (overrides or {}).items():
        if key not in _SCENE_NAMES:
            raise ConfigError(f"unknown scene key {key!r}")
        values[key] = convert(key, val) if isinstance(val, str) else val
    try:
        return synth.SceneSpec(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def write_scene_bundle(
    scene: synth.SceneData,
    out_dir: str | Path,
    georef_shift: float = 0.0,
    shift_seed: int = 0,
) -> dict:
    """Write cloud, image, camera truth and control points of a scene.

    ``georef_shift`` displaces the written world file by that many meters in
    a seeded horizontal direction, simulating a coarsely georeferenced
    image; the truth records the applied shift vector.
    """
    out = _outdir(out_dir)
    write_ply(out / CLOUD, scene.cloud)
    image = scene.image
    dx = dy = 0.0
    if georef_shift > 0:
        shifted = synth.perturb_pose(scene.pose, georef_shift, 0.0, seed=shift_seed)
        dx = shifted.x0 - scene.pose.x0
        dy = shifted.y0 - scene.pose.y0
        image = GeoRaster(
            image.data, (image.origin[0] + dx, image.origin[1] + dy), image.resolution
        )
    write_png(out / IMAGE, image)

    pose = scene.pose
    truth = {
        "extent": scene.spec.extent,
        "seed": scene.spec.seed,
        "resolution": scene.spec.image_resolution,
        "image_origin_true": [float(v) for v in scene.image.origin],
        "image_origin_written": [float(v) for v in image.origin],
        "georef_shift": georef_shift,
        "shift_vector": [dx, dy],
        "pose": {
            "x0": pose.x0, "y0": pose.y0, "z0": pose.z0,
            "omega": pose.omega, "phi": pose.phi, "kappa": pose.kappa,
            "focal": pose.focal,
            "principal_point": list(pose.principal_point),
        },
        "buildings": [
            {
                "kind": b.footprint.kind,
                "center3d": [float(v) for v in b.center3d()],
                "height": b.height,
                "area_m2": b.footprint.area(),
                "angle_rad": b.footprint.angle % math.pi,
                "polygon": b.footprint.polygon().tolist(),
            }
            for b in scene.buildings
        ],
        "trees": [
            {
                "center": [float(v) for v in t.center],
                "radius": max(x1 for _, x1, _, _ in t.boxes),
                "angle_rad": t.angle % math.pi,
            }
            for t in scene.trees
        ],
    }
    write_json(out / TRUTH, truth)

    ox, oy = scene.image.origin
    res = scene.image.resolution
    control = [
        {
            "pixel": [(b.center3d()[0] - ox) / res, (oy - b.center3d()[1]) / res],
            "lidar": list(b.center3d()),
        }
        for b in scene.buildings
    ]
    write_json(out / CONTROL, control)
    log.info(
        "synth: %d buildings, %d trees, %d points, %dx%d px",
        len(scene.buildings), len(scene.trees), len(scene.cloud),
        scene.image.height, scene.image.width,
    )
    return truth


def run_synth(
    out_dir: str | Path,
    spec: synth.SceneSpec | None = None,
    spec_path: str | Path | None = None,
    overrides: dict | None = None,
    georef_shift: float = 0.0,
) -> dict:
    """Generate a synthetic scene bundle into ``out_dir``."""
    if spec is None:
        if spec_path is not None:
            try:
                text = Path(spec_path).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read scene spec {spec_path}: {exc}") from exc
            src = str(spec_path)
        else:
            text, src = "", "<defaults>"
        spec = parse_scene_spec(text, overrides, source=src)
    scene = synth.generate_scene(spec)
    return write_scene_bundle(scene, out_dir, georef_shift=georef_shift, shift_seed=spec.seed)
