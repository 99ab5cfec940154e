"""Command line interface.

Subcommands mirror the pipeline stages; every one takes ``--config FILE``
(flat key = value), repeatable ``--set key=value`` overrides, ``--seed``
(shorthand for the seed key) and ``--out DIR``. Set the ``GEOREG_LOG``
environment variable to a logging level name for progress output on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import load_config
from .errors import ConfigError, GeoregError
from . import pipeline


def _overrides(args) -> dict:
    out: dict = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        out[key.strip()] = val
    if args.seed is not None:
        out["seed"] = args.seed
    return out


def _config(args):
    return load_config(args.config, _overrides(args))


def _cmd_extract_lidar(args) -> int:
    s = pipeline.run_extract_lidar(args.cloud, args.out, _config(args))
    print(
        f"threshold {s['threshold']:.3f} m, resolution {s['resolution']:g} m, "
        f"{s['count']} regions"
    )
    return 0


def _cmd_segment_image(args) -> int:
    s = pipeline.run_segment_image(args.image, args.out, _config(args))
    print(f"{s['count']} building segments")
    return 0


def _cmd_match(args) -> int:
    s = pipeline.run_match(args.regions, args.segments, args.out, _config(args))
    print(f"{s['n_inliers']}/{s['n_pairs']} pairs kept ({s['method']})")
    return 0


def _cmd_estimate_pose(args) -> int:
    s = pipeline.run_estimate_pose(args.matches, args.out, _config(args))
    print(f"rms {s['rms_px']:.4f} px over {s['n_correspondences']} correspondences")
    return 0


def _cmd_register(args) -> int:
    m = pipeline.run_register(
        args.cloud, args.image, args.out, _config(args),
        control_points_path=args.control_points,
    )
    if m["n_control_points"]:
        gain = "n/a" if m["gain_pct"] is None else f"{m['gain_pct']:.2f}%"
        print(
            f"shift before {m['before_shift_m']:.3f} m, "
            f"after {m['after_shift_m']:.3f} m, gain {gain}"
        )
    else:
        print("registered (no control points, no shift metrics)")
    return 0


def _cmd_synth(args) -> int:
    if args.config is not None:
        raise ConfigError("synth reads its scene spec from the positional file, not --config")
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        overrides[key.strip()] = val
    if args.seed is not None:
        overrides["seed"] = args.seed
    truth = pipeline.run_synth(
        args.out,
        spec_path=args.specfile,
        overrides=overrides,
        georef_shift=args.shift,
    )
    print(
        f"{len(truth['buildings'])} buildings, {len(truth['trees'])} trees, "
        f"georef shift {truth['georef_shift']:g} m"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="georeg",
        description="Coarse registration of airborne LiDAR to optical imagery "
        "via building outlines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="FILE", help="flat key = value config file")
        p.add_argument(
            "--set", action="append", metavar="KEY=VALUE",
            help="override one config key (repeatable)",
        )
        p.add_argument("--seed", type=int, help="random seed override")
        p.add_argument("--out", metavar="DIR", default=".", help="output directory")

    p = sub.add_parser("extract-lidar", help="extract building regions from a point cloud")
    p.add_argument("cloud", help="point cloud (.ply or .xyz/.txt ascii)")
    common(p)
    p.set_defaults(func=_cmd_extract_lidar)

    p = sub.add_parser("segment-image", help="segment building regions in an image")
    p.add_argument("image", help="georeferenced image (.png/.ppm with world file)")
    common(p)
    p.set_defaults(func=_cmd_segment_image)

    p = sub.add_parser("match", help="match extracted regions across modalities")
    p.add_argument("regions", help="regions.json from extract-lidar")
    p.add_argument("segments", help="segments.json from segment-image")
    common(p)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("estimate-pose", help="estimate the camera from matches")
    p.add_argument("matches", help="matches.json from match")
    common(p)
    p.set_defaults(func=_cmd_estimate_pose)

    p = sub.add_parser("register", help="run the full pipeline")
    p.add_argument("cloud", help="point cloud (.ply or ascii)")
    p.add_argument("image", help="georeferenced image")
    p.add_argument(
        "--control-points", metavar="FILE",
        help="JSON control points for before/after shift metrics",
    )
    common(p)
    p.set_defaults(func=_cmd_register)

    p = sub.add_parser("synth", help="generate a synthetic scene with ground truth")
    p.add_argument("specfile", nargs="?", help="flat key = value scene description")
    p.add_argument(
        "--shift", type=float, default=0.0, metavar="METERS",
        help="displace the written image georeferencing by this much",
    )
    common(p)
    p.set_defaults(func=_cmd_synth)
    return parser


def _setup_logging() -> None:
    level_name = os.environ.get("GEOREG_LOG")
    if not level_name:
        return
    level = getattr(logging, level_name.upper(), None)
    if not isinstance(level, int):
        print(f"georeg: ignoring unknown GEOREG_LOG level {level_name!r}", file=sys.stderr)
        return
    # configure the package logger, not the root: the hosting process (tests,
    # embedding applications) may own the root handlers
    pkg = logging.getLogger("georeg")
    pkg.handlers.clear()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    pkg.addHandler(handler)
    pkg.setLevel(level)


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GeoregError as exc:
        print(f"georeg: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"georeg: i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
