"""File I/O for pipeline artifacts.

Formats:

* Point clouds: ASCII ``x y z [class] [intensity]`` (whitespace separated,
  '#' comments) and binary little-endian PLY with double x/y/z and uchar
  classification/intensity.
* Rasters: PNG (8-bit, via Pillow) and ASCII PGM/PPM (P2/P3; P2 with
  maxval 65535 for label masks). Georeferencing travels in an ESRI-style
  six-line world file next to the raster (same stem, ``.wld`` suffix).
* JSON artifacts written with a fixed layout so identical inputs produce
  identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError
from .model import GeoRaster, PointCloud


def _fmt(v: float) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(v))


# ---------------------------------------------------------------------------
# point clouds

def write_cloud_ascii(path: str | Path, cloud: PointCloud) -> None:
    cols = [cloud.xyz]
    if cloud.classification is not None:
        cols.append(cloud.classification.reshape(-1, 1))
    if cloud.intensity is not None:
        if cloud.classification is None:
            raise DataError("ASCII cloud with intensity requires a class column")
        cols.append(cloud.intensity.reshape(-1, 1))
    with open(path, "w") as f:
        f.write("# x y z" + (" class" if len(cols) > 1 else "")
                + (" intensity" if len(cols) > 2 else "") + "\n")
        for row in range(len(cloud)):
            parts = [_fmt(v) for v in cloud.xyz[row]]
            if cloud.classification is not None:
                parts.append(str(int(cloud.classification[row])))
            if cloud.intensity is not None:
                parts.append(str(int(cloud.intensity[row])))
            f.write(" ".join(parts) + "\n")


def read_cloud_ascii(path: str | Path) -> PointCloud:
    xyz, cls, inten = [], [], []
    ncols = None
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) not in (3, 4, 5):
                raise DataError(f"{path}:{lineno}: expected 3-5 columns, got {len(parts)}")
            if ncols is None:
                ncols = len(parts)
            elif len(parts) != ncols:
                raise DataError(f"{path}:{lineno}: inconsistent column count")
            try:
                xyz.append([float(parts[0]), float(parts[1]), float(parts[2])])
                if ncols >= 4:
                    cls.append(int(parts[3]))
                if ncols == 5:
                    inten.append(int(parts[4]))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    xyz_arr = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    return PointCloud(
        xyz_arr,
        np.asarray(cls, dtype=np.uint8) if cls else None,
        np.asarray(inten, dtype=np.uint8) if inten else None,
    )


def write_ply(path: str | Path, cloud: PointCloud) -> None:
    props = ["property double x", "property double y", "property double z"]
    if cloud.classification is not None:
        props.append("property uchar classification")
    if cloud.intensity is not None:
        props.append("property uchar intensity")
    header = "\n".join(
        ["ply", "format binary_little_endian 1.0", f"element vertex {len(cloud)}"]
        + props
        + ["end_header", ""]
    )
    fields = [("x", "<f8"), ("y", "<f8"), ("z", "<f8")]
    if cloud.classification is not None:
        fields.append(("classification", "u1"))
    if cloud.intensity is not None:
        fields.append(("intensity", "u1"))
    rec = np.zeros(len(cloud), dtype=fields)
    rec["x"], rec["y"], rec["z"] = cloud.xyz[:, 0], cloud.xyz[:, 1], cloud.xyz[:, 2]
    if cloud.classification is not None:
        rec["classification"] = cloud.classification
    if cloud.intensity is not None:
        rec["intensity"] = cloud.intensity
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(rec.tobytes())


_PLY_TYPES = {"double": "<f8", "float": "<f4", "uchar": "u1", "uint8": "u1"}


def read_ply(path: str | Path) -> PointCloud:
    with open(path, "rb") as f:
        if f.readline().strip() != b"ply":
            raise DataError(f"{path}: not a PLY file")
        fmt = f.readline().strip()
        if fmt != b"format binary_little_endian 1.0":
            raise DataError(f"{path}: unsupported PLY format {fmt!r}")
        n = None
        fields = []
        while True:
            line = f.readline()
            if not line:
                raise DataError(f"{path}: truncated PLY header")
            line = line.strip().decode("ascii")
            if line == "end_header":
                break
            parts = line.split()
            if parts[0] == "element":
                if parts[1] != "vertex":
                    raise DataError(f"{path}: unsupported element {parts[1]}")
                n = int(parts[2])
            elif parts[0] == "property":
                if parts[1] not in _PLY_TYPES:
                    raise DataError(f"{path}: unsupported property type {parts[1]}")
                fields.append((parts[2], _PLY_TYPES[parts[1]]))
        if n is None:
            raise DataError(f"{path}: PLY header missing vertex element")
        names = [name for name, _ in fields]
        for axis in ("x", "y", "z"):
            if axis not in names:
                raise DataError(f"{path}: PLY missing {axis} property")
        try:
            rec = np.frombuffer(f.read(), dtype=fields, count=n)
        except ValueError as exc:
            raise DataError(f"{path}: truncated PLY body") from exc
    xyz = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
    cls = rec["classification"].copy() if "classification" in names else None
    inten = rec["intensity"].copy() if "intensity" in names else None
    return PointCloud(xyz, cls, inten)


def load_cloud(path: str | Path) -> PointCloud:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    if path.suffix.lower() == ".ply":
        return read_ply(path)
    return read_cloud_ascii(path)


# ---------------------------------------------------------------------------
# world files

def world_file_path(raster_path: str | Path) -> Path:
    return Path(raster_path).with_suffix(".wld")


def write_world_file(path: str | Path, origin: tuple[float, float], resolution: float) -> None:
    ox, oy = origin
    lines = [_fmt(resolution), _fmt(0.0), _fmt(0.0), _fmt(-resolution), _fmt(ox), _fmt(oy)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_world_file(path: str | Path) -> tuple[tuple[float, float], float]:
    try:
        vals = [float(v) for v in Path(path).read_text().split()]
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read world file {path}: {exc}") from exc
    if len(vals) != 6:
        raise DataError(f"world file {path} must have 6 lines")
    a, rot1, rot2, e, ox, oy = vals
    if rot1 != 0.0 or rot2 != 0.0:
        raise DataError(f"world file {path}: rotation terms unsupported")
    if a <= 0 or abs(a + e) > 1e-12 * abs(a):
        raise DataError(f"world file {path}: pixels must be square, north-up")
    return (ox, oy), a


# ---------------------------------------------------------------------------
# rasters

def write_png(path: str | Path, raster: GeoRaster) -> None:
    data = raster.data
    if data.dtype != np.uint8:
        raise DataError("PNG output requires uint8 data")
    Image.fromarray(np.asarray(data)).save(str(path), format="PNG")
    write_world_file(world_file_path(path), raster.origin, raster.resolution)


def read_png(path: str | Path, require_world: bool = True) -> GeoRaster:
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with Image.open(str(path)) as img:
        data = np.asarray(img.convert("RGB") if img.mode not in ("L", "RGB") else img)
    wld = world_file_path(path)
    if wld.exists():
        origin, res = read_world_file(wld)
    elif require_world:
        raise DataError(f"missing world file for {path} (expected {wld})")
    else:
        origin, res = (0.0, 0.0), 1.0
    return GeoRaster(data, origin, res)


def write_pgm(path: str | Path, raster: GeoRaster, maxval: int | None = None) -> None:
    data = np.asarray(raster.data)
    if data.ndim != 2:
        raise DataError("PGM output requires a single band")
    if maxval is None:
        maxval = max(1, int(data.max()))
    if maxval > 65535 or data.max() > maxval or data.min() < 0:
        raise DataError("PGM values out of range")
    with open(path, "w") as f:
        f.write(f"P2\n{data.shape[1]} {data.shape[0]}\n{maxval}\n")
        for row in data:
            f.write(" ".join(str(int(v)) for v in row) + "\n")
    write_world_file(world_file_path(path), raster.origin, raster.resolution)


def _read_pnm_tokens(path: Path, magic: str) -> tuple[list[int], int, int, int]:
    text = path.read_text()
    tokens: list[str] = []
    for line in text.splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != magic:
        raise DataError(f"{path}: expected {magic} header")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        vals = [int(t) for t in tokens[4:]]
    except (IndexError, ValueError) as exc:
        raise DataError(f"{path}: malformed header: {exc}") from exc
    return vals, w, h, maxval


def read_pgm(path: str | Path) -> GeoRaster:
    path = Path(path)
    vals, w, h, maxval = _read_pnm_tokens(path, "P2")
    if len(vals) != w * h:
        raise DataError(f"{path}: expected {w * h} samples, got {len(vals)}")
    dtype = np.uint8 if maxval < 256 else np.int32
    data = np.asarray(vals, dtype=dtype).reshape(h, w)
    wld = world_file_path(path)
    if wld.exists():
        origin, res = read_world_file(wld)
    else:
        origin, res = (0.0, 0.0), 1.0
    return GeoRaster(data, origin, res)


def write_ppm(path: str | Path, raster: GeoRaster) -> None:
    data = np.asarray(raster.data)
    if data.ndim != 3 or data.shape[2] != 3 or data.dtype != np.uint8:
        raise DataError("PPM output requires uint8 RGB data")
    with open(path, "w") as f:
        f.write(f"P3\n{data.shape[1]} {data.shape[0]}\n255\n")
        for row in data:
            f.write(" ".join(str(int(v)) for v in row.ravel()) + "\n")
    write_world_file(world_file_path(path), raster.origin, raster.resolution)


def read_ppm(path: str | Path) -> GeoRaster:
    path = Path(path)
    vals, w, h, maxval = _read_pnm_tokens(path, "P3")
    if maxval > 255:
        raise DataError(f"{path}: 16-bit PPM unsupported")
    if len(vals) != 3 * w * h:
        raise DataError(f"{path}: expected {3 * w * h} samples, got {len(vals)}")
    data = np.asarray(vals, dtype=np.uint8).reshape(h, w, 3)
    wld = world_file_path(path)
    if wld.exists():
        origin, res = read_world_file(wld)
    else:
        origin, res = (0.0, 0.0), 1.0
    return GeoRaster(data, origin, res)


def load_image(path: str | Path, require_world: bool = True) -> GeoRaster:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".png":
        return read_png(path, require_world=require_world)
    if suffix == ".ppm":
        raster = read_ppm(path)
    elif suffix == ".pgm":
        raster = read_pgm(path)
    else:
        raise DataError(f"unsupported image format: {path}")
    if require_world and not world_file_path(path).exists():
        raise DataError(f"missing world file for {path}")
    return raster


# ---------------------------------------------------------------------------
# JSON

def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def read_json(path: str | Path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON in {path}: {exc}") from exc
