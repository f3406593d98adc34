"""Bit-exact file formats: rig configuration JSON, PFM rasters, PPM images.

PFM: header ``Pf`` (1 channel) or ``PF`` (3 channels), a ``W H`` dimensions
line, a scale line that must be negative (little-endian payload), then
rows of 32-bit floats stored BOTTOM-TO-TOP.  PPM is binary P6, maxval 255.

Rig files are JSON trees; unknown fields are rejected, numbers parse as
64-bit floats, and a write/read round trip is lossless.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .cylinder import Cylinder
from .errors import RasterFormatError, SchemaError
from .rig import Camera, CameraRig, Intrinsics, ParameterError, Pose

SCHEMA_VERSION = 1

_CAMERA_FIELDS = {"name", "fx", "fy", "cx", "cy", "width", "height", "pose", "front"}
_ROOT_FIELDS = {"version", "cylinder_center", "cameras"}


@dataclass(frozen=True)
class RigConfig:
    """Parsed rig file: camera set plus the shared cylinder."""

    rig: CameraRig
    cylinder: Cylinder
    version: int = SCHEMA_VERSION


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_rig(config: RigConfig, path) -> None:
    cams = []
    for i, cam in enumerate(config.rig.cameras):
        intr = cam.intrinsics
        cams.append(
            {
                "name": cam.name,
                "fx": float(intr.fx),
                "fy": float(intr.fy),
                "cx": float(intr.cx),
                "cy": float(intr.cy),
                "width": int(intr.width),
                "height": int(intr.height),
                "pose": [float(x) for x in cam.pose.matrix.reshape(-1)],
                "front": i == config.rig.front_index,
            }
        )
    tree = {
        "version": config.version,
        "cylinder_center": [float(x) for x in config.cylinder.center],
        "cameras": cams,
    }
    atomic_write_bytes(path, (json.dumps(tree, indent=2) + "\n").encode("ascii"))


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise SchemaError(f"{path}: {message}")


def read_rig(path) -> RigConfig:
    try:
        with open(path, "rb") as f:
            tree = json.loads(f.read().decode("utf-8"))
    except (OSError, ValueError) as exc:
        raise SchemaError(f"$: cannot parse rig file: {exc}") from exc

    _require(isinstance(tree, dict), "$", "root must be an object")
    unknown = set(tree) - _ROOT_FIELDS
    _require(not unknown, "$", f"unknown fields {sorted(unknown)}")
    for fieldname in _ROOT_FIELDS:
        _require(fieldname in tree, "$", f"missing field '{fieldname}'")
    _require(tree["version"] == SCHEMA_VERSION, "$.version",
             f"unsupported version {tree['version']!r}")

    center = tree["cylinder_center"]
    _require(
        isinstance(center, list) and len(center) == 3
        and all(isinstance(x, (int, float)) for x in center),
        "$.cylinder_center", "must be a list of 3 numbers",
    )

    cams_json = tree["cameras"]
    _require(isinstance(cams_json, list) and len(cams_json) >= 1,
             "$.cameras", "must be a non-empty list")

    cameras = []
    fronts = []
    for i, cj in enumerate(cams_json):
        where = f"$.cameras[{i}]"
        _require(isinstance(cj, dict), where, "must be an object")
        unknown = set(cj) - _CAMERA_FIELDS
        _require(not unknown, where, f"unknown fields {sorted(unknown)}")
        for fieldname in _CAMERA_FIELDS:
            _require(fieldname in cj, where, f"missing field '{fieldname}'")
        _require(isinstance(cj["name"], str) and cj["name"], f"{where}.name", "must be a non-empty string")
        for key in ("fx", "fy", "cx", "cy"):
            _require(isinstance(cj[key], (int, float)), f"{where}.{key}", "must be a number")
        for key in ("width", "height"):
            _require(isinstance(cj[key], int) and cj[key] > 0, f"{where}.{key}", "must be a positive integer")
        _require(
            isinstance(cj["pose"], list) and len(cj["pose"]) == 16
            and all(isinstance(x, (int, float)) for x in cj["pose"]),
            f"{where}.pose", "must be a row-major list of 16 numbers",
        )
        _require(isinstance(cj["front"], bool), f"{where}.front", "must be a boolean")
        try:
            intr = Intrinsics(float(cj["fx"]), float(cj["fy"]), float(cj["cx"]),
                              float(cj["cy"]), cj["width"], cj["height"])
        except ParameterError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
        try:
            pose = Pose(np.array(cj["pose"], dtype=np.float64).reshape(4, 4))
        except ParameterError as exc:
            raise SchemaError(f"{where}.pose: {exc}") from exc
        cameras.append(Camera(cj["name"], intr, pose))
        if cj["front"]:
            fronts.append(i)

    if len(fronts) != 1:
        names = [cams_json[i]["name"] for i in fronts]
        raise SchemaError(
            f"$.cameras: exactly one camera must be flagged front, found {len(fronts)} ({names})"
        )
    return RigConfig(CameraRig(tuple(cameras), front_index=fronts[0]),
                     Cylinder(np.array(center, dtype=np.float64)), tree["version"])


def write_pfm(path, raster: np.ndarray) -> None:
    """Write a (H, W) or (H, W, 3) float raster as little-endian PFM."""
    arr = np.asarray(raster)
    if arr.ndim == 2:
        magic = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"PF"
    else:
        raise RasterFormatError(f"PFM rasters must be (H, W) or (H, W, 3), got {arr.shape}")
    h, w = arr.shape[:2]
    header = magic + b"\n" + f"{w} {h}\n".encode("ascii") + b"-1.0\n"
    payload = arr[::-1].astype("<f4").tobytes()  # rows bottom-to-top
    atomic_write_bytes(path, header + payload)


def _read_token(f) -> bytes:
    tok = b""
    while True:
        c = f.read(1)
        if not c:
            raise RasterFormatError("unexpected end of file in PFM header")
        if c.isspace():
            if tok:
                return tok
            continue
        tok += c


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = _read_token(f)
        if magic == b"Pf":
            channels = 1
        elif magic == b"PF":
            channels = 3
        else:
            raise RasterFormatError(f"not a PFM file: bad magic {magic!r}")
        try:
            w = int(_read_token(f))
            h = int(_read_token(f))
            scale = float(_read_token(f))
        except ValueError as exc:
            raise RasterFormatError(f"malformed PFM header: {exc}") from exc
        if w <= 0 or h <= 0:
            raise RasterFormatError(f"bad PFM dimensions {w}x{h}")
        if scale >= 0:
            raise RasterFormatError(
                "big-endian PFM (positive scale) is not supported; expected a negative scale"
            )
        payload = f.read(4 * w * h * channels)
        if len(payload) != 4 * w * h * channels:
            raise RasterFormatError(
                f"truncated PFM payload: expected {4 * w * h * channels} bytes, got {len(payload)}"
            )
    arr = np.frombuffer(payload, dtype="<f4")
    arr = arr.reshape(h, w) if channels == 1 else arr.reshape(h, w, 3)
    return arr[::-1].copy()  # stored bottom-to-top


def write_ppm(path, image: np.ndarray) -> None:
    """Write an (H, W, 3) image as binary PPM (P6, maxval 255).

    Float inputs are treated as unit-range and quantized; uint8 passes
    through unchanged.
    """
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise RasterFormatError(f"PPM images must be (H, W, 3), got {arr.shape}")
    if arr.dtype != np.uint8:
        arr = (np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    h, w = arr.shape[:2]
    atomic_write_bytes(path, f"P6\n{w} {h}\n255\n".encode("ascii") + arr.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        if _read_token(f) != b"P6":
            raise RasterFormatError("not a binary PPM (P6) file")
        try:
            w = int(_read_token(f))
            h = int(_read_token(f))
            maxval = int(_read_token(f))
        except ValueError as exc:
            raise RasterFormatError(f"malformed PPM header: {exc}") from exc
        if maxval != 255:
            raise RasterFormatError(f"only maxval 255 PPM is supported, got {maxval}")
        payload = f.read(3 * w * h)
        if len(payload) != 3 * w * h:
            raise RasterFormatError("truncated PPM payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).copy()
