"""Analytic raycast oracle: parametric scenes with exact depth ground truth.

Scenes are built from a ground plane, axis-aligned boxes and spheres with
closed-form ray intersections, shaded Lambertian with a fixed directional
light and smooth (band-limited) procedural albedo, so rendered color is
view-independent and bilinear sampling error stays small.  One primary ray
is cast per pixel center; depth is the camera-z distance of the nearest
hit and is exact up to float rounding.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .metrics import CorrespondenceSet
from .rig import (
    BOUND_EPS,
    Camera,
    CameraRig,
    DepthMap,
    Intrinsics,
    Pose,
    Z_MIN,
    pixel_grid,
    unproject,
)

# Minimum ray parameter for a hit; keeps grazing self-intersections out.
T_EPS = 1e-9

LIGHT_DIR = np.array([0.35, 0.2, 0.9]) / np.linalg.norm([0.35, 0.2, 0.9])
AMBIENT = 0.35


@dataclass(frozen=True)
class Texture:
    """Smooth procedural albedo: sinusoidal checker/stripes or a flat color.

    ``frequency`` is in cycles per meter of world-space coordinate.  For
    unbounded primitives (the ground plane) grazing views compress any
    world frequency below pixel scale, so ``fade_radius`` attenuates the
    pattern toward its mean with in-plane distance from the origin; the
    envelope depends on the world point only, keeping color view-independent.
    """

    kind: str = "uniform"  # uniform | checker | stripes
    frequency: float = 0.25
    base: tuple = (0.8, 0.8, 0.8)
    accent: tuple = (0.2, 0.2, 0.2)
    fade_radius: float | None = None

    def albedo(self, points: np.ndarray, normals: np.ndarray) -> np.ndarray:
        base = np.asarray(self.base, dtype=np.float64)
        if self.kind == "uniform":
            return np.broadcast_to(base, points.shape).copy()
        accent = np.asarray(self.accent, dtype=np.float64)
        # Planar texture coordinates: drop the dominant normal axis.
        axis = np.argmax(np.abs(normals), axis=-1)
        idx = np.arange(points.shape[0])
        others = np.array([[1, 2], [0, 2], [0, 1]])[axis]
        a = points[idx, others[:, 0]]
        b = points[idx, others[:, 1]]
        phase = 2.0 * np.pi * self.frequency
        if self.kind == "checker":
            pattern = np.sin(phase * a) * np.sin(phase * b)
        elif self.kind == "stripes":
            pattern = np.sin(phase * a)
        else:
            raise ParameterError(f"unknown texture kind {self.kind!r}")
        if self.fade_radius is not None:
            dist = np.hypot(points[:, 0], points[:, 1])
            pattern = pattern * np.exp(-((dist / self.fade_radius) ** 2))
        mix = 0.5 + 0.5 * pattern
        return base * (1.0 - mix[:, None]) + accent * mix[:, None]


@dataclass(frozen=True)
class GroundPlane:
    """Horizontal plane z = height with upward normal."""

    height: float = 0.0
    texture: Texture = field(default_factory=Texture)

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        dz = dirs[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (self.height - origin[2]) / dz
        t = np.where((np.abs(dz) > 0) & (t > T_EPS), t, np.inf)
        return t

    def normals(self, points: np.ndarray) -> np.ndarray:
        n = np.zeros_like(points)
        n[:, 2] = 1.0
        return n


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by center and full edge lengths."""

    center: tuple
    size: tuple
    texture: Texture = field(default_factory=Texture)

    def __post_init__(self):
        if not all(s > 0 for s in self.size):
            raise ParameterError("box extents must be positive")

    def _bounds(self):
        c = np.asarray(self.center, dtype=np.float64)
        s = np.asarray(self.size, dtype=np.float64)
        return c - s / 2.0, c + s / 2.0

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        lo, hi = self._bounds()
        tnear = np.full(len(dirs), -np.inf)
        tfar = np.full(len(dirs), np.inf)
        for k in range(3):
            d = dirs[:, k]
            o = origin[k]
            parallel = np.abs(d) < 1e-300
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (lo[k] - o) / d
                t2 = (hi[k] - o) / d
            lo_t = np.minimum(t1, t2)
            hi_t = np.maximum(t1, t2)
            inside = (o >= lo[k]) & (o <= hi[k])
            lo_t = np.where(parallel, np.where(inside, -np.inf, np.inf), lo_t)
            hi_t = np.where(parallel, np.where(inside, np.inf, -np.inf), hi_t)
            tnear = np.maximum(tnear, lo_t)
            tfar = np.minimum(tfar, hi_t)
        hit = (tnear <= tfar) & (tnear > T_EPS)
        return np.where(hit, tnear, np.inf)

    def normals(self, points: np.ndarray) -> np.ndarray:
        lo, hi = self._bounds()
        c = (lo + hi) / 2.0
        half = (hi - lo) / 2.0
        rel = (points - c) / half
        axis = np.argmax(np.abs(rel), axis=1)
        n = np.zeros_like(points)
        n[np.arange(len(points)), axis] = np.sign(rel[np.arange(len(points)), axis])
        return n


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float
    texture: Texture = field(default_factory=Texture)

    def __post_init__(self):
        if not self.radius > 0:
            raise ParameterError("sphere radius must be positive")

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        oc = origin - np.asarray(self.center, dtype=np.float64)
        a = dirs[:, 0] * dirs[:, 0] + dirs[:, 1] * dirs[:, 1] + dirs[:, 2] * dirs[:, 2]
        b = 2.0 * (dirs[:, 0] * oc[0] + dirs[:, 1] * oc[1] + dirs[:, 2] * oc[2])
        c = float(oc @ oc) - self.radius * self.radius
        disc = b * b - 4.0 * a * c
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t0 = (-b - sq) / (2.0 * a)
        t1 = (-b + sq) / (2.0 * a)
        t = np.where(t0 > T_EPS, t0, np.where(t1 > T_EPS, t1, np.inf))
        return np.where(hit, t, np.inf)

    def normals(self, points: np.ndarray) -> np.ndarray:
        return (points - np.asarray(self.center, dtype=np.float64)) / self.radius


Primitive = GroundPlane | Box | Sphere


@dataclass(frozen=True)
class SynthScene:
    """Primitives plus (optionally) the rig that observes them.

    The seed pins every value sampled while building preset scenes, so a
    scene description is fully deterministic.
    """

    primitives: tuple
    rig: CameraRig | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))


@dataclass(frozen=True)
class RenderBundle:
    """Per-view RGB rasters and exact depth maps (sky pixels invalid)."""

    images: list
    depths: list


def _nearest_hit(primitives, origin: np.ndarray, dirs: np.ndarray):
    """Nearest intersection parameter and primitive index (-1 = sky)."""
    if not primitives:
        inf = np.full(len(dirs), np.inf)
        return inf, np.full(len(dirs), -1, dtype=np.int64)
    ts = np.stack([p.intersect(origin, dirs) for p in primitives], axis=0)
    which = np.argmin(ts, axis=0)
    best = ts[which, np.arange(dirs.shape[0])]
    return best, np.where(np.isfinite(best), which, -1)


def _shade(primitives, origin, dirs, t, which) -> np.ndarray:
    color = np.zeros((len(dirs), 3))
    for k, prim in enumerate(primitives):
        sel = which == k
        if not sel.any():
            continue
        pts = origin + t[sel, None] * dirs[sel]
        n = prim.normals(pts)
        # Explicit sum keeps results identical under any row-block split.
        ndotl = n[:, 0] * LIGHT_DIR[0] + n[:, 1] * LIGHT_DIR[1] + n[:, 2] * LIGHT_DIR[2]
        lambert = AMBIENT + (1.0 - AMBIENT) * np.maximum(ndotl, 0.0)
        color[sel] = np.clip(prim.texture.albedo(pts, n) * lambert[:, None], 0.0, 1.0)
    return color


def render(scene: SynthScene, threads: int = 1) -> RenderBundle:
    """Raycast every camera of the scene's rig; exact depth along camera z.

    Row blocks may be traced concurrently; each block writes a disjoint
    output slice, so results do not depend on the thread count.
    """
    if scene.rig is None:
        raise ParameterError("scene has no rig attached")
    images, depths = [], []
    for cam in scene.rig.cameras:
        intr, pose = cam.intrinsics, cam.pose
        h, w = intr.height, intr.width
        uu, vv = pixel_grid(intr)
        # Direction with unit camera-z component: hit parameter == z-depth.
        dirs_cam = np.stack(
            [(uu - intr.cx) / intr.fx, (vv - intr.cy) / intr.fy, np.ones_like(uu)], axis=-1
        )
        dirs_ref = dirs_cam.reshape(-1, 3) @ pose.rotation.T
        origin = pose.translation

        image = np.zeros((h * w, 3))
        depth = np.zeros(h * w)

        def trace(rows):
            lo, hi = rows[0] * w, (rows[-1] + 1) * w
            d = dirs_ref[lo:hi]
            t, which = _nearest_hit(scene.primitives, origin, d)
            depth[lo:hi] = np.where(np.isfinite(t), t, 0.0)
            image[lo:hi] = _shade(scene.primitives, origin, d, t, which)

        blocks = np.array_split(np.arange(h), max(1, min(threads, h)))
        blocks = [b for b in blocks if len(b)]
        if threads > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(trace, blocks))
        else:
            for b in blocks:
                trace(b)

        images.append(image.reshape(h, w, 3))
        depths.append(DepthMap.from_values(depth.reshape(h, w)))
    return RenderBundle(images, depths)


def make_ring_rig(
    n_cameras: int,
    fov_deg: float,
    radius_m: float,
    height_m: float,
    width: int = 160,
    height_px: int = 96,
) -> CameraRig:
    """Outward-facing ring of cameras at equal yaw spacing 360/n degrees.

    Camera k sits at yaw ``k * 360/n`` (camera 0 = front, along +x), with
    image x to the right and image y pointing down (-z).  Adjacent views
    overlap horizontally by ``fov - 360/n`` degrees; a non-positive overlap
    is recorded as a rig warning.
    """
    if n_cameras < 2:
        raise ParameterError("a ring rig needs at least two cameras")
    if not 0.0 < fov_deg < 180.0:
        raise ParameterError(f"field of view must be in (0, 180) degrees, got {fov_deg}")
    cx = (width - 1) / 2.0
    cy = (height_px - 1) / 2.0
    f = cx / math.tan(math.radians(fov_deg) / 2.0)
    intr = Intrinsics(f, f, cx, cy, width, height_px)

    warnings = ()
    overlap = fov_deg - 360.0 / n_cameras
    if overlap <= 0:
        warnings = (
            f"adjacent views do not overlap: fov {fov_deg} deg <= spacing {360.0 / n_cameras:.6g} deg",
        )

    cameras = []
    for k in range(n_cameras):
        yaw = 2.0 * math.pi * k / n_cameras
        fwd = np.array([math.cos(yaw), math.sin(yaw), 0.0])
        right = np.array([math.sin(yaw), -math.cos(yaw), 0.0])
        down = np.array([0.0, 0.0, -1.0])
        rot = np.stack([right, down, fwd], axis=1)
        center = np.array([radius_m * math.cos(yaw), radius_m * math.sin(yaw), height_m])
        cameras.append(Camera(f"cam{k}", intr, Pose.from_rt(rot, center)))
    return CameraRig(tuple(cameras), front_index=0, warnings=warnings)


_PALETTE = [
    ((0.85, 0.45, 0.30), (0.20, 0.10, 0.08)),
    ((0.35, 0.65, 0.85), (0.08, 0.15, 0.25)),
    ((0.55, 0.80, 0.40), (0.12, 0.22, 0.10)),
    ((0.85, 0.80, 0.35), (0.25, 0.22, 0.08)),
]


def preset_scene(name: str, seed: int = 7) -> SynthScene:
    """Bundled scenes: ``plane``, ``boxtown`` (plane + 12 boxes), ``occlusion-pair``."""
    ground = GroundPlane(
        0.0,
        Texture("checker", frequency=0.22, base=(0.82, 0.78, 0.70), accent=(0.30, 0.34, 0.42),
                fade_radius=8.0),
    )
    if name == "plane":
        return SynthScene((ground,), seed=seed)
    if name == "boxtown":
        # Boxes stay below camera height and at moderate range so the
        # disocclusion bands between adjacent views remain thin; that keeps
        # ground-truth warps within the photometric acceptance bound.
        rng = np.random.default_rng(seed)
        prims = [ground]
        for k in range(12):
            az = 2.0 * np.pi * k / 12 + rng.uniform(-0.08, 0.08)
            dist = rng.uniform(9.0, 13.0)
            sx, sy = rng.uniform(1.2, 2.4, size=2)
            sz = rng.uniform(0.6, 1.0)
            base, accent = _PALETTE[k % len(_PALETTE)]
            kind = "stripes" if k % 2 else "checker"
            prims.append(
                Box(
                    (dist * np.cos(az), dist * np.sin(az), sz / 2.0),
                    (sx, sy, sz),
                    Texture(kind, frequency=rng.uniform(0.3, 0.5), base=base, accent=accent),
                )
            )
        return SynthScene(tuple(prims), seed=seed)
    if name == "occlusion-pair":
        wall = Box(
            (10.0, 0.0, 1.6),
            (0.6, 10.0, 3.2),
            Texture("checker", frequency=0.5, base=(0.85, 0.55, 0.30), accent=(0.2, 0.12, 0.06)),
        )
        blocker = Box(
            (4.0, 0.9, 1.0),
            (0.8, 1.4, 2.0),
            Texture("stripes", frequency=0.6, base=(0.35, 0.65, 0.85), accent=(0.1, 0.2, 0.3)),
        )
        return SynthScene((ground, wall, blocker), seed=seed)
    raise ParameterError(f"unknown preset scene {name!r}")


def exact_correspondences(
    scene: SynthScene, view_i: int, view_j: int, bundle: RenderBundle | None = None
) -> CorrespondenceSet:
    """Analytic cross-view pairs with exact re-intersection visibility.

    Every hit pixel of view i is lifted to its 3D point, projected into
    view j, and kept only when a fresh ray from camera j reaches that
    point without striking anything closer (relative slack 1e-9).
    """
    if scene.rig is None:
        raise ParameterError("scene has no rig attached")
    if bundle is None:
        bundle = render(scene)
    cam_i = scene.rig.cameras[view_i]
    cam_j = scene.rig.cameras[view_j]
    gi = bundle.depths[view_i]

    uu, vv = pixel_grid(cam_i.intrinsics)
    sel = gi.valid
    uv_i = np.stack([uu[sel], vv[sel]], axis=1)
    d_i = gi.values[sel]
    pts = unproject(uv_i, d_i, cam_i.intrinsics, cam_i.pose)

    cam = cam_j.pose.inverse().transform(pts)
    z_j = cam[:, 2]
    intr = cam_j.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u_j = intr.fx * cam[:, 0] / z_j + intr.cx
        v_j = intr.fy * cam[:, 1] / z_j + intr.cy
    inb = (
        (z_j > Z_MIN)
        & (u_j >= -BOUND_EPS)
        & (u_j <= intr.width - 1 + BOUND_EPS)
        & (v_j >= -BOUND_EPS)
        & (v_j <= intr.height - 1 + BOUND_EPS)
    )

    origin = cam_j.pose.translation
    rays = pts[inb] - origin
    t, _ = _nearest_hit(scene.primitives, origin, rays)
    visible = t >= 1.0 - 1e-9  # the target point sits at ray parameter 1

    keep = np.zeros(len(pts), dtype=bool)
    keep[np.nonzero(inb)[0][visible]] = True
    n = int(keep.sum())
    return CorrespondenceSet(
        np.full(n, view_i, dtype=np.int64),
        uv_i[keep],
        np.full(n, view_j, dtype=np.int64),
        np.stack([u_j[keep], v_j[keep]], axis=1),
        np.linalg.norm(pts[keep], axis=1),
        d_i[keep],
        z_j[keep],
    )
