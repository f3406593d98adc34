"""Central projection of 3D points onto a shared unit cylinder.

The cylinder has radius 1, a vertical axis (parallel to the reference
z-axis) through ``center``, and acts as a common 2D index for all views:
a point ``p`` with offset ``p_o = p - c`` and in-plane radius
``r = hypot(x_o, y_o)`` is mapped along the ray ``c + b * p_o`` (b > 0)
to ``p' = c + (1/r) * p_o``, parameterized by

    theta = atan2(y_o, x_o)   in (-pi, pi]
    h     = z_o / r           (height on the unit cylinder, unbounded)

The positive ray parameter keeps the projection on the same side as the
point, so the azimuth of ``p'`` equals the azimuth of ``p_o`` exactly and
``|| (p' - c)_xy || = 1`` by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OnAxisError
from .rig import PointMap

# The central projection is singular on the axis; points closer than this
# (in-plane, meters) are rejected / masked invalid.
R_MIN = 1e-6

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Cylinder:
    """Unit-radius cylinder with vertical axis through ``center``."""

    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    radius: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        if self.radius != 1.0:
            raise ValueError("the shared cylinder has unit radius by definition")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "center", c)


@dataclass(frozen=True)
class CylCoord:
    """Azimuth (radians, in (-pi, pi]) and height on the unit cylinder."""

    theta: float
    h: float


@dataclass(frozen=True)
class PositionMap:
    """Per-pixel cylindrical coordinates for one view, plus validity."""

    theta: np.ndarray
    h: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=np.float64)
        h = np.asarray(self.h, dtype=np.float64)
        m = np.asarray(self.valid, dtype=bool)
        if not (t.shape == h.shape == m.shape):
            raise ValueError("theta, h and valid must share one shape")
        object.__setattr__(self, "theta", t)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "valid", m)

    @property
    def shape(self):
        return self.theta.shape


def cylinder_coords(points: np.ndarray, cyl: Cylinder) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized projection: returns ``(theta, h, r)`` for ``(..., 3)`` points.

    ``r`` is the in-plane distance to the axis; entries with ``r <= R_MIN``
    carry unusable theta/h and must be masked by the caller.
    """
    p = np.asarray(points, dtype=np.float64)
    xo = p[..., 0] - cyl.center[0]
    yo = p[..., 1] - cyl.center[1]
    zo = p[..., 2] - cyl.center[2]
    r = np.hypot(xo, yo)
    theta = np.arctan2(yo, xo)
    # atan2 returns -pi only for y = +/-0, x < 0; fold onto the (-pi, pi] contract.
    theta = np.where(theta == -np.pi, np.pi, theta)
    safe_r = np.where(r > 0, r, 1.0)
    h = zo / safe_r
    return theta, h, r


def project_point(p, cyl: Cylinder) -> CylCoord:
    """Project a single 3D point; raises ``OnAxisError`` within ``R_MIN`` of the axis."""
    theta, h, r = cylinder_coords(np.asarray(p, dtype=np.float64).reshape(3), cyl)
    if r <= R_MIN:
        raise OnAxisError(f"point with in-plane radius {r:.3e} is on the cylinder axis")
    return CylCoord(float(theta), float(h))


def surface_point(p, cyl: Cylinder) -> np.ndarray:
    """The intersection ``p' = c + (1/r) * p_o`` of the ray with the lateral surface."""
    p = np.asarray(p, dtype=np.float64)
    po = p - cyl.center
    r = np.hypot(po[..., 0], po[..., 1])
    return cyl.center + po / r[..., None]


def build_position_maps(pointmaps: list[PointMap], cyl: Cylinder) -> list[PositionMap]:
    """Element-wise projection of per-view point maps onto the cylinder.

    Invalid 3D points propagate invalidity; on-axis points are masked
    rather than raising.
    """
    out = []
    for pm in pointmaps:
        theta, h, r = cylinder_coords(pm.points, cyl)
        out.append(PositionMap(theta, h, pm.valid & (r > R_MIN)))
    return out


def wrap_angle(delta):
    """Wrap angle differences into (-pi, pi]; works on scalars and arrays.

    ``pi - mod(pi - d, 2*pi)`` maps the branch value -pi to +pi; the final
    fold guards the float edge case where ``mod`` rounds up to ``2*pi``.
    """
    wrapped = np.pi - np.mod(np.pi - np.asarray(delta, dtype=np.float64), _TWO_PI)
    return np.where(wrapped <= -np.pi, wrapped + _TWO_PI, wrapped)


def geodesic_delta(a: CylCoord, b: CylCoord) -> np.ndarray:
    """Displacement ``(wrapped dtheta, dh)`` on the developed cylinder surface."""
    return np.array([float(wrap_angle(a.theta - b.theta)), a.h - b.h])
