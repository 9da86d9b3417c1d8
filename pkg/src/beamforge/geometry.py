"""Planar geometry primitives: projection, distortion, smallest enclosing circle."""
from __future__ import annotations

import math

import numpy as np

EARTH_RADIUS_KM = 6371.0


def project_equirectangular(lats, lons, lat0: float, lon0: float) -> np.ndarray:
    """Project lat/lon degrees to a local planar frame (km) centered at (lat0, lon0).

    x points east, y points north. Adequate for regional extents where the
    cos(lat0) scale factor is nearly constant.
    """
    lats = np.asarray(lats, dtype=float)
    lons = np.asarray(lons, dtype=float)
    x = EARTH_RADIUS_KM * math.cos(math.radians(lat0)) * np.radians(lons - lon0)
    y = EARTH_RADIUS_KM * np.radians(lats - lat0)
    return np.stack([x, y], axis=-1)


def inverse_project(xy, lat0: float, lon0: float) -> np.ndarray:
    """Inverse of :func:`project_equirectangular`; returns (lat, lon) degrees."""
    xy = np.asarray(xy, dtype=float)
    lat = lat0 + np.degrees(xy[..., 1] / EARTH_RADIUS_KM)
    lon = lon0 + np.degrees(xy[..., 0] / (EARTH_RADIUS_KM * math.cos(math.radians(lat0))))
    return np.stack([lat, lon], axis=-1)


def haversine_km(lat1, lon1, lat2, lon2) -> float:
    """Great-circle distance in km between two points given in degrees."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(a))


def distortion(position, center, alpha: float, r_max: float) -> float:
    """Normalized power-law distortion (||position - center|| / r_max)**alpha.

    Normalizing by r_max maps the coverage boundary to distortion 1, which
    keeps the values conditioned for large alpha.
    """
    position = np.asarray(position, dtype=float)
    center = np.asarray(center, dtype=float)
    d = float(np.linalg.norm(position - center))
    return (d / r_max) ** alpha


# --- smallest enclosing circle (randomized incremental, expected O(n)) ---

def _circle_two(p, q):
    cx = (p[0] + q[0]) / 2.0
    cy = (p[1] + q[1]) / 2.0
    r = math.hypot(p[0] - q[0], p[1] - q[1]) / 2.0
    return cx, cy, r


def _circle_three(p, q, r):
    ax, ay = p
    bx, by = q
    cx, cy = r
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if abs(d) < 1e-14:
        return None
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
          + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
          + (cx * cx + cy * cy) * (bx - ax)) / d
    return ux, uy, math.hypot(ax - ux, ay - uy)


def _contains(circle, p, eps=1e-10):
    cx, cy, r = circle
    return math.hypot(p[0] - cx, p[1] - cy) <= r * (1.0 + eps) + eps


def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _circle_two_boundary(points, p, q):
    # Smallest circle enclosing `points` with both p and q on the boundary.
    circ = _circle_two(p, q)
    left = None
    right = None
    px, py = p
    qx, qy = q
    for s in points:
        if _contains(circ, s):
            continue
        cross = _cross(px, py, qx, qy, s[0], s[1])
        c3 = _circle_three(p, q, s)
        if c3 is None:
            continue
        if cross > 0.0 and (left is None or
                            _cross(px, py, qx, qy, c3[0], c3[1]) >
                            _cross(px, py, qx, qy, left[0], left[1])):
            left = c3
        elif cross < 0.0 and (right is None or
                              _cross(px, py, qx, qy, c3[0], c3[1]) <
                              _cross(px, py, qx, qy, right[0], right[1])):
            right = c3
    if left is None and right is None:
        return circ
    if left is None:
        return right
    if right is None:
        return left
    return left if left[2] <= right[2] else right


def _circle_one_boundary(points, p):
    c = (p[0], p[1], 0.0)
    for j, q in enumerate(points):
        if _contains(c, q):
            continue
        if c[2] == 0.0:
            c = _circle_two(p, q)
        else:
            c = _circle_two_boundary(points[: j + 1], p, q)
    return c


def min_enclosing_circle(points, rng: np.random.Generator | None = None):
    """Return (center, radius) of the smallest circle enclosing the points.

    Randomized incremental (Welzl-style), expected linear time. The caller may
    pass a Generator for a reproducible shuffle; the result itself does not
    depend on the order.
    """
    pts = [(float(x), float(y)) for x, y in np.asarray(points, dtype=float).reshape(-1, 2)]
    if not pts:
        raise ValueError("min_enclosing_circle needs at least one point")
    if rng is None:
        rng = np.random.default_rng(0)
    order = rng.permutation(len(pts))
    pts = [pts[i] for i in order]

    c = (pts[0][0], pts[0][1], 0.0)
    for i, p in enumerate(pts):
        if not _contains(c, p):
            c = _circle_one_boundary(pts[: i + 1], p)
    return np.array([c[0], c[1]]), c[2]
