import numpy as np


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points):
    """Monotone-chain hull, counter-clockwise, without collinear vertices.

    Coordinates are treated as ``(x, y)`` = ``(row, col)``. One distinct
    point gives a one-vertex hull and collinear input gives its two
    endpoints.
    """
    pts = sorted(set((p[0], p[1]) for p in points))
    if not pts:
        raise ValueError("convex_hull needs at least one point")
    if len(pts) <= 2:
        return pts
    lower = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) == 2 and hull[0] == hull[1]:
        return hull[:1]
    return hull


def points_in_hull(hull, points):
    """Boolean mask: which ``points`` (N x 2) lie inside or on ``hull``."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    hv = np.asarray(hull, dtype=np.float64).reshape(-1, 2)
    if len(hv) == 1:
        return np.all(pts == hv[0], axis=1)
    if len(hv) == 2:
        a, b = hv
        d = b - a
        rel = pts - a
        cross = d[0] * rel[:, 1] - d[1] * rel[:, 0]
        t = rel @ d
        return (cross == 0) & (t >= 0) & (t <= d @ d)
    inside = np.ones(len(pts), dtype=bool)
    for a, b in zip(hv, np.roll(hv, -1, axis=0)):
        cross = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        inside &= cross >= 0
    return inside


def hull_mask(hull, shape):
    """Pixels of a ``shape`` grid whose (row, col) lies in ``hull``."""
    rows, cols = np.indices(shape[:2])
    pts = np.stack([rows.ravel(), cols.ravel()], axis=1)
    return points_in_hull(hull, pts).reshape(shape[:2])
