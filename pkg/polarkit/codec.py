"""
Polar representation of an instance: one center plus n ray lengths at the
uniform angles theta_i = i * 360/n, starting at 0 degrees (see geometry for
the angle convention).

Encoding follows the distance-label generation procedure:
 - densify the contour so consecutive samples are at most max_step apart
 - traverse every sample; wherever the contour crosses a target ray, the
   crossing distance is a candidate for that ray
 - several candidates (concave boundary): keep the farthest
 - no candidate: take the distance of the angularly nearest sample if it lies
   within half a ray interval (the sample would share the ray's angle bin);
   otherwise the ray gets EPSILON

Decoding connects the ray end points one by one into a closed ring.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import EPSILON
from .console import dprint
from .errors import DegeneratePolygon, InvalidRayCount, NonPositiveRay
from .geometry import (
    AREA_EPS,
    Point2,
    PointLike,
    Polygon,
    as_point,
    box_center,
    mask_iou,
    mass_center,
    polygon_area,
    polygon_bbox,
    rasterize,
)

DEFAULT_MAX_STEP = 0.5
DEFAULT_RASTER_SIZE = 256
DEFAULT_BBOX_INFLATE = 0.05
CENTER_MODES = ("mass", "box")


def _dprint(*args):
    dprint("Codec", *args)


def check_ray_count(n: int) -> int:
    try:
        n_i = int(n)
    except Exception:
        raise InvalidRayCount(f"ray count must be an integer, got {n!r}")
    if n_i != n or n_i < 4:
        raise InvalidRayCount(f"ray count must be an integer >= 4, got {n}")
    return n_i


def ray_angles(n: int) -> np.ndarray:
    n = check_ray_count(n)
    return np.arange(n, dtype=np.float64) * (2.0 * np.pi / n)


@dataclass(frozen=True, eq=False)
class PolarMask:
    center: Point2
    rays: np.ndarray

    def __post_init__(self):
        r = np.array(self.rays, dtype=np.float64).reshape(-1)
        check_ray_count(len(r))
        if not np.all(np.isfinite(r)) or np.any(r <= 0.0):
            raise NonPositiveRay("ray lengths must be finite and > 0")
        r = np.maximum(r, EPSILON)
        r.flags.writeable = False
        object.__setattr__(self, "center", as_point(self.center))
        object.__setattr__(self, "rays", r)

    @property
    def n(self) -> int:
        return len(self.rays)

    def translated(self, t: PointLike) -> "PolarMask":
        return PolarMask(self.center + as_point(t), self.rays)

    def scaled(self, s: float) -> "PolarMask":
        return PolarMask(self.center, self.rays * float(s))


@dataclass(frozen=True)
class UpperBoundRow:
    n_rays: int
    center_mode: str
    mean_iou: float
    instance_count: int
    skipped: int = 0

    def __post_init__(self):
        if self.instance_count < 1:
            raise ValueError("an upper-bound row needs at least one instance")


def pick_center(contour: Polygon, center_mode: str) -> Point2:
    if center_mode == "mass":
        return mass_center(contour)
    if center_mode == "box":
        return box_center(contour)
    raise ValueError(f"unknown center mode {center_mode!r}; expected one of {CENTER_MODES}")


def densify(contour: Polygon, max_step: float = DEFAULT_MAX_STEP) -> Polygon:
    """Insert evenly spaced points along every edge; original vertices are kept in order."""
    if not max_step > 0:
        raise ValueError(f"max_step must be > 0, got {max_step}")
    a = contour.vertices
    d = np.roll(a, -1, axis=0) - a
    length = np.hypot(d[:, 0], d[:, 1])
    k = np.maximum(1, np.ceil(length / max_step - 1e-12).astype(np.int64))
    if np.all(k == 1):
        return contour
    edge = np.repeat(np.arange(len(a)), k)
    starts = np.repeat(np.cumsum(k) - k, k)
    frac = (np.arange(int(k.sum())) - starts) / np.repeat(k, k)
    return Polygon(a[edge] + frac[:, None] * d[edge])


def encode(
    contour: Polygon,
    center: PointLike,
    n: int,
    max_step: float = DEFAULT_MAX_STEP,
) -> PolarMask:
    n = check_ray_count(n)
    c = as_point(center)
    if polygon_area(contour) < AREA_EPS:
        raise DegeneratePolygon("cannot encode a zero-area contour")

    pts = densify(contour, max_step).vertices - c.as_array()
    theta = ray_angles(n)
    u = np.stack([np.cos(theta), np.sin(theta)], axis=1)

    # cross(u, p) and dot(u, p) for every ray/sample pair, shape (n, m)
    cr = u[:, 0:1] * pts[None, :, 1] - u[:, 1:2] * pts[None, :, 0]
    dot = u @ pts.T
    radius = np.hypot(pts[:, 0], pts[:, 1])
    tol = 1e-12 * max(1.0, float(radius.max()))

    ca, cb = cr, np.roll(cr, -1, axis=1)
    da, db = dot, np.roll(dot, -1, axis=1)
    denom = ca - cb
    crossing = (ca * cb <= 0.0) & (np.abs(denom) > tol)
    s = np.where(crossing, ca / np.where(crossing, denom, 1.0), 0.0)
    t = da + s * (db - da)
    hit = np.where(crossing & (t > 0.0), t, -np.inf)
    on_ray = np.where((np.abs(cr) <= tol) & (dot > 0.0), dot, -np.inf)
    best = np.maximum(hit.max(axis=1), on_ray.max(axis=1))

    missing = np.nonzero(~np.isfinite(best))[0]
    if len(missing):
        best[missing] = _nearest_angle_fallback(pts, radius, theta[missing], n)

    return PolarMask(c, np.maximum(best, EPSILON))


def _nearest_angle_fallback(pts: np.ndarray, radius: np.ndarray, theta: np.ndarray, n: int) -> np.ndarray:
    # half of the angle step
    window = np.pi / n
    valid = radius > EPSILON
    out = np.full(len(theta), EPSILON)
    if not valid.any():
        return out
    phi = np.arctan2(pts[valid, 1], pts[valid, 0])
    r = radius[valid]
    diff = np.abs((phi[None, :] - theta[:, None] + np.pi) % (2.0 * np.pi) - np.pi)
    j = np.argmin(diff, axis=1)
    near = diff[np.arange(len(theta)), j] <= window + 1e-12
    out[near] = r[j[near]]
    return out


def encode_polygon(
    contour: Polygon,
    n: int,
    center_mode: str = "mass",
    max_step: float = DEFAULT_MAX_STEP,
) -> PolarMask:
    return encode(contour, pick_center(contour, center_mode), n, max_step=max_step)


def decode(pm: PolarMask) -> Polygon:
    theta = ray_angles(pm.n)
    x = np.cos(theta) * pm.rays + pm.center.x
    y = np.sin(theta) * pm.rays + pm.center.y
    return Polygon(np.stack([x, y], axis=1))


def _instance_ious(
    contour: Polygon,
    n_list: Sequence[int],
    center_mode: str,
    raster_size: int,
    inflate: float,
    max_step: float,
) -> List[float]:
    center = pick_center(contour, center_mode)
    box = polygon_bbox(contour).inflated(inflate)
    side = max(box.width, box.height)
    if side <= 0:
        raise DegeneratePolygon("instance has an empty bounding box")
    scale = raster_size / side
    w = max(1, int(np.ceil(box.width * scale - 1e-9)))
    h = max(1, int(np.ceil(box.height * scale - 1e-9)))
    origin = np.array([box.x_min, box.y_min])

    def _local(poly: Polygon) -> Polygon:
        return Polygon((poly.vertices - origin) * scale)

    gt = rasterize(_local(contour), w, h)
    out = []
    for n in n_list:
        pm = encode(contour, center, n, max_step=max_step)
        out.append(mask_iou(gt, rasterize(_local(decode(pm)), w, h)))
    return out


def round_trip_iou(
    contour: Polygon,
    n: int,
    center_mode: str = "mass",
    raster_size: int = DEFAULT_RASTER_SIZE,
    inflate: float = DEFAULT_BBOX_INFLATE,
    max_step: float = DEFAULT_MAX_STEP,
) -> float:
    """Mask IoU between an instance and its encode-decode reconstruction."""
    return _instance_ious(contour, [n], center_mode, raster_size, inflate, max_step)[0]


def upper_bound_sweep(
    instances: Sequence[Polygon],
    n_list: Sequence[int],
    center_mode: str = "mass",
    raster_size: int = DEFAULT_RASTER_SIZE,
    inflate: float = DEFAULT_BBOX_INFLATE,
    max_step: float = DEFAULT_MAX_STEP,
    workers: int = 1,
) -> List[UpperBoundRow]:
    """Mean round-trip IoU per ray count, one row per entry of ``n_list``.

    An instance that turns out degenerate for any n is dropped from every row
    and counted in ``skipped``; an empty list comes back only when nothing
    could be evaluated.
    """
    if not instances:
        raise ValueError("upper-bound sweep needs at least one instance")
    n_list = [check_ray_count(n) for n in n_list]
    if not n_list:
        raise ValueError("upper-bound sweep needs at least one ray count")
    if center_mode not in CENTER_MODES:
        raise ValueError(f"unknown center mode {center_mode!r}")

    def _one(contour: Polygon) -> Optional[List[float]]:
        try:
            return _instance_ious(contour, n_list, center_mode, raster_size, inflate, max_step)
        except DegeneratePolygon:
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            results = list(pool.map(_one, instances))
    else:
        results = [_one(p) for p in instances]

    kept = np.array([r for r in results if r is not None], dtype=np.float64)
    skipped = len(results) - len(kept)
    if skipped:
        _dprint(f"{center_mode}: skipped {skipped} degenerate instance(s)")
    if len(kept) == 0:
        return []
    means = kept.mean(axis=0)
    return [
        UpperBoundRow(n, center_mode, float(m), int(len(kept)), skipped)
        for n, m in zip(n_list, means)
    ]
