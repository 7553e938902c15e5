"""
Synthetic instance corpora for the upper-bound sweep.

 - circles: regular 90-gons of random radius and position
 - convex: convex hulls of 8-20 random points
 - stars: star-convex shapes, a smooth random radius profile around a center
 - crescents: a disk minus an offset smaller disk, redrawn until the box center
   falls outside the shape and the mass center inside
 - mixed: equal parts of the four kinds above, in that order

Everything is drawn from one numpy Generator seeded once, so a (kind, count,
seed) triple always yields the same vertex lists.
"""

from typing import Callable, Dict, List, Sequence

import cv2
import numpy as np

from .console import dprint
from .geometry import Point2, PointLike, Polygon, as_point, box_center, contains, mass_center, polygon_area

CANVAS_SIZE = 512
CIRCLE_VERTICES = 90
STAR_VERTICES = 96
KINDS = ("circles", "convex", "stars", "crescents", "mixed")
_MAX_REDRAWS = 200


def _dprint(*args):
    dprint("Synth", *args)


def _random_center(rng: np.random.Generator, reach: float) -> np.ndarray:
    lo = reach + 1.0
    hi = CANVAS_SIZE - reach - 1.0
    return rng.uniform(lo, hi, size=2)


def regular_polygon(center: PointLike, radius: float, vertices: int = CIRCLE_VERTICES) -> Polygon:
    c = as_point(center)
    phi = np.arange(vertices) * (2.0 * np.pi / vertices)
    return Polygon(np.stack([c.x + radius * np.cos(phi), c.y + radius * np.sin(phi)], axis=1))


def star_polygon(
    center: PointLike,
    outer: float,
    inner: float,
    points: int = 5,
    rotation: float = 0.0,
) -> Polygon:
    """Regular star with ``points`` tips; the first tip sits at angle ``rotation``."""
    if points < 2 or not (outer > 0 and inner > 0):
        raise ValueError("a star needs >= 2 points and positive radii")
    c = as_point(center)
    phi = rotation + np.arange(2 * points) * (np.pi / points)
    r = np.where(np.arange(2 * points) % 2 == 0, outer, inner)
    return Polygon(np.stack([c.x + r * np.cos(phi), c.y + r * np.sin(phi)], axis=1))


def _circle(rng: np.random.Generator) -> Polygon:
    radius = rng.uniform(8.0, 64.0)
    return regular_polygon(Point2(*_random_center(rng, radius)), radius)


def _convex(rng: np.random.Generator) -> Polygon:
    for _ in range(_MAX_REDRAWS):
        k = int(rng.integers(8, 21))
        half = rng.uniform(12.0, 64.0, size=2)
        pts = rng.uniform(-1.0, 1.0, size=(k, 2)) * half + _random_center(rng, float(half.max()))
        hull = cv2.convexHull(pts.astype(np.float32)).reshape(-1, 2).astype(np.float64)
        if len(hull) >= 3:
            poly = Polygon(hull)
            if polygon_area(poly) > 1.0:
                return poly
    raise RuntimeError("could not draw a non-degenerate convex hull")


def _star(rng: np.random.Generator) -> Polygon:
    radius = rng.uniform(16.0, 64.0)
    phi = np.arange(STAR_VERTICES) * (2.0 * np.pi / STAR_VERTICES)
    profile = np.ones_like(phi)
    for k in range(2, 6):
        profile += rng.uniform(0.0, 0.12) * np.cos(k * phi + rng.uniform(0.0, 2.0 * np.pi))
    r = radius * profile
    c = _random_center(rng, float(r.max()))
    return Polygon(np.stack([c[0] + r * np.cos(phi), c[1] + r * np.sin(phi)], axis=1))


def _crescent_outline(radius: float, inner: float, offset: float, arc_vertices: int = 72) -> np.ndarray:
    # Outer circle at the origin, inner circle at (offset, 0); the tips are the
    # two circle intersections.
    x0 = (offset ** 2 + radius ** 2 - inner ** 2) / (2.0 * offset)
    y0 = np.sqrt(max(radius ** 2 - x0 ** 2, 0.0))
    alpha = np.arctan2(y0, x0)
    beta = np.arctan2(y0, x0 - offset)
    outer_phi = np.linspace(alpha, 2.0 * np.pi - alpha, arc_vertices)
    inner_phi = np.linspace(2.0 * np.pi - beta, beta, max(arc_vertices * 2 // 3, 8))[1:-1]
    outer = np.stack([radius * np.cos(outer_phi), radius * np.sin(outer_phi)], axis=1)
    back = np.stack([offset + inner * np.cos(inner_phi), inner * np.sin(inner_phi)], axis=1)
    return np.concatenate([outer, back])


def _crescent(rng: np.random.Generator) -> Polygon:
    poly = None
    for _ in range(_MAX_REDRAWS):
        radius = rng.uniform(20.0, 64.0)
        inner = radius * rng.uniform(0.88, 0.95)
        offset = radius * rng.uniform(0.45, 0.60)
        local = Polygon(_crescent_outline(radius, inner, offset))
        poly = local.rotated(rng.uniform(0.0, 2.0 * np.pi), about=(0.0, 0.0))
        poly = poly.translated(Point2(*_random_center(rng, radius)))
        if not contains(poly, box_center(poly)) and contains(poly, mass_center(poly)):
            return poly
    return poly


_GENERATORS: Dict[str, Callable[[np.random.Generator], Polygon]] = {
    "circles": _circle,
    "convex": _convex,
    "stars": _star,
    "crescents": _crescent,
}


def _split_counts(count: int, parts: int) -> List[int]:
    base, extra = divmod(count, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def synth_corpus(kind: str, count: int, seed: int) -> List[Polygon]:
    if kind not in KINDS:
        raise ValueError(f"unknown corpus kind {kind!r}; expected one of {KINDS}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    if kind == "mixed":
        plan: Sequence = list(zip(_GENERATORS, _split_counts(count, len(_GENERATORS))))
    else:
        plan = [(kind, count)]
    out: List[Polygon] = []
    for name, k in plan:
        gen = _GENERATORS[name]
        out.extend(gen(rng) for _ in range(k))
    _dprint(f"{kind}: {len(out)} shape(s), seed {seed}")
    return out
