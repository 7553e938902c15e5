"""
Continuous and raster geometry primitives shared by every other module.

Coordinate convention (used everywhere in the package):
 - image frame, +x right, +y down, units are pixels
 - angles are measured from +x towards +y, i.e. clockwise on screen, so a
   ray of length d at angle theta from (xc, yc) ends at
   (xc + d*cos(theta), yc + d*sin(theta))
 - pixel (row r, col c) has its center at (c + 0.5, r + 0.5); a pixel is
   inside a polygon iff its center is (even-odd rule)

The raster helpers double as brute-force oracles for the polar machinery:
exact mask IoU on a pixel grid, marching-squares contours of a mask.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import cv2
import numpy as np
from skimage import measure

from .errors import DegeneratePolygon, DimensionMismatch, EmptyMask

AREA_EPS = 1e-12


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError(f"Point2 must be finite, got ({self.x}, {self.y})")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)

    def __add__(self, other: "Point2") -> "Point2":
        return Point2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Point2") -> "Point2":
        return Point2(self.x - other.x, self.y - other.y)


PointLike = Union[Point2, Sequence[float], np.ndarray]


def as_point(p: PointLike) -> Point2:
    if isinstance(p, Point2):
        return p
    x, y = p
    return Point2(float(x), float(y))


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"invalid bbox {self}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def center(self) -> Point2:
        return Point2(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def inflated(self, frac: float) -> "BBox":
        """Grow every side by ``frac`` of the box size on that axis."""
        dx = self.width * frac
        dy = self.height * frac
        return BBox(self.x_min - dx, self.y_min - dy, self.x_max + dx, self.y_max + dy)

    def as_list(self) -> List[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass(frozen=True, eq=False)
class Polygon:
    """Implicitly closed ring of vertices, stored as a read-only Nx2 float64 array."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise DegeneratePolygon(f"polygon vertices must be Nx2, got shape {v.shape}")
        if len(v) < 3:
            raise DegeneratePolygon(f"polygon needs at least 3 vertices, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise DegeneratePolygon("polygon has non-finite coordinates")
        if abs(_ring_area(v)) < AREA_EPS:
            raise DegeneratePolygon("polygon has zero area")
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return len(self.vertices)

    def translated(self, t: PointLike) -> "Polygon":
        tp = as_point(t)
        return Polygon(self.vertices + np.array([tp.x, tp.y]))

    def scaled(self, s: float, about: Optional[PointLike] = None) -> "Polygon":
        o = np.zeros(2) if about is None else as_point(about).as_array()
        return Polygon((self.vertices - o) * float(s) + o)

    def rotated(self, angle: float, about: Optional[PointLike] = None) -> "Polygon":
        """Rotate by ``angle`` radians (clockwise on screen, see module notes)."""
        o = np.zeros(2) if about is None else as_point(about).as_array()
        c, s = np.cos(angle), np.sin(angle)
        rel = self.vertices - o
        out = np.stack([rel[:, 0] * c - rel[:, 1] * s, rel[:, 0] * s + rel[:, 1] * c], axis=1)
        return Polygon(out + o)

    def reversed(self) -> "Polygon":
        return Polygon(self.vertices[::-1])


@dataclass(frozen=True, eq=False)
class RasterMask:
    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValueError(f"mask dimensions must be >= 1, got {self.width}x{self.height}")
        b = np.asarray(self.bits, dtype=bool)
        if b.size != int(self.width) * int(self.height):
            raise DimensionMismatch(
                f"bits length {b.size} does not match {self.width}x{self.height}"
            )
        b = b.reshape(int(self.height), int(self.width)).copy()
        b.flags.writeable = False
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "bits", b)

    def count(self) -> int:
        return int(self.bits.sum())

    @classmethod
    def empty(cls, width: int, height: int) -> "RasterMask":
        return cls(width, height, np.zeros((height, width), dtype=bool))


def _ring_area(vertices: np.ndarray) -> float:
    v = vertices - vertices[0]
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def signed_area(p: Polygon) -> float:
    return _ring_area(p.vertices)


def polygon_area(p: Polygon) -> float:
    return abs(signed_area(p))


def polygon_perimeter(p: Polygon) -> float:
    d = np.roll(p.vertices, -1, axis=0) - p.vertices
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def polygon_bbox(p: Polygon) -> BBox:
    lo = p.vertices.min(axis=0)
    hi = p.vertices.max(axis=0)
    return BBox(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def mass_center(p: Polygon) -> Point2:
    """Area-weighted centroid of the ring."""
    origin = p.vertices[0]
    v = p.vertices - origin
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * float(cross.sum())
    if abs(a) < AREA_EPS:
        raise DegeneratePolygon(f"polygon area {a:.3g} is below {AREA_EPS}")
    cx = float(((x + xn) * cross).sum()) / (6.0 * a)
    cy = float(((y + yn) * cross).sum()) / (6.0 * a)
    return Point2(cx + origin[0], cy + origin[1])


def box_center(p: Polygon) -> Point2:
    return polygon_bbox(p).center()


def points_inside(p: Polygon, pts) -> np.ndarray:
    """Even-odd containment for an array of points (Kx2); same rule as rasterize."""
    q = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    a = p.vertices
    b = np.roll(a, -1, axis=0)
    px = q[:, 0:1]
    py = q[:, 1:2]
    ay, by = a[None, :, 1], b[None, :, 1]
    straddle = (ay > py) != (by > py)
    dy = np.where(by == ay, 1.0, by - ay)
    x_cross = a[None, :, 0] + (py - ay) * (b[None, :, 0] - a[None, :, 0]) / dy
    hits = straddle & (px < x_cross)
    return (hits.sum(axis=1) % 2) == 1


def contains(p: Polygon, pt: PointLike) -> bool:
    q = as_point(pt)
    return bool(points_inside(p, [[q.x, q.y]])[0])


def rasterize(p: Polygon, width: int, height: int) -> RasterMask:
    """Scanline even-odd fill at pixel centers."""
    width = int(width)
    height = int(height)
    if width < 1 or height < 1:
        raise ValueError(f"raster dimensions must be >= 1, got {width}x{height}")
    if polygon_area(p) < AREA_EPS:
        raise DegeneratePolygon("cannot rasterize a zero-area polygon")

    a = p.vertices
    b = np.roll(a, -1, axis=0)
    rows = np.arange(height, dtype=np.float64)[:, None] + 0.5
    ay, by = a[None, :, 1], b[None, :, 1]
    straddle = (ay > rows) != (by > rows)
    if not straddle.any():
        return RasterMask.empty(width, height)

    r_idx, e_idx = np.nonzero(straddle)
    y = rows[r_idx, 0]
    ax, ayy = a[e_idx, 0], a[e_idx, 1]
    bx, byy = b[e_idx, 0], b[e_idx, 1]
    x_cross = ax + (y - ayy) * (bx - ax) / (byy - ayy)
    # First column whose center lies at or right of the crossing.
    k = np.clip(np.ceil(x_cross - 0.5), 0, width).astype(np.int64)

    acc = np.zeros((height, width + 1), dtype=np.int32)
    np.add.at(acc, (r_idx, k), 1)
    inside = (np.cumsum(acc[:, :width], axis=1) & 1).astype(bool)
    return RasterMask(width, height, inside)


def mask_iou(a: RasterMask, b: RasterMask) -> float:
    if a.width != b.width or a.height != b.height:
        raise DimensionMismatch(f"{a.width}x{a.height} vs {b.width}x{b.height}")
    union = int(np.count_nonzero(a.bits | b.bits))
    if union == 0:
        # Both empty: the two "predict nothing" masks agree.
        return 1.0
    inter = int(np.count_nonzero(a.bits & b.bits))
    return inter / union


def _component_outline(component: np.ndarray) -> Optional[np.ndarray]:
    padded = np.pad(component, 1).astype(np.float64)
    contours = measure.find_contours(padded, 0.5, fully_connected="low")
    best = None
    best_area = 0.0
    for c in contours:
        if len(c) < 4:
            continue
        ring = c[:-1] if np.allclose(c[0], c[-1]) else c
        # (row, col) in the padded array -> image (x, y) of pixel-center lattice
        xy = np.stack([ring[:, 1] - 0.5, ring[:, 0] - 0.5], axis=1)
        x, y = xy[:, 0], xy[:, 1]
        area = 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
        if abs(area) > abs(best_area):
            best, best_area = xy, area
    if best is None:
        return None
    return best if best_area > 0 else best[::-1]


def extract_contour(m: RasterMask) -> List[Polygon]:
    """Outer boundary of every 4-connected component, traced by marching squares.

    The iso-line runs halfway between set and unset pixel centers, so a single
    pixel yields a 4-vertex diamond around its center. Holes are not reported.
    """
    if not m.bits.any():
        raise EmptyMask("cannot extract a contour from an empty mask")
    n_labels, labels = cv2.connectedComponents(m.bits.astype(np.uint8), connectivity=4)
    out: List[Polygon] = []
    for k in range(1, n_labels):
        ring = _component_outline(labels == k)
        if ring is not None and len(ring) >= 3:
            out.append(Polygon(ring))
    return out

