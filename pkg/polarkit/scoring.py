"""Sample-quality scores for polar ray vectors and positive-sample selection around the mass center."""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence

import numpy as np

from .codec import DEFAULT_MAX_STEP, encode
from .errors import InvalidRayCount, NonPositiveRay
from .geometry import BBox, Point2, PointLike, Polygon, as_point, mass_center, polygon_bbox


class SoftVariant(str, Enum):
    MeanOfSubset = "mean"
    MaxOfSubset = "max"
    FirstOfSubset = "first"


@dataclass(frozen=True)
class CenterSampleConfig:
    strides: List[int] = field(default_factory=lambda: [8, 16, 32, 64, 128])
    radius_multiplier: float = 1.5

    def __post_init__(self):
        s = [int(v) for v in self.strides]
        if not s or any(v <= 0 for v in s) or any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError(f"strides must be positive and strictly increasing, got {self.strides}")
        if not self.radius_multiplier > 0:
            raise ValueError(f"radius_multiplier must be > 0, got {self.radius_multiplier}")
        object.__setattr__(self, "strides", s)


@dataclass(frozen=True, eq=False)
class SampleLabel:
    point: Point2
    rays: np.ndarray
    centerness: float
    soft_centerness: float


def _positive_rays(rays: Sequence[float]) -> np.ndarray:
    r = np.asarray(rays, dtype=np.float64).reshape(-1)
    if len(r) == 0:
        raise NonPositiveRay("empty ray vector")
    if not np.all(np.isfinite(r)) or np.any(r <= 0.0):
        raise NonPositiveRay("ray lengths must be finite and > 0")
    return r


def polar_centerness(rays: Sequence[float]) -> float:
    r = _positive_rays(rays)
    return float(np.sqrt(r.min() / r.max()))


def _aggregate(subset: np.ndarray, variant: SoftVariant) -> float:
    if variant is SoftVariant.MeanOfSubset:
        return float(subset.mean())
    if variant is SoftVariant.MaxOfSubset:
        return float(subset.max())
    # lowest angle index in the quadrant
    return float(subset[0])


def soft_polar_centerness(rays: Sequence[float], variant: SoftVariant = SoftVariant.MeanOfSubset) -> float:
    """Quadrant-ratio centerness.

    Rays are split in index order into four quadrants D1..D4; opposite
    quadrants are compared through F, and each ratio r is folded to
    min(r, 1/r) so the score stays in (0, 1].
    """
    r = np.asarray(rays, dtype=np.float64).reshape(-1)
    if len(r) < 4 or len(r) % 4 != 0:
        raise InvalidRayCount(f"soft centerness needs a multiple of 4 rays, got {len(r)}")
    r = _positive_rays(r)
    variant = SoftVariant(variant)
    d1, d2, d3, d4 = np.split(r, 4)
    a = _aggregate(d1, variant) / _aggregate(d3, variant)
    b = _aggregate(d2, variant) / _aggregate(d4, variant)
    return float(np.sqrt(min(a, 1.0 / a) * min(b, 1.0 / b)))


def center_samples(
    mass_center: PointLike,
    instance_bbox: BBox,
    stride: int,
    cfg: CenterSampleConfig,
    image_w: int,
    image_h: int,
) -> List[Point2]:
    """Feature-grid locations within radius_multiplier * stride of the mass center.

    Grid points sit at cell centers ((j + 0.5) * stride, (i + 0.5) * stride);
    the window is clipped to the instance bbox and to grid points lying
    inside the image. When nothing survives, the single grid point nearest
    the mass center is used; an image narrower than half a stride still
    yields its first cell.
    """
    if int(stride) not in cfg.strides:
        raise ValueError(f"stride {stride} is not one of {cfg.strides}")
    mc = as_point(mass_center)
    s = float(stride)
    reach = cfg.radius_multiplier * s
    tol = 1e-9 * s
    # grid points must lie inside the image: (j + 0.5) * s < image_w
    cols = max(1, int(np.ceil(image_w / s - 0.5)))
    rows = max(1, int(np.ceil(image_h / s - 0.5)))

    def _index_range(lo: float, hi: float, count: int):
        first = int(np.ceil((lo - tol) / s - 0.5))
        last = int(np.floor((hi + tol) / s - 0.5))
        return max(first, 0), min(last, count - 1)

    j0, j1 = _index_range(max(mc.x - reach, instance_bbox.x_min), min(mc.x + reach, instance_bbox.x_max), cols)
    i0, i1 = _index_range(max(mc.y - reach, instance_bbox.y_min), min(mc.y + reach, instance_bbox.y_max), rows)

    if j0 > j1 or i0 > i1:
        j = int(np.clip(np.floor(mc.x / s), 0, cols - 1))
        i = int(np.clip(np.floor(mc.y / s), 0, rows - 1))
        return [Point2((j + 0.5) * s, (i + 0.5) * s)]
    return [
        Point2((j + 0.5) * s, (i + 0.5) * s)
        for i in range(i0, i1 + 1)
        for j in range(j0, j1 + 1)
    ]


def sample_labels(
    contour: Polygon,
    stride: int,
    cfg: CenterSampleConfig,
    image_w: int,
    image_h: int,
    n: int,
    variant: SoftVariant = SoftVariant.MeanOfSubset,
    max_step: float = DEFAULT_MAX_STEP,
) -> List[SampleLabel]:
    """Regression and centerness targets for every positive sample of one instance."""
    points = center_samples(mass_center(contour), polygon_bbox(contour), stride, cfg, image_w, image_h)
    labels = []
    for p in points:
        pm = encode(contour, p, n, max_step=max_step)
        labels.append(
            SampleLabel(
                point=p,
                rays=pm.rays,
                centerness=polar_centerness(pm.rays),
                soft_centerness=soft_polar_centerness(pm.rays, variant),
            )
        )
    return labels
