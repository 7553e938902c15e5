"""
Test-time assembly of polar detections:
 - score filter, then top-k pre-selection (stable on ties)
 - decode every survivor and take the smallest axis-aligned box of its contour
 - greedy NMS on those boxes, highest score first, ties by input order
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .codec import PolarMask, decode
from .geometry import BBox, Polygon

DEFAULT_IOU_THRESHOLD = 0.5


@dataclass(frozen=True, eq=False)
class Detection:
    mask: PolarMask
    score: float
    class_id: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        cid = self.class_id
        if (
            isinstance(cid, bool)
            or not isinstance(cid, (int, float, np.integer, np.floating))
            or not np.isfinite(cid)
            or int(cid) != cid
            or cid < 0
        ):
            raise ValueError(f"class_id must be a non-negative integer, got {self.class_id}")
        object.__setattr__(self, "score", float(self.score))
        object.__setattr__(self, "class_id", int(self.class_id))


def min_bbox(pm: PolarMask) -> BBox:
    v = decode(pm).vertices
    lo = v.min(axis=0)
    hi = v.max(axis=0)
    return BBox(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def box_iou(a: BBox, b: BBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def _score_order(dets: Sequence[Detection]) -> np.ndarray:
    scores = np.array([d.score for d in dets], dtype=np.float64)
    # stable sort on -score keeps input order among equal scores
    return np.argsort(-scores, kind="stable")


def score_filter(dets: Sequence[Detection], threshold: float) -> List[Detection]:
    return [d for d in dets if d.score > threshold]


def top_k(dets: Sequence[Detection], k: int) -> List[Detection]:
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if not dets or k == 0:
        return []
    return [dets[i] for i in _score_order(dets)[:k]]


def nms(
    dets: Sequence[Detection],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    class_aware: bool = True,
) -> List[Detection]:
    """Greedy suppression on minimal bounding boxes; output in descending-score order."""
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1), got {iou_threshold}")
    if not dets:
        return []
    order = _score_order(dets)
    boxes = np.array([min_bbox(d.mask).as_list() for d in dets], dtype=np.float64)
    classes = np.array([d.class_id for d in dets])
    x1, y1, x2, y2 = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]
    area = (x2 - x1) * (y2 - y1)

    pick = []
    remaining = order
    while len(remaining) > 0:
        i = remaining[0]
        pick.append(i)
        rest = remaining[1:]

        w = np.maximum(0.0, np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest]))
        h = np.maximum(0.0, np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest]))
        inter = w * h
        union = area[i] + area[rest] - inter
        iou = np.where((inter > 0) & (union > 0), inter / np.where(union > 0, union, 1.0), 0.0)
        suppress = iou >= iou_threshold
        if class_aware:
            suppress &= classes[rest] == classes[i]
        remaining = rest[~suppress]
    return [dets[i] for i in pick]


def assemble(
    dets: Sequence[Detection],
    score_threshold: float,
    k: int,
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    class_aware: bool = True,
) -> List[Tuple[Detection, Polygon]]:
    """Score filter -> top-k -> NMS, returning each kept detection with its decoded contour."""
    kept = nms(top_k(score_filter(dets, score_threshold), k), iou_threshold, class_aware)
    return [(d, decode(d.mask)) for d in kept]
