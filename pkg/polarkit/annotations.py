"""
COCO-style polygon annotations in, sweep reports out.

Only polygon segmentations are read: each annotation's "segmentation" is a
list of flat [x0, y0, x1, y1, ...] arrays. Run-length encoded (crowd)
segmentations are skipped and counted, as are annotations whose polygons are
all unusable. Problems with the file as a whole raise typed errors.
"""

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .codec import UpperBoundRow
from .console import dprint
from .errors import DegeneratePolygon, MalformedJson, SchemaError
from .geometry import Polygon, polygon_area

SWEEP_HEADER = ["n_rays", "center_mode", "mean_iou", "instance_count", "skipped"]


def _dprint(*args):
    dprint("Annotations", *args)


@dataclass(frozen=True)
class ImageInfo:
    id: int
    width: int
    height: int


@dataclass(frozen=True, eq=False)
class Instance:
    image_id: int
    category_id: int
    polygons: List[Polygon]

    def largest_polygon(self) -> Polygon:
        return max(self.polygons, key=polygon_area)


@dataclass(eq=False)
class AnnotationSet:
    images: List[ImageInfo]
    instances: List[Instance]
    skipped: int = 0
    parts_dropped: int = 0

    def by_image(self) -> Dict[int, List[Instance]]:
        grouped: Dict[int, List[Instance]] = defaultdict(list)
        for inst in self.instances:
            grouped[inst.image_id].append(inst)
        return dict(grouped)

    def largest_polygons(self) -> List[Polygon]:
        """One contour per instance; the other parts of multi-polygon instances are not encoded."""
        return [inst.largest_polygon() for inst in self.instances]

    def vertex_count(self) -> int:
        return sum(len(p) for inst in self.instances for p in inst.polygons)


@dataclass(eq=False)
class SweepReport:
    rows: List[UpperBoundRow]
    corpus_name: str
    skipped: int = 0
    # polygon parts not encoded: unusable rings plus non-largest parts
    parts_skipped: int = 0


def _require(obj: Dict[str, Any], key: str, where: str) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"{where}.{key}" if where else key)
    return obj[key]


def _as_int(value: Any, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(where, f"field '{where}' must be an integer, got {value!r}")
    if isinstance(value, float) and (not math.isfinite(value) or not value.is_integer()):
        raise SchemaError(where, f"field '{where}' must be an integer, got {value!r}")
    return int(value)


def _parse_ring(flat: Any) -> Optional[Polygon]:
    if not isinstance(flat, list) or len(flat) < 6 or len(flat) % 2 != 0:
        return None
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in flat):
        return None
    pts = np.asarray(flat, dtype=np.float64).reshape(-1, 2)
    try:
        return Polygon(pts)
    except DegeneratePolygon:
        return None


def load_annotations(path: Union[str, Path]) -> AnnotationSet:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"Annotation file not found: {p}")
    try:
        text = p.read_text(encoding="utf-8")
    except UnicodeDecodeError as ex:
        raise MalformedJson(str(p), f"not UTF-8 ({ex.reason})", 1, ex.start + 1)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as ex:
        raise MalformedJson(str(p), ex.msg, ex.lineno, ex.colno)
    if not isinstance(data, dict):
        raise SchemaError("images", "top level must be an object with 'images' and 'annotations'")

    raw_images = _require(data, "images", "")
    raw_anns = _require(data, "annotations", "")
    if not isinstance(raw_images, list):
        raise SchemaError("images", "field 'images' must be an array")
    if not isinstance(raw_anns, list):
        raise SchemaError("annotations", "field 'annotations' must be an array")

    images: List[ImageInfo] = []
    for i, img in enumerate(raw_images):
        where = f"images[{i}]"
        images.append(
            ImageInfo(
                id=_as_int(_require(img, "id", where), f"{where}.id"),
                width=_as_int(_require(img, "width", where), f"{where}.width"),
                height=_as_int(_require(img, "height", where), f"{where}.height"),
            )
        )
    known = {img.id for img in images}

    instances: List[Instance] = []
    skipped = 0
    rle = 0
    parts_dropped = 0
    for i, ann in enumerate(raw_anns):
        where = f"annotations[{i}]"
        image_id = _as_int(_require(ann, "image_id", where), f"{where}.image_id")
        category_id = _as_int(_require(ann, "category_id", where), f"{where}.category_id")
        seg = _require(ann, "segmentation", where)
        if isinstance(seg, dict) or ann.get("iscrowd") == 1:
            rle += 1
            skipped += 1
            continue
        if image_id not in known:
            _dprint(f"{where}: unknown image id {image_id}; skipped")
            skipped += 1
            continue
        if not isinstance(seg, list):
            skipped += 1
            continue
        polys = [_parse_ring(flat) for flat in seg]
        good = [q for q in polys if q is not None]
        parts_dropped += len(polys) - len(good)
        if not good:
            skipped += 1
            continue
        instances.append(Instance(image_id, category_id, good))

    if rle:
        _dprint(f"skipped {rle} run-length encoded (crowd) annotation(s) in {p.name}")
    if skipped:
        _dprint(f"{p.name}: {len(instances)} instance(s) loaded, {skipped} skipped")
    return AnnotationSet(images, instances, skipped=skipped, parts_dropped=parts_dropped)


def write_annotations(
    path: Union[str, Path],
    polygons: Sequence[Polygon],
    image_size: Tuple[int, int],
    category_id: int = 1,
) -> Path:
    """Write polygons as a single-image COCO-style file readable by load_annotations."""
    w, h = image_size
    anns = []
    for k, poly in enumerate(polygons):
        flat = [round(float(v), 4) for v in poly.vertices.reshape(-1)]
        anns.append({"id": k + 1, "image_id": 1, "category_id": int(category_id), "iscrowd": 0, "segmentation": [flat]})
    doc = {
        "images": [{"id": 1, "width": int(w), "height": int(h)}],
        "annotations": anns,
        "categories": [{"id": int(category_id), "name": "shape"}],
    }
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="\n")
    return p


def format_sig(value: float) -> str:
    return f"{value:.6g}"


def write_sweep_csv(path: Union[str, Path], report: SweepReport) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for row in report.rows:
        writer.writerow([row.n_rays, row.center_mode, format_sig(row.mean_iou), row.instance_count, row.skipped])
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(buf.getvalue(), encoding="utf-8", newline="\n")
    return p


def read_sweep_csv(path: Union[str, Path], corpus_name: Optional[str] = None) -> SweepReport:
    p = Path(path)
    with p.open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != SWEEP_HEADER:
            raise SchemaError("header", f"unexpected sweep CSV header {header!r}")
        rows = []
        for k, r in enumerate(reader):
            if not r:
                continue
            try:
                if len(r) != len(SWEEP_HEADER):
                    raise ValueError(f"expected {len(SWEEP_HEADER)} fields, got {len(r)}")
                rows.append(UpperBoundRow(int(r[0]), r[1], float(r[2]), int(r[3]), int(r[4])))
            except ValueError as ex:
                raise SchemaError(f"rows[{k}]", f"{p.name}: bad sweep row {k + 1}: {ex}")
    skipped = max((r.skipped for r in rows), default=0)
    return SweepReport(rows, corpus_name if corpus_name is not None else p.stem, skipped)
