import json
from collections import Counter

import numpy as np
import pytest

from polarkit.annotations import (
    SWEEP_HEADER,
    SweepReport,
    load_annotations,
    read_sweep_csv,
    write_annotations,
    write_sweep_csv,
)
from polarkit.codec import UpperBoundRow
from polarkit.errors import AnnotationError, MalformedJson, SchemaError
from polarkit.geometry import Polygon, polygon_area
from polarkit.synth import regular_polygon

TRIANGLE = [10.0, 10.0, 30.0, 10.0, 10.0, 30.0]


def write_json(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def coco(images, annotations):
    return {"images": images, "annotations": annotations}


def ann(image_id, segmentation, category_id=1, **extra):
    out = {"image_id": image_id, "category_id": category_id, "segmentation": segmentation}
    out.update(extra)
    return out


def twenty_instance_doc(seed=0):
    rng = np.random.default_rng(seed)
    images = [{"id": i, "width": 200, "height": 200} for i in (1, 2, 3)]
    anns = []
    for k in range(20):
        parts = []
        for _ in range(1 + k % 3):
            m = int(rng.integers(3, 12))
            phi = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=m))
            r = rng.uniform(10.0, 40.0, size=m)
            c = rng.uniform(50.0, 150.0, size=2)
            ring = np.stack([c[0] + r * np.cos(phi), c[1] + r * np.sin(phi)], axis=1)
            parts.append([round(float(v), 3) for v in ring.reshape(-1)])
        anns.append(ann(1 + k % 3, parts, category_id=1 + k % 2))
    return coco(images, anns)


def reference_load(doc):
    """Minimal independent reading of a clean polygon file."""
    per_image = Counter()
    vertices = 0
    for a in doc["annotations"]:
        per_image[a["image_id"]] += 1
        vertices += sum(len(flat) // 2 for flat in a["segmentation"])
    return sum(per_image.values()), dict(per_image), vertices


# ---------------------------------------------------------------- load

def test_single_triangle(tmp_path):
    path = write_json(tmp_path / "a.json", coco([{"id": 1, "width": 64, "height": 64}], [ann(1, [TRIANGLE])]))
    aset = load_annotations(path)
    assert len(aset.instances) == 1
    assert len(aset.instances[0].polygons[0]) == 3
    assert aset.skipped == 0
    assert aset.images[0].width == 64


def test_short_ring_is_skipped(tmp_path):
    doc = coco([{"id": 1, "width": 64, "height": 64}], [ann(1, [[0, 0, 10, 10]]), ann(1, [TRIANGLE])])
    aset = load_annotations(write_json(tmp_path / "a.json", doc))
    assert len(aset.instances) == 1
    assert aset.skipped == 1


def test_odd_length_and_degenerate_parts_are_dropped(tmp_path):
    doc = coco(
        [{"id": 1, "width": 64, "height": 64}],
        [ann(1, [TRIANGLE, [0, 0, 5, 5, 10]]), ann(1, [[0, 0, 1, 1, 2, 2]])],
    )
    aset = load_annotations(write_json(tmp_path / "a.json", doc))
    assert len(aset.instances) == 1
    assert len(aset.instances[0].polygons) == 1
    assert aset.parts_dropped == 2
    assert aset.skipped == 1


def test_rle_and_crowd_are_skipped(tmp_path):
    doc = coco(
        [{"id": 1, "width": 64, "height": 64}],
        [
            ann(1, {"counts": [0, 10, 54], "size": [8, 8]}),
            ann(1, [TRIANGLE], iscrowd=1),
            ann(1, [TRIANGLE], iscrowd=0),
        ],
    )
    aset = load_annotations(write_json(tmp_path / "a.json", doc))
    assert len(aset.instances) == 1
    assert aset.skipped == 2


def test_unknown_image_is_skipped(tmp_path):
    doc = coco([{"id": 1, "width": 64, "height": 64}], [ann(7, [TRIANGLE])])
    aset = load_annotations(write_json(tmp_path / "a.json", doc))
    assert aset.instances == []
    assert aset.skipped == 1


def test_twenty_instances_match_reference_loader(tmp_path):
    doc = twenty_instance_doc()
    aset = load_annotations(write_json(tmp_path / "twenty.json", doc))
    count, per_image, vertices = reference_load(doc)
    assert len(aset.instances) == count == 20
    assert {k: len(v) for k, v in aset.by_image().items()} == per_image
    assert aset.vertex_count() == vertices
    assert aset.skipped == 0


def test_largest_polygon_per_instance(tmp_path):
    small = regular_polygon((20.0, 20.0), 5.0, vertices=12)
    big = regular_polygon((60.0, 60.0), 15.0, vertices=12)
    doc = coco(
        [{"id": 1, "width": 100, "height": 100}],
        [ann(1, [small.vertices.reshape(-1).tolist(), big.vertices.reshape(-1).tolist()])],
    )
    aset = load_annotations(write_json(tmp_path / "a.json", doc))
    (largest,) = aset.largest_polygons()
    assert polygon_area(largest) == pytest.approx(polygon_area(big))


# ---------------------------------------------------------------- load errors

def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_annotations(tmp_path / "nope.json")


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"images": [\n  {"id": 1,,}\n]}', encoding="utf-8")
    with pytest.raises(MalformedJson) as info:
        load_annotations(path)
    assert info.value.line == 2


def test_non_utf8_is_malformed(tmp_path):
    path = tmp_path / "latin.json"
    path.write_bytes(b'{"images": [], "annotations": [], "x": "\xe9"}')
    with pytest.raises(MalformedJson):
        load_annotations(path)


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"annotations": []}, "images"),
        ({"images": []}, "annotations"),
        ({"images": [{"id": 1, "width": 5}], "annotations": []}, "images[0].height"),
        ({"images": [], "annotations": [{"image_id": 1, "category_id": 1}]}, "annotations[0].segmentation"),
        ({"images": [{"id": "x", "width": 5, "height": 5}], "annotations": []}, "images[0].id"),
        ({"images": {}, "annotations": []}, "images"),
        ({"images": [{"id": float("inf"), "width": 5, "height": 5}], "annotations": []}, "images[0].id"),
        ({"images": [], "annotations": [{"image_id": 1, "category_id": float("nan")}]}, "annotations[0].category_id"),
    ],
)
def test_schema_errors_name_the_field(tmp_path, doc, field):
    with pytest.raises(SchemaError) as info:
        load_annotations(write_json(tmp_path / "s.json", doc))
    assert info.value.field == field


@pytest.mark.parametrize(
    "text",
    [
        "",
        "[]",
        "null",
        "42",
        '{"images": null, "annotations": []}',
        '{"images": [1], "annotations": []}',
        "{",
        '{"images": [{"id": 1e999, "width": 8, "height": 8}], "annotations": []}',
        '{"images": [{"id": -1e999, "width": 8, "height": 8}], "annotations": []}',
        '{"images": [{"id": NaN, "width": 8, "height": 8}], "annotations": []}',
        '{"images": [], "annotations": [{"image_id": Infinity, "category_id": 1, "segmentation": []}]}',
        '{"images": [{"id": 1, "width": 8.5, "height": 8}], "annotations": []}',
    ],
)
def test_adversarial_inputs_raise_typed_errors(tmp_path, text):
    path = tmp_path / "adv.json"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(AnnotationError):
        load_annotations(path)


# ---------------------------------------------------------------- write

def test_write_then_load(tmp_path):
    polys = [regular_polygon((50.0, 50.0), 20.0, vertices=16), Polygon([(1, 1), (9, 1), (5, 7)])]
    path = write_annotations(tmp_path / "out" / "corpus.json", polys, (128, 96))
    aset = load_annotations(path)
    assert [(i.id, i.width, i.height) for i in aset.images] == [(1, 128, 96)]
    assert [len(inst.polygons[0]) for inst in aset.instances] == [16, 3]
    assert np.allclose(aset.instances[0].polygons[0].vertices, polys[0].vertices, atol=5e-5)


def test_written_json_is_stable(tmp_path):
    polys = [regular_polygon((50.0, 50.0), 20.0, vertices=8)]
    a = write_annotations(tmp_path / "a.json", polys, (64, 64)).read_bytes()
    b = write_annotations(tmp_path / "b.json", polys, (64, 64)).read_bytes()
    assert a == b
    assert a.endswith(b"\n") and b"\r\n" not in a


# ---------------------------------------------------------------- sweep CSV

def test_sweep_csv_round_trip(tmp_path):
    rows = [
        UpperBoundRow(18, "mass", 0.912345, 200, 3),
        UpperBoundRow(36, "mass", 0.95, 200, 3),
        UpperBoundRow(36, "box", 0.5, 197, 3),
    ]
    report = SweepReport(rows, "corpus", 3)
    path = write_sweep_csv(tmp_path / "corpus.csv", report)
    text = path.read_bytes().decode("utf-8")
    assert text.splitlines()[0] == ",".join(SWEEP_HEADER)
    assert "\r" not in text
    back = read_sweep_csv(path)
    assert back.rows == rows
    assert back.corpus_name == "corpus"
    assert back.skipped == 3


def test_sweep_csv_uses_six_significant_digits(tmp_path):
    report = SweepReport([UpperBoundRow(72, "mass", 0.98765432, 10)], "c")
    text = write_sweep_csv(tmp_path / "c.csv", report).read_text(encoding="utf-8")
    assert text.splitlines()[1] == "72,mass,0.987654,10,0"


def test_sweep_csv_header_is_checked(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        read_sweep_csv(path)


@pytest.mark.parametrize(
    "body",
    [
        "36,mass,0.9\n",
        "36,mass,high,10,0\n",
        "x,mass,0.9,10,0\n",
        "36,mass,0.9,10,0,extra\n",
        "36,mass,0.9,0,0\n",
    ],
)
def test_sweep_csv_bad_rows_are_schema_errors(tmp_path, body):
    path = tmp_path / "x.csv"
    path.write_text(",".join(SWEEP_HEADER) + "\n36,mass,0.95,10,0\n" + body, encoding="utf-8")
    with pytest.raises(SchemaError) as info:
        read_sweep_csv(path)
    assert info.value.field == "rows[1]"
