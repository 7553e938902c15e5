import numpy as np
import pytest

from polarkit.geometry import box_center, contains, mass_center, polygon_area, polygon_bbox
from polarkit.synth import CANVAS_SIZE, KINDS, regular_polygon, star_polygon, synth_corpus


def test_same_seed_gives_identical_vertices():
    a = synth_corpus("circles", 5, 7)
    b = synth_corpus("circles", 5, 7)
    assert all(np.array_equal(p.vertices, q.vertices) for p, q in zip(a, b))


def test_different_seeds_differ():
    a = synth_corpus("stars", 3, 1)
    b = synth_corpus("stars", 3, 2)
    assert not np.array_equal(a[0].vertices, b[0].vertices)


@pytest.mark.parametrize("kind", KINDS)
def test_shapes_are_valid_and_on_canvas(kind):
    corpus = synth_corpus(kind, 250, 11)
    assert len(corpus) == 250
    for poly in corpus:
        assert polygon_area(poly) > 1.0
        box = polygon_bbox(poly)
        assert box.x_min >= 0.0 and box.y_min >= 0.0
        assert box.x_max <= CANVAS_SIZE and box.y_max <= CANVAS_SIZE


def test_circles_are_regular_90_gons():
    for poly in synth_corpus("circles", 10, 3):
        assert len(poly) == 90
        c = mass_center(poly)
        r = np.hypot(poly.vertices[:, 0] - c.x, poly.vertices[:, 1] - c.y)
        assert r.max() - r.min() < 1e-9 * r.max()


def test_convex_hulls_are_convex():
    for poly in synth_corpus("convex", 50, 5):
        v = poly.vertices
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        assert np.all(cross >= -1e-6) or np.all(cross <= 1e-6)
        assert 3 <= len(v) <= 20


def test_crescent_box_center_lies_outside():
    corpus = synth_corpus("crescents", 200, 42)
    outside = sum(not contains(p, box_center(p)) for p in corpus)
    assert outside >= 0.95 * len(corpus)
    assert all(contains(p, mass_center(p)) for p in corpus)


def test_mixed_splits_counts_in_kind_order():
    corpus = synth_corpus("mixed", 10, 0)
    assert len(corpus) == 10
    # circles first (3), then convex (3), stars (2), crescents (2)
    assert [len(p) for p in corpus[:3]] == [90, 90, 90]
    assert all(len(p) != 90 for p in corpus[3:6])


def test_bad_arguments():
    with pytest.raises(ValueError):
        synth_corpus("blobs", 3, 0)
    with pytest.raises(ValueError):
        synth_corpus("circles", 0, 0)


def test_star_and_regular_polygon_helpers():
    star = star_polygon((0.0, 0.0), 10.0, 4.0, points=5)
    assert len(star) == 10
    assert star.vertices[0] == pytest.approx([10.0, 0.0])
    assert regular_polygon((0.0, 0.0), 2.0, vertices=4).vertices[1] == pytest.approx([0.0, 2.0], abs=1e-12)
    with pytest.raises(ValueError):
        star_polygon((0.0, 0.0), 10.0, 0.0)
