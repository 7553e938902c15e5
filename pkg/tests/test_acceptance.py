"""
End-to-end checks at full corpus and trial sizes:
 - encode/decode upper bound on the 200-shape mixed corpus (seed 42)
 - loss identity, gradient and descent behaviour on thousands of random ray pairs
 - centerness, center sampling and NMS against independent references
 - byte-identical CLI output on repeat runs
"""

import json

import numpy as np
import pytest

import main as cli
from polarkit import EPSILON, crash_reporter
from polarkit.codec import PolarMask, decode, encode, upper_bound_sweep
from polarkit.commands import run_losscheck
from polarkit.config import Settings
from polarkit.geometry import BBox, Point2, Polygon, mask_iou, mass_center, rasterize
from polarkit.loss import RayPair, polar_iou, polar_iou_loss, squared_polar_iou
from polarkit.postprocess import nms
from polarkit.scoring import CenterSampleConfig, SoftVariant, center_samples, polar_centerness, soft_polar_centerness
from polarkit.synth import synth_corpus

from test_codec import farthest_hits
from test_loss import finite_difference_grad, smooth_profile, tie_free_pair
from test_postprocess import random_detections, reference_nms


def jittered_star(rng, center, radius, vertices=17, wobble=0.35):
    phi = (np.arange(vertices) + rng.uniform(-0.3, 0.3, size=vertices)) * (2.0 * np.pi / vertices)
    r = radius * (1.0 + wobble * rng.uniform(-1.0, 1.0, size=vertices))
    return Polygon(np.stack([center[0] + r * np.cos(phi), center[1] + r * np.sin(phi)], axis=1))


@pytest.fixture(scope="module")
def mixed_corpus():
    return synth_corpus("mixed", 200, 42)


@pytest.fixture(scope="module")
def mixed_rows(mixed_corpus):
    rows = upper_bound_sweep(mixed_corpus, [18, 36, 72, 120], "mass")
    return {r.n_rays: r.mean_iou for r in rows}


def test_upper_bound_trend(mixed_rows):
    m = mixed_rows
    assert m[18] < m[36] <= m[72] <= m[120]
    assert m[120] - m[72] < 0.5 * (m[36] - m[18])


def test_upper_bound_is_almost_perfect(mixed_corpus):
    circles_and_convex = mixed_corpus[:100]
    (row,) = upper_bound_sweep(circles_and_convex, [72], "mass")
    assert row.mean_iou >= 0.90
    (row,) = upper_bound_sweep(mixed_corpus[:50], [72], "mass")
    assert row.mean_iou >= 0.97


def test_mass_center_beats_box_center_on_crescents(mixed_corpus):
    crescents = mixed_corpus[150:]
    (mass,) = upper_bound_sweep(crescents, [36], "mass")
    (box,) = upper_bound_sweep(crescents, [36], "box")
    assert mass.mean_iou >= box.mean_iou + 0.02


def test_loss_identity_on_random_pairs():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(10_000):
        n = int(rng.integers(4, 73))
        t = rng.uniform(0.5, 200.0, size=n)
        rp = RayPair(t, t * np.exp(rng.uniform(-1.0, 1.0, size=n)))
        worst = max(worst, abs(polar_iou_loss(rp).value + np.log(polar_iou(rp))))
    assert worst <= 1e-12


def test_gradient_on_random_pairs():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        rp = tie_free_pair(rng, n=int(rng.integers(4, 37)))
        analytic = polar_iou_loss(rp).grad
        numeric = finite_difference_grad(rp)
        assert np.all(np.abs(numeric - analytic) <= 1e-5 * np.abs(analytic))


def test_squared_polar_iou_converges_to_mask_iou():
    rng = np.random.default_rng(6)
    center = (256.0, 256.0)
    close = 0
    for _ in range(100):
        a = smooth_profile(rng, 720, rng.uniform(50.0, 120.0))
        b = smooth_profile(rng, 720, rng.uniform(50.0, 120.0))
        ma = rasterize(decode(PolarMask(center, a)), 512, 512)
        mb = rasterize(decode(PolarMask(center, b)), 512, 512)
        close += abs(squared_polar_iou(RayPair(a, b)) - mask_iou(ma, mb)) <= 0.02
    assert close >= 95


def test_polar_iou_loss_beats_smooth_l1_in_descent():
    s = Settings()
    result = run_losscheck(
        n=s.losscheck_n,
        trials=s.losscheck_trials,
        steps=s.losscheck_steps,
        lr=s.losscheck_lr,
        seed=s.seed,
        beta=s.smooth_l1_beta,
        alphas=s.smooth_l1_alphas,
    )
    ok = result.successes()
    assert ok["polar_iou"] == s.losscheck_trials == 50
    assert ok["smooth_l1_a1.00"] < ok["polar_iou"]


def test_encoder_matches_intersection_oracle():
    rng = np.random.default_rng(8)
    for _ in range(100):
        p = jittered_star(rng, (100.0, 100.0), float(rng.uniform(10.0, 60.0)))
        c = mass_center(p)
        pm = encode(p, c, 36)
        expected = farthest_hits(p, (c.x, c.y), 36)
        assert np.abs(pm.rays - expected).max() <= 0.5

    far = Polygon([(500, 500), (504, 500), (504, 504), (500, 504)])
    pm = encode(far, (0.0, 0.0), 72)
    assert pm.rays[36] == EPSILON


def test_centerness_properties():
    rng = np.random.default_rng(9)
    for _ in range(10_000):
        n = 4 * int(rng.integers(1, 19))
        r = rng.uniform(1e-3, 500.0, size=n)
        c = 2.0 ** int(rng.integers(-20, 21))
        assert 0.0 < polar_centerness(r) <= 1.0
        assert polar_centerness(r * c) == polar_centerness(r)
        for v in SoftVariant:
            score = soft_polar_centerness(r, v)
            assert 0.0 < score <= 1.0
            assert soft_polar_centerness(r * c, v) == score
    flat = np.full(36, 7.5)
    assert polar_centerness(flat) == 1.0
    assert all(soft_polar_centerness(flat, v) == 1.0 for v in SoftVariant)


def test_center_sample_counts():
    rng = np.random.default_rng(10)
    cfg = CenterSampleConfig()
    size = 8192
    for _ in range(1000):
        stride = int(rng.choice(cfg.strides))
        mc = Point2(*rng.uniform(4 * stride, size - 4 * stride, size=2))
        box = BBox(mc.x - 3 * stride, mc.y - 3 * stride, mc.x + 3 * stride, mc.y + 3 * stride)
        assert 9 <= len(center_samples(mc, box, stride, cfg, size, size)) <= 16

        half = 0.1 * stride
        tiny = BBox(mc.x - half, mc.y - half, mc.x + half, mc.y + half)
        assert len(center_samples(mc, tiny, stride, cfg, size, size)) == 1


def test_nms_matches_reference_on_many_batches():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        dets = random_detections(rng, 200)
        assert nms(dets, 0.5) == reference_nms(dets, 0.5)


def test_cli_output_is_byte_identical(tmp_path, monkeypatch):
    monkeypatch.setenv("POLARKIT_HOME", str(tmp_path / "home"))
    monkeypatch.setattr(crash_reporter, "install", lambda argv=None, log_path=None: tmp_path / "crash.log")
    dets = tmp_path / "dets.json"
    doc = [
        {
            "center": [float(d.mask.center.x), float(d.mask.center.y)],
            "rays": [float(v) for v in d.mask.rays],
            "score": d.score,
            "class_id": d.class_id,
        }
        for d in random_detections(np.random.default_rng(12), 40)
    ]
    dets.write_text(json.dumps(doc), encoding="utf-8")
    runs = {
        "sweep": ["sweep", "--corpus", "mixed", "--count", 20, "--seed", 3, "--center", "both"],
        "losscheck": ["losscheck", "--trials", 4, "--steps", 50, "--seed", 3],
        "pipeline": ["pipeline", dets],
        "synth": ["synth", "--kind", "mixed", "--count", 12, "--seed", 3],
    }
    for name, argv in runs.items():
        outputs = []
        for k in range(2):
            out = tmp_path / f"{name}-{k}.out"
            assert cli.main([str(a) for a in argv] + ["--out", str(out)]) == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1], name
