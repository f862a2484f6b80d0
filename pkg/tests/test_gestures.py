import json

import numpy as np
import pytest

from touchproto import gestures as ges


@pytest.mark.parametrize("label", ges.GESTURE_CLASSES)
def test_generator_basic_contract(label):
    rng = np.random.default_rng(0)
    for _ in range(50):
        g = ges.generate_gesture(label, rng, noise_sigma=0.0)
        g.validate()
        assert 12 <= len(g.times) <= 40
        assert np.all(np.diff(g.times) > 0)


def test_translation_keeps_finger_offset_constant():
    rng = np.random.default_rng(1)
    for _ in range(200):
        g = ges.generate_gesture("translation", rng, noise_sigma=0.0)
        gaps = g.fingers[:, 2:4] - g.fingers[:, 0:2]
        assert np.abs(gaps - gaps[0]).max() < 1e-12


def test_rotation_keeps_finger_distance_constant():
    rng = np.random.default_rng(2)
    for _ in range(200):
        g = ges.generate_gesture("rotation", rng, noise_sigma=0.0)
        d = np.linalg.norm(g.fingers[:, 2:4] - g.fingers[:, 0:2], axis=1)
        np.testing.assert_allclose(d, d[0], atol=1e-9)


def test_pinch_distance_strictly_monotone():
    rng = np.random.default_rng(3)
    for _ in range(200):
        g = ges.generate_gesture("pinch", rng, noise_sigma=0.0)
        d = np.linalg.norm(g.fingers[:, 2:4] - g.fingers[:, 0:2], axis=1)
        diffs = np.diff(d)
        assert np.all(diffs > 0) or np.all(diffs < 0)


def test_generator_class_properties_bulk():
    # the three class invariants over a large sample
    rng = np.random.default_rng(4)
    for _ in range(1000):
        label = ges.GESTURE_CLASSES[rng.integers(3)]
        g = ges.generate_gesture(label, rng, noise_sigma=0.0)
        assert g.fingers.min() >= 0.0 and g.fingers.max() <= 1.0


class TestResample:
    def test_straight_constant_speed_gives_equal_spacing(self):
        n = 20
        t = np.linspace(0, 1, n)
        f1 = np.stack([0.1 + 0.5 * t, np.full(n, 0.4)], axis=1)
        f2 = f1 + np.array([0.0, 0.2])
        raw = ges.RawGesture("g", "translation", t, np.concatenate([f1, f2], axis=1))
        out = ges.resample_dynamic(raw, 10)
        assert out.shape == (10, 4)
        steps = np.diff(out[:, 0])
        np.testing.assert_allclose(steps, steps[0], atol=1e-12)

    def test_uniform_input_of_same_length_is_unchanged(self):
        n = 10
        t = np.linspace(0, 1, n)
        f1 = np.stack([np.linspace(0.1, 0.9, n), np.full(n, 0.5)], axis=1)
        f2 = f1 + np.array([0.0, 0.1])
        raw = ges.RawGesture("g", "translation", t, np.concatenate([f1, f2], axis=1))
        out = ges.resample_dynamic(raw, n)
        np.testing.assert_allclose(out, raw.fingers, atol=1e-12)

    def test_corner_lands_on_arc_length_midpoint(self):
        # one finger walks (0,0)->(1,0)->(1,1), the other is static: with N=3
        # the middle sample sits exactly on the corner
        f1 = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
        f2 = np.full((3, 2), 0.5)
        raw = ges.RawGesture("g", "translation", np.array([0.0, 1.0, 2.0]),
                             np.concatenate([f1, f2], axis=1))
        out = ges.resample_dynamic(raw, 3)
        np.testing.assert_allclose(out[:, 0:2], [[0, 0], [1, 0], [1, 1]], atol=1e-12)
        np.testing.assert_allclose(out[:, 2:4], f2, atol=1e-12)

    def test_endpoints_preserved_exactly(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            g = ges.generate_gesture("rotation", rng)
            out = ges.resample_dynamic(g, 10)
            np.testing.assert_array_equal(out[0], g.fingers[0])
            np.testing.assert_array_equal(out[-1], g.fingers[-1])

    def test_output_points_lie_on_original_polyline(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            g = ges.generate_gesture("rotation", rng, noise_sigma=0.0)
            out = ges.resample_dynamic(g, 10)
            for finger in (0, 1):
                poly = g.fingers[:, 2 * finger:2 * finger + 2]
                for p in out[:, 2 * finger:2 * finger + 2]:
                    # distance from p to the nearest polyline segment
                    best = min(_seg_dist(p, poly[i], poly[i + 1])
                               for i in range(len(poly) - 1))
                    assert best < 1e-9

    def test_idempotent_for_straight_path_gestures(self):
        # piecewise-collinear paths: chord equals arc, so re-resampling is exact
        rng = np.random.default_rng(7)
        for label in ("translation", "pinch"):
            for _ in range(50):
                g = ges.generate_gesture(label, rng, noise_sigma=0.0)
                once = ges.resample_dynamic(g, 10)
                twice = ges.resample_dynamic(ges.to_raw(once), 10)
                np.testing.assert_allclose(twice, once, atol=1e-9)

    def test_resample_deterministic(self):
        rng = np.random.default_rng(8)
        g = ges.generate_gesture("rotation", rng)
        a = ges.resample_dynamic(g, 10)
        b = ges.resample_dynamic(g, 10)
        np.testing.assert_array_equal(a, b)

    def test_zero_motion_gesture_rejected(self):
        f = np.tile([0.3, 0.3, 0.6, 0.6], (5, 1))
        raw = ges.RawGesture("g", "translation", np.linspace(0, 1, 5), f)
        with pytest.raises(ges.DegenerateGestureError):
            ges.resample_dynamic(raw, 10)

    def test_too_short_target_rejected(self):
        rng = np.random.default_rng(9)
        g = ges.generate_gesture("pinch", rng)
        with pytest.raises(ValueError):
            ges.resample_dynamic(g, 1)


def _seg_dist(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return float(np.linalg.norm(p - a))
    t = np.clip((p - a) @ ab / denom, 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


class TestCorpusIO:
    def test_round_trip_lossless(self, tmp_path):
        rng = np.random.default_rng(10)
        corpus = ges.generate_corpus(5, rng)
        path = tmp_path / "corpus.jsonl"
        ges.save_corpus(corpus, path)
        loaded = ges.load_corpus(path)
        assert len(loaded) == len(corpus)
        for a, b in zip(corpus, loaded):
            assert a.id == b.id and a.label == b.label
            np.testing.assert_array_equal(a.times, b.times)
            np.testing.assert_array_equal(a.fingers, b.fingers)

    def test_out_of_range_coordinate_names_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = {"id": "a", "class": "pinch",
                "frames": [[0.0, 0.1, 0.1, 0.9, 0.9], [0.1, 0.2, 0.2, 0.8, 0.8]]}
        bad = {"id": "b", "class": "pinch",
               "frames": [[0.0, 0.1, 0.1, 0.9, 0.9], [0.1, 1.2, 0.2, 0.8, 0.8]]}
        path.write_text(json.dumps(good) + "\n" + json.dumps(bad) + "\n")
        with pytest.raises(ges.CorpusFormatError, match="line 2.*out of range"):
            ges.load_corpus(path)

    def test_non_increasing_timestamps_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        rec = {"id": "a", "class": "pinch",
               "frames": [[0.2, 0.1, 0.1, 0.9, 0.9], [0.1, 0.2, 0.2, 0.8, 0.8]]}
        path.write_text(json.dumps(rec) + "\n")
        with pytest.raises(ges.CorpusFormatError, match="timestamps"):
            ges.load_corpus(path)

    def test_missing_field_and_bad_json_name_the_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a", "frames": []}\n')
        with pytest.raises(ges.CorpusFormatError, match="line 1"):
            ges.load_corpus(path)
        path.write_text("not json\n")
        with pytest.raises(ges.CorpusFormatError, match="line 1.*JSON"):
            ges.load_corpus(path)

    def test_unknown_class_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        rec = {"id": "a", "class": "swipe",
               "frames": [[0.0, 0.1, 0.1, 0.9, 0.9], [0.1, 0.2, 0.2, 0.8, 0.8]]}
        path.write_text(json.dumps(rec) + "\n")
        with pytest.raises(ges.CorpusFormatError, match="class"):
            ges.load_corpus(path)
