import numpy as np
import pytest

import mixinterp as mi


def test_energy_pg_uniform_map_is_box_fraction():
    assert mi.energy_pg(np.ones((8, 8)), [(0, 0, 4, 4)]) == pytest.approx(0.25, abs=1e-6)


def test_ehr_hand_case():
    m = np.zeros((4, 4), dtype=np.float32)
    m[1, 1] = m[1, 2] = 0.9
    m[3, 0] = m[3, 3] = 0.4
    r = mi.ehr(m, [(1, 1, 3, 2)], thresholds=[0.25, 0.5, 0.75])
    assert r["score"] == pytest.approx(0.7875, abs=1e-6)
    assert r["ratios"] == pytest.approx([0.45, 0.9, 0.9])


def test_wsol_box():
    m = np.zeros((8, 8), dtype=np.float32)
    m[1:5, 2:6] = 1.0
    iou, box = mi.wsol_iou(m, [(2, 1, 6, 5)])
    assert iou == 1.0
    assert box == (2, 1, 6, 5)
    iou, box = mi.wsol_iou(np.zeros((8, 8)), [(2, 1, 6, 5)])
    assert iou == 0.0 and box is None


def test_deletion_curve_with_python_scorer():
    img = np.zeros((1, 4, 4), dtype=np.float32)
    for y in range(4):
        for x in range(4):
            img[0, y, x] = (y // 2) * 2 + x // 2 + 1
    attr = np.kron(np.array([[0.2, 0.9], [0.1, 0.5]], dtype=np.float32), np.ones((2, 2), dtype=np.float32))

    def score(batch):
        return batch.reshape(len(batch), -1).sum(axis=1) / 64.0

    c = mi.perturbation_curve(score, img, attr, mode="deletion", ordering="lerf", cell_px=2)
    assert c["x"] == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert c["y"] == [1.0, 28 / 40, 24 / 40, 8 / 40, 0.0]
    assert mi.trapezoid_auc(c["x"], c["y"]) == pytest.approx(0.25 * (0.85 + 0.65 + 0.4 + 0.1))


def test_quantile_and_cut_box():
    v = np.arange(10000, dtype=np.float32) / 10000
    assert abs(mi.top_quantile_threshold(v) - 0.99) < 0.005
    box, w = mi.cut_box(0.75, 32, 32, 16, 16)
    assert box == (8, 8, 24, 24)
    assert w == 0.75


def test_scenes_and_config():
    images, labels, boxes = mi.generate_scenes(5, seed=3, image_size=16, num_classes=4)
    assert images.shape == (5, 3, 16, 16)
    assert len(labels) == len(boxes) == 5
    again, _, _ = mi.generate_scenes(5, seed=3, image_size=16, num_classes=4)
    assert np.array_equal(images, again)
    assert "faith.n_orders" in mi.config_keys()
    assert mi.config_hash("faith.n_orders = 5") == mi.config_hash("")
    assert mi.config_hash("faith.n_orders = 3") != mi.config_hash("")
    with pytest.raises(mi.ConfigError):
        mi.config_hash("no.such.key = 1")
    with pytest.raises(mi.MissingArtifact):
        mi.read_records("/nonexistent/records.jsonl")


def test_trained_checkpoint(tmp_path):
    import os
    cache = os.environ.get("MIXINTERP_TEST_CACHE")
    path = os.path.join(cache or "", "small_baseline_v1.ckpt")
    if not cache or not os.path.exists(path):
        pytest.skip("trained fixture not built yet")
    ck = mi.load_checkpoint(path)
    assert ck.augmentation == "baseline"
    images, labels, _ = mi.generate_scenes(4, seed=11, image_size=16, num_classes=4)
    p = np.asarray(ck.predict_proba(images))
    assert p.shape == (4, 4)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-6)
    cam = ck.gradcam(images[0], labels[0])
    assert cam.shape == (16, 16)
    assert cam.min() >= 0.0 and cam.max() <= 1.0
    g = ck.input_gradient(images[0], labels[0])
    assert g.shape == (3, 16, 16)
