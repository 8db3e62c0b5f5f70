"""Python smoke tests over the pybind11 module.

The module is imported from the CMake build tree (DUOMIC_PY_DIR) when the
package is not installed.
"""

import os
import sys

import numpy as np
import pytest

_py_dir = os.environ.get("DUOMIC_PY_DIR")
if _py_dir:
    sys.path.insert(0, _py_dir)

try:
    import duomic as dm  # installed wheel
except ImportError:
    import _duomic as dm  # build tree


def test_class_weights_paper_ratio():
    weights = dm.compute_class_weights([102, 101, 36])
    assert weights[0] == pytest.approx(1.0)
    assert weights[2] / weights[0] == pytest.approx(2.8333, abs=5e-3)


def test_normalize_channel_endpoints():
    raw = np.array([[10.0, 110.0], [60.0, 35.0]], dtype=np.float32)
    out = dm.normalize_channel(raw)
    assert out.dtype == np.uint8
    assert out[0, 0] == 0
    assert out[0, 1] == 255
    assert out[1, 0] == 128  # 127.5 rounds half away from zero


def test_fuse_channels_factors():
    af = np.full((32, 32), 50, dtype=np.uint8)
    shg = np.full((32, 32), 100, dtype=np.uint8)
    shg[0, 0] = 200  # 1.3x -> 260 -> clamp
    fused = dm.fuse_channels(af, shg)
    assert fused.shape == (32, 32, 3)
    assert fused[1, 1, 1] == 130
    assert fused[0, 0, 1] == 255
    assert (fused[:, :, 2] == 50).all()
    assert (fused[:, :, 0] == 0).all()


def test_rotation_identity_and_determinism():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
    assert (dm.rotate(img, 0.0) == img).all()
    a = dm.augment(img, rotation_limit_deg=30.0, seed=42)
    b = dm.augment(img, rotation_limit_deg=30.0, seed=42)
    assert (a == b).all()


def test_confusion_and_metrics_golden():
    cm = dm.confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1], 2)
    assert cm.tolist() == [[1, 1], [0, 2]]
    golden = np.array([[24, 2], [1, 27]], dtype=np.int64)
    metrics = dm.classification_metrics(golden)
    assert metrics["per_class"][0]["precision"] == pytest.approx(0.960, abs=1e-3)
    assert metrics["per_class"][0]["recall"] == pytest.approx(0.923, abs=1e-3)
    assert metrics["per_class"][0]["f1"] == pytest.approx(0.941, abs=1e-3)


def test_roc_auc_matches_sklearn():
    sklearn_metrics = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(10, 120))
        scores = rng.integers(0, 12, size=n).astype(float) / 12.0  # ties on purpose
        labels = rng.integers(0, 2, size=n)
        labels[0], labels[1] = 0, 1
        _, _, _, auc = dm.roc_curve(list(scores), [int(x) for x in labels])
        ref = sklearn_metrics.roc_auc_score(labels, scores)
        assert auc == pytest.approx(ref, abs=1e-9)


def test_stratified_kfold_partition(tmp_path):
    manifest = dm.generate_dataset(
        str(tmp_path), counts={"cancer": 12, "fibrosis": 10, "normal": 8}, size=32, seed=5
    )
    assert len(manifest["records"]) == 30
    folds = dm.stratified_kfold(str(tmp_path / "manifest.csv"), k=2, seed=1)
    assert len(folds) == 30
    assert set(folds.values()) == {0, 1}


def test_generated_planes_load_with_pillow(tmp_path):
    Image = pytest.importorskip("PIL.Image")
    manifest = dm.generate_dataset(
        str(tmp_path), counts={"cancer": 2, "fibrosis": 2, "normal": 2}, size=48, seed=9
    )
    rec = manifest["records"][0]
    img = Image.open(rec["shg_path"])
    assert img.size == (48, 48)
    arr = np.array(img)
    assert arr.dtype == np.uint16 or arr.max() > 255  # 16-bit plane


def test_gradcam_range(tmp_path):
    # tiny training-free checkpoint via the CLI is heavy here; instead check
    # the statistic helper and fused pipeline end to end
    manifest = dm.generate_dataset(
        str(tmp_path), counts={"cancer": 1, "fibrosis": 1, "normal": 1}, size=48, seed=2
    )
    pil = pytest.importorskip("PIL.Image")
    shg = np.array(pil.open(manifest["records"][0]["shg_path"])).astype(np.float32)
    cv = dm.orientation_circular_variance(shg)
    assert 0.0 <= cv <= 1.0
