import json
import math

import numpy as np
import pytest

birdsong = pytest.importorskip("birdsong")


def test_versions():
    assert birdsong.__version__ == "0.1.0"
    assert birdsong.MODEL_FORMAT_VERSION == 1
    assert birdsong.FEATURE_FORMAT_VERSION == 1
    assert birdsong.SAMPLE_RATE == 22050


@pytest.mark.parametrize(
    "arch,params,mib",
    [("vgg16", 138_357_544, 528), ("resnet50", 25_636_712, 98), ("mobilenet_v2", 3_538_984, 14)],
)
def test_catalog_goldens(arch, params, mib):
    m = birdsong.build_catalog(arch, 1000, "imagenet_reference")
    assert m.param_count == params
    assert m.footprint_mib == mib
    assert not m.is_weighted


def test_errors_carry_codes():
    with pytest.raises(birdsong.Error) as info:
        birdsong.build_catalog("alexnet")
    assert info.value.code == "UnknownArch"
    with pytest.raises(birdsong.Error) as info:
        birdsong.decode_model(b"XXXX\x01\x00\x00\x00")
    assert info.value.code == "BadMagic"


def test_model_round_trip_and_predict(tmp_path):
    m = birdsong.build_catalog("mobilenet_v2", 5, "custom", head_hidden=8)
    m.randomize(3)
    path = tmp_path / "m.wmwb"
    m.save(path)
    back = birdsong.load_model(path)
    assert back == m
    assert birdsong.encode_model(back) == path.read_bytes()

    image = np.random.default_rng(0).random((224, 224, 3), dtype=np.float32)
    probs, argmax = back.predict(image)
    assert len(probs) == 5
    assert math.isclose(sum(probs), 1.0, rel_tol=1e-9)
    assert argmax == int(np.argmax(probs))
    with pytest.raises(birdsong.Error):
        back.predict(np.zeros((10, 10, 3), dtype=np.float32))


def test_windowize_and_features(tmp_path):
    seg = np.arange(24498, dtype=np.float32)
    windows = birdsong.windowize(seg)
    assert [len(w) for w in windows] == [22050, 22050]
    assert np.array_equal(windows[1][:2448], seg[22050:])
    assert np.array_equal(windows[1][2448:], seg[:19602])

    t = np.arange(22050) / 22050.0
    tone = (0.5 * np.sin(2 * np.pi * 1000.0 * t)).astype(np.float32)
    fx = birdsong.FeatureExtractor()
    img = fx.extract(tone)
    assert img.shape == (224, 224, 3)
    assert img.min() >= 0.0 and img.max() <= 1.0
    assert np.array_equal(img[..., 0], img[..., 2])
    assert not fx.extract(np.zeros(22050, dtype=np.float32)).any()

    birdsong.write_features(tmp_path / "x.wmfi", img)
    assert np.array_equal(birdsong.read_features(tmp_path / "x.wmfi"), img)


def test_wav_and_labels(tmp_path):
    x = (0.25 * np.sin(np.arange(44100) * 0.05)).astype(np.float32)
    birdsong.write_wav(tmp_path / "a.wav", x, 44100)
    samples, rate = birdsong.load_clip(tmp_path / "a.wav")
    assert rate == 22050
    assert len(samples) == 22050
    regions = birdsong.parse_labels("0.614016\t1.725078\tsong\r\n")
    assert regions == [(0.614016, 1.725078, "song")]


def test_metrics_report_matches_hand_tally():
    truth = [0, 0, 1, 1, 2, 2, 2]
    pred = [0, 1, 1, 1, 2, 0, 2]
    report = birdsong.metrics_report(truth, pred, 3, ["a", "b", "c"])
    recalls = [1 / 2, 2 / 2, 2 / 3]
    precisions = [1 / 2, 2 / 3, 2 / 2]
    f1 = [2 * p * r / (p + r) for p, r in zip(precisions, recalls)]
    assert report["macro"]["recall"] == pytest.approx(sum(recalls) / 3, abs=1e-12)
    assert report["macro"]["precision"] == pytest.approx(sum(precisions) / 3, abs=1e-12)
    assert report["macro"]["f1"] == pytest.approx(sum(f1) / 3, abs=1e-12)
    p, r, f = birdsong.class_scores(171, 779, 9)
    assert abs(f - 0.30) <= 0.005


def test_split_keeps_sources_whole():
    items = [(f"XC{i}", "sp", 1) for i in range(10)]
    split = birdsong.split_by_source(items, seed=42)
    assert sorted(split) == sorted(i[0] for i in items)
    counts = {s: list(split.values()).count(s) for s in ("train", "val", "test")}
    assert counts == {"train": 7, "val": 2, "test": 1}


def test_bench_report():
    m = birdsong.build_catalog("mobilenet_v2", 3, "custom", head_hidden=4)
    m.randomize(1)
    image = np.zeros((224, 224, 3), dtype=np.float32)
    r = birdsong.bench(m, image, warmup=0, runs=2)
    assert r["timed_runs"] == 2
    assert r["param_count"] == m.param_count
    assert r["p50_ms"] <= r["p95_ms"]
