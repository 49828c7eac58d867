"""CLI surface: exit codes, file products, tiny end-to-end pipeline."""

import json
from pathlib import Path

import numpy as np
import pytest

from wetlandseg.cli import cli, main

SUBCOMMANDS = ["synth", "train", "cross-validate", "predict", "vectorize", "evaluate"]


def tiny_config(tmp_path, **overrides) -> Path:
    cfg = {
        "pixel_size": 5.0,
        "seed": 11,
        "epochs": 2,
        "batch_size": 8,
        "learning_rate": 1e-3,
        "channel_scale": 16,
        "synth": {"rows": 320, "cols": 320, "wetland_fraction": 0.15},
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestHelp:
    def test_root_help(self):
        assert main(["--help"]) == 0

    @pytest.mark.parametrize("name", SUBCOMMANDS)
    def test_subcommand_help(self, name):
        assert main([name, "--help"]) == 0


class TestExitCodes:
    def test_unknown_option_is_usage_error(self):
        assert main(["synth", "--no-such-flag"]) == 1

    def test_missing_pixel_size_is_config_error(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"seed": 1}))
        assert main(["synth", "--config", str(path), "--out", str(tmp_path / "o")]) == 1

    def test_unknown_config_key_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"pixel_size": 5.0, "learning_rte": 0.1}))
        assert main(["synth", "--config", str(path), "--out", str(tmp_path / "o")]) == 1

    def test_data_error_is_exit_2(self, tmp_path):
        cfg = tiny_config(tmp_path)
        bad = tmp_path / "bad.geojson"
        bad.write_text("{not json")
        png = tmp_path / "map.png"
        from PIL import Image

        Image.fromarray(np.zeros((200, 200, 3), np.uint8)).save(png)
        (tmp_path / "map.wld").write_text("5.0\n0\n0\n-5.0\n0\n0\n")
        code = main(["train", "--config", str(cfg), "--map", str(png),
                     "--labels", str(bad), "--out", str(tmp_path / "out")])
        assert code == 2


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> train -> predict -> vectorize -> evaluate on a tiny scene."""
    root = tmp_path_factory.mktemp("pipeline")
    cfg = tiny_config(root)
    scene_dir = root / "scene"
    assert main(["synth", "--config", str(cfg), "--out", str(scene_dir)]) == 0
    train_dir = root / "trained"
    assert main(["train", "--config", str(cfg), "--map", str(scene_dir / "map.png"),
                 "--labels", str(scene_dir / "truth.geojson"),
                 "--out", str(train_dir)]) == 0
    pred_dir = root / "pred"
    assert main(["predict", "--checkpoint", str(train_dir / "model.ckpt"),
                 "--map", str(scene_dir / "map.png"), "--out", str(pred_dir),
                 "--config", str(cfg)]) == 0
    vec_path = root / "wetlands.geojson"
    assert main(["vectorize", "--prob", str(pred_dir / "probability.png"),
                 "--out", str(vec_path), "--min-area", "1000"]) == 0
    metrics_path = root / "metrics.json"
    assert main(["evaluate", "--pred", str(pred_dir / "probability.png"),
                 "--truth", str(scene_dir / "truth.geojson"),
                 "--out", str(metrics_path)]) == 0
    return root


class TestPipeline:
    def test_synth_products(self, pipeline):
        scene = pipeline / "scene"
        for name in ("map.png", "map.wld", "labels.png", "labels.wld",
                     "truth.geojson", "effective-config.json"):
            assert (scene / name).exists(), name

    def test_config_echo_round_trips(self, pipeline):
        echoed = json.loads((pipeline / "scene" / "effective-config.json").read_text())
        assert echoed["pixel_size"] == 5.0
        assert echoed["channel_scale"] == 16

    def test_train_products(self, pipeline):
        assert (pipeline / "trained" / "model.ckpt").exists()
        history = (pipeline / "trained" / "history.jsonl").read_text().splitlines()
        assert len(history) == 2
        for line in history:
            record = json.loads(line)
            assert {"epoch", "train_loss", "val_loss", "wall_time_s"} <= set(record)

    def test_probability_raster_shape(self, pipeline):
        from wetlandseg.geodata import read_probability_raster

        prob = read_probability_raster(pipeline / "pred" / "probability.png")
        assert (prob.rows, prob.cols) == (320, 320)
        assert prob.values.min() >= 0.0 and prob.values.max() <= 1.0

    def test_vectorize_output_is_featurecollection(self, pipeline):
        doc = json.loads((pipeline / "wetlands.geojson").read_text())
        assert doc["type"] == "FeatureCollection"

    def test_evaluate_products(self, pipeline):
        report = json.loads((pipeline / "metrics.json").read_text())
        assert "confusion" in report
        assert (pipeline / "metrics-agreement.png").exists()

    def test_predict_channel_scale_mismatch_is_exit_2(self, pipeline, tmp_path):
        cfg = tiny_config(tmp_path, channel_scale=1)
        code = main(["predict",
                     "--checkpoint", str(pipeline / "trained" / "model.ckpt"),
                     "--map", str(pipeline / "scene" / "map.png"),
                     "--out", str(tmp_path / "p"), "--config", str(cfg)])
        assert code == 2


def test_vectorize_on_empty_raster(tmp_path):
    from wetlandseg.geodata import GeoRaster, GeoTransform, write_probability_raster

    raster = GeoRaster(np.zeros((1, 100, 100), np.float32), GeoTransform(0, 0, 5, 5))
    write_probability_raster(tmp_path / "zero.png", raster)
    out = tmp_path / "empty.geojson"
    assert main(["vectorize", "--prob", str(tmp_path / "zero.png"),
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["features"] == []
