import json

import jsonschema
import numpy as np
import pytest

from wordfence.cli import main
from wordfence.errors import FormatError
from wordfence.formats import read_ften, read_pnm, write_image
from wordfence.grid import Box
from wordfence.labelgen import ANNOTATION_SCHEMA, rasterize_labels, save_annotations
from wordfence.overlay import render_overlay
from wordfence.pipeline import PipelineConfig, run_pipeline
from wordfence.synth import SynthConfig, generate_scene
from wordfence.toynet import TrainConfig, save_checkpoint, train

SCENE = SynthConfig(seed=21, gap_max=10)
BORDER = 2


@pytest.fixture(scope="module")
def overfit(tmp_path_factory):
    """A checkpoint trained until it reproduces one synthetic scene."""
    root = tmp_path_factory.mktemp("overfit")
    image, anns = generate_scene(SCENE)
    write_image(root / "scene.pgm", image)
    save_annotations(root / "scene.json", anns)
    cfg = TrainConfig(learning_rate=0.02, epochs=150, seed=3, weight_init_scale=0.25)
    params, history = train([(image, rasterize_labels(anns, 64, 64, BORDER))], cfg)
    save_checkpoint(root / "ckpt", params, cfg)
    return root


def test_pipeline_recovers_overfit_scene(overfit, tmp_path):
    result = run_pipeline(PipelineConfig(checkpoint=overfit / "ckpt", images=[overfit / "scene.pgm"],
                                         annotations=[overfit / "scene.json"], out_dir=tmp_path))
    assert result.ok
    assert result.report.recall == 1.0
    for name in ("scene.labels.pgm", "scene.boxes.json", "scene.overlay.ppm", "report.json", "per_image.csv"):
        assert (tmp_path / name).exists()
    jsonschema.validate(json.loads((tmp_path / "scene.boxes.json").read_text()), ANNOTATION_SCHEMA)


def test_empty_image_list(overfit, tmp_path):
    result = run_pipeline(PipelineConfig(checkpoint=overfit / "ckpt", out_dir=tmp_path))
    assert result.report.summary()["tp"] == result.report.false_positives == result.report.false_negatives == 0
    assert main(["pipeline", "--checkpoint", str(overfit / "ckpt"), "--out-dir", str(tmp_path / "cli")]) == 0


def test_corrupt_checkpoint(overfit, tmp_path, capsys):
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "manifest.json").write_text((overfit / "ckpt" / "manifest.json").read_text())
    (bad / "weights.ften").write_bytes(b"JUNK" + (overfit / "ckpt" / "weights.ften").read_bytes()[4:])
    with pytest.raises(FormatError, match="weights.ften"):
        run_pipeline(PipelineConfig(checkpoint=bad, out_dir=tmp_path / "o"))
    code = main(["pipeline", "--checkpoint", str(bad), "--images", str(overfit / "scene.pgm"),
                 "--out-dir", str(tmp_path / "o")])
    assert code == 2
    assert "weights.ften" in capsys.readouterr().err


def test_missing_image_is_skipped_with_failure(overfit, tmp_path):
    code = main(["pipeline", "--checkpoint", str(overfit / "ckpt"), "--out-dir", str(tmp_path),
                 "--images", str(overfit / "scene.pgm"), str(tmp_path / "nope.pgm")])
    assert code == 2
    assert (tmp_path / "scene.boxes.json").exists()
    assert json.loads((tmp_path / "report.json").read_text())["failures"] == [str(tmp_path / "nope.pgm")]


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["pipeline", "--scales", "0.5,-1"])
    assert exc.value.code == 1


def test_stagewise_cli_matches_pipeline(overfit, tmp_path):
    ck, img = overfit / "ckpt", overfit / "scene.pgm"
    assert main(["infer", "--checkpoint", str(ck), "--image", str(img), "--out-dir", str(tmp_path / "maps")]) == 0
    maps = sorted((tmp_path / "maps").glob("*.ften"))
    assert [read_ften(m).shape for m in maps] == [(32, 32, 3), (64, 64, 3), (128, 128, 3)]
    assert main(["fuse", "--maps", *map(str, maps), "--height", "64", "--width", "64",
                 "--out", str(tmp_path / "labels.pgm")]) == 0
    assert main(["extract", "--labels", str(tmp_path / "labels.pgm"), "--out", str(tmp_path / "boxes.json")]) == 0
    assert main(["pipeline", "--checkpoint", str(ck), "--images", str(img), "--out-dir", str(tmp_path / "p")]) == 0
    # the stage-wise path stores float32 maps; label maps agree on this scene
    np.testing.assert_array_equal(read_pnm(tmp_path / "labels.pgm"), read_pnm(tmp_path / "p" / "scene.labels.pgm"))
    assert (tmp_path / "boxes.json").read_text() == (tmp_path / "p" / "scene.boxes.json").read_text()

    assert main(["eval", "--dets", str(tmp_path / "boxes.json"), "--gts", str(overfit / "scene.json"),
                 "--out", str(tmp_path / "report.json"), "--csv", str(tmp_path / "rows.csv")]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert set(report) == {"tp", "fp", "fn", "precision", "recall", "fscore"}
    assert report["recall"] == 1.0
    assert (tmp_path / "rows.csv").read_text().startswith("image,tp,fp,fn,precision,recall,fscore\n")


def test_synth_labelgen_train_overlay(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "d"), "--count", "2", "--seed", "4", "--gap-max", "10"]) == 0
    manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
    assert len(manifest["scenes"]) == 2
    ann = tmp_path / "d" / "scene_00000.json"
    jsonschema.validate(json.loads(ann.read_text()), ANNOTATION_SCHEMA)
    assert main(["labelgen", "--annotations", str(ann), "--image", str(tmp_path / "d" / "scene_00000.pgm"),
                 "--border-width", "2", "--out", str(tmp_path / "l.pgm")]) == 0
    assert set(np.unique(read_pnm(tmp_path / "l.pgm"))) <= {0, 1, 2}
    assert main(["train", "--data", str(tmp_path / "d"), "--out", str(tmp_path / "ck"), "--epochs", "2",
                 "--border-width", "2", "--seed", "1"]) == 0
    assert (tmp_path / "ck" / "loss.csv").read_text().startswith("epoch,mean_loss\n1,")
    assert main(["overlay", "--image", str(tmp_path / "d" / "scene_00000.pgm"), "--boxes", str(ann),
                 "--labels", str(tmp_path / "l.pgm"), "--out", str(tmp_path / "o.ppm")]) == 0
    assert read_pnm(tmp_path / "o.ppm").shape == (64, 64, 3)


def test_end_to_end_eval_cli(tmp_path):
    (tmp_path / "d.json").write_text(json.dumps([{"x0": 0, "y0": 0, "x1": 10, "y1": 5, "text": "HOTEL"}]))
    (tmp_path / "g.json").write_text(json.dumps([{"x0": 0, "y0": 0, "x1": 10, "y1": 5, "text": "hotel",
                                                  "ignore": False}]))
    assert main(["eval", "--end-to-end", "--dets", str(tmp_path / "d.json"), "--gts", str(tmp_path / "g.json"),
                 "--out", str(tmp_path / "r.json")]) == 0
    assert json.loads((tmp_path / "r.json").read_text())["tp"] == 1


# -- overlay -------------------------------------------------------------------

def test_overlay_without_boxes_is_gray_passthrough():
    img = np.random.default_rng(0).random((6, 7, 1))
    out = render_overlay(img)
    assert out.shape == (6, 7, 3)
    assert np.all(out[:, :, 0] == out[:, :, 1]) and np.all(out[:, :, 1] == out[:, :, 2])


def test_overlay_recolors_exactly_the_perimeter():
    img = np.full((10, 12, 1), 0.5)
    out = render_overlay(img, [Box(2, 3, 8, 7)])
    green = np.all(out == (0, 255, 0), axis=2)
    expected = np.zeros((10, 12), dtype=bool)
    expected[3, 2:8] = expected[6, 2:8] = True
    expected[3:7, 2] = expected[3:7, 7] = True
    np.testing.assert_array_equal(green, expected)


def test_overlay_tint_and_determinism():
    img = np.full((4, 4, 1), 0.5)
    labels = np.array([[0, 1, 2, 0]] * 4, dtype=np.uint8)
    a = render_overlay(img, [Box(0, 0, 2, 2)], labels)
    b = render_overlay(img, [Box(0, 0, 2, 2)], labels)
    assert a.tobytes() == b.tobytes()
    assert tuple(a[3, 1]) == (179, 77, 77)  # 0.6 * 128 + 0.4 * (255, 0, 0)
    assert tuple(a[3, 2]) == (77, 77, 179)


def test_overlay_clips_boxes(caplog):
    out = render_overlay(np.zeros((5, 5, 1)), [Box(3, 3, 9, 9)])
    assert np.all(out[3, 3:5] == (0, 255, 0))
    assert "clipped" in caplog.text
