import json

import numpy as np
import pytest

from wordfence.errors import GenerationError, InvalidArgument
from wordfence.synth import SynthConfig, chebyshev_gap, generate_scene, write_dataset


def test_same_seed_same_scene():
    a_img, a_ann = generate_scene(SynthConfig(seed=42))
    b_img, b_ann = generate_scene(SynthConfig(seed=42))
    np.testing.assert_array_equal(a_img, b_img)
    assert a_ann == b_ann


@pytest.mark.parametrize("gap_max", [None, 10])
def test_constraints_hold(gap_max):
    for seed in range(40):
        cfg = SynthConfig(seed=seed, gap_max=gap_max)
        img, anns = generate_scene(cfg)
        assert img.shape == (64, 64, 1)
        assert 0.0 <= img.min() and img.max() <= 1.0
        assert cfg.words_min <= len(anns) <= cfg.words_max
        for a in anns:
            assert 0 <= a.box.x0 and a.box.x1 <= 64 and 0 <= a.box.y0 and a.box.y1 <= 64
            assert 2 <= len(a.transcription) <= 8 and a.transcription.isalpha()
        for i, a in enumerate(anns):
            for b in anns[i + 1:]:
                assert chebyshev_gap(a.box, b.box) >= cfg.gap_min


def test_clustered_layout_has_close_neighbours():
    close = 0
    for seed in range(30):
        _, anns = generate_scene(SynthConfig(seed=seed, gap_max=10))
        gaps = [chebyshev_gap(a.box, b.box) for i, a in enumerate(anns) for b in anns[i + 1:]]
        close += min(gaps) <= 10
    assert close == 30


def test_text_differs_from_background():
    diffs = []
    for seed in range(100):
        img, anns = generate_scene(SynthConfig(seed=seed))
        inside = np.zeros(img.shape[:2], dtype=bool)
        for a in anns:
            inside[a.box.y0:a.box.y1, a.box.x0:a.box.x1] = True
        diffs.append(abs(img[inside].mean() - img[~inside].mean()))
    assert min(diffs) >= 0.2


def test_distinct_seeds_give_distinct_images():
    for seed in range(100):
        a, _ = generate_scene(SynthConfig(seed=2 * seed))
        b, _ = generate_scene(SynthConfig(seed=2 * seed + 1))
        assert not np.array_equal(a, b)


def test_infeasible_placement():
    cfg = SynthConfig(image_h=10, image_w=10, words_min=4, words_max=4, word_h=(8, 8), word_w=(8, 8))
    with pytest.raises(GenerationError):
        generate_scene(cfg)


def test_config_validation():
    with pytest.raises(InvalidArgument):
        SynthConfig(gap_min=0)
    with pytest.raises(InvalidArgument):
        SynthConfig(words_min=3, words_max=2)
    with pytest.raises(InvalidArgument):
        SynthConfig(texture=0.0)


def test_write_dataset(tmp_path):
    write_dataset(tmp_path, SynthConfig(seed=5), 3)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert [s["image"] for s in manifest["scenes"]] == ["scene_00000.pgm", "scene_00001.pgm", "scene_00002.pgm"]
    assert (tmp_path / "scene_00002.json").exists()
