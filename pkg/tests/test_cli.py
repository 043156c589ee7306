"""Exit codes, file artifacts, and reproducibility of the CLI."""

import json
import os

import numpy as np
import pytest

from promptcd import raster
from promptcd.cli import main
from promptcd.harness import SceneSpec, generate_scene, save_scene


@pytest.fixture
def scene_dir(tmp_path):
    scene = generate_scene(
        SceneSpec(width=128, height=128, n_objects=5, n_disappeared=1, seed=41), "one"
    )
    directory = tmp_path / "one"
    save_scene(scene, str(directory))
    return directory, scene


def tree_bytes(root):
    out = {}
    for base, _, files in os.walk(root):
        for name in files:
            path = os.path.join(base, name)
            with open(path, "rb") as fh:
                out[os.path.relpath(path, root)] = fh.read()
    return out


class TestDetect:
    def test_contract(self, scene_dir, tmp_path, capsys):
        directory, scene = scene_dir
        out = tmp_path / "report.json"
        change = tmp_path / "change.png"
        code = main([
            "detect",
            "--mask", str(directory / "pre_mask.png"),
            "--image", str(directory / "post.png"),
            "--backend", "mock",
            "--semantic", str(directory / "post_semantic.png"),
            "--num-changed", "1",
            "--seed", "42",
            "--out", str(out),
            "--map", str(change),
        ])
        assert code == 0
        assert out.is_file() and change.is_file()
        report = json.loads(out.read_text())
        assert report["changed"] == scene.meta["disappeared_labels"]
        assert report["seed"] == 42
        assert report["config"]["backend"] == "mock"
        rendered = raster.load_mask(str(change))
        assert np.array_equal(rendered, scene.reference_change)
        assert "changed:" in capsys.readouterr().out

    def test_missing_mask_exits_2(self, scene_dir, tmp_path, capsys):
        directory, _ = scene_dir
        code = main([
            "detect",
            "--mask", str(tmp_path / "nope.png"),
            "--image", str(directory / "post.png"),
            "--semantic", str(directory / "post_semantic.png"),
        ])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_onnx_without_model_files_exits_3(self, scene_dir, tmp_path, capsys):
        directory, _ = scene_dir
        code = main([
            "detect",
            "--mask", str(directory / "pre_mask.png"),
            "--image", str(directory / "post.png"),
            "--backend", "onnx",
            "--model-dir", str(tmp_path),
        ])
        assert code == 3
        assert "backend error:" in capsys.readouterr().err

    def test_mock_without_semantic_exits_2(self, scene_dir):
        directory, _ = scene_dir
        code = main([
            "detect",
            "--mask", str(directory / "pre_mask.png"),
            "--image", str(directory / "post.png"),
        ])
        assert code == 2

    def test_inputs_not_mutated(self, scene_dir, tmp_path):
        directory, _ = scene_dir
        before = {
            name: (directory / name).read_bytes()
            for name in ("pre_mask.png", "post.png", "post_semantic.png")
        }
        assert main([
            "detect",
            "--mask", str(directory / "pre_mask.png"),
            "--image", str(directory / "post.png"),
            "--semantic", str(directory / "post_semantic.png"),
            "--out", str(tmp_path / "r.json"),
            "--map", str(tmp_path / "m.png"),
        ]) == 0
        for name, blob in before.items():
            assert (directory / name).read_bytes() == blob

    def test_config_echo_includes_backend_settings(self, scene_dir, tmp_path):
        directory, _ = scene_dir
        out = tmp_path / "report.json"
        assert main([
            "detect",
            "--mask", str(directory / "pre_mask.png"),
            "--image", str(directory / "post.png"),
            "--semantic", str(directory / "post_semantic.png"),
            "--sigma", "0.05", "--target-class", "1",
            "--out", str(out),
        ]) == 0
        config = json.loads(out.read_text())["config"]
        assert config["sigma"] == 0.05
        assert config["target_class"] == 1
        assert config["points_per_object"] == 3
        assert config["aggregation"] == "single-call"

    def test_repeat_runs_byte_identical(self, scene_dir, tmp_path):
        directory, _ = scene_dir
        outputs = []
        for tag in ("a", "b"):
            out = tmp_path / f"report_{tag}.json"
            code = main([
                "detect",
                "--mask", str(directory / "pre_mask.png"),
                "--image", str(directory / "post.png"),
                "--semantic", str(directory / "post_semantic.png"),
                "--sigma", "0.05",
                "--seed", "7",
                "--out", str(out),
            ])
            assert code == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]


class TestSynth:
    def test_corpus_layout(self, tmp_path):
        out = tmp_path / "corpus"
        code = main([
            "synth", "--scenes", "10", "--objects", "3-6", "--seed", "7",
            "--width", "96", "--height", "96", "--out", str(out),
        ])
        assert code == 0
        assert (out / "corpus.json").is_file()
        scene_dirs = sorted(os.listdir(out / "scenes"))
        assert len(scene_dirs) == 10
        assert scene_dirs[0] == "scene_0000"

    def test_rerun_byte_identical(self, tmp_path):
        args = [
            "synth", "--scenes", "4", "--objects", "4", "--seed", "3",
            "--width", "96", "--height", "96", "--distractors", "2",
        ]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert tree_bytes(a) == tree_bytes(b)

    def test_impossible_disappeared_count_exits_2(self, tmp_path):
        code = main([
            "synth", "--scenes", "1", "--objects", "5", "--disappeared", "6",
            "--out", str(tmp_path / "c"),
        ])
        assert code == 2


@pytest.fixture
def corpus(tmp_path):
    out = tmp_path / "corpus"
    assert main([
        "synth", "--scenes", "6", "--objects", "3-7", "--seed", "11",
        "--width", "128", "--height", "128", "--out", str(out),
    ]) == 0
    return out


class TestEval:
    def test_ideal_mock_corpus_is_perfect(self, corpus, tmp_path, capsys):
        metrics_path = tmp_path / "metrics.json"
        code = main([
            "eval", "--corpus", str(corpus), "--out", str(metrics_path),
        ])
        assert code == 0
        payload = json.loads(metrics_path.read_text())
        assert payload["aggregate"]["object_accuracy"] == 1.0
        assert payload["aggregate"]["mean_pixel_iou"] == 1.0
        assert len(payload["scenes"]) == 6
        assert "object_accuracy=1.0000" in capsys.readouterr().out

    def test_empty_corpus_exits_2(self, tmp_path):
        root = tmp_path / "empty"
        os.makedirs(root)
        (root / "corpus.json").write_text('{"scenes": []}')
        code = main(["eval", "--corpus", str(root), "--out", str(tmp_path / "m.json")])
        assert code == 2

    def test_rerun_and_jobs_byte_identical(self, corpus, tmp_path):
        paths = [tmp_path / f"m{i}.json" for i in range(3)]
        jobs = ["1", "1", "4"]
        for path, job in zip(paths, jobs):
            assert main([
                "eval", "--corpus", str(corpus), "--jobs", job, "--out", str(path),
            ]) == 0
        blobs = [p.read_bytes() for p in paths]
        assert blobs[0] == blobs[1] == blobs[2]


class TestBaselineRcva:
    def test_identical_pair_all_zero(self, scene_dir, tmp_path):
        directory, _ = scene_dir
        mask_out = tmp_path / "rcva.png"
        code = main([
            "baseline-rcva",
            "--pre", str(directory / "post.png"),
            "--post", str(directory / "post.png"),
            "--out-mask", str(mask_out),
        ])
        assert code == 0
        assert not raster.load_mask(str(mask_out)).any()

    def test_missing_pre_exits_2(self, scene_dir, tmp_path):
        directory, _ = scene_dir
        code = main([
            "baseline-rcva",
            "--pre", str(tmp_path / "absent.png"),
            "--post", str(directory / "post.png"),
            "--out-mask", str(tmp_path / "m.png"),
        ])
        assert code == 2

    def test_distractors_show_up_in_rcva_map(self, tmp_path):
        scene = generate_scene(
            SceneSpec(
                width=128, height=128, n_objects=4, n_disappeared=1,
                distractors=3, seed=19,
            ),
            "d",
        )
        directory = tmp_path / "d"
        save_scene(scene, str(directory))
        mask_out = tmp_path / "rcva_mask.png"
        map_out = tmp_path / "rcva_map.png"
        code = main([
            "baseline-rcva",
            "--pre", str(directory / "pre.png"),
            "--post", str(directory / "post.png"),
            "--out-mask", str(mask_out),
            "--out-map", str(map_out),
        ])
        assert code == 0
        predicted = raster.load_mask(str(mask_out))
        distractor_pixels = np.zeros_like(predicted)
        for x0, y0, x1, y1 in scene.meta["distractor_boxes"]:
            distractor_pixels[y0:y1, x0:x1] = True
        assert (predicted & distractor_pixels).sum() > 0
        assert map_out.is_file()


class TestDerive:
    def test_derive_then_detect_chain(self, tmp_path):
        directory = tmp_path / "s"
        os.makedirs(directory)
        pre_sem = np.zeros((64, 64), dtype=np.uint8)
        pre_sem[8:20, 8:20] = 4
        pre_sem[30:44, 30:44] = 4
        post_sem = pre_sem.copy()
        post_sem[8:20, 8:20] = 0  # first building left the class
        raster.save_semantic(str(directory / "pre_semantic.png"), pre_sem)
        raster.save_semantic(str(directory / "post_semantic.png"), post_sem)
        raster.save_rgb(
            str(directory / "post.png"), np.full((64, 64, 3), 90, dtype=np.uint8)
        )
        assert main(["derive", "--scene", str(directory), "--class-id", "4"]) == 0

        out = tmp_path / "report.json"
        change = tmp_path / "change.png"
        assert main([
            "detect",
            "--mask", str(directory / "pre_mask.png"),
            "--image", str(directory / "post.png"),
            "--semantic", str(directory / "post_semantic.png"),
            "--target-class", "4",
            "--num-changed", "1",
            "--out", str(out), "--map", str(change),
        ]) == 0
        assert json.loads(out.read_text())["changed"] == [1]
        rendered = raster.load_mask(str(change))
        reference = raster.load_mask(str(directory / "ref_change.png"))
        assert np.array_equal(rendered, reference)

    def test_derive_roundtrip(self, tmp_path):
        directory = tmp_path / "s"
        os.makedirs(directory)
        pre = np.zeros((40, 40), dtype=np.uint8)
        pre[5:15, 5:15] = 4
        post = np.zeros_like(pre)
        raster.save_semantic(str(directory / "pre_semantic.png"), pre)
        raster.save_semantic(str(directory / "post_semantic.png"), post)
        code = main(["derive", "--scene", str(directory), "--class-id", "4"])
        assert code == 0
        assert raster.load_mask(str(directory / "pre_mask.png")).sum() == 100
        assert raster.load_mask(str(directory / "ref_change.png")).sum() == 100


class TestParser:
    def test_help_available(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--help"])
        assert info.value.code == 0
        assert "detect" in capsys.readouterr().out

    def test_unknown_command_exits_2(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["frobnicate"])
        assert info.value.code == 2
