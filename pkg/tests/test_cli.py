"""Command-line interface tests, driven in process through cli.run."""

import json
import shutil
import subprocess

import numpy as np
import pytest

from motionstack import __version__, cli
from motionstack.frame_pipeline import FrameSequence
from motionstack.metric_learning import load_net
from motionstack.roi_features import FeatureMap, pool_boxes
from motionstack.synth_scenes import SceneConfig, generate
from motionstack.tensor_io import read_tensor, write_tensor
from motionstack.weight_surgery import (
    ConvLayerWeights,
    expand_first_layer,
    load_conv_layer,
    save_conv_layer,
)


def _envelope(path):
    report = json.loads(path.read_text())
    assert sorted(report) == ["command", "inputs", "results", "tool_version"]
    assert report["tool_version"] == __version__
    return report


def _tree_bytes(root):
    files = sorted(p for p in root.rglob("*") if p.is_file())
    return [(str(p.relative_to(root)), p.read_bytes()) for p in files]


class TestExitCodes:
    def test_help(self, capsys):
        assert cli.run(["--help"]) == 0
        assert "stack" in capsys.readouterr().out

    def test_subcommand_help(self):
        assert cli.run(["synth", "--help"]) == 0

    def test_missing_command_is_usage(self, capsys):
        assert cli.run([]) == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_command_is_usage(self):
        assert cli.run(["bogus"]) == 1

    def test_bad_variant_is_usage(self, tmp_path, scene12):
        code = cli.run(
            ["stack", "--frames", str(scene12 / "frames"), "--variant", "bogus",
             "--out-dir", str(tmp_path)]
        )
        assert code == 1

    def test_missing_input_file_is_io_error(self, tmp_path):
        code = cli.run(
            ["eval", "--dets", str(tmp_path / "none.jsonl"), "--gt", str(tmp_path / "none.jsonl"),
             "--out", str(tmp_path / "r.json")]
        )
        assert code == 3

    def test_malformed_data_is_data_error(self, tmp_path, scene12, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"frame": 0}\n')
        code = cli.run(
            ["eval", "--dets", str(bad), "--gt", str(scene12 / "gt.jsonl"),
             "--out", str(tmp_path / "r.json")]
        )
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_threads_env_validated(self, monkeypatch, tmp_path, scene12):
        argv = ["synth", "perturb", "--gt", str(scene12 / "gt.jsonl"),
                "--out-dets", str(tmp_path / "d.jsonl")]
        monkeypatch.setenv("MOTIONSTACK_THREADS", "abc")
        assert cli.run(argv) == 1
        monkeypatch.setenv("MOTIONSTACK_THREADS", "0")
        assert cli.run(argv) == 1
        monkeypatch.setenv("MOTIONSTACK_THREADS", "2")
        assert cli.run(argv) == 0


class TestStack:
    def test_builds_dataset_and_report(self, tmp_path, scene12, capsys):
        out_dir = tmp_path / "stacks"
        report_path = tmp_path / "report.json"
        code = cli.run(
            ["stack", "--frames", str(scene12 / "frames"), "--variant", "rgb-seq",
             "--n", "2", "--out-dir", str(out_dir), "--out", str(report_path)]
        )
        assert code == 0
        assert capsys.readouterr().out.startswith("stack:")
        report = _envelope(report_path)
        assert report["command"] == "stack"
        assert report["inputs"]["variant"] == "rgb_seq"
        assert report["results"]["num_items"] == 12
        assert json.loads((out_dir / "manifest.json").read_text())["items"]

        source = FrameSequence.from_dir(scene12 / "frames")
        tensor = read_tensor(out_dir / "stack_5.mten")
        assert tensor.shape[0] == 6
        assert np.array_equal(tensor[:3], source.planar(5))
        assert np.array_equal(tensor[3:], source.planar(4))

    def test_out_of_range_parameters_warn(self, tmp_path, scene12, capsys):
        code = cli.run(
            ["stack", "--frames", str(scene12 / "frames"), "--variant", "rgb_seq",
             "--n", "11", "--out-dir", str(tmp_path / "s")]
        )
        assert code == 0
        assert "outside the evaluated range" in capsys.readouterr().err


class TestSurgery:
    @pytest.fixture()
    def saved_layer(self, tmp_path):
        rng = np.random.default_rng(0)
        layer = ConvLayerWeights(
            weight=rng.normal(0, 0.3, size=(4, 3, 3, 3)).astype(np.float32),
            bias=rng.normal(0, 0.1, size=4).astype(np.float32),
        )
        path = tmp_path / "conv.mten"
        save_conv_layer(layer, path)
        return layer, path

    def test_replicate_matches_library_call(self, tmp_path, saved_layer):
        layer, path = saved_layer
        out_path = tmp_path / "expanded.mten"
        report_path = tmp_path / "report.json"
        code = cli.run(
            ["surgery", "--weights", str(path), "--mode", "replicate", "--n", "2",
             "--out-weights", str(out_path), "--out", str(report_path)]
        )
        assert code == 0
        got = load_conv_layer(out_path)
        want = expand_first_layer(layer, 2, "replicate")
        assert got.weight.tobytes() == want.weight.tobytes()
        assert got.bias.tobytes() == want.bias.tobytes()
        report = _envelope(report_path)
        assert report["results"] == {"in_shape": [4, 3, 3, 3], "out_shape": [4, 6, 3, 3], "bias": True}

    def test_random_mode_is_seeded(self, tmp_path, saved_layer):
        _, path = saved_layer
        outs = []
        for name in ("a.mten", "b.mten"):
            out_path = tmp_path / name
            code = cli.run(
                ["surgery", "--weights", str(path), "--mode", "random", "--n", "3",
                 "--seed", "5", "--out-weights", str(out_path)]
            )
            assert code == 0
            outs.append(load_conv_layer(out_path).weight.tobytes())
        assert outs[0] == outs[1]

    def test_invalid_factor_is_usage_error(self, tmp_path, saved_layer):
        # n comes straight from a flag, so the bare ValueError maps to 1
        _, path = saved_layer
        code = cli.run(
            ["surgery", "--weights", str(path), "--mode", "replicate", "--n", "0",
             "--out-weights", str(tmp_path / "x.mten")]
        )
        assert code == 1


class TestEval:
    def test_perfect_detections_score_one(self, tmp_path, scene12):
        dets_path = tmp_path / "dets.jsonl"
        assert cli.run(
            ["synth", "perturb", "--gt", str(scene12 / "gt.jsonl"),
             "--out-dets", str(dets_path)]
        ) == 0
        report_path = tmp_path / "report.json"
        assert cli.run(
            ["eval", "--dets", str(dets_path), "--gt", str(scene12 / "gt.jsonl"),
             "--out", str(report_path)]
        ) == 0
        report = _envelope(report_path)
        assert report["command"] == "eval"
        for key in ("map50", "map5095", "precision", "recall"):
            assert report["results"][key] == 1.0

    def test_rerun_writes_identical_report(self, tmp_path, scene12):
        dets_path = tmp_path / "dets.jsonl"
        cli.run(["synth", "perturb", "--gt", str(scene12 / "gt.jsonl"), "--jitter-px", "1.0",
                 "--out-dets", str(dets_path)])
        report_path = tmp_path / "report.json"
        argv = ["eval", "--dets", str(dets_path), "--gt", str(scene12 / "gt.jsonl"),
                "--out", str(report_path)]
        assert cli.run(argv) == 0
        first = report_path.read_bytes()
        assert cli.run(argv) == 0
        assert report_path.read_bytes() == first


class TestFeatures:
    def test_pools_boxes_like_library_call(self, tmp_path):
        rng = np.random.default_rng(3)
        fmap = rng.normal(0, 1, size=(2, 6, 8)).astype(np.float32)
        map_path = tmp_path / "map.mten"
        write_tensor(fmap, map_path)
        boxes = [[1.0, 1.0, 5.0, 4.0], [0.0, 0.0, 7.0, 5.0]]
        boxes_path = tmp_path / "boxes.json"
        boxes_path.write_text(json.dumps({"boxes": boxes}))
        out_path = tmp_path / "pooled.mten"
        code = cli.run(
            ["features", "--map", str(map_path), "--scale", "1.0", "--boxes", str(boxes_path),
             "--out-h", "2", "--out-w", "2", "--sampling-ratio", "1",
             "--out-features", str(out_path), "--out", str(tmp_path / "r.json")]
        )
        assert code == 0
        got = read_tensor(out_path)
        want = pool_boxes(FeatureMap(fmap, spatial_scale=1.0), np.array(boxes), 2, 2, 1)
        assert np.array_equal(got, want)
        report = _envelope(tmp_path / "r.json")
        assert report["results"] == {"num_boxes": 2, "channels": 2}

    def test_bare_list_boxes_accepted(self, tmp_path):
        write_tensor(np.ones((1, 4, 4), dtype=np.float32), tmp_path / "map.mten")
        (tmp_path / "boxes.json").write_text("[[0, 0, 3, 3]]")
        code = cli.run(
            ["features", "--map", str(tmp_path / "map.mten"), "--scale", "1.0",
             "--boxes", str(tmp_path / "boxes.json"), "--out-features", str(tmp_path / "p.mten")]
        )
        assert code == 0

    def test_nonpositive_scale_is_usage(self, tmp_path):
        write_tensor(np.ones((1, 4, 4), dtype=np.float32), tmp_path / "map.mten")
        (tmp_path / "boxes.json").write_text("[[0, 0, 3, 3]]")
        code = cli.run(
            ["features", "--map", str(tmp_path / "map.mten"), "--scale", "0",
             "--boxes", str(tmp_path / "boxes.json"), "--out-features", str(tmp_path / "p.mten")]
        )
        assert code == 1

    def test_empty_boxes_is_data_error(self, tmp_path):
        write_tensor(np.ones((1, 4, 4), dtype=np.float32), tmp_path / "map.mten")
        (tmp_path / "boxes.json").write_text("[]")
        code = cli.run(
            ["features", "--map", str(tmp_path / "map.mten"), "--scale", "1.0",
             "--boxes", str(tmp_path / "boxes.json"), "--out-features", str(tmp_path / "p.mten")]
        )
        assert code == 2


class TestMetricLearningPipeline:
    def test_mine_train_reid_project(self, tmp_path, capsys):
        scene = tmp_path / "scene"
        generate(SceneConfig(num_frames=20, num_objects=2, feature_dim=8, seed=21), scene)
        triplets_path = tmp_path / "triplets.jsonl"
        code = cli.run(
            ["mine", "--tracklets", str(scene / "tracklets.json"), "--seed", "3",
             "--out-triplets", str(triplets_path), "--out", str(tmp_path / "mine.json")]
        )
        assert code == 0
        mine_report = _envelope(tmp_path / "mine.json")
        assert mine_report["results"] == {"num_tracklets": 2, "num_kept": 2, "num_triplets": 40}

        net_dir = tmp_path / "net"
        code = cli.run(
            ["train", "--features", str(scene / "features.mten"),
             "--tracklets", str(scene / "tracklets.json"), "--triplets", str(triplets_path),
             "--epochs", "2", "--lr", "0.01", "--batch-size", "16", "--seed", "0",
             "--hidden", "8,6", "--out-dir", str(net_dir), "--out", str(tmp_path / "train.json")]
        )
        assert code == 0
        train_report = _envelope(tmp_path / "train.json")
        assert len(train_report["results"]["loss_trace"]) == 2
        assert train_report["inputs"]["hidden"] == [8, 6]
        net = load_net(net_dir / "net.json")
        assert net.in_dim == 8

        code = cli.run(
            ["reid", "--features", str(scene / "features.mten"),
             "--tracklets", str(scene / "tracklets.json"), "--net", str(net_dir / "net.json"),
             "--identity-map", str(scene / "identity_map.json"),
             "--out", str(tmp_path / "reid.json")]
        )
        assert code == 0
        reid_report = _envelope(tmp_path / "reid.json")
        assert isinstance(reid_report["results"]["merges"], list)
        assert reid_report["results"]["grouping"] == "identity_map"
        assert "ratio" in reid_report["results"]["separation"]

        csv_path = tmp_path / "scatter.csv"
        code = cli.run(
            ["project", "--features", str(scene / "features.mten"),
             "--tracklets", str(scene / "tracklets.json"), "--net", str(net_dir / "net.json"),
             "--out-csv", str(csv_path), "--out", str(tmp_path / "project.json")]
        )
        assert code == 0
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "id,frame,x,y"
        assert len(lines) == 41
        assert _envelope(tmp_path / "project.json")["results"] == {"num_points": 40, "embedded": True}
        capsys.readouterr()


class TestSynth:
    def test_generate_rerun_is_byte_identical(self, tmp_path):
        out_dir = tmp_path / "scene"
        report_path = tmp_path / "report.json"
        argv = ["synth", "generate", "--num-frames", "4", "--num-objects", "1",
                "--seed", "9", "--out-dir", str(out_dir), "--out", str(report_path)]
        assert cli.run(argv) == 0
        first = (_tree_bytes(out_dir), report_path.read_bytes())
        assert cli.run(argv) == 0
        assert (_tree_bytes(out_dir), report_path.read_bytes()) == first

    def test_switch_flag_splits_tracklets(self, tmp_path):
        out_dir = tmp_path / "scene"
        report_path = tmp_path / "report.json"
        code = cli.run(
            ["synth", "generate", "--num-frames", "8", "--num-objects", "1",
             "--switch", "0:5", "--out-dir", str(out_dir), "--out", str(report_path)]
        )
        assert code == 0
        report = _envelope(report_path)
        assert report["results"]["num_tracklets"] == 2
        assert json.loads((out_dir / "identity_map.json").read_text())["groups"] == [[0, 1]]

    def test_malformed_switch_is_usage(self, tmp_path):
        code = cli.run(
            ["synth", "generate", "--switch", "0-5", "--out-dir", str(tmp_path / "s")]
        )
        assert code == 1

    def test_out_of_range_switch_is_usage(self, tmp_path):
        code = cli.run(
            ["synth", "generate", "--num-objects", "1", "--switch", "5:3",
             "--out-dir", str(tmp_path / "s")]
        )
        assert code == 1

    def test_perturb_rates_validated(self, tmp_path, scene12):
        base = ["synth", "perturb", "--gt", str(scene12 / "gt.jsonl"),
                "--out-dets", str(tmp_path / "d.jsonl")]
        assert cli.run(base + ["--drop-rate", "1.5"]) == 1
        assert cli.run(base + ["--jitter-px", "-1"]) == 1
        assert cli.run(base + ["--canvas-width", "50"]) == 1

    def test_perturb_report_counts(self, tmp_path, scene12):
        report_path = tmp_path / "report.json"
        code = cli.run(
            ["synth", "perturb", "--gt", str(scene12 / "gt.jsonl"), "--fp-rate", "1.0",
             "--canvas-width", "96", "--canvas-height", "72",
             "--out-dets", str(tmp_path / "d.jsonl"), "--out", str(report_path)]
        )
        assert code == 0
        results = _envelope(report_path)["results"]
        assert results["num_ground_truth"] == 24
        assert results["num_true"] == 24
        assert results["num_false_positives"] == 12
        assert results["num_detections"] == 36


class TestConsoleScript:
    def test_installed_entry_point(self):
        exe = shutil.which("motionstack")
        assert exe is not None
        proc = subprocess.run([exe, "--help"], capture_output=True, text=True, timeout=60)
        assert proc.returncode == 0
        assert "stack" in proc.stdout and "synth" in proc.stdout
