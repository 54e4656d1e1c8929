"""Tests for the viewsel tasks module."""
import json
from pathlib import Path
from unittest.mock import MagicMock, patch

import pytest
import yaml
from invoke.context import Context
from invoke.exceptions import Exit, ParseError

from viewsel.bench.scaling import BenchReport
from viewsel.pipeline.config import CONFIG_FILENAME
from viewsel.pipeline.manifest import INDEX_FILENAME
from viewsel.pipeline.stats import RUN_RECORD_FILENAME, load_run_record
from viewsel.selection.problem import WarmStartMode
from viewsel.tasks import bench, pipeline_config_from_flags, run, stats, synth, validate

FAST = {"resolution": 2.0, "node_limit": 200, "jobs": 1}


def make_ctx() -> MagicMock:
    return MagicMock(spec=Context)


@pytest.fixture
def workdir(tmp_path: Path, monkeypatch) -> Path:
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def scene_file(workdir: Path) -> Path:
    path = workdir / "scene.txt"
    synth(make_ctx(), out=str(path), duration=10.0, framerate=2.0, seed=1)
    return path


# ─────────────────────────────────────────────────────────────
# synth
# ─────────────────────────────────────────────────────────────


class TestSynth:
    def test_writes_scene(self, workdir, capsys):
        synth(make_ctx(), out="street.txt", duration=2.0, framerate=5.0)
        assert (workdir / "street.txt").read_text().splitlines()[1].startswith("CAM 0 ")
        assert "✅ Wrote 70 cameras" in capsys.readouterr().out

    def test_kind_is_case_insensitive(self, workdir):
        synth(make_ctx(), out="loop.txt", kind="Roundabout", duration=2.0, framerate=2.0)
        assert (workdir / "loop.txt").exists()

    def test_unknown_kind_exits_1(self, workdir):
        with pytest.raises(Exit) as exc:
            synth(make_ctx(), kind="zigzag")
        assert exc.value.code == 1
        assert "zigzag" in exc.value.message

    def test_invalid_parameter_exits_1(self, workdir):
        with pytest.raises(Exit) as exc:
            synth(make_ctx(), duration=-1.0)
        assert exc.value.code == 1
        assert "duration" in exc.value.message


# ─────────────────────────────────────────────────────────────
# run
# ─────────────────────────────────────────────────────────────


class TestRun:
    def test_writes_manifests_and_record(self, scene_file, workdir, capsys):
        run(make_ctx(), scene=str(scene_file), out="out", **FAST)
        out_dir = workdir / "out"
        index = json.loads((out_dir / INDEX_FILENAME).read_text())
        assert index["clusters"]
        for entry in index["clusters"]:
            assert (out_dir / entry["file"]).exists()
        record = load_run_record(out_dir / RUN_RECORD_FILENAME)
        assert record.n_input_views == 140
        assert record.name == "scene"
        assert record.config["grid"]["sample_resolution"] == 2.0
        text = capsys.readouterr().out
        assert "📦 Loading scene" in text
        assert f"✅ Wrote {len(index['clusters'])} manifests" in text

    def test_dump_writes_debug_files(self, scene_file, workdir):
        run(make_ctx(), scene=str(scene_file), out="out", dump=True, **FAST)
        debug = workdir / "out" / "debug"
        lp_files = sorted(debug.glob("cluster_*.lp"))
        assert lp_files
        assert lp_files[0].read_text().startswith("\\ view selection")
        assert sorted(debug.glob("cluster_*_visibility.txt"))
        assert sorted(debug.glob("cluster_*_similarity.txt"))

    def test_missing_scene_exits_1(self, workdir):
        with pytest.raises(Exit) as exc:
            run(make_ctx(), scene="missing.txt")
        assert exc.value.code == 1
        assert "scene file not found" in exc.value.message
        assert "missing.txt" in exc.value.message

    def test_bad_config_exits_1(self, scene_file, workdir):
        (workdir / CONFIG_FILENAME).write_text(yaml.dump({"grid": {"block_x": -5.0}}))
        with pytest.raises(Exit) as exc:
            run(make_ctx(), scene=str(scene_file), **FAST)
        assert exc.value.code == 1
        assert not (workdir / "viewsel-out").exists()


class TestPipelineConfigFromFlags:
    def test_defaults_without_a_file(self, workdir):
        cfg = pipeline_config_from_flags("", block_x=None, jobs=None)
        assert cfg.grid.block_x == 20.0
        assert cfg.parallelism == 0

    def test_file_beats_flags_not_given(self, workdir):
        path = workdir / "custom.yaml"
        path.write_text(yaml.dump({"grid": {"block_x": 30.0}, "parallelism": 3}))
        cfg = pipeline_config_from_flags(str(path), block_x=None, jobs=None)
        assert cfg.grid.block_x == 30.0
        assert cfg.parallelism == 3

    def test_explicit_flags_beat_the_file(self, workdir):
        path = workdir / "custom.yaml"
        path.write_text(yaml.dump({"grid": {"block_x": 30.0}}))
        cfg = pipeline_config_from_flags(str(path), block_x=25.0, warm_start="hardfix", jobs=2)
        assert cfg.grid.block_x == 25.0
        assert cfg.select.warm_start_mode is WarmStartMode.HARD_FIX
        assert cfg.parallelism == 2

    def test_flag_equal_to_default_still_beats_the_file(self, workdir):
        path = workdir / "custom.yaml"
        path.write_text(yaml.dump({"selection": {"n_vis": 3}, "parallelism": 4}))
        cfg = pipeline_config_from_flags(str(path), n_vis="2", jobs="0")
        assert cfg.select.n_vis == 2
        assert cfg.parallelism == 0

    def test_command_line_strings_are_converted(self, workdir):
        cfg = pipeline_config_from_flags("", block_x="25", node_limit="500", warm_start="hardfix")
        assert cfg.grid.block_x == 25.0
        assert cfg.select.node_limit == 500
        assert cfg.select.warm_start_mode is WarmStartMode.HARD_FIX

    def test_unconvertible_string_is_a_parse_error(self, workdir):
        with pytest.raises(ParseError, match="--node-limit expects int"):
            pipeline_config_from_flags("", node_limit="lots")

    def test_discovers_config_in_cwd(self, workdir):
        (workdir / CONFIG_FILENAME).write_text(yaml.dump({"association": {"max_depth": 70.0}}))
        cfg = pipeline_config_from_flags("", max_depth=None)
        assert cfg.assoc.max_depth == 70.0


# ─────────────────────────────────────────────────────────────
# stats
# ─────────────────────────────────────────────────────────────


class TestStats:
    @pytest.fixture
    def out_dir(self, scene_file, workdir) -> Path:
        run(make_ctx(), scene=str(scene_file), out="out", **FAST)
        return workdir / "out"

    def test_renders_table(self, out_dir, capsys):
        capsys.readouterr()
        stats(make_ctx(), record=str(out_dir))
        text = capsys.readouterr().out
        assert text.splitlines()[0].split() == ["scene"]
        assert "K after clustering" in text

    def test_renders_csv_for_several_records(self, out_dir, capsys):
        capsys.readouterr()
        stats(make_ctx(), record=f"{out_dir},{out_dir / RUN_RECORD_FILENAME}", csv=True)
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("name,")
        assert len(lines) == 3

    def test_missing_record_exits_1(self, workdir):
        with pytest.raises(Exit) as exc:
            stats(make_ctx(), record=str(workdir))
        assert exc.value.code == 1
        assert "run record not found" in exc.value.message


# ─────────────────────────────────────────────────────────────
# validate
# ─────────────────────────────────────────────────────────────


class TestValidate:
    def test_valid_scene(self, scene_file, capsys):
        validate(make_ctx(), scene=str(scene_file))
        text = capsys.readouterr().out
        assert "📦 140 cameras" in text
        assert "✅ Scene is valid." in text

    def test_also_checks_config(self, scene_file, workdir, capsys):
        path = workdir / CONFIG_FILENAME
        path.write_text(yaml.dump({"selection": {"n_vis": 3}}))
        validate(make_ctx(), scene=str(scene_file), config=str(path))
        assert f"✅ {path} is valid." in capsys.readouterr().out

    def test_invalid_config_exits_1(self, scene_file, workdir):
        path = workdir / CONFIG_FILENAME
        path.write_text(yaml.dump({"bogus": 1}))
        with pytest.raises(Exit) as exc:
            validate(make_ctx(), scene=str(scene_file), config=str(path))
        assert exc.value.code == 1
        assert "unknown section 'bogus'" in exc.value.message

    def test_malformed_scene_exits_1(self, workdir):
        (workdir / "bad.txt").write_text("FOO 1 2 3\n")
        with pytest.raises(Exit) as exc:
            validate(make_ctx(), scene="bad.txt")
        assert exc.value.code == 1
        assert "line 1" in exc.value.message


# ─────────────────────────────────────────────────────────────
# bench
# ─────────────────────────────────────────────────────────────


class TestBench:
    def test_passes_sizes_and_writes_csv(self, workdir, capsys):
        with patch(
            "viewsel.tasks.run_scaling_benchmark",
            return_value=BenchReport(rows=(), parallelism=1),
        ) as bench_mock:
            bench(make_ctx(), sizes="100, 200", out="bench.csv", jobs=1)
        args, kwargs = bench_mock.call_args
        assert args[0] == [100, 200]
        assert kwargs["cfg"].parallelism == 1
        assert kwargs["baseline_max_views"] == 2000
        assert (workdir / "bench.csv").read_text().startswith("# viewsel bench v1 parallelism=1")
        text = capsys.readouterr().out
        assert "impractical" in text
        assert "✅ Wrote benchmark report to bench.csv" in text

    def test_non_numeric_sizes_exit_1(self, workdir):
        with pytest.raises(Exit) as exc:
            bench(make_ctx(), sizes="a,b")
        assert exc.value.code == 1
