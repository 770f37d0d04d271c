#!/usr/bin/env python3
"""
Tests for the slimedge command line and its output files
"""

import json
import sys
from pathlib import Path

import pytest
from typer.testing import CliRunner

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from errors import ConfigError
from report_io import TOOL_NAME, config_hash, read_csv
from simlab import preset_cluster
from slimedge_cli import EXIT_ERROR, EXIT_OK, app, load_cluster_file, parse_grid, parse_hyper

runner = CliRunner()
QUICK = ["--hyper", "pop_size=16", "--hyper", "n_generations=8"]


def invoke(*args):
    return runner.invoke(app, [str(a) for a in args])


class TestParsing:
    """Flag parsing helpers"""

    def test_grid(self):
        """Inclusive grid of 50 levels"""
        levels = parse_grid("0:0.98:0.02")
        assert len(levels) == 50
        assert levels[0] == 0.0 and levels[-1] == 0.98

    def test_bad_grid(self):
        """Malformed or out-of-range grids are config errors"""
        for text in ("0:1", "0.5:0.1:0.1", "0:1.2:0.1"):
            with pytest.raises(ConfigError):
                parse_grid(text)

    def test_hyper(self):
        """key=val pairs"""
        assert parse_hyper(["alpha=2", " omega = 3 "]) == {"alpha": "2", "omega": "3"}
        with pytest.raises(ConfigError):
            parse_hyper(["alpha"])

    def test_config_hash_stable(self):
        """Key order does not change the hash"""
        assert config_hash({"a": 1, "b": [1.0, 2]}) == config_hash({"b": [1.0, 2], "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})


class TestClusterFile:
    """Strict cluster loading"""

    def test_round_trip(self, tmp_path):
        """A preset written as JSON loads back unchanged"""
        cluster = preset_cluster("exp1")
        path = tmp_path / "cluster.json"
        path.write_text(json.dumps(cluster.to_dict()))
        assert load_cluster_file(path) == cluster

    def test_bad_json_location(self, tmp_path):
        """Parse errors carry line and column"""
        path = tmp_path / "broken.json"
        path.write_text('{\n  "devices": [,]\n}')
        with pytest.raises(ConfigError) as exc:
            load_cluster_file(path)
        assert exc.value.line == 2
        assert exc.value.column is not None

    def test_missing_field(self, tmp_path):
        """A missing key is named"""
        data = preset_cluster("exp1").to_dict()
        del data["min_accuracy"]
        path = tmp_path / "partial.json"
        path.write_text(json.dumps(data))
        with pytest.raises(ConfigError) as exc:
            load_cluster_file(path)
        assert exc.value.field == "min_accuracy"


class TestOptimizeCommand:
    """slimedge optimize"""

    def test_writes_outputs(self, tmp_path):
        """Feasible preset exits 0 and writes three files"""
        result = invoke("optimize", "--preset", "exp1", "--seed", 7, "--out", tmp_path, *QUICK)
        assert result.exit_code == EXIT_OK, result.output
        for name in ("report.json", "front.csv", "generations.csv"):
            assert (tmp_path / name).is_file()
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["meta"]["seed"] == 7
        assert report["meta"]["tool"] == TOOL_NAME
        assert report["path"] == "nsga2"
        assert (tmp_path / "front.csv").read_text().startswith(f"# tool={TOOL_NAME}")

    def test_repeatable(self, tmp_path):
        """Same seed and config give byte-identical files"""
        a, b = tmp_path / "a", tmp_path / "b"
        invoke("optimize", "--preset", "exp2", "--seed", 3, "--out", a, *QUICK)
        invoke("optimize", "--preset", "exp2", "--seed", 3, "--out", b, *QUICK)
        for name in ("report.json", "front.csv", "generations.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_missing_cluster_file(self, tmp_path):
        """A missing file exits 1 and names the path"""
        missing = tmp_path / "nope.json"
        result = invoke("optimize", "--cluster", missing, "--out", tmp_path)
        assert result.exit_code == EXIT_ERROR
        assert "nope.json" in result.output

    def test_bad_hyper(self, tmp_path):
        """Unknown hyperparameters are errors"""
        result = invoke("optimize", "--preset", "exp1", "--out", tmp_path, "--hyper", "warp=9")
        assert result.exit_code == EXIT_ERROR

    def test_odd_population_is_rejected(self, tmp_path):
        """An odd pop_size is a config error with a one-line diagnostic"""
        result = invoke("optimize", "--preset", "exp1", "--out", tmp_path, "--hyper", "pop_size=65")
        assert result.exit_code == EXIT_ERROR
        assert result.exception is None or isinstance(result.exception, SystemExit)
        assert not (tmp_path / "report.json").exists()

    def test_needs_a_cluster(self, tmp_path):
        """Neither --preset nor --cluster is an error"""
        assert invoke("optimize", "--out", tmp_path).exit_code == EXIT_ERROR

    def test_bad_surrogate_dataset(self, tmp_path):
        """A malformed surrogate dataset exits 1 instead of raising"""
        data = tmp_path / "bad.csv"
        data.write_text("p0,p1,p2,accuracy\n0.1,0.2,x,0.8\n", encoding="utf-8")
        result = invoke("optimize", "--preset", "exp2", "--model", f"surrogate:{data}", "--out", tmp_path / "out", *QUICK)
        assert result.exit_code == EXIT_ERROR
        assert not isinstance(result.exception, ValueError)


class TestOtherCommands:
    """sweep, importance, batch and presets"""

    def test_sweep(self, tmp_path):
        """Default grid writes 50 rows"""
        result = invoke("sweep", "--out", tmp_path)
        assert result.exit_code == EXIT_OK, result.output
        rows = read_csv(tmp_path / "sweep.csv")
        assert len(rows) == 50
        assert float(rows[0]["latency_norm"]) == 1.0

    def test_importance_uniform(self, tmp_path):
        """A model with uniform salience gives near-uniform importance"""
        result = invoke("importance", "--views", 4, "--probes", 2000, "--out", tmp_path)
        assert result.exit_code == EXIT_OK, result.output
        scores = [float(r["importance"]) for r in read_csv(tmp_path / "importance.csv")]
        assert len(scores) == 4
        assert sum(scores) == pytest.approx(1.0)
        assert max(scores) - min(scores) < 0.1

    def test_batch(self, tmp_path):
        """Batch writes one row per instance plus a summary"""
        result = invoke("batch", "--n", 3, "--views", 4, "--out", tmp_path, "--seed", 5, *QUICK)
        assert result.exit_code == EXIT_OK, result.output
        assert len(read_csv(tmp_path / "batch.csv")) == 3
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["n"] == 3
        assert summary["solved"] + summary["unsolved"] == 3

    def test_presets(self):
        """Listing names every preset"""
        result = invoke("presets")
        assert result.exit_code == EXIT_OK
        for pid in ("exp1", "exp2", "exp3", "exp4", "exp5"):
            assert pid in result.output


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
