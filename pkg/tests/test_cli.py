import json
from unittest.mock import patch

import numpy as np
import pytest

from src.cli.commands import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, run
from src.cli.parser import build_parser, resolve_config
from src.data.io import load_csv
from src.eval.experiment import TrialResult
from src.graph.dag import save_graph
from src.scm.benchmarks import make_benchmark
from src.scm.model import save_scm


@pytest.fixture
def fork_csv(tmp_path):
    """Structure E sample of 400 rows on disk."""
    path = tmp_path / "fork.csv"
    assert run(["simulate", "--structure", "E", "--n", "400", "--out", str(path)]) == EXIT_OK
    return path


@pytest.fixture
def labels_csv(tmp_path, fork_csv):
    """Alternating external predictions, one per row of the fork sample."""
    path = tmp_path / "preds.csv"
    labels = np.arange(load_csv(fork_csv).n_rows) % 2
    path.write_text("pred\n" + "\n".join(str(v) for v in labels) + "\n")
    return path


class TestParser:
    """Tests for flag parsing and validation."""

    def test_defaults(self):
        """Test that common flags fall back to their defaults."""
        # Arrange
        args = build_parser().parse_args(["simulate", "--structure", "A", "--out", "a.csv"])

        # Act
        cfg = resolve_config(args)

        # Assert
        assert (cfg.seed, cfg.bins, cfg.structure) == (0, 10, "A")

    def test_config_file_overrides(self, tmp_path):
        """Test that config file keys win over the flags."""
        # Arrange
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"n": 50, "seed": 9}))
        args = build_parser().parse_args(
            ["simulate", "--structure", "A", "--n", "10", "--out", "a.csv", "--config", str(config)]
        )

        # Act
        cfg = resolve_config(args)

        # Assert
        assert (cfg.n, cfg.seed) == (50, 9)


class TestSimulate:
    """Tests for the simulate command."""

    def test_writes_sample_and_model(self, tmp_path):
        """Test that the CSV has the requested shape and the SCM is saved next to it."""
        # Arrange
        out = tmp_path / "a.csv"

        # Act
        code = run(["simulate", "--structure", "A", "--n", "500", "--out", str(out)])

        # Assert
        data = load_csv(out)
        assert code == EXIT_OK
        assert data.values.shape == (500, 3)
        assert (tmp_path / "a.scm.json").exists()

    def test_custom_model(self, tmp_path):
        """Test sampling a model read from JSON."""
        # Arrange
        spec_path = tmp_path / "c.json"
        save_scm(make_benchmark("C", "linear"), spec_path)
        out = tmp_path / "c.csv"

        # Act
        code = run(["simulate", "--spec", str(spec_path), "--n", "20", "--out", str(out)])

        # Assert
        assert code == EXIT_OK
        assert load_csv(out).columns == ("X", "Z", "Y")

    def test_invalid_structure(self, tmp_path):
        """Test that an unknown structure is a usage error."""
        # Act / Assert
        assert run(["simulate", "--structure", "F", "--out", str(tmp_path / "f.csv")]) == EXIT_USAGE

    def test_missing_output(self):
        """Test that --out is required."""
        # Act / Assert
        assert run(["simulate", "--structure", "A"]) == EXIT_USAGE

    def test_structure_and_spec_exclusive(self, tmp_path):
        """Test that a benchmark and a custom model cannot both be given."""
        # Act / Assert
        assert run(
            ["simulate", "--structure", "A", "--spec", "x.json", "--out", str(tmp_path / "a.csv")]
        ) == EXIT_USAGE

    def test_unknown_config_key(self, tmp_path):
        """Test that an unknown key in the config file is a usage error."""
        # Arrange
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"rows": 10}))

        # Act / Assert
        assert run(
            ["simulate", "--structure", "A", "--out", str(tmp_path / "a.csv"), "--config", str(config)]
        ) == EXIT_USAGE


class TestDiscover:
    """Tests for the discover command."""

    def test_lingam_graph(self, tmp_path, fork_csv):
        """Test that a single graph is written with the target as a sink."""
        # Arrange
        out = tmp_path / "graph.json"

        # Act
        code = run(["discover", "--data", str(fork_csv), "--target", "Y", "--method", "lingam",
                    "--prior", "b", "--out", str(out)])

        # Assert
        payload = json.loads(out.read_text())
        assert code == EXIT_OK
        assert payload["method"] == "lingam"
        assert all(edge[0] != 2 for edge in payload["graph"]["directed"])
        assert (tmp_path / "graph.adjacency.csv").exists()

    def test_unsupported_mode(self, tmp_path, fork_csv):
        """Test that RESIT with the sink prior is a usage error."""
        # Act / Assert
        assert run(["discover", "--data", str(fork_csv), "--target", "Y", "--method", "resit",
                    "--prior", "b", "--out", str(tmp_path / "g.json")]) == EXIT_USAGE

    def test_unknown_target(self, tmp_path, fork_csv):
        """Test that a target outside the columns is a usage error."""
        # Act / Assert
        assert run(["discover", "--data", str(fork_csv), "--target", "Q", "--method", "pc",
                    "--out", str(tmp_path / "g.json")]) == EXIT_USAGE

    def test_missing_data_file(self, tmp_path):
        """Test that an unreadable input is a runtime error."""
        # Act / Assert
        assert run(["discover", "--data", str(tmp_path / "none.csv"), "--target", "Y", "--method", "pc",
                    "--out", str(tmp_path / "g.json")]) == EXIT_RUNTIME

    def test_malformed_kinds_sidecar(self, tmp_path, fork_csv):
        """Test that a broken kinds sidecar next to the data is a runtime error."""
        # Arrange
        fork_csv.with_name("fork.kinds.json").write_text("{not json")

        # Act / Assert
        assert run(["discover", "--data", str(fork_csv), "--target", "Y", "--method", "pc",
                    "--out", str(tmp_path / "g.json")]) == EXIT_RUNTIME


class TestExplain:
    """Tests for the explain command."""

    def test_no_graph_report(self, tmp_path, fork_csv, labels_csv):
        """Test that the no-graph report is flagged and covers X and Z."""
        # Arrange
        out_dir = tmp_path / "out"

        # Act
        code = run(["explain", "--data", str(fork_csv), "--target", "Y", "--no-graph",
                    "--labels-csv", str(labels_csv), "--bins", "4", "--out-dir", str(out_dir)])

        # Assert
        payload = json.loads((out_dir / "report.json").read_text())
        assert code == EXIT_OK
        assert payload["no_graph"] is True
        assert set(payload["variables"]) == {"X", "Z"}
        assert (out_dir / "report.csv").exists()
        assert json.loads((out_dir / "bins.json").read_text())["X"]["bins"] == 4

    def test_graph_file(self, tmp_path, fork_csv, labels_csv):
        """Test that a supplied graph sets the adjustment sets."""
        # Arrange
        graph = tmp_path / "true.json"
        save_graph(make_benchmark("E", "linear").dag, graph)
        out_dir = tmp_path / "out"

        # Act
        code = run(["explain", "--data", str(fork_csv), "--target", "Y", "--graph", str(graph),
                    "--labels-csv", str(labels_csv), "--bins", "4", "--out-dir", str(out_dir)])

        # Assert
        payload = json.loads((out_dir / "report.json").read_text())
        assert code == EXIT_OK
        assert payload["no_graph"] is False
        assert payload["variables"]["X"]["adjustment_set"] == ["Z"]

    def test_forest_labels_with_discovery(self, tmp_path, fork_csv):
        """Test the full path with forest labels and a discovered graph."""
        # Arrange
        out_dir = tmp_path / "out"

        # Act
        code = run(["explain", "--data", str(fork_csv), "--target", "Y", "--method", "lingam",
                    "--prior", "a", "--bins", "4", "--jobs", "1", "--out-dir", str(out_dir)])

        # Assert
        assert code == EXIT_OK
        assert (out_dir / "graph.json").exists()
        assert (out_dir / "report.json").exists()

    def test_graph_sources_exclusive(self, tmp_path, fork_csv):
        """Test that --graph and --no-graph cannot be combined."""
        # Act / Assert
        assert run(["explain", "--data", str(fork_csv), "--target", "Y", "--graph", "g.json",
                    "--no-graph", "--out-dir", str(tmp_path)]) == EXIT_USAGE

    def test_graph_source_required(self, tmp_path, fork_csv):
        """Test that one graph source must be chosen."""
        # Act / Assert
        assert run(["explain", "--data", str(fork_csv), "--target", "Y", "--out-dir", str(tmp_path)]) == EXIT_USAGE

    def test_label_count_mismatch(self, tmp_path, fork_csv):
        """Test that external labels must match the rows."""
        # Arrange
        labels = tmp_path / "short.csv"
        labels.write_text("pred\n1\n0\n")

        # Act / Assert
        assert run(["explain", "--data", str(fork_csv), "--target", "Y", "--no-graph",
                    "--labels-csv", str(labels), "--out-dir", str(tmp_path / "out")]) == EXIT_RUNTIME


class TestEvaluate:
    """Tests for the evaluate command."""

    def test_writes_summary(self, tmp_path):
        """Test that the experiment summary is written with one row per cell."""
        # Arrange
        experiment = tmp_path / "exp.json"
        experiment.write_text(json.dumps({"benchmark": "E", "cells": [{"method": "true"}]}))
        out = tmp_path / "summary.csv"
        zeros = np.zeros(2)
        fake = [TrialResult(s, "true", "0", ("X", "Z"), zeros, zeros, mae=0.0, spr=None) for s in range(3)]

        # Act
        with patch("src.cli.commands.run_experiment", return_value=fake) as runner:
            code = run(["evaluate", "--experiment", str(experiment), "--trials", "3", "--out", str(out)])

        # Assert
        config = runner.call_args.args[0]
        assert code == EXIT_OK
        assert config.trials == 3
        assert config.benchmark == "E"
        assert out.read_text().splitlines()[0].startswith("method,mode,mae_mean")

    def test_invalid_experiment(self, tmp_path):
        """Test that an invalid experiment file is a usage error."""
        # Arrange
        experiment = tmp_path / "exp.json"
        experiment.write_text(json.dumps({"cells": [{"method": "resit", "mode": "b"}]}))

        # Act / Assert
        assert run(["evaluate", "--experiment", str(experiment), "--out", str(tmp_path / "s.csv")]) == EXIT_USAGE


class TestReproduce:
    """Tests for the reproduce command."""

    def test_unknown_table(self):
        """Test that only tables 2 to 7 are accepted."""
        # Act / Assert
        assert run(["reproduce", "--tables", "8"]) == EXIT_USAGE


@pytest.mark.slow
class TestDemoCredit:
    """Tests for the credit-rating walkthrough."""

    def test_outputs(self, tmp_path):
        """Test that the report, the reversal table and both graphs are written."""
        # Act
        code = run(["demo-credit", "--n", "1500", "--jobs", "1", "--out-dir", str(tmp_path)])

        # Assert
        assert code == EXIT_OK
        for name in ("report.json", "report.csv", "reversal.csv", "graph.json", "true_graph.json"):
            assert (tmp_path / name).exists()

    def test_industry_ranked_first(self, tmp_path):
        """Test that the estimated graph keeps industry a root and the rating a sink, and industry scores highest."""
        # Act
        code = run(["demo-credit", "--n", "3000", "--jobs", "1", "--out-dir", str(tmp_path)])
        graph = json.loads((tmp_path / "graph.json").read_text())
        report = json.loads((tmp_path / "report.json").read_text())

        # Assert
        assert code == EXIT_OK
        nodes = graph["nodes"]
        industry, rating = nodes.index("industry"), nodes.index("rating")
        assert all(child != industry for _, child in graph["directed"])
        assert all(parent != rating for parent, _ in graph["directed"])
        scores = {name: entry["max_nesuf"] or 0.0 for name, entry in report["variables"].items()}
        assert max(scores, key=scores.get) == "industry"
