from unittest.mock import patch

import numpy as np
import pytest
from pydantic import ValidationError

from src.data.dataset import DiscretizedDataset
from src.data.discretize import discretize_dataset
from src.eval.experiment import (
    CellSpec,
    ExperimentConfig,
    TrialResult,
    run_experiment,
    run_trial,
    structure_study,
    summarize,
    summary_to_frame,
)
from src.eval.metrics import mae_bar, select_extension_minmax, select_report_minmax, spearman
from src.eval.oracle import interventional_oracle
from src.eval.reproduce import reproduce, table_config
from src.graph.dag import Dag
from src.model.forest import ForestConfig, fit_forest, forest_labeler, predict
from src.scm.benchmarks import TARGET, make_benchmark
from src.scm.model import sample
from src.scoring.lewis import ScoreReport, explain
from src.scoring.probability import ProbabilityModel, do_prob
from src.utils.errors import ConfigError, ConstantVectorError, NoExtensionError, ShapeMismatchError

VARIABLES = ("A", "B", "C")


def _report(scores):
    return ScoreReport(VARIABLES, {v: {} for v in VARIABLES}, dict(zip(VARIABLES, scores)), None)


def _result(mae, spr=None, error=None):
    zeros = np.zeros(2)
    return TrialResult(0, "lingam", "0", ("A", "B"), zeros, zeros, mae=mae, spr=spr, error=error)


@pytest.fixture
def small_config():
    """Three-variable fork with a small forest so a trial runs quickly."""
    return ExperimentConfig(
        benchmark="E",
        sample_size=600,
        bins=4,
        forest=ForestConfig(n_trees=5, n_jobs=1),
        cells=[CellSpec(method="true"), CellSpec(method="lingam", mode="a")],
        trials=2,
        n_jobs=1,
    )


class TestMaeBar:
    """Tests for the averaged absolute error."""

    def test_identical_scores(self):
        """Test that equal vectors give zero."""
        # Act / Assert
        assert mae_bar([0.2, 0.5, 0.9], [0.2, 0.5, 0.9]) == 0.0

    def test_uniform_offset(self):
        """Test that a constant offset of 0.1 over trials and variables gives 0.1."""
        # Arrange
        true = np.array([[0.1, 0.2], [0.3, 0.4]])

        # Act / Assert
        assert mae_bar(true, true + 0.1) == pytest.approx(0.1)

    def test_single_error(self):
        """Test one error of 0.2 over three variables."""
        # Act / Assert
        assert mae_bar([0.0, 0.0, 0.0], [0.2, 0.0, 0.0]) == pytest.approx(0.0667, abs=1e-4)

    def test_shape_mismatch(self):
        """Test that unequal shapes are refused."""
        # Act / Assert
        with pytest.raises(ShapeMismatchError):
            mae_bar([0.1, 0.2], [0.1, 0.2, 0.3])


class TestSpearman:
    """Tests for the rank correlation."""

    def test_identical_order(self):
        """Test that the same ordering is exactly 1."""
        # Act / Assert
        assert spearman([0.1, 0.4, 0.2], [1, 9, 3]) == 1.0

    def test_reversed(self):
        """Test that seven reversed values are exactly -1."""
        # Arrange
        values = np.arange(7.0)

        # Act / Assert
        assert spearman(values, values[::-1]) == -1.0

    def test_one_swap(self):
        """Test (1, 2, 3) against (2, 1, 3) gives 0.5."""
        # Act / Assert
        assert spearman([1, 2, 3], [2, 1, 3]) == pytest.approx(0.5)

    def test_ties_use_average_ranks(self):
        """Test the tied case against the Pearson correlation of average ranks."""
        # Act / Assert
        assert spearman([1, 1, 2], [1, 2, 3]) == pytest.approx(np.sqrt(3) / 2)

    def test_constant_vector(self):
        """Test that a constant vector has no rank correlation."""
        # Act / Assert
        with pytest.raises(ConstantVectorError):
            spearman([0.3, 0.3, 0.3], [1, 2, 3])

    def test_length_mismatch(self):
        """Test that vectors of different length are refused."""
        # Act / Assert
        with pytest.raises(ShapeMismatchError):
            spearman([1, 2], [1, 2, 3])


class TestExtensionSelection:
    """Tests for the PC_Max / PC_Min choice."""

    def test_picks_extremes(self):
        """Test that the highest and lowest SPR reports are returned."""
        # Arrange
        true = [0.1, 0.5, 0.9]
        agreeing = _report([0.2, 0.6, 0.8])
        swapped = _report([0.6, 0.2, 0.8])
        reversed_ = _report([0.9, 0.5, 0.1])

        # Act
        selection = select_report_minmax([swapped, agreeing, reversed_], true, VARIABLES)

        # Assert
        assert selection.max_report is agreeing
        assert selection.min_report is reversed_
        assert selection.max_spr == 1.0
        assert selection.min_spr == -1.0
        assert selection.n_extensions == 3

    def test_undefined_spr_skipped(self):
        """Test that a constant report is passed over."""
        # Arrange
        flat = _report([0.0, 0.0, 0.0])
        swapped = _report([0.6, 0.2, 0.8])

        # Act
        selection = select_report_minmax([flat, swapped], [0.1, 0.5, 0.9], VARIABLES)

        # Assert
        assert selection.max_report is swapped
        assert selection.min_report is swapped
        assert selection.max_spr == pytest.approx(0.5)

    def test_empty(self):
        """Test that there must be at least one extension."""
        # Act / Assert
        with pytest.raises(NoExtensionError):
            select_report_minmax([], [0.1, 0.5, 0.9])

    def test_scores_each_extension(self):
        """Test that both orientations of X - Z are scored and reported as extensions."""
        # Arrange
        rng = np.random.default_rng(0)
        x = rng.integers(0, 3, size=300)
        z = rng.integers(0, 3, size=300)
        coded = DiscretizedDataset(("X", "Z"), np.column_stack([x, z]), (3, 3))
        labels = ((x + z + rng.integers(0, 2, size=300)) >= 3).astype(int)
        extensions = [Dag(("X", "Z"), frozenset({(0, 1)})), Dag(("X", "Z"), frozenset({(1, 0)}))]

        # Act
        selection = select_extension_minmax(extensions, coded, labels, [0.2, 0.9])

        # Assert
        assert selection.n_extensions == 2
        assert {selection.max_report.graph, selection.min_report.graph} <= set(extensions)


class TestSummarize:
    """Tests for folding trials into cell summaries."""

    def test_constant_mae(self):
        """Test that identical errors give a zero standard error."""
        # Act
        summary = summarize([_result(0.2, 1.0), _result(0.2, 0.5)])

        # Assert
        cell = summary.cell("lingam", "0")
        assert cell.mae_mean == pytest.approx(0.2)
        assert cell.mae_stderr == 0.0
        assert cell.spr_mean == pytest.approx(0.75)

    def test_two_values(self):
        """Test mean 0.2 and standard error 0.1 for errors 0.1 and 0.3."""
        # Act
        cell = summarize([_result(0.1), _result(0.3)]).cell("lingam", "0")

        # Assert
        assert cell.mae_mean == pytest.approx(0.2)
        assert cell.mae_stderr == pytest.approx(0.1)
        assert cell.spr_mean is None

    def test_failed_trials_counted(self):
        """Test that failed trials are excluded from N and counted as errors."""
        # Act
        cell = summarize([_result(0.1), _result(None, error="boom")]).cell("lingam", "0")

        # Assert
        assert cell.n_trials == 1
        assert cell.n_errors == 1

    def test_frame_columns(self):
        """Test the tabular form of a summary."""
        # Act
        frame = summary_to_frame(summarize([_result(0.1)]))

        # Assert
        assert frame.loc[0, "method"] == "lingam"
        assert frame.loc[0, "n_trials"] == 1


class TestExperimentConfig:
    """Tests for experiment configuration validation."""

    def test_resit_sink_rejected(self):
        """Test that RESIT cannot be paired with prior mode b."""
        # Act / Assert
        with pytest.raises(ValidationError):
            CellSpec(method="resit", mode="b")

    def test_duplicate_cells(self):
        """Test that a cell may only appear once."""
        # Act / Assert
        with pytest.raises(ValidationError):
            ExperimentConfig(cells=[CellSpec(method="pc"), CellSpec(method="pc")])

    def test_unknown_field(self):
        """Test that unknown keys are refused."""
        # Act / Assert
        with pytest.raises(ValidationError):
            ExperimentConfig(samples=10)

    def test_canned_table(self):
        """Test the nonlinear Gaussian table configuration."""
        # Act
        config = table_config(7, trials=3)

        # Assert
        assert (config.form, config.noise, config.trials) == ("nonlinear", "gaussian", 3)
        assert CellSpec(method="resit", mode="a") in config.cells

    def test_unknown_table(self):
        """Test that only tables 2 to 7 can be reproduced."""
        # Act / Assert
        with pytest.raises(ConfigError):
            reproduce([9])


@pytest.mark.slow
class TestRunTrial:
    """Tests for whole trials on a small benchmark."""

    def test_true_cell_is_exact(self, small_config):
        """Test that scoring with the generating graph has zero error."""
        # Act
        results = run_trial(small_config, 11)

        # Assert
        true = next(r for r in results if r.method == "true")
        assert true.mae == 0.0
        assert {r.method for r in results} == {"true", "lingam", "nograph"}

    def test_true_cell_scored_again(self, small_config):
        """Test that the true cell runs its own scoring pass instead of reusing the reference vector."""
        # Arrange
        config = small_config.model_copy(update={"cells": [CellSpec(method="true")], "include_no_graph": False})

        # Act
        with patch("src.eval.experiment.explain", wraps=explain) as scored:
            results = run_trial(config, 3)

        # Assert
        assert scored.call_count == 2
        assert results[0].est_scores is not results[0].true_scores
        assert np.array_equal(results[0].est_scores, results[0].true_scores)

    def test_same_seed_same_results(self, small_config):
        """Test that a trial is reproducible from its seed."""
        # Act
        first = run_trial(small_config, 5)
        second = run_trial(small_config, 5)

        # Assert
        for a, b in zip(first, second):
            assert a.method == b.method
            assert np.array_equal(a.est_scores, b.est_scores)

    def test_experiment_summary(self, small_config):
        """Test that every cell is summarized over both trials."""
        # Act
        summary = summarize(run_experiment(small_config, progress=False))

        # Assert
        assert summary.cell("true", "0").mae_mean == 0.0
        assert summary.cell("nograph", "-").n_trials + summary.cell("nograph", "-").n_errors == 2


@pytest.mark.slow
class TestInterventionalAgreement:
    """Tests comparing backdoor estimates with interventional sampling of the generating model."""

    @pytest.mark.parametrize("structure", ["A", "B", "C", "D", "E"])
    @pytest.mark.parametrize("form", ["linear", "nonlinear"])
    def test_backdoor_matches_sampled_intervention(self, structure, form):
        """Test that P(o | do(v = code)) agrees with sampling do(v) and labelling by the classifier."""
        # Arrange
        spec = make_benchmark(structure, form)
        observed = sample(spec, 20000, 4)
        coded = discretize_dataset(observed, 10, target=TARGET)
        features = coded.select(["X", "Z"])
        forest = fit_forest(features, coded.column(TARGET), ForestConfig(n_trees=25, n_jobs=1))
        labeler = forest_labeler(forest)
        model = ProbabilityModel(coded, predict(forest, features), spec.dag, TARGET, labeler)
        cells = [
            (name, code)
            for name in ("X", "Z")
            for code in coded.observed_codes(coded.index(name))
            if np.count_nonzero(coded.column(name) == code) >= 1000
        ]

        # Act
        gaps = [
            abs(model.do(coded.index(name), code)
                - interventional_oracle(spec, observed, coded, labeler, name, code, n=20000, seed=code))
            for name, code in cells
        ]

        # Assert
        assert cells
        assert max(gaps) < 0.05

    def test_fork_effect_is_flat(self):
        """Test that in Z -> X, Z -> Y every do(X = code) matches the sampled intervention and barely moves."""
        # Arrange
        spec = make_benchmark("E", "linear")
        observed = sample(spec, 5000, 0)
        coded = discretize_dataset(observed, 10, target=TARGET)
        features = coded.select(["X", "Z"])
        forest = fit_forest(features, coded.column(TARGET), ForestConfig(n_trees=25, n_jobs=1))
        labeler = forest_labeler(forest)
        labels = predict(forest, features)
        x = coded.index("X")

        # Act
        estimated = {code: do_prob(coded, labels, spec.dag, x, code, target=TARGET, labeler=labeler)
                     for code in coded.observed_codes(x)}
        sampled = {code: interventional_oracle(spec, observed, coded, labeler, "X", code, n=20000)
                   for code in estimated}

        # Assert
        assert all(abs(estimated[c] - sampled[c]) < 0.05 for c in estimated)
        assert max(estimated.values()) - min(estimated.values()) < 0.05


@pytest.mark.slow
class TestBenchmarkBehaviour:
    """Tests of the qualitative results on the artificial benchmarks."""

    def test_collider_stronger_cause(self):
        """Test that in X -> Y <- Z the heavier-weighted Z scores at least 0.9 and above X."""
        # Act
        table = structure_study("linear", trials=3, sample_size=5000, bins=10,
                                forest=ForestConfig(n_trees=25, n_jobs=1), n_jobs=1, structures=("A",))

        # Assert
        assert table.loc["A", "Z"] >= 0.9
        assert table.loc["A", "Z"] > table.loc["A", "X"]

    def test_lingam_beats_no_graph(self):
        """Test that LiNGAM without prior knowledge has lower error and no worse ranking than no graph."""
        # Arrange
        config = ExperimentConfig(
            benchmark="eight_var",
            form="linear",
            noise="uniform",
            sample_size=3000,
            bins=10,
            forest=ForestConfig(n_trees=25, n_jobs=1),
            cells=[CellSpec(method="lingam", mode="0")],
            trials=5,
            n_jobs=1,
        )

        # Act
        summary = summarize(run_experiment(config, progress=False))
        lingam, nograph = summary.cell("lingam", "0"), summary.cell("nograph", "-")

        # Assert
        assert lingam.mae_mean < nograph.mae_mean
        assert lingam.spr_mean >= nograph.spr_mean

    def test_sink_prior_helps_pc(self):
        """Test that the sink prior improves PC's best extension over plain PC and over no graph."""
        # Arrange
        config = ExperimentConfig(
            benchmark="eight_var",
            form="linear",
            noise="gaussian",
            sample_size=3000,
            bins=10,
            forest=ForestConfig(n_trees=25, n_jobs=1),
            cells=[CellSpec(method="pc", mode="0"), CellSpec(method="pc", mode="b")],
            trials=5,
            n_jobs=1,
        )

        # Act
        summary = summarize(run_experiment(config, progress=False))
        with_prior, plain = summary.cell("pc_max", "b"), summary.cell("pc_max", "0")

        # Assert
        assert with_prior.spr_mean >= plain.spr_mean
        assert with_prior.spr_mean > summary.cell("nograph", "-").spr_mean
        assert with_prior.mae_mean < plain.mae_mean
