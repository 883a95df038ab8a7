import json
import warnings

import numpy as np
import pytest

from src.data.dataset import DiscretizedDataset
from src.data.discretize import discretize_dataset
from src.eval.experiment import structure_study
from src.graph.dag import Dag
from src.model.forest import ForestConfig, fit_forest, forest_labeler, predict
from src.scm.benchmarks import make_benchmark
from src.scm.model import sample
from src.scoring.lewis import ScoreQuery, ScoreTriple, explain, max_nesuf, scores_for_pair
from src.scoring.probability import NEGATIVE, POSITIVE, ProbabilityModel, cond_prob, do_prob
from src.scoring.report import report_frame, reversal_table, write_report_json
from src.utils.errors import EmptyCellError, NoValidPairError, ReverseCausationWarning, UndefinedScoreError


def _coded(columns, rows, bins=None):
    codes = np.asarray(rows, dtype=int).reshape(len(rows), len(columns))
    bins = bins or tuple(int(codes[:, c].max()) + 1 if codes.size else 2 for c in range(len(columns)))
    return DiscretizedDataset(tuple(columns), codes, tuple(max(k, 2) for k in bins))


@pytest.fixture
def binary_x():
    """X = 1 on ten rows with nine positives, X = 0 on ten rows with five."""
    data = _coded(["X"], [[1]] * 10 + [[0]] * 10)
    labels = np.array([1] * 9 + [0] + [1] * 5 + [0] * 5)
    return data, labels


@pytest.fixture
def confounded():
    """Binary Z with P(z=1) = 0.5; at X = 1, P(o | z=0) = 0.2 and P(o | z=1) = 0.8."""
    rows = [[1, 0]] * 5 + [[1, 1]] * 5 + [[0, 0]] * 5 + [[0, 1]] * 5
    labels = [1, 0, 0, 0, 0] + [1, 1, 1, 1, 0] + [0] * 5 + [1] * 5
    data = _coded(["X", "Z"], rows)
    graph = Dag(("X", "Z"), frozenset({(1, 0)}))
    return data, np.array(labels), graph


class TestCondProb:
    """Tests for empirical conditional probabilities."""

    def test_counting(self):
        """Test that 3 positives among 4 rows with X = 1 give 0.75."""
        # Arrange
        data = _coded(["X"], [[1]] * 4 + [[0]] * 6)
        labels = [1, 1, 1, 0, 0, 0, 1, 0, 0, 0]

        # Act / Assert
        assert cond_prob(data, labels, POSITIVE, {0: 1}) == 0.75

    def test_no_conditions(self):
        """Test that empty conditions give the marginal label frequency."""
        # Arrange
        data = _coded(["X"], [[0]] * 4)

        # Act / Assert
        assert cond_prob(data, [1, 0, 0, 1], POSITIVE, {}) == 0.5

    def test_absent_code(self):
        """Test that a code with no rows is an empty cell."""
        # Arrange
        data = _coded(["X"], [[0], [1]], bins=(3,))

        # Act / Assert
        with pytest.raises(EmptyCellError):
            cond_prob(data, [0, 1], POSITIVE, {0: 2})


class TestDoProb:
    """Tests for backdoor-adjusted interventional probabilities."""

    def test_adjustment_sum(self, confounded):
        """Test 0.5 * 0.2 + 0.5 * 0.8 = 0.5."""
        # Arrange
        data, labels, graph = confounded

        # Act
        value = do_prob(data, labels, graph, 0, 1)

        # Assert
        assert value == pytest.approx(0.5)

    def test_parentless_equals_conditional(self, confounded):
        """Test that without parents the interventional value is the conditional one."""
        # Arrange
        data, labels, _ = confounded
        graph = Dag(("X", "Z"), frozenset())

        # Act / Assert
        assert do_prob(data, labels, graph, 0, 1, NEGATIVE) == cond_prob(data, labels, NEGATIVE, {0: 1})

    def test_empty_strata_skipped(self):
        """Test that a stratum without rows at X = x is dropped and the weights renormalized."""
        # Arrange: Z = 2 never occurs with X = 1
        rows = [[1, 0], [1, 0], [1, 1], [1, 1], [0, 2], [0, 2]]
        data = _coded(["X", "Z"], rows)
        labels = [1, 1, 0, 0, 1, 0]
        model = ProbabilityModel(data, labels, Dag(("X", "Z"), frozenset({(1, 0)})))

        # Act
        adjustment = model.do_positive(0, 1)

        # Assert
        assert adjustment.value == pytest.approx(0.5)
        assert adjustment.coverage == pytest.approx(4 / 6)
        assert adjustment.empty_strata == 1
        assert adjustment.adjustment_set == ("Z",)

    def test_empty_stratum_filled_from_classifier(self):
        """Test that a labeler fills the stratum without rows at X = x and keeps its full weight."""
        # Arrange: Z = 2 never occurs with X = 1; the classifier says positive there
        rows = [[1, 0], [1, 0], [1, 1], [1, 1], [0, 2], [0, 2]]
        data = _coded(["X", "Z"], rows)
        labels = [1, 1, 0, 0, 1, 0]

        def labeler(coded):
            return ((coded.column("X") == 1) & (coded.column("Z") == 2)).astype(int)

        model = ProbabilityModel(data, labels, Dag(("X", "Z"), frozenset({(1, 0)})), labeler=labeler)

        # Act
        adjustment = model.do_positive(0, 1)

        # Assert
        assert adjustment.value == pytest.approx(2 / 6 * 1.0 + 2 / 6 * 0.0 + 2 / 6 * 1.0)
        assert adjustment.coverage == pytest.approx(4 / 6)
        assert adjustment.imputed_strata == 1
        assert not adjustment.renormalized
        assert model.supported(0, 1)

    def test_low_coverage_unsupported(self):
        """Test that dropping most of the adjustment weight marks the code unsupported."""
        # Arrange: X = 1 only occurs in the Z = 0 stratum, which holds 3 of 7 rows
        rows = [[1, 0], [1, 0], [0, 0], [0, 1], [0, 1], [0, 2], [0, 2]]
        data = _coded(["X", "Z"], rows)
        labels = [1, 0, 0, 1, 0, 1, 0]
        graph = Dag(("X", "Z"), frozenset({(1, 0)}))
        model = ProbabilityModel(data, labels, graph)

        # Act
        adjustment = model.do_positive(0, 1)

        # Assert
        assert adjustment.coverage == pytest.approx(3 / 7)
        assert adjustment.renormalized
        assert not model.supported(0, 1)
        assert do_prob(data, labels, graph, 0, 1) == pytest.approx(0.5)
        with pytest.raises(UndefinedScoreError):
            scores_for_pair(ScoreQuery(0, 1, 0), data, labels, graph)

    def test_reverse_causation_warns(self, confounded):
        """Test that a target parent is reported."""
        # Arrange
        data, labels, _ = confounded
        graph = Dag(("X", "Z"), frozenset({(1, 0)}))
        model = ProbabilityModel(data, labels, graph, target="Z")

        # Act
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            model.adjustment_set(0)

        # Assert
        assert any(issubclass(w.category, ReverseCausationWarning) for w in caught)
        assert model.warnings


class TestScores:
    """Tests for the necessity and sufficiency scores."""

    def test_hand_values(self, binary_x):
        """Test Suf = (0.9 - 0.5) / 0.5 and the matching Nec and Nesuf."""
        # Arrange
        data, labels = binary_x

        # Act
        triple = scores_for_pair(ScoreQuery(0, 1, 0), data, labels)

        # Assert
        assert triple.suf == pytest.approx(0.8)
        assert triple.nec == pytest.approx(0.4 / 0.9)
        assert triple.nesuf == pytest.approx(0.4)

    def test_zero_necessity(self):
        """Test that P(o'|do(x')) = P(o'|x) gives Nec = 0."""
        # Arrange: same label mix at both codes
        data = _coded(["X"], [[1]] * 4 + [[0]] * 4)
        labels = [1, 1, 0, 0, 1, 1, 0, 0]

        # Act
        triple = scores_for_pair(ScoreQuery(0, 1, 0), data, labels)

        # Assert
        assert triple.nec == 0.0
        assert triple.nesuf == 0.0

    def test_clamped_keeps_raw(self):
        """Test that a negative raw score is clamped to 0 with the raw value kept."""
        # Arrange: positives fall as X rises
        data = _coded(["X"], [[1]] * 5 + [[0]] * 10)
        labels = [1, 0, 0, 0, 0] + [1] * 9 + [0]

        # Act
        triple = scores_for_pair(ScoreQuery(0, 1, 0), data, labels)

        # Assert
        assert triple.nec == 0.0
        assert triple.raw_nec == pytest.approx((0.1 - 0.8) / 0.2)
        assert triple.clamped["nec"]
        assert triple.any_clamped

    def test_undefined_necessity(self):
        """Test that P(o|x) = 0 leaves necessity undefined."""
        # Arrange
        data = _coded(["X"], [[1], [1], [0], [0]])

        # Act / Assert
        with pytest.raises(UndefinedScoreError):
            scores_for_pair(ScoreQuery(0, 1, 0), data, [0, 0, 1, 0])

    def test_query_order(self):
        """Test that x must exceed x'."""
        # Act / Assert
        with pytest.raises(ValueError):
            ScoreQuery(0, 1, 2)

    def test_triple_clamping(self):
        """Test that values above one are clamped too."""
        # Act
        triple = ScoreTriple.from_raw(1.5, 0.3, -0.2)

        # Assert
        assert (triple.nec, triple.suf, triple.nesuf) == (1.0, 0.3, 0.0)

    def test_two_codes_single_pair(self, binary_x):
        """Test that a binary variable's maxNesuf is its only pair's Nesuf."""
        # Arrange
        data, labels = binary_x

        # Act
        best = max_nesuf(data, labels, None, 0)

        # Assert
        assert best == scores_for_pair(ScoreQuery(0, 1, 0), data, labels).nesuf

    def test_single_code_has_no_pair(self):
        """Test that a constant variable has no valid pair."""
        # Arrange
        data = _coded(["X"], [[0], [0]])

        # Act / Assert
        with pytest.raises(NoValidPairError):
            max_nesuf(data, [0, 1], None, 0)


class TestExplain:
    """Tests for whole-report scoring."""

    def test_no_graph_flag(self, confounded):
        """Test that a report without a graph is flagged."""
        # Arrange
        data, labels, _ = confounded

        # Act
        report = explain(data, labels, None)

        # Assert
        assert report.no_graph
        assert report.variables == ("X", "Z")

    def test_parentless_matches_no_graph(self, confounded):
        """Test that an explicit graph with X parentless scores X like the no-graph case."""
        # Arrange
        data, labels, _ = confounded
        graph = Dag(("X", "Z"), frozenset({(0, 1)}))

        # Act
        with_graph = explain(data, labels, graph)
        without = explain(data, labels, None)

        # Assert
        assert with_graph.pairs["X"] == without.pairs["X"]

    def test_target_excluded(self, confounded):
        """Test that the target column is not scored."""
        # Arrange
        data, labels, _ = confounded

        # Act
        report = explain(data, labels, None, target="Z")

        # Assert
        assert report.variables == ("X",)

    def test_missing_pair_recorded(self):
        """Test that a variable without a valid pair maps to None with a diagnostic."""
        # Arrange
        data = _coded(["X", "W"], [[1, 0], [1, 0], [0, 0], [0, 0]])
        labels = [1, 0, 1, 0]

        # Act
        report = explain(data, labels, None)

        # Assert
        assert report.max_nesuf["W"] is None
        assert any("W" in d for d in report.diagnostics)
        assert report.score_vector().tolist() == [report.max_nesuf["X"], 0.0]

    @pytest.mark.slow
    def test_structure_d_true_graph(self):
        """Test that the isolated X scores near 0 and the sole cause Z near 1 with ten bins."""
        # Act: X is parentless, so its score carries the binomial noise of P(o | x); 20000 rows keep it small
        table = structure_study("linear", trials=3, sample_size=20000, bins=10,
                                forest=ForestConfig(n_trees=25, n_jobs=1), n_jobs=1, structures=("D",))

        # Assert
        assert table.loc["D", "X"] <= 0.05
        assert table.loc["D", "Z"] >= 0.95

    @pytest.mark.slow
    def test_structure_e_true_graph(self):
        """Test that in the fork Z -> X, Z -> Y the effect X scores near 0 and Z near 1."""
        # Arrange
        spec = make_benchmark("E", "linear")
        coded = discretize_dataset(sample(spec, 5000, 1), 10, target="Y")
        features = coded.select(["X", "Z"])
        forest = fit_forest(features, coded.column("Y"), ForestConfig(n_trees=25, n_jobs=1))
        labels = predict(forest, features)

        # Act
        report = explain(coded, labels, spec.dag, "Y", forest_labeler(forest))

        # Assert
        assert report.max_nesuf["X"] <= 0.05
        assert report.max_nesuf["Z"] >= 0.95

    @pytest.mark.slow
    def test_no_graph_overstates_confounded_effect(self):
        """Test that conditioning inflates Z's Nesuf in X -> Z, X -> Y, Z -> Y compared with adjusting on X."""
        # Arrange
        spec = make_benchmark("C", "linear")
        coded = discretize_dataset(sample(spec, 5000, 2), 10, target="Y")
        features = coded.select(["X", "Z"])
        forest = fit_forest(features, coded.column("Y"), ForestConfig(n_trees=25, n_jobs=1))
        labels = predict(forest, features)
        labeler = forest_labeler(forest)
        query = ScoreQuery(coded.index("Z"), 6, 3)

        # Act
        adjusted = scores_for_pair(query, coded, labels, spec.dag, "Y", labeler)
        conditioned = scores_for_pair(query, coded, labels, None, "Y")

        # Assert
        assert conditioned.nesuf - adjusted.nesuf > 0.1


class TestReport:
    """Tests for report tables and files."""

    def test_frame_rows(self, binary_x):
        """Test one row per scored pair with the expected columns."""
        # Arrange
        data, labels = binary_x
        report = explain(data, labels, None)

        # Act
        frame = report_frame(report)

        # Assert
        assert list(frame.columns) == ["variable", "x", "x_prime", "nec", "suf", "nesuf", "clamped", "max_nesuf"]
        assert len(frame) == 1

    def test_reversal_sorted(self, confounded):
        """Test that the reversal table is ordered by maxNesuf."""
        # Arrange
        data, labels, graph = confounded
        report = explain(data, labels, graph)

        # Act
        table = reversal_table(report)

        # Assert
        assert list(table["max_nesuf"]) == sorted(table["max_nesuf"], reverse=True)
        assert {"nec", "suf"} <= set(table.columns)

    def test_json_file(self, confounded, tmp_path):
        """Test that the JSON report carries the graph and the per-pair raw scores."""
        # Arrange
        data, labels, graph = confounded
        report = explain(data, labels, graph)
        path = tmp_path / "report.json"

        # Act
        write_report_json(report, path)
        payload = json.loads(path.read_text())

        # Assert
        assert payload["no_graph"] is False
        assert payload["variables"]["X"]["adjustment_set"] == ["Z"]
        assert "raw" in payload["variables"]["X"]["pairs"][0]
