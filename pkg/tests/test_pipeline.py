import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfnet.dataset import SubtypeLabel, build_ann1_dataset, build_ann2_dataset
from sfnet.errors import BudgetExceeded, EmptyFeasibleSet, ShapeMismatch
from sfnet.generator import GeneratorParams, generate
from sfnet.graph import AdjacencyMatrix, add_unconnected_nodes, load_matrix_records
from sfnet.mlp import MlpModel, TrainConfig, build_ann1, build_ann2, forward, train
from sfnet.pipeline import (
    CandidateBudget,
    PipelineConfig,
    enumerate_candidates,
    filter_candidates,
    predict_subtype,
    run_pipeline,
    write_report,
)

CELLS = [SubtypeLabel(a, b) for a in (2.3, 2.8) for b in (2.3, 2.8)]


def matrix_from_rows(rows) -> AdjacencyMatrix:
    return AdjacencyMatrix(np.array(rows, dtype=np.uint8))


class TestPredictSubtype:
    def test_zero_model_uniform_tie_break(self):
        model = MlpModel.zeros([16, 9, 100])
        g = matrix_from_rows(np.zeros((4, 4)))
        pred = predict_subtype(model, g)
        assert pred.group.index == 0
        assert pred.probability == pytest.approx(0.01, abs=1e-12)
        np.testing.assert_allclose(pred.full_distribution, np.full(100, 0.01))

    def test_distribution_sums_to_one(self):
        model = build_ann1(4, seed=2)
        rng = np.random.Generator(np.random.PCG64(1))
        g = AdjacencyMatrix((rng.random((4, 4)) < 0.4).astype(np.uint8))
        pred = predict_subtype(model, g)
        assert abs(pred.full_distribution.sum() - 1.0) <= 1e-9
        assert pred.probability == pred.full_distribution.max()
        assert pred.group.index == int(np.argmax(pred.full_distribution))

    def test_saturated_model_predicts_trained_group(self):
        ds = build_ann1_dataset(4, 12, 3, subtypes=[SubtypeLabel(2.5, 2.5)])
        model = build_ann1(4, seed=0)
        cfg = TrainConfig(learning_rate=0.05, epochs=300, seed=1, validation_fraction=0.0)
        trained, _ = train(model, ds.inputs, ds.labels, cfg)
        pred = predict_subtype(trained, AdjacencyMatrix(ds.samples[0].vector.reshape(4, 4)))
        assert pred.label == SubtypeLabel(2.5, 2.5)
        assert pred.probability >= 0.99

    def test_wrong_arity_rejected(self):
        model = MlpModel.zeros([16, 5, 99])
        with pytest.raises(ShapeMismatch):
            predict_subtype(model, matrix_from_rows(np.zeros((4, 4))))

    def test_wrong_input_size_rejected(self):
        model = MlpModel.zeros([16, 5, 100])
        with pytest.raises(ShapeMismatch):
            predict_subtype(model, matrix_from_rows(np.zeros((5, 5))))


class TestEnumerateCandidates:
    def test_exhaustive_count_and_first_candidate(self):
        g = matrix_from_rows([[1, 0, 0], [0, 0, 0], [0, 1, 0]])
        budget = CandidateBudget(mode="exhaustive")
        cands = list(enumerate_candidates(g, budget))
        assert len(cands) == 2**7
        assert cands[0] == g  # all-zero assignment comes first
        keys = {c.key() for c in cands}
        assert len(keys) == 2**7
        for c in cands:
            assert c.is_superset_of(g)

    def test_all_ones_yields_single_candidate(self):
        g = matrix_from_rows(np.ones((3, 3)))
        cands = list(enumerate_candidates(g, CandidateBudget(mode="exhaustive")))
        assert cands == [g]

    def test_budget_exceeded(self):
        g = matrix_from_rows(np.zeros((5, 5)))  # z = 25
        with pytest.raises(BudgetExceeded):
            list(enumerate_candidates(g, CandidateBudget(mode="exhaustive", exhaustive_ceiling=2**20)))

    def test_sampled_distinct_and_reproducible(self):
        g = matrix_from_rows(np.zeros((6, 6)))  # z = 36 > 2^20 exhaustive, sampled fine
        budget = CandidateBudget(mode="sampled", max_candidates=100, seed=5)
        a = list(enumerate_candidates(g, budget))
        b = list(enumerate_candidates(g, budget))
        assert len(a) == 100
        assert len({c.key() for c in a}) == 100
        assert a == b
        c = list(enumerate_candidates(g, CandidateBudget(mode="sampled", max_candidates=100, seed=6)))
        assert a != c

    def test_sampled_caps_at_space_size(self):
        g = matrix_from_rows([[1, 1], [1, 0]])  # z = 1
        cands = list(enumerate_candidates(g, CandidateBudget(mode="sampled", max_candidates=50, seed=0)))
        assert len(cands) == 2

    def test_sampled_wide_assignment_path(self):
        g = matrix_from_rows(np.zeros((9, 9)))  # z = 81 > 62 forces the bit-vector walk
        budget = CandidateBudget(mode="sampled", max_candidates=10, seed=9)
        a = list(enumerate_candidates(g, budget))
        assert len(a) == 10
        assert len({c.key() for c in a}) == 10
        assert a == list(enumerate_candidates(g, budget))

    def test_ones_never_modified(self):
        rng = np.random.Generator(np.random.PCG64(3))
        g = AdjacencyMatrix((rng.random((5, 5)) < 0.5).astype(np.uint8))
        budget = CandidateBudget(mode="sampled", max_candidates=64, seed=1)
        for cand in enumerate_candidates(g, budget):
            assert np.all(cand.bits >= g.bits)

    def test_budget_validation(self):
        with pytest.raises(ValueError):
            CandidateBudget(mode="both")
        with pytest.raises(ValueError):
            CandidateBudget(max_candidates=0)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 4))
    @settings(max_examples=20, deadline=None)
    def test_candidate_count_law(self, seed, size):
        rng = np.random.Generator(np.random.PCG64(seed))
        g = AdjacencyMatrix((rng.random((size, size)) < 0.5).astype(np.uint8))
        z = size * size - g.ones()
        cands = list(enumerate_candidates(g, CandidateBudget(mode="exhaustive")))
        assert len(cands) == 2**z


class TestFilterCandidates:
    def balanced_zero_model(self, side: int) -> MlpModel:
        return MlpModel.zeros([side * side, 3, 2])

    def test_query_itself_rejected_regardless_of_probability(self):
        g = matrix_from_rows([[1, 0], [0, 1]])
        model = self.balanced_zero_model(2)  # always outputs 0.5/0.5
        report = filter_candidates(model, [g], g, threshold=0.4)
        assert report.accepted == []
        assert report.rejected_count == 1

    def test_near_one_threshold_rejects_everything(self):
        g = matrix_from_rows([[1, 0], [0, 1]])
        model = self.balanced_zero_model(2)
        cands = list(enumerate_candidates(g, CandidateBudget(mode="exhaustive")))
        report = filter_candidates(model, cands, g, threshold=0.999999)
        assert report.accepted == []
        assert report.rejected_count == len(cands)

    def test_zero_positions_and_mode_recorded(self):
        g = matrix_from_rows([[1, 0], [0, 1]])
        report = filter_candidates(self.balanced_zero_model(2), [], g, threshold=0.5, mode="sampled")
        assert report.zero_positions == 2
        assert report.mode == "sampled"
        assert report.threshold == 0.5

    def test_accepts_above_threshold_and_sorts(self):
        g = matrix_from_rows([[0, 0], [0, 0]])
        # bias the valid logit so every candidate scores identically above 0.8
        model = MlpModel.zeros([4, 3, 2])
        model.biases[1][:] = [5.0, 0.0]
        cands = list(enumerate_candidates(g, CandidateBudget(mode="exhaustive")))
        report = filter_candidates(model, cands, g, threshold=0.8)
        assert len(report.accepted) == len(cands) - 1  # the query drops out
        probs = [p for _, p in report.accepted]
        assert probs == sorted(probs, reverse=True)
        keys = [c.key() for c, _ in report.accepted]
        assert keys == sorted(keys)  # equal probabilities: lexicographic bit order

    def test_monotone_threshold(self):
        rng = np.random.Generator(np.random.PCG64(12))
        g = AdjacencyMatrix((rng.random((3, 3)) < 0.4).astype(np.uint8))
        model = build_ann2(3, seed=4)
        cands = list(enumerate_candidates(g, CandidateBudget(mode="exhaustive")))
        low = filter_candidates(model, cands, g, threshold=0.45)
        high = filter_candidates(model, cands, g, threshold=0.72)
        low_keys = {c.key() for c, _ in low.accepted}
        high_keys = {c.key() for c, _ in high.accepted}
        assert high_keys <= low_keys

    def test_threshold_validation(self):
        g = matrix_from_rows([[1]])
        with pytest.raises(ValueError):
            filter_candidates(self.balanced_zero_model(1), [], g, threshold=1.0)

    def test_wrong_model_shapes(self):
        g = matrix_from_rows([[1, 0], [0, 1]])
        with pytest.raises(ShapeMismatch):
            filter_candidates(MlpModel.zeros([4, 3, 3]), [], g)
        with pytest.raises(ShapeMismatch):
            filter_candidates(MlpModel.zeros([9, 3, 2]), [], g)

    def test_dropped_one_entry_raises(self):
        from sfnet.errors import InvariantViolation

        g = matrix_from_rows([[1, 0], [0, 1]])
        bad = matrix_from_rows([[0, 1], [1, 0]])  # not a superset of g
        with pytest.raises(InvariantViolation):
            filter_candidates(self.balanced_zero_model(2), [bad], g, threshold=0.5)


class TestPlantedRecovery:
    def test_planted_true_matrix_flows_through(self):
        # tiny planted case: generate at a subtype, delete one edge, search
        subtype = SubtypeLabel(2.2, 2.2)
        params = GeneratorParams(0.1, 0.8, 0.1, 0.4, 0.4)
        g_true = AdjacencyMatrix.from_graph(generate(params, 4, seed=20))
        ones = np.argwhere(g_true.bits == 1)
        removed = tuple(ones[-1])
        bits = g_true.bits.copy()
        bits[removed] = 0
        g_new = AdjacencyMatrix(bits)

        ds = build_ann2_dataset(4, subtype, 60, 5)
        model = build_ann2(4, seed=1)
        trained, _ = train(model, ds.inputs, ds.labels,
                           TrainConfig(epochs=40, seed=2, validation_fraction=0.0))
        cands = list(enumerate_candidates(g_new, CandidateBudget(mode="exhaustive")))
        assert any(c == g_true for c in cands)
        report = filter_candidates(trained, cands, g_new, threshold=0.8)
        # acceptance of the planted matrix is measured, not assumed
        accepted_keys = {c.key() for c, _ in report.accepted}
        recovered = g_true.key() in accepted_keys
        assert isinstance(recovered, bool)
        for cand, prob in report.accepted:
            assert cand.is_superset_of(g_new)
            assert cand != g_new
            assert prob > 0.8


class TestRunPipeline:
    def small_config(self, outdir, budget=None):
        # enough ANN1 epochs that the argmax lands inside the configured grid
        return PipelineConfig(
            outdir=outdir,
            subtypes=CELLS,
            per_group=6,
            per_class=30,
            ann1_train=TrainConfig(epochs=30, seed=1, validation_fraction=0.0),
            ann2_train=TrainConfig(epochs=10, seed=2, validation_fraction=0.0),
            budget=budget or CandidateBudget(mode="sampled", max_candidates=200, seed=3),
            threshold=0.8,
            seed=55,
        )

    def query(self) -> AdjacencyMatrix:
        params = GeneratorParams(0.1, 0.8, 0.1, 0.4, 0.4)
        return AdjacencyMatrix.from_graph(generate(params, 5, seed=77))

    def test_report_invariants_and_artifacts(self, tmp_path):
        result = run_pipeline(self.query(), 1, self.small_config(tmp_path / "run"))
        g_new = add_unconnected_nodes(self.query(), 1)
        for cand, prob in result.report.accepted:
            assert cand.is_superset_of(g_new)
            assert cand != g_new
            assert prob > 0.8
        for name in ("ann1_dataset", "ann1_model", "ann2_dataset", "ann2_model",
                     "g_new", "report", "accepted"):
            assert result.paths[name].exists()
        assert result.ann1_source == "trained"
        assert result.ann2_source == "trained"
        saved = load_matrix_records(result.paths["accepted"])
        assert saved == [c for c, _ in result.report.accepted]

    def test_determinism_across_runs(self, tmp_path):
        r1 = run_pipeline(self.query(), 1, self.small_config(tmp_path / "a"))
        r2 = run_pipeline(self.query(), 1, self.small_config(tmp_path / "b"))
        assert r1.prediction.group == r2.prediction.group
        for name in ("ann1_dataset", "ann1_model", "ann2_dataset", "ann2_model",
                     "g_new", "report", "accepted"):
            assert r1.paths[name].read_bytes() == r2.paths[name].read_bytes()

    def test_zero_missing_nodes_is_legal(self, tmp_path):
        result = run_pipeline(self.query(), 0, self.small_config(tmp_path / "m0"))
        assert result.report.zero_positions == 25 - self.query().ones()

    def test_checkpoint_reuse(self, tmp_path):
        first = run_pipeline(self.query(), 1, self.small_config(tmp_path / "train"))
        cfg = self.small_config(tmp_path / "reuse")
        cfg.ann1_checkpoint = first.paths["ann1_model"]
        cfg.ann2_checkpoint = first.paths["ann2_model"]
        result = run_pipeline(self.query(), 1, cfg)
        assert result.ann1_source == "loaded"
        assert result.ann2_source == "loaded"
        assert result.prediction.group == first.prediction.group
        assert "ann1_dataset" not in result.paths

    def test_single_subtype_config_fails_on_invalid_pool(self, tmp_path):
        cfg = self.small_config(tmp_path / "one")
        cfg.subtypes = [SubtypeLabel(2.3, 2.3)]
        with pytest.raises(EmptyFeasibleSet):
            run_pipeline(self.query(), 1, cfg)

    def test_negative_m_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            run_pipeline(self.query(), -1, self.small_config(tmp_path / "neg"))


class TestReportDocument:
    def test_report_text_structure(self, tmp_path):
        g_new = matrix_from_rows([[1, 0, 0], [0, 0, 0], [0, 0, 0]])
        cand_bits = g_new.bits.copy()
        cand_bits[0, 2] = 1
        cand_bits[2, 1] = 1
        cand = AdjacencyMatrix(cand_bits)
        from sfnet.pipeline import PredictionReport

        report = PredictionReport([(cand, 0.9375)], rejected_count=5, zero_positions=8,
                                  mode="exhaustive", threshold=0.8)
        write_report(report, g_new, 1, tmp_path / "r.txt")
        text = (tmp_path / "r.txt").read_text().splitlines()
        assert text[0] == "completion-report v1"
        assert "padded-nodes: 2" in text
        assert "accepted: 1" in text
        assert "probability: 0.9375" in text
        assert "added-links: 0->2 2->1" in text
        assert "recovered-nodes: 2:yes" in text

    def test_unrecovered_node_flagged(self, tmp_path):
        g_new = matrix_from_rows(np.zeros((2, 2)))
        cand = matrix_from_rows([[1, 0], [0, 0]])
        from sfnet.pipeline import PredictionReport

        report = PredictionReport([(cand, 0.99)], 0, 4, "exhaustive", 0.8)
        write_report(report, g_new, 1, tmp_path / "r.txt")
        assert "recovered-nodes: 1:no" in (tmp_path / "r.txt").read_text()
