import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfnet.dataset import (
    INVALID_LABEL,
    VALID_LABEL,
    X_GRID,
    Dataset,
    GroupId,
    SubtypeLabel,
    all_subtypes,
    build_ann1_dataset,
    build_ann2_dataset,
    feasible_subtypes,
    group_of,
    label_of,
    load_dataset,
    regenerate,
    save_dataset,
    write_manifest,
)
from sfnet.errors import CorruptDataset, EmptyFeasibleSet, OffGridLabel, VersionMismatch
from sfnet.seeding import derive_seed

FOUR_CELLS = [SubtypeLabel(a, b) for a in (2.2, 2.8) for b in (2.2, 2.8)]


class TestGridLabels:
    def test_corner_and_worked_cells(self):
        assert group_of(SubtypeLabel(2.1, 2.1)).index == 0
        assert group_of(SubtypeLabel(3.0, 3.0)).index == 99
        assert group_of(SubtypeLabel(2.3, 2.6)).index == 25

    def test_bijection_over_all_cells(self):
        for idx in range(100):
            assert group_of(label_of(GroupId(idx))).index == idx
        for st_label in all_subtypes():
            assert label_of(group_of(st_label)) == st_label

    def test_float_noise_canonicalized(self):
        noisy = 2.1 + 0.1 + 0.1  # 2.3000000000000003
        assert noisy != 2.3
        assert SubtypeLabel(noisy, 2.5) == SubtypeLabel(2.3, 2.5)

    def test_off_grid_rejected(self):
        with pytest.raises(OffGridLabel):
            SubtypeLabel(2.35, 2.5)
        with pytest.raises(OffGridLabel):
            SubtypeLabel(3.1, 2.5)
        with pytest.raises(OffGridLabel):
            GroupId(100)

    @given(st.integers(0, 9), st.integers(0, 9))
    @settings(max_examples=100, deadline=None)
    def test_index_arithmetic(self, i, j):
        label = SubtypeLabel(X_GRID[i], X_GRID[j])
        assert group_of(label).index == i * 10 + j

    def test_feasible_subset(self):
        feasible = feasible_subtypes()
        assert len(feasible) == 81
        assert all(s.x_in >= 2.2 and s.x_out >= 2.2 for s in feasible)


class TestAnn1Corpus:
    def test_counts_and_labels(self):
        ds = build_ann1_dataset(6, 3, 17, subtypes=FOUR_CELLS)
        assert len(ds) == 12
        assert ds.matrix_side == 6
        assert ds.label_arity == 100
        expected = [group_of(c).index for c in FOUR_CELLS for _ in range(3)]
        assert ds.labels.tolist() == expected

    def test_default_grid_fails_loudly(self):
        # the full default grid contains unreachable 2.1 cells
        with pytest.raises(EmptyFeasibleSet, match="group 0 "):
            build_ann1_dataset(6, 1, 0)

    def test_minimal_corpus_over_feasible_cells(self):
        ds = build_ann1_dataset(5, 1, 3, subtypes=feasible_subtypes())
        assert len(ds) == 81

    def test_vectors_are_binary(self):
        ds = build_ann1_dataset(6, 2, 5, subtypes=FOUR_CELLS)
        values = np.unique(ds.inputs)
        assert set(values.tolist()) <= {0.0, 1.0}

    def test_provenance_replay(self):
        ds = build_ann1_dataset(7, 2, 23, subtypes=FOUR_CELLS)
        for sample in ds.samples:
            assert np.array_equal(regenerate(sample, ds.matrix_side), sample.vector)

    def test_determinism_and_seed_sensitivity(self):
        a = build_ann1_dataset(6, 2, 5, subtypes=FOUR_CELLS)
        b = build_ann1_dataset(6, 2, 5, subtypes=FOUR_CELLS)
        c = build_ann1_dataset(6, 2, 6, subtypes=FOUR_CELLS)
        assert a.equals(b)
        assert not a.equals(c)

    def test_per_group_validation(self):
        with pytest.raises(ValueError):
            build_ann1_dataset(6, 0, 1, subtypes=FOUR_CELLS)


class TestAnn2Corpus:
    def test_exact_balance_and_labeling(self):
        predicted = SubtypeLabel(2.5, 2.5)
        ds = build_ann2_dataset(6, predicted, 20, 99)
        assert len(ds) == 40
        assert ds.label_arity == 2
        labels = ds.labels
        assert int((labels == VALID_LABEL).sum()) == 20
        assert int((labels == INVALID_LABEL).sum()) == 20
        for sample in ds.samples:
            if sample.label == VALID_LABEL:
                assert sample.provenance.subtype == predicted
            else:
                assert sample.provenance.subtype != predicted

    def test_unreachable_predicted_subtype(self):
        with pytest.raises(EmptyFeasibleSet):
            build_ann2_dataset(6, SubtypeLabel(2.1, 2.5), 5, 1)

    def test_invalid_pool_restriction(self):
        predicted = SubtypeLabel(2.2, 2.2)
        pool = [predicted, SubtypeLabel(2.8, 2.8)]
        ds = build_ann2_dataset(6, predicted, 10, 2, invalid_subtypes=pool)
        invalid = {s.provenance.subtype for s in ds.samples if s.label == INVALID_LABEL}
        assert invalid == {SubtypeLabel(2.8, 2.8)}

    def test_empty_invalid_pool_rejected(self):
        predicted = SubtypeLabel(2.2, 2.2)
        with pytest.raises(EmptyFeasibleSet):
            build_ann2_dataset(6, predicted, 5, 3, invalid_subtypes=[predicted])

    def test_provenance_replay(self):
        ds = build_ann2_dataset(6, SubtypeLabel(2.2, 2.2), 8, 31)
        for sample in ds.samples:
            assert np.array_equal(regenerate(sample, ds.matrix_side), sample.vector)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        ds = build_ann1_dataset(6, 2, 5, subtypes=FOUR_CELLS)
        save_dataset(ds, tmp_path / "c.ds")
        loaded = load_dataset(tmp_path / "c.ds")
        assert loaded.equals(ds)

    def test_file_bytes_deterministic(self, tmp_path):
        ds = build_ann2_dataset(5, SubtypeLabel(2.5, 2.5), 4, 8)
        save_dataset(ds, tmp_path / "a.ds")
        save_dataset(ds, tmp_path / "b.ds")
        assert (tmp_path / "a.ds").read_bytes() == (tmp_path / "b.ds").read_bytes()

    def test_truncated_rejected(self, tmp_path):
        ds = build_ann1_dataset(5, 1, 1, subtypes=[SubtypeLabel(2.5, 2.5)])
        save_dataset(ds, tmp_path / "c.ds")
        raw = (tmp_path / "c.ds").read_bytes()
        (tmp_path / "cut.ds").write_bytes(raw[:-2])
        with pytest.raises(CorruptDataset):
            load_dataset(tmp_path / "cut.ds")

    def test_trailing_rejected(self, tmp_path):
        ds = build_ann1_dataset(5, 1, 1, subtypes=[SubtypeLabel(2.5, 2.5)])
        save_dataset(ds, tmp_path / "c.ds")
        raw = (tmp_path / "c.ds").read_bytes()
        (tmp_path / "pad.ds").write_bytes(raw + b"\xff")
        with pytest.raises(CorruptDataset):
            load_dataset(tmp_path / "pad.ds")

    def test_bad_magic_rejected(self, tmp_path):
        (tmp_path / "bad.ds").write_bytes(b"XXXX" + b"\x00" * 16)
        with pytest.raises(CorruptDataset):
            load_dataset(tmp_path / "bad.ds")

    def test_version_mismatch(self, tmp_path):
        ds = build_ann1_dataset(5, 1, 1, subtypes=[SubtypeLabel(2.5, 2.5)])
        save_dataset(ds, tmp_path / "c.ds")
        raw = bytearray((tmp_path / "c.ds").read_bytes())
        raw[4] = 9
        (tmp_path / "v9.ds").write_bytes(bytes(raw))
        with pytest.raises(VersionMismatch):
            load_dataset(tmp_path / "v9.ds")

    def test_label_beyond_arity_rejected(self, tmp_path):
        ds = build_ann2_dataset(5, SubtypeLabel(2.5, 2.5), 2, 8)
        save_dataset(ds, tmp_path / "c.ds")
        raw = bytearray((tmp_path / "c.ds").read_bytes())
        raw[16] = 7  # first sample's label low byte (header is 16 bytes)
        (tmp_path / "bad.ds").write_bytes(bytes(raw))
        with pytest.raises(CorruptDataset):
            load_dataset(tmp_path / "bad.ds")

    def test_empty_dataset_round_trip(self, tmp_path):
        ds = Dataset(4, 2, [])
        save_dataset(ds, tmp_path / "e.ds")
        loaded = load_dataset(tmp_path / "e.ds")
        assert loaded.equals(ds)
        assert loaded.inputs.shape == (0, 16)


class TestManifest:
    def test_manifest_lines(self, tmp_path):
        ds = build_ann1_dataset(6, 2, 5, subtypes=FOUR_CELLS)
        write_manifest(ds, tmp_path / "m.csv")
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert lines[0] == "index,label,x_in,x_out,alpha,beta,gamma,delta_in,delta_out,seed"
        assert len(lines) == len(ds) + 1
        first = lines[1].split(",")
        assert int(first[0]) == 0
        assert int(first[1]) == ds.samples[0].label
        assert float(first[4]) == ds.samples[0].provenance.params.alpha


class TestSeedDerivation:
    def test_stable_and_path_sensitive(self):
        assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
        assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)
        assert derive_seed(7, 1) != derive_seed(8, 1)
        assert 0 <= derive_seed(-3, 0) < 2**64
