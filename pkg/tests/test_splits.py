import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pressure_id.splits import MPnSSpec, SplitResult, split_mpns, take


class TestSplit:
    def test_train_size_is_s_times_m_times_n(self, small_chr):
        records, manifest = small_chr
        result = split_mpns(records, manifest, MPnSSpec(m=2, n=5, split_seed=1))
        assert len(result.train) == 8 * 2 * 5

    def test_disjoint_and_complete(self, small_chr):
        records, manifest = small_chr
        result = split_mpns(records, manifest, MPnSSpec(m=3, n=4, split_seed=2))
        train, val, test = set(result.train), set(result.val), set(result.test)
        assert not (train & val) and not (train & test) and not (val & test)
        assert train | val | test == set(range(len(records)))

    def test_test_covers_every_posture_per_subject(self, small_chr):
        records, manifest = small_chr
        result = split_mpns(records, manifest, MPnSSpec(m=2, n=5, split_seed=3))
        covered = {(records[i].subject_id, records[i].posture_id) for i in result.test}
        expected = {(s, p) for s in range(8) for p in range(12)}
        assert covered == expected

    def test_training_misses_postures_when_m_small(self, small_chr):
        records, manifest = small_chr
        result = split_mpns(records, manifest, MPnSSpec(m=2, n=5, split_seed=4))
        train_postures = {records[i].posture_id for i in result.train}
        assert train_postures == set(result.chosen_postures)
        assert len(train_postures) == 2
        test_postures = {records[i].posture_id for i in result.test}
        assert test_postures - train_postures  # unseen postures get tested

    def test_same_postures_for_all_subjects(self, small_chr):
        records, manifest = small_chr
        result = split_mpns(records, manifest, MPnSSpec(m=2, n=5, split_seed=5))
        for s in range(8):
            postures = {
                records[i].posture_id for i in result.train
                if records[i].subject_id == s
            }
            assert postures == set(result.chosen_postures)

    def test_determinism(self, small_chr):
        records, manifest = small_chr
        spec = MPnSSpec(m=2, n=5, split_seed=6)
        assert split_mpns(records, manifest, spec) == split_mpns(records, manifest, spec)

    def test_different_seed_different_split(self, small_chr):
        records, manifest = small_chr
        a = split_mpns(records, manifest, MPnSSpec(m=2, n=5, split_seed=1))
        b = split_mpns(records, manifest, MPnSSpec(m=2, n=5, split_seed=2))
        assert a.train != b.train

    # m < 12 keeps whole unchosen cells in the pool, and val_fraction >= 0.1
    # guarantees those cells can feed the validation set.
    @settings(max_examples=25, deadline=None)
    @given(
        m=st.integers(1, 11),
        n=st.integers(1, 11),
        seed=st.integers(0, 10_000),
        val_fraction=st.floats(0.1, 0.5),
    )
    def test_invariants_random_specs(self, small_chr, m, n, seed, val_fraction):
        records, manifest = small_chr
        spec = MPnSSpec(m=m, n=n, split_seed=seed, val_fraction=val_fraction)
        result = split_mpns(records, manifest, spec)
        train, val, test = set(result.train), set(result.val), set(result.test)
        assert len(result.train) == 8 * m * n
        assert not (train & val) and not (train & test) and not (val & test)
        covered = {(records[i].subject_id, records[i].posture_id) for i in test}
        assert covered == {(s, p) for s in range(8) for p in range(12)}

    def test_m_out_of_range(self, small_chr):
        records, manifest = small_chr
        with pytest.raises(ValueError, match="m="):
            split_mpns(records, manifest, MPnSSpec(m=13, n=5))

    def test_n_out_of_range(self, small_chr):
        records, manifest = small_chr
        with pytest.raises(ValueError, match="n="):
            split_mpns(records, manifest, MPnSSpec(m=2, n=13))

    def test_degenerate_all_data_in_train_rejected(self, small_chr):
        records, manifest = small_chr
        with pytest.raises(ValueError):
            split_mpns(records, manifest, MPnSSpec(m=12, n=12))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            MPnSSpec(m=0, n=5)
        with pytest.raises(ValueError):
            MPnSSpec(m=2, n=0)
        with pytest.raises(ValueError):
            MPnSSpec(m=2, n=5, val_fraction=1.0)

    def test_json_round_trip(self, small_chr, tmp_path):
        records, manifest = small_chr
        result = split_mpns(records, manifest, MPnSSpec(m=2, n=5, split_seed=9))
        path = tmp_path / "split.json"
        result.save(path)
        assert SplitResult.load(path) == result

    def test_take(self, small_chr):
        records, manifest = small_chr
        result = split_mpns(records, manifest, MPnSSpec(m=2, n=5, split_seed=1))
        train = take(records, result.train)
        assert len(train) == len(result.train)
        assert train[0] is records[result.train[0]]
