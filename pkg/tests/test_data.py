import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advunlearn.data import (
    DataError,
    LabeledDataset,
    SplitSpec,
    SynthSpec,
    load_csv,
    save_csv,
    select_forget,
    split_by_group,
    synth_generate,
)


@pytest.fixture
def ds():
    return synth_generate(SynthSpec(n_groups=12, samples_per_group_per_class=3, feature_dim=8, seed=4))


class TestSynth:
    def test_counts(self, ds):
        assert len(ds) == 12 * 7 * 3
        assert np.array_equal(np.bincount(ds.y), np.full(7, 36))
        assert np.array_equal(np.bincount(ds.groups), np.full(12, 21))
        assert ds.feature_dim == 8

    def test_deterministic(self):
        spec = SynthSpec(seed=9)
        assert synth_generate(spec).equals(synth_generate(spec))
        assert not synth_generate(spec).equals(synth_generate(SynthSpec(seed=10)))

    def test_class_means_on_axes(self):
        big = synth_generate(SynthSpec(n_groups=200, samples_per_group_per_class=5, feature_dim=7,
                                       separation=3.0, within_std=0.5, group_std=0.1, seed=1))
        for c in range(7):
            mu = big.X[big.y == c].mean(axis=0)
            target = np.zeros(7)
            target[c] = 3.0
            np.testing.assert_allclose(mu, target, atol=0.05)

    def test_feature_dim_below_classes(self):
        with pytest.raises(DataError):
            synth_generate(SynthSpec(feature_dim=5))

    @pytest.mark.parametrize("kw", [{"class_count": 1}, {"n_groups": 2}, {"within_std": 0.0}])
    def test_invalid(self, kw):
        with pytest.raises(DataError):
            synth_generate(SynthSpec(**kw))


class TestSplit:
    def test_disjoint_groups_and_cover(self, ds):
        parts = split_by_group(ds, SplitSpec(seed=3))
        sets = [set(p.groups.tolist()) for p in parts]
        assert all(sets)
        assert not (sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2])
        assert sum(len(p) for p in parts) == len(ds)
        assert [len(s) for s in sets] == [4, 4, 4]

    def test_deterministic(self, ds):
        a = split_by_group(ds, SplitSpec(seed=5))
        b = split_by_group(ds, SplitSpec(seed=5))
        assert all(x.equals(y) for x, y in zip(a, b))

    def test_too_few_groups(self):
        tiny = LabeledDataset(np.zeros((4, 2)), np.array([0, 1, 0, 1]), np.array([0, 0, 1, 1]), 2)
        with pytest.raises(DataError):
            split_by_group(tiny, SplitSpec())

    def test_bad_fractions(self, ds):
        with pytest.raises(DataError):
            split_by_group(ds, SplitSpec(0.5, 0.5, 0.5))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(3, 40), st.integers(0, 10_000))
    def test_every_split_nonempty(self, G, seed):
        y = np.zeros(G, dtype=int)
        part = split_by_group(LabeledDataset(np.zeros((G, 1)), y, np.arange(G), 2), SplitSpec(seed=seed))
        assert all(len(p) > 0 for p in part)


class TestForget:
    def test_partition(self, ds):
        forget, remain = select_forget(ds, 10, seed=1)
        assert len(forget) == 10 and len(remain) == len(ds) - 10
        both = np.vstack([forget.X, remain.X])
        assert np.unique(both, axis=0).shape[0] == len(ds)

    def test_deterministic(self, ds):
        a, _ = select_forget(ds, 5, seed=2)
        b, _ = select_forget(ds, 5, seed=2)
        assert a.equals(b)

    @pytest.mark.parametrize("n", [0, -1, 10_000])
    def test_bounds(self, ds, n):
        with pytest.raises(DataError):
            select_forget(ds, n, seed=0)


class TestCsv:
    def test_round_trip_exact(self, ds, tmp_path):
        p = tmp_path / "d.csv"
        save_csv(ds, p)
        assert load_csv(p).equals(ds)

    def _write(self, tmp_path, text):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        return p

    def test_label_out_of_range(self, tmp_path):
        p = self._write(tmp_path, "f0,label,group\n0.5,1,0\n0.2,7,0\n")
        with pytest.raises(DataError, match="row 3"):
            load_csv(p)

    def test_wrong_field_count(self, tmp_path):
        p = self._write(tmp_path, "f0,f1,label,group\n0.5,0.1,1,0\n0.5,1,0\n")
        with pytest.raises(DataError, match="row 3 has 3 fields"):
            load_csv(p)

    def test_non_numeric(self, tmp_path):
        p = self._write(tmp_path, "f0,label,group\nabc,1,0\n")
        with pytest.raises(DataError, match="row 2"):
            load_csv(p)

    def test_bad_header(self, tmp_path):
        p = self._write(tmp_path, "x,label,group\n0.5,1,0\n")
        with pytest.raises(DataError):
            load_csv(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "nope.csv")

    def test_no_rows(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(self._write(tmp_path, "f0,label,group\n"))


def test_dataset_validation():
    with pytest.raises(DataError):
        LabeledDataset(np.zeros((3, 2)), np.array([0, 1]), np.array([0, 0, 0]), 2)
    with pytest.raises(DataError):
        LabeledDataset(np.zeros((2, 2)), np.array([0, 2]), np.array([0, 0]), 2)
