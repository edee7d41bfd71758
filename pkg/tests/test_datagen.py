import math
import warnings

import numpy as np
import pytest
from scipy import stats

from curriculum_sched.datagen import (
    DataError,
    DegenerateSplitWarning,
    LabeledDataset,
    Split,
    SynthSpec,
    generate,
    load_csv,
    restrict_training,
    save_csv,
    stratified_split,
    taxonomy_path,
)
from curriculum_sched.metrics import ClassTaxonomy
from curriculum_sched.model import Hyperparams, init_classifier, predict_proba, train
from curriculum_sched.scheduler import EpochOrder


def two_blobs(**kw):
    return SynthSpec(
        n_classes=2, coarse_groups=(0, 1), feature_dim=4, class_counts=(100, 100),
        difficulty=(0.0, 0.0), separation=20.0, balanced_test=False, **kw
    )


class TestGenerate:
    def test_deterministic(self):
        a, b = generate(SynthSpec(seed=4)), generate(SynthSpec(seed=4))
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.split, b.split)

    def test_seed_changes_data(self):
        assert not np.array_equal(generate(SynthSpec(seed=1)).features, generate(SynthSpec(seed=2)).features)

    def test_counts_are_exact(self):
        spec = SynthSpec()
        data = generate(spec)
        assert list(np.bincount(data.labels, minlength=7)) == list(spec.class_counts)
        assert data.features.shape == (sum(spec.class_counts), spec.feature_dim)

    def test_separable_blobs_are_learnt(self):
        data = generate(two_blobs())
        Xtr, ytr = data.part(Split.TRAIN)
        Xva, yva = data.part(Split.VAL)
        Xte, yte = data.part(Split.TEST)
        rng = np.random.default_rng(0)
        hp = Hyperparams(hidden_size=0, learning_rate=0.01, max_epochs=30)
        state = init_classifier(4, 2, hp, rng)
        train(state, Xtr, ytr, Xva, yva, lambda e: _perm(len(ytr), rng))
        assert np.mean(predict_proba(state.params, Xte).argmax(axis=1) == yte) >= 0.99

    def test_taxonomy(self):
        tax = SynthSpec().taxonomy()
        assert tax.fine_classes == ("A1", "A2", "A3", "B1", "B2", "B3", "NF")
        assert tax.coarse_classes == ("A", "B", "NF")
        # hardest first: A3 B3 B2 A2 B1 A1 NF
        assert tax.difficulty_rank == (2, 5, 4, 1, 3, 0, 6)
        assert tax.agreement[6] == 1.0 and tax.agreement[2] == 0.5

    def test_label_noise_stays_in_group_and_off_test(self):
        clean = generate(SynthSpec(seed=3))
        noisy = generate(SynthSpec(seed=3, label_noise=0.5))
        changed = clean.labels != noisy.labels
        assert changed.any()
        assert not np.any(changed & (clean.split == Split.TEST))
        groups = np.asarray(SynthSpec().coarse_groups)
        assert np.array_equal(groups[clean.labels], groups[noisy.labels])
        assert not np.any(changed & (clean.labels == 6))

    @pytest.mark.parametrize("kwargs", [
        dict(class_counts=(1, 2)),
        dict(n_classes=1, coarse_groups=(0,), class_counts=(5,), difficulty=(0.0,)),
        dict(split_ratios=(0.5, 0.2, 0.2)),
        dict(difficulty=(-1.0,) + (0.0,) * 6),
        dict(label_noise=1.5),
        dict(coarse_groups=(0, 0, 0, 2, 2, 2, 3)),
    ])
    def test_invalid_spec(self, kwargs):
        with pytest.raises(DataError):
            SynthSpec(**kwargs)

    def test_spec_round_trip(self):
        spec = SynthSpec(seed=9, label_noise=0.1)
        assert SynthSpec.from_dict(spec.to_dict()) == spec

    def test_unknown_spec_field(self):
        with pytest.raises(DataError):
            SynthSpec.from_dict({"sead": 1})


def _perm(n, rng):
    return EpochOrder(rng.permutation(n), with_replacement=False)


class TestDifficulty:
    def test_error_rises_with_difficulty(self):
        spec = SynthSpec()
        errors = np.zeros(spec.n_classes)
        for seed in range(10):
            data = generate(SynthSpec(seed=seed))
            X, y = data.part(Split.TRAIN)
            Xt, yt = data.part(Split.TEST)
            centroids = np.array([X[y == c].mean(axis=0) for c in range(spec.n_classes)])
            pred = np.argmin(((Xt[:, None, :] - centroids[None]) ** 2).sum(axis=-1), axis=1)
            errors += [np.mean(pred[yt == c] != c) for c in range(spec.n_classes)]
        assert stats.spearmanr(spec.difficulty, errors).statistic >= 0.8


class TestStratifiedSplit:
    def test_exact_proportions(self, rng):
        labels = np.repeat(np.arange(3), 10)
        split = stratified_split(labels, (0.7, 0.1, 0.2), rng)
        for c in range(3):
            assert list(np.bincount(split[labels == c], minlength=3)) == [7, 1, 2]

    def test_balanced_test(self, rng):
        labels = np.repeat(np.arange(3), [30, 30, 60])
        split = stratified_split(labels, (0.7, 0.1, 0.2), rng, coarse_groups=(0, 1, 2), balanced_test=True)
        test = np.bincount(labels[split == Split.TEST], minlength=3)
        assert list(test) == [6, 6, 6]
        # surplus from the large group goes to training, every sample keeps one split
        assert np.sum(split == Split.TRAIN) == 21 + 21 + 48
        assert len(split) == 120

    def test_balanced_test_spreads_over_members(self, rng):
        labels = np.repeat(np.arange(4), [20, 20, 40, 40])
        split = stratified_split(labels, (0.6, 0.2, 0.2), rng, coarse_groups=(0, 0, 1, 1), balanced_test=True)
        test = np.bincount(labels[split == Split.TEST], minlength=4)
        assert test[0] + test[1] == test[2] + test[3] == 8

    def test_degenerate_ratios_warn(self, rng):
        labels = np.repeat(np.arange(2), 5)
        with pytest.warns(DegenerateSplitWarning):
            split = stratified_split(labels, (1.0, 0.0, 0.0), rng)
        assert np.all(split == Split.TRAIN)

    def test_class_too_small(self, rng):
        with pytest.raises(DataError):
            stratified_split(np.array([0, 0, 1, 1, 1, 1, 1]), (0.7, 0.1, 0.2), rng)

    def test_disjoint_cover_and_deterministic(self):
        data = generate(SynthSpec(seed=5))
        assert set(np.unique(data.split)) == {0, 1, 2}
        again = stratified_split(data.labels, (0.7, 0.1, 0.2), np.random.default_rng(1))
        assert np.array_equal(again, stratified_split(data.labels, (0.7, 0.1, 0.2), np.random.default_rng(1)))


def _per_class(n, classes=3):
    labels = np.repeat(np.arange(classes), n)
    tax = ClassTaxonomy(tuple("abc"[:classes]), ("g",), (0,) * classes, tuple(range(classes)),
                        (1.0,) * classes, (n,) * classes)
    split = np.full(labels.shape[0], Split.TRAIN, dtype=np.int8)
    split[::5] = Split.TEST
    return LabeledDataset(np.arange(labels.shape[0], dtype=float)[:, None], labels, tax, split)


class TestRestrictTraining:
    def test_identity(self, rng):
        data = _per_class(10)
        assert restrict_training(data, 1.0, rng) is data

    def test_sixty_percent(self, rng):
        data = generate(SynthSpec())
        out = restrict_training(data, 0.6, rng)
        n_train = np.sum(data.split == Split.TRAIN)
        assert np.sum(out.split == Split.TRAIN) == math.ceil(0.6 * n_train)
        for s in (Split.VAL, Split.TEST):
            assert np.array_equal(out.part(s)[0], data.part(s)[0])

    def test_exact_stratification(self, rng):
        labels = np.repeat(np.arange(3), 10)
        tax = ClassTaxonomy(("a", "b", "c"), ("g",), (0, 0, 0), (0, 1, 2), (1.0,) * 3, (10,) * 3)
        data = LabeledDataset(np.zeros((30, 1)), labels, tax)
        out = restrict_training(data, 0.6, rng)
        assert list(np.bincount(out.labels, minlength=3)) == [6, 6, 6]

    def test_emptied_class(self, rng):
        with pytest.raises(DataError):
            restrict_training(_per_class(10), 0.01, rng)

    def test_bad_fraction(self, rng):
        with pytest.raises(DataError):
            restrict_training(_per_class(10), 0.0, rng)


def test_csv_round_trip(tmp_path):
    data = generate(SynthSpec(seed=2))
    path = save_csv(data, tmp_path / "d.csv")
    assert path == tmp_path / "d.csv"
    assert taxonomy_path(path).exists()
    back = load_csv(path)
    assert np.array_equal(back.features, data.features)
    assert np.array_equal(back.labels, data.labels)
    assert np.array_equal(back.split, data.split)
    assert back.taxonomy == data.taxonomy


def test_no_warnings_for_defaults():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        generate(SynthSpec())
