import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from curriculum_sched.metrics import (
    ClassTaxonomy,
    DegenerateAgreementError,
    aggregate_posterior,
    cohens_kappa,
    confusion_matrix,
    confusion_to_csv,
    paired_t_test,
    per_class_f1,
    regularized_incomplete_beta,
    student_t_cdf,
    weighted_f1,
    within_group_misprediction_rate,
)

GROUPS = (0, 0, 0, 1, 1, 1, 2)


def f1_oracle(truth, pred, m):
    """Support-weighted F1 from explicit precision and recall."""
    truth, pred = list(truth), list(pred)
    total = 0.0
    for c in range(m):
        tp = sum(t == c and p == c for t, p in zip(truth, pred))
        n_pred = sum(p == c for p in pred)
        n_true = sum(t == c for t in truth)
        prec = tp / n_pred if n_pred else 0.0
        rec = tp / n_true if n_true else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        total += f1 * n_true
    return total / len(truth)


class TestWeightedF1:
    def test_perfect(self):
        assert weighted_f1([2, 0, 1, 1], [2, 0, 1, 1], 3) == 1.0

    def test_worked_example(self):
        assert weighted_f1([0, 0, 1, 1], [0, 1, 1, 1], 2) == pytest.approx(0.733333, abs=1e-6)

    def test_all_wrong(self):
        assert weighted_f1([0, 0, 0], [1, 1, 1], 2) == 0.0

    def test_per_class(self):
        cm = confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1], 2)
        assert np.allclose(per_class_f1(cm), [2 / 3, 0.8])

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 6).flatmap(
        lambda m: st.lists(st.tuples(st.integers(0, m - 1), st.integers(0, m - 1)), min_size=1, max_size=60)
        .map(lambda pairs: (m, pairs))
    ))
    def test_matches_oracle(self, case):
        m, pairs = case
        truth, pred = zip(*pairs)
        value = weighted_f1(truth, pred, m)
        assert 0.0 <= value <= 1.0
        assert value == pytest.approx(f1_oracle(truth, pred, m), abs=1e-12)

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            weighted_f1([0, 2], [0, 1], 2)

    def test_empty(self):
        with pytest.raises(ValueError):
            weighted_f1([], [], 2)


class TestKappa:
    def test_identical(self):
        assert cohens_kappa([0, 1, 2, 1], [0, 1, 2, 1], 3) == 1.0

    def test_chance_level(self):
        assert cohens_kappa([0, 1, 0, 1], [0, 0, 1, 1], 2) == pytest.approx(0.0, abs=1e-12)

    def test_full_disagreement(self):
        assert cohens_kappa([0, 0, 1, 1], [1, 1, 0, 0], 2) == pytest.approx(-1.0)

    def test_single_category_agreement(self):
        assert cohens_kappa([1, 1, 1], [1, 1, 1], 2) == 1.0

    def test_constant_raters_on_different_categories(self):
        assert cohens_kappa([0, 0], [1, 1], 2) == 0.0

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=2, max_size=40))
    def test_symmetric_and_bounded(self, pairs):
        a, b = zip(*pairs)
        try:
            k = cohens_kappa(a, b, 4)
        except DegenerateAgreementError:
            return
        assert -1.0 - 1e-12 <= k <= 1.0 + 1e-12
        assert k == pytest.approx(cohens_kappa(b, a, 4), abs=1e-12)


class TestAggregation:
    def test_worked_example(self):
        out = aggregate_posterior(np.array([0.1, 0.2, 0.1, 0.2, 0.1, 0.1, 0.2]), GROUPS)
        assert np.allclose(out, [0.4, 0.4, 0.2], atol=1e-15)

    def test_one_hot(self):
        for i in range(7):
            p = np.eye(7)[i]
            assert np.array_equal(aggregate_posterior(p, GROUPS), np.eye(3)[GROUPS[i]])

    def test_uniform(self):
        assert np.allclose(aggregate_posterior(np.full(7, 1 / 7), GROUPS), [3 / 7, 3 / 7, 1 / 7])

    def test_batch(self, rng):
        P = rng.dirichlet(np.ones(7), size=20)
        out = aggregate_posterior(P, GROUPS)
        assert out.shape == (20, 3)
        assert np.allclose(out[5], aggregate_posterior(P[5], GROUPS))

    def test_mass_preserved(self, rng):
        P = rng.dirichlet(np.ones(7) * 0.3, size=10_000)
        assert np.max(np.abs(aggregate_posterior(P, GROUPS).sum(axis=1) - 1.0)) < 1e-9

    def test_incomplete_taxonomy(self):
        with pytest.raises(ValueError):
            aggregate_posterior(np.full(7, 1 / 7), GROUPS[:6])


class TestWithinGroup:
    def test_rate(self):
        truth = [0, 0, 3, 6]
        pred = [1, 4, 3, 0]
        assert within_group_misprediction_rate(truth, pred, GROUPS) == pytest.approx(1 / 3)

    def test_no_errors(self):
        assert math.isnan(within_group_misprediction_rate([1, 2], [1, 2], GROUPS))


class TestTTest:
    def test_worked_example(self):
        res = paired_t_test([1, 2, 3], [0, 0, 0])
        assert res.statistic == pytest.approx(3.46410, abs=1e-4)
        assert res.df == 2
        assert res.p_value == pytest.approx(0.0742, abs=1e-3)
        oracle = stats.ttest_rel([1, 2, 3], [0, 0, 0])
        assert res.p_value == pytest.approx(oracle.pvalue, abs=1e-9)

    def test_identical_is_degenerate(self):
        res = paired_t_test([0.3, 0.4, 0.5], [0.3, 0.4, 0.5])
        assert (res.statistic, res.p_value, res.degenerate) == (0.0, 1.0, True)

    def test_constant_shift_is_degenerate(self):
        res = paired_t_test([1.0, 2.0, 3.0], [0.0, 1.0, 2.0])
        assert res.degenerate and res.p_value == 0.0 and res.statistic == math.inf

    def test_symmetric_differences(self):
        res = paired_t_test([1, -1, 1, -1], [0, 0, 0, 0])
        assert res.statistic == 0.0
        assert res.p_value == pytest.approx(1.0)

    def test_needs_two_pairs(self):
        with pytest.raises(ValueError):
            paired_t_test([1.0], [0.0])

    def test_against_scipy(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            k = int(rng.integers(2, 30))
            a = rng.normal(size=k)
            b = a + rng.normal(rng.normal(0, 0.5), rng.uniform(0.1, 2), size=k)
            res = paired_t_test(a, b)
            oracle = stats.ttest_rel(a, b)
            assert res.statistic == pytest.approx(oracle.statistic, rel=1e-9)
            assert res.p_value == pytest.approx(oracle.pvalue, abs=1e-6)


class TestIncompleteBeta:
    def test_against_scipy_and_mpmath(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a, b = rng.uniform(0.05, 40, 2)
            x = rng.uniform()
            ours = regularized_incomplete_beta(a, b, x)
            assert ours == pytest.approx(special.betainc(a, b, x), abs=1e-6)
            exact = float(mpmath.betainc(a, b, 0, x, regularized=True))
            assert ours == pytest.approx(exact, abs=1e-6)

    def test_endpoints(self):
        assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
        assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0

    def test_t_cdf(self):
        for df in (1, 2, 5, 30):
            for t in (-4.0, -1.0, 0.0, 0.5, 3.0):
                assert student_t_cdf(t, df) == pytest.approx(stats.t.cdf(t, df), abs=1e-10)

    def test_domain(self):
        with pytest.raises(ValueError):
            regularized_incomplete_beta(0.0, 1.0, 0.5)
        with pytest.raises(ValueError):
            regularized_incomplete_beta(1.0, 1.0, 1.5)


def test_confusion_csv():
    cm = confusion_matrix([0, 1, 1], [0, 0, 1], 2)
    text = confusion_to_csv(cm, ["x", "y"])
    assert text == "true\\pred,x,y\nx,1,0\ny,1,1\n"


def test_taxonomy_round_trip():
    tax = ClassTaxonomy(("a", "b", "c"), ("g", "h"), (0, 0, 1), (2, 0, 1), (0.5, 1.0, 0.2), (3, 4, 5))
    assert ClassTaxonomy.from_dict(tax.to_dict()) == tax


def test_taxonomy_validates_rank():
    with pytest.raises(ValueError):
        ClassTaxonomy(("a", "b"), ("g",), (0, 0), (0, 0), (0.5, 0.5), (1, 1))
