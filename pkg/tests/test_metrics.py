import math

import pytest

from agorank.errors import (
    LengthMismatch,
    NotNormalized,
    UndefinedBaseline,
    UnknownMetricDirection,
    ZeroMass,
)
from agorank.metrics import (
    METRIC_CODOMAIN,
    MetricId,
    category_distributions,
    divergence,
    evaluate_metric,
    fairness_regret,
    gini_exposure,
    l_half_balance,
    metric_direction,
    ndcg_at_k,
    normalized_entropy,
    poplift,
    recall_at_k,
    relevance_map,
)
from agorank.model import Catalog, Constraint, Item, Query

TOL = 1e-9


class TestNdcg:
    def test_perfect_order(self):
        assert ndcg_at_k(["a", "b"], {"a": 3.0, "b": 1.0}, 2) == pytest.approx(1.0)

    def test_worked_example(self):
        # rel a=3 b=2 c=1, list (c, a) at k=2:
        # dcg = 1 + 3/log2(3), idcg = 3 + 2/log2(3)
        got = ndcg_at_k(["c", "a"], {"a": 3.0, "b": 2.0, "c": 1.0}, 2)
        expected = (1.0 + 3.0 / math.log2(3)) / (3.0 + 2.0 / math.log2(3))
        assert got == pytest.approx(expected, abs=TOL)

    def test_zero_idcg(self):
        assert ndcg_at_k(["a"], {"a": 0.0}, 1) == 0.0
        assert ndcg_at_k(["a"], {}, 1) == 0.0

    def test_unknown_items_score_zero(self):
        assert ndcg_at_k(["ghost", "a"], {"a": 1.0}, 2) == pytest.approx(
            (1.0 / math.log2(3)) / 1.0
        )

    def test_ideal_uses_all_relevances(self):
        # idcg is computed over the best k of the whole relevance map, not
        # just the items present in the list
        got = ndcg_at_k(["b"], {"a": 3.0, "b": 1.0}, 1)
        assert got == pytest.approx(1.0 / 3.0, abs=TOL)


class TestRecall:
    def test_half(self):
        assert recall_at_k(["a", "x"], {"a", "b"}, 2) == pytest.approx(0.5)

    def test_empty_relevant(self):
        assert recall_at_k(["a"], set(), 1) == 0.0

    def test_k_truncates(self):
        assert recall_at_k(["x", "a", "b"], {"a", "b"}, 1) == 0.0


class TestGini:
    def test_uniform(self):
        assert gini_exposure([1.0, 1.0, 1.0, 1.0]) == pytest.approx(0.0, abs=TOL)

    def test_concentrated(self):
        assert gini_exposure([0.0, 0.0, 0.0, 4.0]) == pytest.approx(0.75, abs=TOL)

    def test_two_point(self):
        assert gini_exposure([1.0, 3.0]) == pytest.approx(0.25, abs=TOL)

    def test_order_invariant(self):
        assert gini_exposure([3.0, 1.0]) == gini_exposure([1.0, 3.0])

    def test_zero_mass(self):
        with pytest.raises(ZeroMass):
            gini_exposure([0.0, 0.0])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            gini_exposure([-1.0, 2.0])


class TestEntropy:
    def test_uniform_is_one(self):
        assert normalized_entropy([0.25] * 4) == pytest.approx(1.0, abs=TOL)

    def test_degenerate_is_zero(self):
        result = normalized_entropy([1.0, 0.0, 0.0])
        assert result == 0.0
        # no negative zero leaking out of the log
        assert math.copysign(1.0, result) == 1.0

    def test_not_normalized(self):
        with pytest.raises(NotNormalized):
            normalized_entropy([0.5, 0.2])

    def test_needs_two_outcomes(self):
        with pytest.raises(ValueError):
            normalized_entropy([1.0])


class TestDivergence:
    def test_kl_worked_example(self):
        # 0.5*log2(0.5/0.75) + 0.5*log2(0.5/0.25)
        got = divergence([0.5, 0.5], [0.75, 0.25], "kl")
        assert got == pytest.approx(0.20751874963942185, abs=TOL)

    def test_kl_self_is_zero(self):
        assert divergence([0.3, 0.7], [0.3, 0.7], "kl") == pytest.approx(0.0, abs=TOL)

    def test_kl_asymmetric(self):
        ab = divergence([0.5, 0.5], [0.9, 0.1], "kl")
        ba = divergence([0.9, 0.1], [0.5, 0.5], "kl")
        assert abs(ab - ba) > 0.01

    def test_js_symmetric(self):
        ab = divergence([0.2, 0.8], [0.6, 0.4], "js")
        ba = divergence([0.6, 0.4], [0.2, 0.8], "js")
        assert ab == pytest.approx(ba, abs=1e-12)

    def test_js_disjoint_is_one(self):
        assert divergence([1.0, 0.0], [0.0, 1.0], "js") == pytest.approx(1.0, abs=1e-6)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            divergence([0.5, 0.5], [0.5, 0.5], "hellinger")

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            divergence([1.0], [0.5, 0.5], "kl")

    def test_not_normalized(self):
        with pytest.raises(NotNormalized):
            divergence([0.6, 0.6], [0.5, 0.5], "kl")

    def test_zero_support_in_q_survives_smoothing(self):
        got = divergence([0.5, 0.5], [1.0, 0.0], "kl")
        assert math.isfinite(got)
        assert got > 0.0


class TestPoplift:
    CAT = Catalog(
        [
            Item(id="hist", provider_id="p", popularity=0.4),
            Item(id="hot", provider_id="p", popularity=0.6),
            Item(id="cold", provider_id="p", popularity=0.2),
            Item(id="dead", provider_id="p", popularity=0.0),
        ]
    )

    def test_worked_example(self):
        # rec mean 0.6 vs historical 0.4
        assert poplift(["hist"], ["hot"], self.CAT) == pytest.approx(0.5, abs=TOL)

    def test_negative_lift(self):
        assert poplift(["hist"], ["cold"], self.CAT) == pytest.approx(-0.5, abs=TOL)

    def test_empty_recs_count_zero(self):
        assert poplift(["hist"], [], self.CAT) == pytest.approx(-1.0, abs=TOL)

    def test_empty_profile(self):
        with pytest.raises(UndefinedBaseline):
            poplift([], ["hot"], self.CAT)

    def test_zero_baseline(self):
        with pytest.raises(UndefinedBaseline):
            poplift(["dead"], ["hot"], self.CAT)


class TestFairnessRegret:
    @pytest.mark.parametrize(
        "metric,target,achieved,expected",
        [
            (MetricId.NDCG, 0.9, 0.7, 0.2),
            (MetricId.NDCG, 0.9, 0.95, 0.0),
            (MetricId.GINI_EXPOSURE, 0.3, 0.5, 0.2),
            (MetricId.GINI_EXPOSURE, 0.3, 0.1, 0.0),
            (MetricId.POP_LIFT, 0.1, -0.4, 0.3),
            (MetricId.POP_LIFT, 0.1, 0.05, 0.0),
        ],
    )
    def test_examples(self, metric, target, achieved, expected):
        assert fairness_regret(metric, target, achieved) == pytest.approx(
            expected, abs=TOL
        )

    @pytest.mark.parametrize(
        "metric", [MetricId.FAIRNESS_REGRET, MetricId.L_HALF_BALANCE]
    )
    def test_composites_have_no_direction(self, metric):
        with pytest.raises(UnknownMetricDirection):
            fairness_regret(metric, 0.5, 0.5)
        with pytest.raises(UnknownMetricDirection):
            metric_direction(metric)


class TestLHalfBalance:
    def test_uniform_two(self):
        assert l_half_balance([0.5, 0.5]) == pytest.approx(2.0, abs=TOL)

    def test_single(self):
        assert l_half_balance([1.0]) == pytest.approx(1.0, abs=TOL)

    def test_all_zero(self):
        assert l_half_balance([0.0, 0.0]) == pytest.approx(0.0, abs=TOL)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            l_half_balance([1.5])


class TestCodomain:
    def test_every_metric_has_a_codomain(self):
        for metric in MetricId:
            lo, hi = METRIC_CODOMAIN[metric]
            assert lo < hi


def _catalog():
    return Catalog(
        [
            Item(
                id="a",
                provider_id="p1",
                categories=frozenset({"food"}),
                popularity=0.9,
            ),
            Item(
                id="b",
                provider_id="p1",
                categories=frozenset({"nature"}),
                popularity=0.1,
                attributes={"price": 10.0},
            ),
            Item(
                id="c",
                provider_id="p2",
                categories=frozenset({"food", "market"}),
                popularity=0.5,
            ),
        ]
    )


class TestRelevanceMap:
    def test_dot_product(self):
        cat = _catalog()
        q = Query(id="q", preference_weights={"food": 2.0, "market": 1.0})
        rel = relevance_map(q, cat)
        assert rel["a"] == pytest.approx(2.0)
        assert rel["b"] == pytest.approx(0.0)
        assert rel["c"] == pytest.approx(3.0)

    def test_constraint_violators_zeroed(self):
        cat = _catalog()
        q = Query(
            id="q",
            preference_weights={"food": 1.0},
            constraints=(Constraint("popularity", "<=", 0.6),),
        )
        rel = relevance_map(q, cat)
        assert rel["a"] == 0.0
        assert rel["c"] == pytest.approx(1.0)


class TestCategoryDistributions:
    def test_support_is_union(self):
        cat = _catalog()
        p, q = category_distributions(["a"], ["b"], cat)
        # union support: food, nature
        assert len(p) == len(q) == 2
        assert sum(p) == pytest.approx(1.0)
        assert sum(q) == pytest.approx(1.0)

    def test_single_category_returns_none(self):
        cat = _catalog()
        assert category_distributions(["a"], ["a"], cat) is None

    def test_empty_history_returns_none(self):
        cat = _catalog()
        assert category_distributions([], ["a", "b"], cat) is None


class TestEvaluateMetric:
    def test_ndcg_always_computable(self):
        cat = _catalog()
        q = Query(id="q", preference_weights={"food": 1.0}, top_n=2)
        got = evaluate_metric(MetricId.NDCG, q, ["c", "a"], cat, {})
        assert got is not None
        assert 0.0 <= got <= 1.0

    def test_exposure_metrics_none_without_mass(self):
        cat = _catalog()
        q = Query(id="q", top_n=2)
        assert evaluate_metric(MetricId.GINI_EXPOSURE, q, ["a"], cat, {}) is None
        assert evaluate_metric(MetricId.NORM_ENTROPY, q, ["a"], cat, {}) is None

    def test_exposure_metrics_cover_all_providers(self):
        cat = _catalog()
        q = Query(id="q", top_n=2)
        # only p1 has exposure; p2's zero still enters the distribution
        got = evaluate_metric(MetricId.GINI_EXPOSURE, q, ["a"], cat, {"p1": 2.0})
        assert got == pytest.approx(0.5)

    def test_history_metrics_none_without_history(self):
        cat = _catalog()
        q = Query(id="q", top_n=2)
        assert evaluate_metric(MetricId.KL_DIV, q, ["a"], cat, {}) is None
        assert evaluate_metric(MetricId.POP_LIFT, q, ["a"], cat, {}) is None

    def test_poplift_from_history(self):
        cat = _catalog()
        q = Query(id="q", user_history=("c",), top_n=1)
        got = evaluate_metric(MetricId.POP_LIFT, q, ["a"], cat, {})
        assert got == pytest.approx((0.9 - 0.5) / 0.5)

    def test_composites_rejected(self):
        cat = _catalog()
        q = Query(id="q", top_n=1)
        with pytest.raises(UnknownMetricDirection):
            evaluate_metric(MetricId.FAIRNESS_REGRET, q, ["a"], cat, {})
