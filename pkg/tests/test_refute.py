import pytest

from graspcause.effects import EstimatorConfig, estimate
from graspcause.events import encode
from graspcause.forest import ForestConfig
from graspcause.graph import build_default_graph, identify
from graspcause.learners import LearnerSpec
from graspcause.refute import (
    STRATEGIES, RefutationError, refute_placebo, refute_random_common_cause, refute_subset,
)
from graspcause.synth import generate, known_effect

FAST = EstimatorConfig(
    model_y=(LearnerSpec("RandomForestRegressor", {"max_depth": [3], "n_estimators": [30]}),),
    model_t=(LearnerSpec("RandomForestClassifier", {"max_depth": [3], "n_estimators": [30]}),),
    forest=ForestConfig(n_trees=40),
)


@pytest.fixture(scope="module")
def dm():
    table, _ = generate(known_effect(300, tau=0.3, seed=2))
    return encode(table, identify(build_default_graph(), "D", "H", ["DO"]))


@pytest.mark.parametrize("est", ["LDML", "FDML"])
def test_zero_strength_and_full_subset_change_nothing(dm, est):
    orig = estimate(dm, est, FAST).effect
    cc = refute_random_common_cause(dm, est, FAST, strength=0.0, seed=1)
    sub = refute_subset(dm, est, FAST, fraction=1.0, reps=2, seed=1)
    assert cc.delta_abs == 0.0 and cc.recomputed_effect == orig
    assert sub.delta_abs == 0.0 and sub.effects == (orig, orig)


def test_placebo_removes_the_effect(dm):
    rep = refute_placebo(dm, "LDML", FAST, reps=5, seed=0)
    assert rep.strategy == STRATEGIES[0]
    assert abs(rep.recomputed_effect) <= 0.08
    assert rep.delta_abs == pytest.approx(abs(rep.original_effect - rep.recomputed_effect))
    assert rep.original_effect > 0.15


def test_small_common_cause_moves_little(dm):
    rep = refute_random_common_cause(dm, "LDML", FAST, strength=0.02, seed=3)
    assert rep.delta_abs <= 0.05
    assert rep.reps == 1


def test_reports_are_seeded(dm):
    a = refute_subset(dm, "LDML", FAST, fraction=0.8, reps=3, seed=4)
    b = refute_subset(dm, "LDML", FAST, fraction=0.8, reps=3, seed=4)
    assert a.effects == b.effects
    assert a.to_dict()["strategy"] == "DataSubset"


def test_original_is_reused_when_given(dm):
    rep = refute_random_common_cause(dm, "LDML", FAST, strength=0.0, original=123.0)
    assert rep.original_effect == 123.0


@pytest.mark.parametrize("call", [
    lambda d: refute_placebo(d, "LDML", FAST, reps=0),
    lambda d: refute_subset(d, "LDML", FAST, fraction=0.0),
    lambda d: refute_subset(d, "LDML", FAST, fraction=1.5),
    lambda d: refute_random_common_cause(d, "LDML", FAST, strength=-1),
])
def test_argument_checks(dm, call):
    with pytest.raises(ValueError):
        call(dm)


def test_every_rep_failing_raises(dm):
    # 19-row subsets fall below the minimum design size on every draw
    with pytest.raises(RefutationError):
        refute_subset(dm, "LDML", FAST, fraction=19 / 300, reps=2, seed=0)


def test_batched_matches_single_estimator(dm):
    batch = refute_subset(dm, ["LDML", "FDML"], FAST, fraction=0.8, reps=2, seed=5)
    for rep in batch:
        single = refute_subset(dm, rep.estimator, FAST, fraction=0.8, reps=2, seed=5)
        assert single.effects == rep.effects
        assert single.original_effect == rep.original_effect
