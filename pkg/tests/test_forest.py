import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from graspcause.forest import ForestConfig, HonestForest
from graspcause.trees import best_split, grow


def brute_split(X, r, min_leaf):
    """Exhaustive search over every feature and every midpoint."""
    n, best = r.size, None
    total = r.sum()
    for j in range(X.shape[1]):
        vals = np.unique(X[:, j])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = (lo + hi) / 2
            left = X[:, j] <= thr
            nl = left.sum()
            if nl < min_leaf or n - nl < min_leaf:
                continue
            sl = r[left].sum()
            gain = sl**2 / nl + (total - sl) ** 2 / (n - nl) - total**2 / n
            if best is None or gain > best[2] + 1e-12:
                best = (j, thr, gain)
    if best is not None and best[2] <= 1e-12 * max(1.0, total**2 / n):
        return None
    return best


@given(seed=st.integers(0, 10_000), n=st.integers(4, 40), p=st.integers(1, 3), min_leaf=st.integers(1, 5))
def test_best_split_matches_brute_force(seed, n, p, min_leaf):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 6, size=(n, p)).astype(float)
    r = rng.normal(size=n)
    got, want = best_split(X, r, min_leaf), brute_split(X, r, min_leaf)
    if want is None:
        assert got is None
    else:
        assert got[0] == want[0] and got[1] == pytest.approx(want[1])
        assert got[2] == pytest.approx(want[2], rel=1e-9, abs=1e-9)


def test_split_on_step():
    x = np.linspace(0, 1, 40)[:, None]
    r = np.where(x[:, 0] <= 0.5, -1.0, 1.0)
    j, thr, _ = best_split(x, r, 3)
    assert j == 0 and x[19, 0] < thr < x[20, 0]


def test_grow_full_depth_two_node_ids():
    x = np.repeat(np.arange(4.0), 10)[:, None]
    r = np.repeat([-3.0, -1.0, 1.0, 3.0], 10)
    tree = grow(x, np.arange(40), lambda rows: r[rows] - r[rows].mean(), 2, 2)
    assert tree.n_nodes == 7 and tree.max_depth == 2
    assert tree.left[0] == 1 and tree.right[0] == 2
    assert (tree.left[1], tree.right[1], tree.left[2], tree.right[2]) == (3, 4, 5, 6)
    leaves = tree.apply(x)
    assert [np.unique(leaves[x[:, 0] == v]).item() for v in range(4)] == [3, 4, 5, 6]


def test_honest_constraint_respected():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(60, 1))
    est = rng.uniform(size=(30, 1))
    j, thr, _ = best_split(X, X[:, 0] - 0.5, 5, X_est=est)
    n_left = (est[:, 0] <= thr).sum()
    assert 5 <= n_left <= 25


def test_forest_recovers_constant_ratio():
    rng = np.random.default_rng(1)
    n = 400
    x = rng.uniform(size=(n, 1))
    den = rng.uniform(0.5, 1.5, n)
    num = 0.3 * den + 0.05 * rng.normal(size=n)
    f = HonestForest(ForestConfig(n_trees=40), seed=3).fit(x, num, den)
    theta, per_tree, fallback = f.predict_with_variance(x)
    assert not fallback.any()
    assert np.mean(theta) == pytest.approx(0.3, abs=0.02)
    assert per_tree.shape == (40, n)
    assert f.mean_effect_variance(per_tree) > 0


def test_forest_tracks_step_effect():
    rng = np.random.default_rng(2)
    n = 800
    x = rng.uniform(size=(n, 1))
    tau = np.where(x[:, 0] <= 0.5, -0.5, 0.5)
    num = tau + 0.1 * rng.normal(size=n)
    theta = HonestForest(ForestConfig(n_trees=40), seed=0).fit(x, num, np.ones(n)).predict(x)
    assert np.mean(theta[x[:, 0] < 0.4]) < -0.3
    assert np.mean(theta[x[:, 0] > 0.6]) > 0.3


def test_forest_is_deterministic_and_thread_invariant(monkeypatch):
    rng = np.random.default_rng(5)
    x, num = rng.uniform(size=(120, 1)), rng.normal(size=120)
    cfg = ForestConfig(n_trees=16)
    monkeypatch.setenv("GRASPCAUSE_THREADS", "1")
    a = HonestForest(cfg, 9).fit(x, num, np.ones(120)).predict(x)
    monkeypatch.setenv("GRASPCAUSE_THREADS", "4")
    b = HonestForest(cfg, 9).fit(x, num, np.ones(120)).predict(x)
    np.testing.assert_array_equal(a, b)


def test_zero_denominator_falls_back_to_global():
    rng = np.random.default_rng(0)
    x = rng.uniform(size=(100, 1))
    f = HonestForest(ForestConfig(n_trees=8), 0).fit(x, rng.normal(size=100), np.zeros(100))
    theta, _, fallback = f.predict_with_variance(x)
    assert fallback.all()
    np.testing.assert_array_equal(theta, 0.0)


@pytest.mark.parametrize("kw", [{"n_trees": 10, "bag_size": 4}, {"subsample": 0.7}, {"honesty": 1.0}])
def test_bad_forest_config(kw):
    with pytest.raises(ValueError):
        ForestConfig(**kw)
