import math

import numpy as np
import pytest

from l2s_disco.ranker import PairBuffer, RankerConfig, RankerModel, Trajectory, generate_pairs, score, update


def traj(states, value):
    return Trajectory(np.asarray(states, dtype=np.int64), value)


def test_pair_generation_orientation_and_count():
    a = traj([[0, 0], [0, 1], [1, 1]], 2.0)
    b = traj([[1, 0], [0, 0]], 5.0)
    pref, dis = generate_pairs(a, b, cap=256, rng=np.random.default_rng(0))
    assert len(pref) == 6
    assert {tuple(r) for r in pref} == {(1, 0), (0, 0)}
    assert {tuple(r) for r in dis} == {(0, 0), (0, 1), (1, 1)}


def test_pair_generation_ties_and_cap():
    a = traj(np.zeros((30, 3)), 1.0)
    b = traj(np.ones((20, 3)), 1.0)
    assert len(generate_pairs(a, b, 256, np.random.default_rng(0))[0]) == 0
    b.value = 0.0
    pref, dis = generate_pairs(a, b, 256, np.random.default_rng(0))
    assert len(pref) == 256
    assert np.all(pref == 0) and np.all(dis == 1)


def test_fresh_model_scores_zero_and_loss_is_log2():
    model = RankerModel((2,) * 6)
    X = np.random.default_rng(0).integers(0, 2, size=(10, 6))
    assert np.all(model.score(X) == 0.0)
    assert np.allclose(model.pair_loss(X[:5], X[5:]), math.log(2))


def test_gradient_matches_central_differences():
    model = RankerModel((2, 3, 2, 2), RankerConfig(hidden=8))
    rng = np.random.default_rng(0)
    pref = np.column_stack([rng.integers(0, s, size=6) for s in model.sizes])
    dis = np.column_stack([rng.integers(0, s, size=6) for s in model.sizes])
    h = 1e-6
    for _ in range(20):
        theta = rng.normal(scale=0.5, size=model.theta.size)
        analytic = model.pair_loss_grad(pref, dis, theta)
        numeric = np.empty_like(theta)
        for k in range(theta.size):
            e = np.zeros_like(theta)
            e[k] = h
            numeric[k] = (model.pair_loss(pref, dis, theta + e).sum() - model.pair_loss(pref, dis, theta - e).sum()) / (2 * h)
        rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
        assert rel <= 1e-4


def test_compiled_step_matches_numpy_gradient():
    model = RankerModel((2,) * 5, RankerConfig(hidden=4, step_size=0.05, seed=3))
    model.theta[-5:] = np.random.default_rng(1).normal(size=5)  # non-trivial output layer
    pref = np.array([[1, 0, 1, 0, 1]])
    dis = np.array([[0, 1, 0, 1, 0]])
    expected = model.theta - 0.05 * model.pair_loss_grad(pref, dis)
    model.update(pref, dis, epochs=1)
    np.testing.assert_allclose(model.theta, expected, rtol=1e-12, atol=1e-14)


def test_learns_separable_pairs():
    rng = np.random.default_rng(0)
    d = 10
    w = rng.normal(size=d)
    X = rng.integers(0, 2, size=(200, d))
    u = X @ w
    i, j = rng.integers(0, 200, size=(2, 600))
    keep = u[i] != u[j]
    i, j = i[keep], j[keep]
    hi = np.where(u[i] > u[j], i, j)
    lo = np.where(u[i] > u[j], j, i)
    model = RankerModel((2,) * d, RankerConfig(seed=1))
    model.update(X[hi], X[lo], epochs=50, rng=np.random.default_rng(2))
    s = model.score(X)
    assert np.mean(s[hi] > s[lo]) >= 0.95


def test_empty_update_is_noop_and_buffer_roundtrip():
    model = RankerModel((2,) * 3)
    before = model.theta.copy()
    buf = PairBuffer(3)
    update(model, buf)
    assert np.array_equal(model.theta, before)
    buf.add(np.array([[1, 1, 1]]), np.array([[0, 0, 0]]), source=(1, 0))
    assert len(buf) == 1
    update(model, buf)
    assert score(model, [1, 1, 1]) > score(model, [0, 0, 0])
    buf.clear()
    assert len(buf) == 0


def test_theta_size_check_and_copy_independence():
    with pytest.raises(ValueError):
        RankerModel((2, 2), theta=np.zeros(3))
    a = RankerModel((2, 2))
    b = a.copy()
    b.theta[0] += 1
    assert a.theta[0] != b.theta[0]


def test_feature_zero_separable_pairs():
    rng = np.random.default_rng(7)
    pref = rng.integers(0, 2, size=(200, 8))
    dis = rng.integers(0, 2, size=(200, 8))
    pref[:, 0], dis[:, 0] = 1, 0
    model = RankerModel((2,) * 8, RankerConfig(seed=0))
    model.update(pref, dis, epochs=50, rng=np.random.default_rng(0))
    assert np.mean(model.score(pref) > model.score(dis)) >= 0.95
    assert model.score(pref).mean() > model.score(dis).mean()
    assert model.score_one(pref[0]) == model.score_one(pref[0])


def test_loss_strictly_decreasing_in_margin():
    model = RankerModel((2,) * 3, RankerConfig(hidden=2))
    W1, b1, w2, b2 = model.unpack()
    W1[:] = 0.0
    b1[:] = [0.5, 0.0]
    losses = []
    for m in np.linspace(-5, 5, 21):
        w2[:] = [m, 0.0]
        # preferred state gets hidden unit tanh(0.5 + 1), dispreferred tanh(0.5)
        W1[model.offsets[0] + 1, 0] = 1.0
        losses.append(model.pair_loss(np.array([[1, 0, 0]]), np.array([[0, 0, 0]]))[0])
    assert np.all(np.diff(losses) < 0)
