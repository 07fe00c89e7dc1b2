import math

import numpy as np
import pytest

from conftest import is_neighbor_chain
from l2s_disco.afo import (
    AnnealingSchedule,
    exhaustive_afo,
    fixed_strategy_afo,
    hill_climb,
    l2s_disco_afo,
    metropolis_acceptance,
    random_restart_afo,
    simulated_annealing_afo,
    strategy_start,
    write_trajectory_log,
)
from l2s_disco.objectives import Contamination
from l2s_disco.ranker import RankerModel
from l2s_disco.space import HAMMING1, DiscreteSpace, FixedValue, Predicate, key


def ones(X):
    return np.asarray(X).sum(axis=1).astype(float)


def assert_local_optimum(space, x, score_fn, kind=HAMMING1):
    nbrs = space.neighbors(x, kind)
    if len(nbrs):
        assert np.all(score_fn(nbrs) <= score_fn(x[None, :])[0])


# ------------------------------------------------------------------ hill climbing


def test_hill_climb_start_at_local_max():
    space = DiscreteSpace.binary(3)
    res = hill_climb([1, 1, 1], ones, space)
    assert len(res.trajectory) == 1 and res.steps == 0 and res.end_value == 3


def test_hill_climb_lowest_index_tie_break():
    space = DiscreteSpace.binary(3)
    res = hill_climb([0, 0, 0], ones, space)
    assert res.trajectory.states.tolist() == [[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1]]
    assert res.scores.tolist() == [0, 1, 2, 3]


@pytest.mark.parametrize("seed", range(10))
def test_hill_climb_ends_at_local_optimum(seed, frozen_state):
    space, af = frozen_state(d=10, seed=seed % 3)
    rng = np.random.default_rng(seed)
    for first in (False, True):
        res = hill_climb(space.sample_valid(rng), af, space, first_improvement=first)
        assert_local_optimum(space, res.trajectory.end, af)
        assert np.all(np.diff(res.scores) > 0)
        assert is_neighbor_chain(space, res.trajectory.states, HAMMING1)
        assert res.trajectory.value == af(res.trajectory.end[None, :])[0]


def test_hill_climb_max_steps():
    res = hill_climb([0] * 6, ones, DiscreteSpace.binary(6), max_steps=2)
    assert res.steps == 2 and res.end_value == 2


# --------------------------------------------------------------- learned restarts


def test_l2s_single_valid_structure():
    space = DiscreteSpace.binary(3, Predicate(lambda x: x.tolist() == [1, 0, 1], "only-101"))
    ranker = RankerModel(space.sizes)
    out = l2s_disco_afo(ones, ranker, space, np.random.default_rng(0), max_iters=1)
    assert out.best_structure.tolist() == [1, 0, 1]
    assert out.restarts_used == 1


def test_l2s_terminates_with_zero_ranker():
    space = DiscreteSpace.binary(8)
    ranker = RankerModel(space.sizes)
    ranker.theta[:] = 0.0
    out = l2s_disco_afo(ones, ranker, space, np.random.default_rng(0), max_iters=5, stall=None)
    assert out.restarts_used == 5
    assert out.best_value == 8


def test_l2s_never_worse_than_rr_on_average(frozen_state):
    l2s, rr = [], []
    for seed in range(20):
        space, af = frozen_state(d=10, seed=seed)
        ranker = RankerModel(space.sizes)
        l2s.append(l2s_disco_afo(af, ranker, space, np.random.default_rng(seed), max_iters=60).best_value)
        rr.append(random_restart_afo(af, space, np.random.default_rng(seed), restarts=60).best_value)
    assert np.mean(l2s) >= np.mean(rr) - 1e-12


def test_l2s_close_to_exhaustive_on_d12(frozen_state):
    hits = 0
    for seed in range(20):
        space, af = frozen_state(d=12, seed=seed)
        exact = exhaustive_afo(af, space).best_value
        out = l2s_disco_afo(af, RankerModel(space.sizes), space, np.random.default_rng(seed), max_iters=60)
        hits += out.best_value >= exact - 0.05 * abs(exact)
    assert hits >= 16


def test_l2s_outcome_invariants(frozen_state):
    space, af = frozen_state(d=10, seed=1)
    ranker = RankerModel(space.sizes)
    theta0 = ranker.theta.copy()
    out = l2s_disco_afo(af, ranker, space, np.random.default_rng(1), max_iters=30, stall=None)
    assert out.restarts_used == 30 == len(out.trajectories) == len(out.restart_values)
    assert out.best_value == af(out.best_structure[None, :])[0]
    assert out.best_value == max(v for _, v in out.visited.values())
    for traj in out.trajectories:
        assert is_neighbor_chain(space, traj.states, HAMMING1)
        assert traj.value == af(traj.end[None, :])[0]
    assert not np.array_equal(ranker.theta, theta0)  # trained in place


def test_l2s_stall_rule_stops_early():
    space = DiscreteSpace.binary(6)
    out = l2s_disco_afo(ones, RankerModel(space.sizes), space, np.random.default_rng(0), max_iters=60, stall=3)
    assert out.restarts_used == 4  # first iteration finds the global max, three more fail to improve


def test_afo_never_calls_the_objective(frozen_state, monkeypatch):
    space, af = frozen_state(d=8, seed=0)

    def boom(self, *args):
        raise AssertionError("objective touched during acquisition optimization")

    monkeypatch.setattr(Contamination, "evaluate", boom)
    monkeypatch.setattr(Contamination, "evaluate_batch", boom)
    out = l2s_disco_afo(af, RankerModel(space.sizes), space, np.random.default_rng(0), max_iters=10)
    assert out.best_value == af(out.best_structure[None, :])[0]


# --------------------------------------------------------------------- baselines


def test_rr_single_restart_equals_hill_climb(frozen_state):
    space, af = frozen_state(d=10, seed=2)
    out = random_restart_afo(af, space, np.random.default_rng(5), restarts=1)
    start = space.sample_valid(np.random.default_rng(5))
    res = hill_climb(start, af, space)
    assert np.array_equal(out.trajectories[0].states, res.trajectory.states)
    assert out.best_value == res.end_value


def test_rr_monotone_in_restarts(frozen_state):
    space, af = frozen_state(d=10, seed=3)
    values = [random_restart_afo(af, space, np.random.default_rng(0), restarts=r).best_value for r in (1, 2, 5, 10, 30)]
    assert values == sorted(values)


@pytest.mark.parametrize("strategy", ["first-four-zero", "last-four-one"])
def test_strategy_starts_clamp(strategy):
    space = DiscreteSpace.binary(10)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = strategy_start(space, strategy, rng)
        assert np.all(x[:4] == 0) if strategy == "first-four-zero" else np.all(x[-4:] == 1)


def test_fixed_strategy_runs(frozen_state):
    space, af = frozen_state(d=10, seed=0)
    out = fixed_strategy_afo(af, space, "random", np.random.default_rng(0), restarts=3)
    assert len(out.restart_values) == 3
    with pytest.raises(ValueError):
        strategy_start(space, "middle", np.random.default_rng(0))


def test_annealing_at_zero_temperature_never_descends(frozen_state):
    space, af = frozen_state(d=10, seed=4)
    rng = np.random.default_rng(0)
    start = space.sample_valid(np.random.default_rng(9))
    out = simulated_annealing_afo(af, space, rng, AnnealingSchedule(t0=1e-300, proposals=300), start=start)
    chain = out.trajectories[0]
    values = af(chain.states)
    assert np.all(np.diff(values) >= 0)
    assert out.best_value >= af(start[None, :])[0]


def test_metropolis_rule():
    assert metropolis_acceptance(-2.5, 2.5) == pytest.approx(math.exp(-1))
    assert metropolis_acceptance(0.0, 1e-9) == 1.0
    assert metropolis_acceptance(-1.0, 0.0) == 0.0


def test_exhaustive_ties_and_indicator():
    space = DiscreteSpace.binary(4, FixedValue(0, 1))
    out = exhaustive_afo(lambda X: np.zeros(len(X)), space)
    assert out.best_structure.tolist() == [1, 0, 0, 0]
    target = key(np.array([1, 0, 1, 1]))
    out = exhaustive_afo(lambda X: np.array([float(key(x) == target) for x in X]), space)
    assert out.best_structure.tolist() == [1, 0, 1, 1]


def test_exhaustive_matches_reference_loop(frozen_state):
    space, af = frozen_state(d=9, seed=5)
    best = -math.inf
    for x in space.enumerate():
        best = max(best, af(x[None, :])[0])
    assert exhaustive_afo(af, space).best_value == best


def test_trajectory_log(tmp_path, frozen_state):
    space, af = frozen_state(d=8, seed=0)
    out = random_restart_afo(af, space, np.random.default_rng(0), restarts=3)
    path = tmp_path / "traj.csv"
    write_trajectory_log(path, out, af, run_id=7)
    lines = path.read_text().splitlines()
    assert lines[0] == "run,restart,step,structure,af"
    assert len(lines) == 1 + sum(len(t) for t in out.trajectories)
    assert all(line.startswith("7,") for line in lines[1:])
