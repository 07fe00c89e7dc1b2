"""Acquisition-function optimizers: pick ``argmax_x AF(x)`` over a discrete space.

Score functions take a 2-D array of structures (one per row) and return one
score per row. Only the acquisition function and the learned heuristic are
ever called here; the expensive objective never is.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .ranker import PairBuffer, RankerModel, Trajectory, generate_pairs
from .space import HAMMING1, SAMPLE_ATTEMPTS, DiscreteSpace, Neighborhood, SpaceTooConstrainedError, key

ScoreFn = Callable[[np.ndarray], np.ndarray]

STRATEGIES = ("random", "first-four-zero", "last-four-one")


@dataclass
class LocalSearchResult:
    trajectory: Trajectory
    end_value: float
    steps: int
    # score of every trajectory state under the guiding function
    scores: np.ndarray


@dataclass
class AfoOutcome:
    best_structure: np.ndarray
    best_value: float
    restarts_used: int
    trajectories: list = field(default_factory=list)
    # every structure scored under AF during the run, with its AF value
    visited: dict = field(default_factory=dict, repr=False)
    # per-restart AF value at the end of the AF-guided climb
    restart_values: list = field(default_factory=list)

    def ranked_visited(self):
        """Visited (structure, AF value) pairs, best first; ties keep visit order."""
        items = list(self.visited.values())
        order = sorted(range(len(items)), key=lambda i: -items[i][1])
        return [items[i] for i in order]


class _Incumbent:
    """Tracks the best AF value over everything scored during a run."""

    def __init__(self):
        self.visited: dict = {}
        self.best_x = None
        self.best_value = -math.inf

    def observe(self, X, values):
        for x, v in zip(X, values):
            k = key(x)
            if k not in self.visited:
                self.visited[k] = (x.copy(), float(v))
            if v > self.best_value:
                self.best_value = float(v)
                self.best_x = x.copy()

    def outcome(self, restarts, trajectories, restart_values):
        return AfoOutcome(self.best_x, self.best_value, restarts, trajectories, self.visited, restart_values)


# --------------------------------------------------------------------------- #
# local search
# --------------------------------------------------------------------------- #


def hill_climb(
    start,
    score_fn: ScoreFn,
    space: DiscreteSpace,
    kind: Neighborhood = HAMMING1,
    first_improvement: bool = False,
    max_steps: Optional[int] = None,
) -> LocalSearchResult:
    """Steepest-ascent local search from ``start``.

    Moves to the best-scoring valid neighbor while it strictly beats the
    current score; ties go to the earliest neighbor in the space's
    deterministic order. With ``first_improvement`` the first strictly better
    neighbor is taken instead.
    """
    x = space.validate(start)
    current = float(score_fn(x[None, :])[0])
    states = [x]
    scores = [current]
    while max_steps is None or len(states) - 1 < max_steps:
        nbrs = space._neighbors_unchecked(x, kind)
        if len(nbrs) == 0:
            break
        values = np.asarray(score_fn(nbrs), dtype=float)
        if first_improvement:
            better = np.flatnonzero(values > current)
            if len(better) == 0:
                break
            j = int(better[0])
        else:
            j = int(np.argmax(values))
            if not values[j] > current:
                break
        x = nbrs[j]
        current = float(values[j])
        states.append(x)
        scores.append(current)
    traj = Trajectory(np.asarray(states), current)
    return LocalSearchResult(traj, current, len(states) - 1, np.asarray(scores))


# --------------------------------------------------------------------------- #
# learned restarts
# --------------------------------------------------------------------------- #


def l2s_disco_afo(
    af: ScoreFn,
    ranker: RankerModel,
    space: DiscreteSpace,
    rng: np.random.Generator,
    kind: Neighborhood = HAMMING1,
    max_iters: int = 60,
    stall: Optional[int] = 10,
    pair_cap: Optional[int] = None,
    epochs: Optional[int] = None,
    first_improvement: bool = False,
) -> AfoOutcome:
    """Local search with restarts chosen by the learned heuristic ``ranker``.

    Each iteration climbs the heuristic from a random state to pick a start
    (falling back to a random start when that state was already used),
    climbs the acquisition function from it, and trains the heuristic to rank
    the new trajectory's states against every earlier trajectory. ``ranker``
    is updated in place so the caller can carry it into the next BO
    iteration. Stops after ``max_iters`` iterations, or earlier once ``stall``
    consecutive iterations fail to improve the best AF value.
    """
    pair_cap = ranker.config.pair_cap if pair_cap is None else pair_cap
    inc = _Incumbent()
    pool: list[Trajectory] = []
    used_starts: set = set()
    restart_values = []
    buffer = PairBuffer(space.dims)
    since_improvement = 0
    iters = 0
    for _ in range(max_iters):
        iters += 1
        before = inc.best_value
        walk = hill_climb(space.sample_valid(rng), ranker.score, space, kind, first_improvement)
        walk_states = walk.trajectory.states
        inc.observe(walk_states, af(walk_states))
        x_restart = walk_states[-1]
        x_start = space.sample_valid(rng) if key(x_restart) in used_starts else x_restart

        result = hill_climb(x_start, af, space, kind, first_improvement)
        traj = result.trajectory
        inc.observe(traj.states, result.scores)
        restart_values.append(result.end_value)

        new_pref, new_dis = [], []
        for j, old in enumerate(pool):
            pref, dis = generate_pairs(traj, old, pair_cap, rng)
            if len(pref):
                buffer.add(pref, dis, (len(pool), j))
                new_pref.append(pref)
                new_dis.append(dis)
        pool.append(traj)
        if new_pref:
            ranker.update(np.concatenate(new_pref), np.concatenate(new_dis), epochs, rng)
        used_starts.add(key(x_start))

        if inc.best_value > before:
            since_improvement = 0
        else:
            since_improvement += 1
            if stall is not None and since_improvement >= stall:
                break
    return inc.outcome(iters, pool, restart_values)


# --------------------------------------------------------------------------- #
# baselines
# --------------------------------------------------------------------------- #


def random_restart_afo(
    af: ScoreFn,
    space: DiscreteSpace,
    rng: np.random.Generator,
    restarts: int = 60,
    kind: Neighborhood = HAMMING1,
    first_improvement: bool = False,
) -> AfoOutcome:
    """Independent AF hill-climbs from uniform random valid starts."""
    inc = _Incumbent()
    trajectories, values = [], []
    for _ in range(restarts):
        result = hill_climb(space.sample_valid(rng), af, space, kind, first_improvement)
        inc.observe(result.trajectory.states, result.scores)
        trajectories.append(result.trajectory)
        values.append(result.end_value)
    return inc.outcome(restarts, trajectories, values)


def strategy_start(space: DiscreteSpace, strategy: str, rng: np.random.Generator) -> np.ndarray:
    """Random binary start with four positions clamped per ``strategy``.

    Draws are repeated until valid (constrained spaces only).
    """
    if not space.is_binary or space.dims < 4:
        raise ValueError("fixed restart strategies need a binary space with at least 4 variables")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown restart strategy {strategy!r}")
    for _ in range(SAMPLE_ATTEMPTS):
        x = space.sample_uniform(rng)
        if strategy == "first-four-zero":
            x[:4] = 0
        elif strategy == "last-four-one":
            x[-4:] = 1
        if space.is_valid(x):
            return x
    raise SpaceTooConstrainedError(f"no valid {strategy} start in {SAMPLE_ATTEMPTS} attempts")


def fixed_strategy_afo(
    af: ScoreFn,
    space: DiscreteSpace,
    strategy: str,
    rng: np.random.Generator,
    restarts: int = 1,
    kind: Neighborhood = HAMMING1,
) -> AfoOutcome:
    inc = _Incumbent()
    trajectories, values = [], []
    for _ in range(restarts):
        result = hill_climb(strategy_start(space, strategy, rng), af, space, kind)
        inc.observe(result.trajectory.states, result.scores)
        trajectories.append(result.trajectory)
        values.append(result.end_value)
    return inc.outcome(restarts, trajectories, values)


@dataclass(frozen=True)
class AnnealingSchedule:
    t0: float = 1.0
    cooling: float = 0.995
    proposals: int = 2000

    def temperature(self, k: int) -> float:
        return self.t0 * self.cooling**k


def metropolis_acceptance(delta: float, temperature: float) -> float:
    """Probability of accepting a move that changes the (maximized) score by ``delta``."""
    if delta >= 0:
        return 1.0
    if temperature <= 0:
        return 0.0
    return math.exp(delta / temperature)


def simulated_annealing_afo(
    af: ScoreFn,
    space: DiscreteSpace,
    rng: np.random.Generator,
    schedule: AnnealingSchedule = AnnealingSchedule(),
    kind: Neighborhood = HAMMING1,
    start=None,
) -> AfoOutcome:
    """Single Metropolis chain over uniformly proposed valid neighbors, geometric cooling."""
    x = space.sample_valid(rng) if start is None else space.validate(start)
    current = float(af(x[None, :])[0])
    inc = _Incumbent()
    inc.observe(x[None, :], [current])
    states = [x]
    for k in range(schedule.proposals):
        nbrs = space._neighbors_unchecked(x, kind)
        if len(nbrs) == 0:
            break
        y = nbrs[rng.integers(len(nbrs))]
        value = float(af(y[None, :])[0])
        inc.observe(y[None, :], [value])
        accept = metropolis_acceptance(value - current, schedule.temperature(k))
        if accept >= 1.0 or rng.random() < accept:
            x, current = y, value
            states.append(x)
    traj = Trajectory(np.asarray(states), current)
    return inc.outcome(1, [traj], [current])


def exhaustive_afo(af: ScoreFn, space: DiscreteSpace) -> AfoOutcome:
    """Exact argmax by enumeration; the lexicographically first maximizer wins ties."""
    best_x, best_value = None, -math.inf
    for chunk in space.iter_chunks():
        values = np.asarray(af(chunk), dtype=float)
        j = int(np.argmax(values))
        if values[j] > best_value:
            best_value = float(values[j])
            best_x = chunk[j].copy()
    if best_x is None:
        raise ValueError("space has no valid structure")
    return AfoOutcome(best_x, best_value, 0, [], {key(best_x): (best_x, best_value)}, [])


# --------------------------------------------------------------------------- #
# trajectory logs
# --------------------------------------------------------------------------- #


def write_trajectory_log(path, outcome: AfoOutcome, af: ScoreFn, run_id=0, append=False):
    """One CSV row per trajectory state: run, restart, step, structure, AF value."""
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        writer = csv.writer(fh)
        if not append:
            writer.writerow(["run", "restart", "step", "structure", "af"])
        for r, traj in enumerate(outcome.trajectories):
            values = np.asarray(af(traj.states), dtype=float)
            for s, (x, v) in enumerate(zip(traj.states, values)):
                writer.writerow([run_id, r, s, "-".join(map(str, x)), repr(float(v))])
