"""Bayesian optimization loop over discrete structures.

Start from random evaluations, then repeat: fit the forest, optimize the
acquisition function, evaluate the winner, add it to the data.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import surrogate
from .acquisition import EI, UCB, AcquisitionState
from .afo import (
    AnnealingSchedule,
    exhaustive_afo,
    l2s_disco_afo,
    random_restart_afo,
    simulated_annealing_afo,
)
from .objectives import Objective
from .ranker import RankerConfig, RankerModel
from .space import ENUMERATION_LIMIT, SAMPLE_ATTEMPTS, InvalidStructureError, SpaceTooConstrainedError, key
from .surrogate import ForestConfig

log = logging.getLogger(__name__)

SOLVERS = ("l2s-disco", "rr-local-search", "sim-anneal", "exhaustive")

# method name -> (solver, acquisition kind or None to use the configured one)
METHODS = {
    "l2s-disco-ucb": ("l2s-disco", UCB),
    "l2s-disco-ei": ("l2s-disco", EI),
    "rr-local-search": ("rr-local-search", None),
    "sim-anneal": ("sim-anneal", None),
    "random-search": (None, None),
}


@dataclass(frozen=True)
class AfoConfig:
    solver: str = "l2s-disco"
    max_iters: int = 60
    restarts: int = 60
    stall: Optional[int] = 10
    first_improvement: bool = False
    annealing: AnnealingSchedule = AnnealingSchedule()


@dataclass(frozen=True)
class BoConfig:
    budget: int
    init_evals: int = 20
    acquisition: str = UCB
    delta: float = 0.1
    seed: int = 0
    afo: AfoConfig = AfoConfig()
    forest: ForestConfig = ForestConfig()
    ranker: RankerConfig = RankerConfig()
    record_time: bool = True

    def __post_init__(self):
        if self.init_evals < 1:
            raise ValueError("init_evals must be at least 1")
        if self.budget < self.init_evals:
            raise ValueError("budget must cover the initial evaluations")
        if self.afo.solver not in SOLVERS:
            raise ValueError(f"unknown AFO solver {self.afo.solver!r}")


@dataclass
class Record:
    iteration: int  # 1-based evaluation count
    phase: str  # "init" or "bo"
    structure: np.ndarray
    value: float
    elapsed_ms: Optional[float]


@dataclass
class History:
    direction: str
    seed: int = 0
    records: list = field(default_factory=list)
    incumbent: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def maximize(self):
        return self.direction == "maximize"

    def append(self, record: Record):
        if self.incumbent:
            prev = self.incumbent[-1]
            best = max(prev, record.value) if self.maximize else min(prev, record.value)
        else:
            best = record.value
        self.records.append(record)
        self.incumbent.append(best)

    @property
    def structures(self) -> np.ndarray:
        return np.asarray([r.structure for r in self.records])

    @property
    def values(self) -> np.ndarray:
        return np.asarray([r.value for r in self.records], dtype=float)

    @property
    def best_value(self) -> float:
        return self.incumbent[-1]

    def rows(self):
        for r, inc in zip(self.records, self.incumbent):
            elapsed = "" if r.elapsed_ms is None else f"{r.elapsed_ms:.3f}"
            yield [self.seed, r.iteration, r.phase, "-".join(map(str, r.structure)), repr(r.value), repr(inc), elapsed]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(HISTORY_COLUMNS)
            writer.writerows(self.rows())


HISTORY_COLUMNS = ["seed", "iteration", "phase", "structure", "objective", "incumbent", "elapsed_ms"]


class BoAborted(RuntimeError):
    """An objective evaluation failed; ``history`` holds everything evaluated before it."""

    def __init__(self, message, history: History):
        super().__init__(message)
        self.history = history


def _draw_unseen(space, rng, seen: set) -> np.ndarray:
    for _ in range(SAMPLE_ATTEMPTS):
        x = space.sample_valid(rng)
        if key(x) not in seen:
            return x
    # nearly exhausted small space: pick uniformly among what is left
    if space.n_assignments <= ENUMERATION_LIMIT:
        unseen = [x for x in space.enumerate() if key(x) not in seen]
        if unseen:
            return unseen[int(rng.integers(len(unseen)))]
        raise SpaceTooConstrainedError("every valid structure has already been evaluated; lower the budget")
    raise SpaceTooConstrainedError("could not draw an unevaluated valid structure")


def _evaluate(objective: Objective, x, history, iteration, phase, started, record_time):
    if not objective.space.is_valid(x):
        raise InvalidStructureError(f"refusing to evaluate invalid structure {np.asarray(x).tolist()}")
    try:
        value = float(objective.evaluate(x))
    except Exception as err:
        raise BoAborted(f"objective failed at evaluation {iteration}: {err}", history) from err
    if not math.isfinite(value):
        raise BoAborted(f"objective returned {value} at evaluation {iteration}", history)
    elapsed = (time.perf_counter() - started) * 1e3 if record_time else None
    history.append(Record(iteration, phase, np.asarray(x).copy(), value, elapsed))


def run_random_search(objective: Objective, budget: int, seed: int = 0, record_time: bool = True) -> History:
    """``budget`` distinct uniform valid structures, evaluated in draw order."""
    rng = np.random.default_rng(seed)
    history = History(objective.direction, seed)
    seen: set = set()
    for i in range(1, budget + 1):
        started = time.perf_counter()
        x = _draw_unseen(objective.space, rng, seen)
        seen.add(key(x))
        _evaluate(objective, x, history, i, "init", started, record_time)
    return history


def run_bo(objective: Objective, config: BoConfig, on_iteration=None) -> History:
    """Optimize ``objective`` with ``config.budget`` total evaluations (initial ones included).

    ``on_iteration(t, state, outcome, x_next)`` is called after every acquisition
    optimization, before the expensive evaluation.
    """
    space = objective.space
    sign = 1.0 if objective.maximize else -1.0
    streams = np.random.SeedSequence(config.seed).spawn(4)
    init_rng, afo_rng, forest_rng, ranker_ss = (np.random.default_rng(s) for s in streams)
    ranker = None
    if config.afo.solver == "l2s-disco":
        ranker_cfg = replace(config.ranker, seed=int(ranker_ss.integers(2**31 - 1)))
        ranker = RankerModel(space.sizes, ranker_cfg)
    n_structures = space.cardinality()

    history = History(objective.direction, config.seed)
    seen: set = set()
    for i in range(1, config.init_evals + 1):
        started = time.perf_counter()
        x = _draw_unseen(space, init_rng, seen)
        seen.add(key(x))
        _evaluate(objective, x, history, i, "init", started, config.record_time)

    for t in range(1, config.budget - config.init_evals + 1):
        started = time.perf_counter()
        X = history.structures
        y = sign * history.values
        model = surrogate.fit(X, y, space.sizes, config.forest, seed=int(forest_rng.integers(2**31 - 1)))
        state = AcquisitionState(model, float(y.max()), t, config.acquisition, config.delta, n_structures)
        outcome = _optimize(state, objective, config, afo_rng, ranker)
        x_next = outcome.best_structure
        if key(x_next) in seen:
            x_next = _substitute(outcome, seen, space, afo_rng)
        if on_iteration is not None:
            on_iteration(t, state, outcome, x_next)
        seen.add(key(x_next))
        _evaluate(objective, x_next, history, config.init_evals + t, "bo", started, config.record_time)
        log.debug("iteration %d: value %.6g incumbent %.6g", t, history.values[-1], history.best_value)
    return history


def _substitute(outcome, seen, space, rng):
    for x, _ in outcome.ranked_visited():
        if key(x) not in seen:
            return x
    return _draw_unseen(space, rng, seen)


def _optimize(state, objective, config: BoConfig, rng, ranker):
    space, kind, afo = objective.space, objective.neighborhood, config.afo
    if afo.solver == "l2s-disco":
        return l2s_disco_afo(state, ranker, space, rng, kind, afo.max_iters, afo.stall,
                             first_improvement=afo.first_improvement)
    if afo.solver == "rr-local-search":
        return random_restart_afo(state, space, rng, afo.restarts, kind, afo.first_improvement)
    if afo.solver == "sim-anneal":
        return simulated_annealing_afo(state, space, rng, afo.annealing, kind)
    return exhaustive_afo(state, space)


def run_method(objective: Objective, method: str, config: BoConfig, on_iteration=None) -> History:
    """Run one named method from ``METHODS`` with ``config`` as the base settings."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(METHODS)}")
    solver, kind = METHODS[method]
    if solver is None:
        return run_random_search(objective, config.budget, config.seed, config.record_time)
    cfg = replace(config, afo=replace(config.afo, solver=solver))
    if kind is not None:
        cfg = replace(cfg, acquisition=kind)
    return run_bo(objective, cfg, on_iteration)
