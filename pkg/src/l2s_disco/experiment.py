"""Benchmark x method x seed grids, multi-seed aggregation and protocol harnesses."""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import mannwhitneyu

from . import surrogate
from .acquisition import AcquisitionState
from .afo import (
    STRATEGIES,
    exhaustive_afo,
    fixed_strategy_afo,
    l2s_disco_afo,
    random_restart_afo,
    simulated_annealing_afo,
    write_trajectory_log,
)
from .bo import HISTORY_COLUMNS, run_method
from .config import ExperimentConfig
from .objectives import Objective, make_objective
from .ranker import RankerConfig, RankerModel
from .space import key

log = logging.getLogger(__name__)

_HISTORY_NAME = re.compile(r"history_(?P<method>.+)_seed(?P<seed>-?\d+)\.csv$")


@dataclass
class AggregateReport:
    """Per-method, per-iteration mean and standard error of the incumbent."""

    # method -> (iterations, mean, stderr, n_seeds)
    table: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def rows(self):
        for method in sorted(self.table):
            iters, mean, se, n = self.table[method]
            for i, m, s in zip(iters, mean, se):
                yield [int(i), method, repr(float(m)), repr(float(s)), n]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "method", "mean_incumbent", "stderr", "n_seeds"])
            writer.writerows(self.rows())


def aggregate_traces(traces_by_method: dict) -> AggregateReport:
    """``traces_by_method[m]`` is a list of equal-length incumbent traces (one per seed)."""
    report = AggregateReport()
    for method, traces in traces_by_method.items():
        lengths = {len(t) for t in traces}
        if len(lengths) != 1:
            raise ValueError(f"method {method!r} has incumbent traces of different lengths {sorted(lengths)}")
        arr = np.asarray(traces, dtype=float)
        n = arr.shape[0]
        mean = arr.mean(axis=0)
        se = arr.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(arr.shape[1])
        report.table[method] = (np.arange(1, arr.shape[1] + 1), mean, se, n)
    return report


def history_path(out: Path, method: str, seed: int) -> Path:
    return Path(out) / f"history_{method}_seed{seed}.csv"


def _run_cell(args):
    benchmark, method, bo_config, out, trajectory_log = args
    objective = make_objective(benchmark)
    on_iteration = None
    if trajectory_log:
        traj_path = Path(out) / f"trajectories_{method}_seed{bo_config.seed}.csv"
        traj_path.unlink(missing_ok=True)

        def on_iteration(t, state, outcome, x_next):
            write_trajectory_log(traj_path, outcome, state, run_id=t, append=traj_path.exists())

    try:
        history = run_method(objective, method, bo_config, on_iteration)
    except Exception as err:  # reported after the barrier
        return method, bo_config.seed, None, f"{type(err).__name__}: {err}"
    history.to_csv(history_path(out, method, bo_config.seed))
    return method, bo_config.seed, history.incumbent, None


def run_experiment(config: ExperimentConfig) -> AggregateReport:
    """Run every (method, seed) cell, then write histories, the aggregate and a manifest."""
    out = config.out
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        raise OSError(f"output directory {out} is not writable: {err}") from err

    trajectory_log = bool(config.section("afo")["trajectory_log"])
    cells = [
        (config.benchmark, method, config.bo_config(seed), out, trajectory_log)
        for method, seed in itertools.product(config.methods, config.seeds)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]

    traces: dict = {}
    failures = []
    for method, seed, trace, error in results:
        if error is not None:
            failures.append({"method": method, "seed": seed, "error": error})
            log.error("cell %s seed %s failed: %s", method, seed, error)
            continue
        traces.setdefault(method, []).append((seed, trace))
    report = aggregate_traces({m: [t for _, t in sorted(runs)] for m, runs in traces.items()})
    report.failures = failures
    report.to_csv(out / "aggregate.csv")
    manifest = {
        "config_sha256": config.digest(),
        "config": config.data,
        "benchmark": config.benchmark,
        "methods": config.methods,
        "seeds": config.seeds,
        "budget": config.budget,
        "budget_counts_initial_evaluations": True,
        "failures": failures,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return report


def read_history(path) -> tuple[str, int, list]:
    """(method, seed, incumbent trace) from a history CSV written by :func:`run_experiment`."""
    m = _HISTORY_NAME.search(Path(path).name)
    if m is None:
        raise ValueError(f"{path} is not a history file")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != HISTORY_COLUMNS:
            raise ValueError(f"{path} has unexpected columns {reader.fieldnames}")
        trace = [float(row["incumbent"]) for row in reader]
    return m["method"], int(m["seed"]), trace


def aggregate_directory(directory) -> AggregateReport:
    """Recompute ``aggregate.csv`` from the history files in ``directory``."""
    directory = Path(directory)
    traces: dict = {}
    files = sorted(directory.glob("history_*_seed*.csv"))
    if not files:
        raise FileNotFoundError(f"no history files in {directory}")
    per_method: dict = {}
    for f in files:
        method, seed, trace = read_history(f)
        per_method.setdefault(method, []).append((seed, trace))
    for method, runs in per_method.items():
        traces[method] = [t for _, t in sorted(runs)]
    report = aggregate_traces(traces)
    report.to_csv(directory / "aggregate.csv")
    return report


# --------------------------------------------------------------------------- #
# frozen surrogate states
# --------------------------------------------------------------------------- #


def warm_start_state(objective: Objective, n_init: int, seed: int, kind: str = "ucb", delta: float = 0.1,
                     forest_config=surrogate.ForestConfig()) -> AcquisitionState:
    """Acquisition state after ``n_init`` distinct random evaluations and one forest fit."""
    rng = np.random.default_rng(seed)
    space = objective.space
    X, seen = [], set()
    while len(X) < n_init:
        x = space.sample_valid(rng)
        if key(x) not in seen:
            seen.add(key(x))
            X.append(x)
    X = np.asarray(X)
    sign = 1.0 if objective.maximize else -1.0
    y = sign * objective.evaluate_batch(X)
    model = surrogate.fit(X, y, space.sizes, forest_config, seed=int(rng.integers(2**31 - 1)))
    return AcquisitionState(model, float(y.max()), 1, kind, delta, space.cardinality())


# --------------------------------------------------------------------------- #
# restart-strategy comparison
# --------------------------------------------------------------------------- #

FIG1_COLUMNS = list(STRATEGIES) + ["l2s-disco"]


def run_fig1_experiment(config: ExperimentConfig, out=None) -> dict:
    """Final AF values of single hill-climbs under each fixed restart strategy on one frozen state.

    Also records the AF-guided climb values of one learned-restart run of the
    same length. Writes ``fig1_values.csv`` (one column per strategy) and
    ``fig1_stats.csv`` (pairwise Mann-Whitney U tests).
    """
    objective = make_objective(config.benchmark)
    space = objective.space
    if not space.is_binary:
        raise ValueError("the restart-strategy experiment needs a binary benchmark")
    fig = config.section("fig1")
    runs = int(fig["runs"])
    out = Path(out) if out is not None else config.out
    out.mkdir(parents=True, exist_ok=True)
    seed = int(fig["seed"])
    bo = config.bo_config(seed)
    state = warm_start_state(objective, int(fig["warmup"]), seed, fig["acquisition"], bo.delta, bo.forest)

    streams = np.random.SeedSequence(seed).spawn(len(STRATEGIES) + 1)
    columns = {}
    for strategy, ss in zip(STRATEGIES, streams):
        rng = np.random.default_rng(ss)
        columns[strategy] = [
            fixed_strategy_afo(state, space, strategy, rng, restarts=1, kind=objective.neighborhood).best_value
            for _ in range(runs)
        ]
    rng = np.random.default_rng(streams[-1])
    ranker = RankerModel(space.sizes, bo.ranker)
    learned = l2s_disco_afo(state, ranker, space, rng, objective.neighborhood, max_iters=runs, stall=None)
    columns["l2s-disco"] = list(learned.restart_values)

    with open(out / "fig1_values.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run"] + FIG1_COLUMNS)
        for i in range(runs):
            writer.writerow([i] + [repr(float(columns[c][i])) for c in FIG1_COLUMNS])

    stats = []
    for a, b in itertools.combinations(FIG1_COLUMNS, 2):
        va, vb = np.asarray(columns[a]), np.asarray(columns[b])
        if np.ptp(np.concatenate([va, vb])) == 0:
            u, p = len(va) * len(vb) / 2.0, 1.0
        else:
            res = mannwhitneyu(va, vb, alternative="two-sided")
            u, p = float(res.statistic), float(res.pvalue)
        stats.append({"a": a, "b": b, "median_a": float(np.median(va)), "median_b": float(np.median(vb)),
                      "u_statistic": u, "p_value": p})
    with open(out / "fig1_stats.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(stats[0]))
        writer.writeheader()
        for row in stats:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return {"values": columns, "stats": stats}


# --------------------------------------------------------------------------- #
# brute-force checks
# --------------------------------------------------------------------------- #


def afo_oracle_trials(objective: Objective, states: int, warmup: int, seed: int, kind: str = "ucb",
                      max_iters: int = 60, bo=None) -> list[dict]:
    """Compare each AFO solver with the exhaustive AF maximum on ``states`` frozen surrogates."""
    space = objective.space
    rows = []
    for s in range(states):
        trial_seed = seed + s
        state = warm_start_state(objective, warmup, trial_seed, kind)
        exact = exhaustive_afo(state, space).best_value
        rng = np.random.default_rng(trial_seed)
        ranker = RankerModel(space.sizes, bo.ranker if bo is not None else RankerConfig())
        stall = bo.afo.stall if bo is not None else 10
        solvers = {
            "l2s-disco": lambda: l2s_disco_afo(state, ranker, space, rng, objective.neighborhood, max_iters, stall),
            "rr-local-search": lambda: random_restart_afo(state, space, rng, max_iters, objective.neighborhood),
            "sim-anneal": lambda: simulated_annealing_afo(state, space, rng, kind=objective.neighborhood),
        }
        for name, solve in solvers.items():
            value = solve().best_value
            rows.append({"trial": s, "solver": name, "value": value, "exhaustive": exact,
                         "within_5pct": value >= exact - 0.05 * abs(exact)})
    return rows


def run_oracle(config: ExperimentConfig, out=None) -> dict:
    """Exhaustive optimum of the benchmark plus AFO-vs-exhaustive trials when enumerable."""
    objective = make_objective(config.benchmark)
    out = Path(out) if out is not None else config.out
    out.mkdir(parents=True, exist_ok=True)
    oc = config.section("oracle")
    summary = {"benchmark": objective.descriptor, "best_known": objective.best_known()}
    if objective.space.n_assignments <= 2**16:
        bo = config.bo_config(int(oc["seed"]))
        rows = afo_oracle_trials(objective, int(oc["states"]), int(oc["warmup"]), int(oc["seed"]),
                                 config.section("acquisition")["kind"], int(oc["max_iters"]), bo)
        with open(out / "oracle_trials.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)
        summary["afo_hit_rate"] = {
            name: float(np.mean([r["within_5pct"] for r in rows if r["solver"] == name]))
            for name in ("l2s-disco", "rr-local-search", "sim-anneal")
        }
    (out / "oracle.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
