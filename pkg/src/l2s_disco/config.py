"""Experiment configuration: TOML files with dotted keys.

Every key is optional except ``benchmark.name``. Unknown sections or keys
are rejected so typos fail loudly. TOML has no null: leave ``forest.max_depth``
and ``forest.max_features`` out for their defaults, and set ``afo.stall = 0``
to disable the stall rule. See ``configs/`` for worked examples and
README.md for the full schema.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .afo import AnnealingSchedule
from .bo import METHODS, AfoConfig, BoConfig
from .ranker import RankerConfig
from .surrogate import ForestConfig

DEFAULTS = {
    "benchmark": {},
    "experiment": {
        "methods": ["l2s-disco-ucb"],
        "seeds": list(range(10)),
        "budget": 250,
        "out": "runs",
        "workers": 1,
    },
    "bo": {"init_evals": 20},
    "acquisition": {"kind": "ucb", "delta": 0.1},
    "forest": {"n_trees": 20, "max_depth": None, "min_samples_leaf": 1, "max_features": None},
    "afo": {"max_iters": 60, "restarts": 60, "stall": 10, "first_improvement": False, "trajectory_log": False},
    "annealing": {"t0": 1.0, "cooling": 0.995, "proposals": 2000},
    "ranker": {"hidden": 32, "step_size": 0.01, "epochs": 5, "pair_cap": 256, "init_scale": 0.1},
    "fig1": {"runs": 100, "warmup": 20, "acquisition": "ucb", "seed": 0},
    "oracle": {"states": 20, "warmup": 20, "max_iters": 60, "seed": 0},
    "output": {"record_time": False},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    data: dict

    @property
    def benchmark(self) -> dict:
        return dict(self.data["benchmark"])

    @property
    def methods(self) -> list:
        return list(self.data["experiment"]["methods"])

    @property
    def seeds(self) -> list:
        return list(self.data["experiment"]["seeds"])

    @property
    def budget(self) -> int:
        return int(self.data["experiment"]["budget"])

    @property
    def out(self) -> Path:
        return Path(self.data["experiment"]["out"])

    @property
    def workers(self) -> int:
        return int(self.data["experiment"]["workers"])

    def section(self, name) -> dict:
        return dict(self.data[name])

    def digest(self) -> str:
        """SHA-256 of the fully resolved configuration."""
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def bo_config(self, seed: int) -> BoConfig:
        d = self.data
        afo = d["afo"]
        return BoConfig(
            budget=self.budget,
            # only random search may have a budget below init_evals (see validate)
            init_evals=min(int(d["bo"]["init_evals"]), self.budget),
            acquisition=d["acquisition"]["kind"],
            delta=float(d["acquisition"]["delta"]),
            seed=int(seed),
            afo=AfoConfig(
                max_iters=int(afo["max_iters"]),
                restarts=int(afo["restarts"]),
                stall=int(afo["stall"]) or None,
                first_improvement=bool(afo["first_improvement"]),
                annealing=AnnealingSchedule(**d["annealing"]),
            ),
            forest=ForestConfig(**d["forest"]),
            ranker=RankerConfig(**d["ranker"]),
            record_time=bool(d["output"]["record_time"]),
        )

    def with_overrides(self, seeds=None, budget=None, out=None, workers=None) -> "ExperimentConfig":
        data = copy.deepcopy(self.data)
        exp = data["experiment"]
        if seeds is not None:
            exp["seeds"] = list(seeds)
        if budget is not None:
            exp["budget"] = int(budget)
        if out is not None:
            exp["out"] = str(out)
        if workers is not None:
            exp["workers"] = int(workers)
        return validate(data)


def _merge(raw: dict) -> dict:
    data = copy.deepcopy(DEFAULTS)
    for section, values in raw.items():
        if section not in data:
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"section {section!r} must hold key = value pairs")
        if section == "benchmark":
            data[section].update(values)
            continue
        for k, v in values.items():
            if k not in data[section]:
                raise ConfigError(f"unknown key {section}.{k}")
            data[section][k] = v
    return data


def validate(data: dict) -> ExperimentConfig:
    from .objectives import BENCHMARKS

    bench = data["benchmark"]
    if "name" not in bench:
        raise ConfigError("benchmark.name is required")
    if bench["name"] not in BENCHMARKS:
        raise ConfigError(f"unknown benchmark {bench['name']!r}; choose from {sorted(BENCHMARKS)}")
    exp = data["experiment"]
    if not exp["methods"]:
        raise ConfigError("experiment.methods must not be empty")
    for m in exp["methods"]:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {sorted(METHODS)}")
    if not exp["seeds"]:
        raise ConfigError("experiment.seeds must not be empty")
    if len(set(exp["seeds"])) != len(exp["seeds"]):
        raise ConfigError("experiment.seeds must be distinct")
    if data["acquisition"]["kind"] not in ("ei", "ucb"):
        raise ConfigError("acquisition.kind must be 'ei' or 'ucb'")
    if int(exp["budget"]) < int(data["bo"]["init_evals"]) and any(m != "random-search" for m in exp["methods"]):
        raise ConfigError("experiment.budget must be at least bo.init_evals")
    return ExperimentConfig(data)


def parse(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"malformed config: {err}") from err
    return validate(_merge(raw))


def load(path) -> ExperimentConfig:
    return parse(Path(path).read_text())


def make_config(benchmark: dict, **sections) -> ExperimentConfig:
    """Build a config programmatically, e.g. ``make_config({"name": "labs", "n": 13}, experiment={...})``."""
    raw = {"benchmark": benchmark, **sections}
    return validate(_merge(raw))
