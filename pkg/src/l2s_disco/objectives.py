"""Black-box objectives and benchmark problem instances.

Every instance freezes its randomness at construction, so ``evaluate`` is a
pure function of the structure. ``evaluate_batch`` is the vectorized form used
by enumeration oracles.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .space import (
    HAMMING1,
    Cardinality,
    DiscreteSpace,
    InvalidStructureError,
    Neighborhood,
    SWAP,
)

MAXIMIZE = "maximize"
MINIMIZE = "minimize"

# best_known only enumerates spaces strictly smaller than this.
BEST_KNOWN_LIMIT = 2**24


class Objective:
    """Expensive function ``F`` over the valid structures of ``space``."""

    name = "objective"
    direction = MINIMIZE
    neighborhood: Neighborhood = HAMMING1

    def __init__(self, space: DiscreteSpace):
        self.space = space

    @property
    def params(self) -> dict:
        return {}

    @property
    def descriptor(self) -> dict:
        return {"name": self.name, **self.params}

    @property
    def maximize(self) -> bool:
        return self.direction == MAXIMIZE

    def evaluate(self, x) -> float:
        x = self.space.validate(x)
        return float(self.evaluate_batch(x[None, :])[0])

    def __call__(self, x) -> float:
        return self.evaluate(x)

    def evaluate_batch(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.evaluate(row) for row in X], dtype=float)

    def better(self, a: float, b: float) -> bool:
        return a > b if self.maximize else a < b

    def best_known(self) -> Optional[float]:
        """Exhaustive optimum when the space is small enough to enumerate."""
        if self.space.n_assignments >= BEST_KNOWN_LIMIT:
            return None
        best = None
        for chunk in self.space.iter_chunks(chunk_size=1 << 14):
            values = self.evaluate_batch(chunk)
            v = float(values.max() if self.maximize else values.min())
            if best is None or self.better(v, best):
                best = v
        return best


def best_known(objective: Objective) -> Optional[float]:
    return objective.best_known()


# --------------------------------------------------------------------------- #
# LABS
# --------------------------------------------------------------------------- #


def to_spins(X) -> np.ndarray:
    """Map binary indices to a +/-1 sequence: 0 -> +1, 1 -> -1."""
    return 1 - 2 * np.asarray(X, dtype=np.int64)


def labs_energy(s) -> float:
    """Sum of squared aperiodic autocorrelations of a +/-1 sequence."""
    s = np.asarray(s, dtype=np.int64)
    if s.ndim != 1 or not np.all(np.abs(s) == 1):
        raise ValueError("LABS energy needs a 1-D sequence of +1/-1 entries")
    return float(labs_energy_batch(s[None, :])[0])


def labs_energy_batch(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=np.int64)
    n = S.shape[1]
    energy = np.zeros(len(S), dtype=np.int64)
    for k in range(1, n):
        c = np.einsum("ij,ij->i", S[:, : n - k], S[:, k:])
        energy += c * c
    return energy.astype(float)


def merit_factor(s) -> float:
    s = np.asarray(s)
    energy = labs_energy(s)
    if energy < 1:
        raise ValueError("merit factor undefined for zero sidelobe energy")
    return len(s) ** 2 / energy


class Labs(Objective):
    """Merit factor ``n^2 / E(S)`` of the sequence encoded by a binary structure (maximize)."""

    name = "labs"
    direction = MAXIMIZE

    def __init__(self, n: int):
        if n < 2:
            raise ValueError("LABS needs n >= 2")
        self.n = int(n)
        super().__init__(DiscreteSpace.binary(self.n))

    @property
    def params(self):
        return {"n": self.n}

    def evaluate_batch(self, X):
        energy = labs_energy_batch(to_spins(X))
        return self.n**2 / energy


# --------------------------------------------------------------------------- #
# Contamination control
# --------------------------------------------------------------------------- #


class Contamination(Objective):
    """Lagrangian-relaxed contamination control over ``d`` binary prevention stages (minimize).

    The fraction of contaminated food evolves per Monte-Carlo path ``k`` as::

        Z[i] = spread[i] * (1 - x[i]) * (1 - Z[i-1]) + (1 - decay[i] * x[i]) * Z[i-1]

    starting from ``Z[0] = initial``. The score is
    ``sum_i [cost[i] x[i] + penalty/T * #{k: Z[i, k] > limit[i]}] + reg * |x|_1``.
    """

    name = "contamination"
    direction = MINIMIZE

    def __init__(
        self,
        d: int = 25,
        reg: float = 1e-4,
        penalty: float = 1.0,
        mc_samples: int = 100,
        cost: float | Sequence[float] = 1.0,
        limit: float | Sequence[float] = 0.1,
        initial_beta: tuple[float, float] = (1.0, 30.0),
        spread_beta: tuple[float, float] = (1.0, 17.0 / 3.0),
        decay_beta: tuple[float, float] = (1.0, 7.0 / 3.0),
        seed: int = 0,
    ):
        if mc_samples < 1 or penalty <= 0 or reg < 0:
            raise ValueError("need mc_samples >= 1, penalty > 0 and reg >= 0")
        self.d = int(d)
        self.reg = float(reg)
        self.penalty = float(penalty)
        self.mc_samples = int(mc_samples)
        self.seed = int(seed)
        self.cost = np.broadcast_to(np.asarray(cost, dtype=float), (self.d,)).copy()
        self.limit = np.broadcast_to(np.asarray(limit, dtype=float), (self.d,)).copy()
        self.beta_params = {
            "initial": tuple(map(float, initial_beta)),
            "spread": tuple(map(float, spread_beta)),
            "decay": tuple(map(float, decay_beta)),
        }
        rng = np.random.default_rng(self.seed)
        T = self.mc_samples
        self.initial_fraction = rng.beta(*initial_beta, size=T)
        self.spread_rates = rng.beta(*spread_beta, size=(T, self.d))
        self.decay_rates = rng.beta(*decay_beta, size=(T, self.d))
        super().__init__(DiscreteSpace.binary(self.d))

    @property
    def params(self):
        return {
            "d": self.d,
            "reg": self.reg,
            "penalty": self.penalty,
            "mc_samples": self.mc_samples,
            "seed": self.seed,
            **{f"{k}_beta": list(v) for k, v in self.beta_params.items()},
        }

    def fractions(self, X: np.ndarray) -> np.ndarray:
        """Contaminated fraction per structure, stage and sample path, shape (m, d, T)."""
        X = np.asarray(X, dtype=float)
        m = len(X)
        out = np.empty((m, self.d, self.mc_samples))
        z = np.broadcast_to(self.initial_fraction, (m, self.mc_samples))
        for i in range(self.d):
            xi = X[:, i : i + 1]
            z = self.spread_rates[:, i] * (1 - xi) * (1 - z) + (1 - self.decay_rates[:, i] * xi) * z
            out[:, i] = z
        return out

    def evaluate_batch(self, X):
        X = np.asarray(X)
        if X.shape[1] != self.d:
            raise InvalidStructureError(f"expected {self.d} stages, got {X.shape[1]}")
        violations = (self.fractions(X) > self.limit[None, :, None]).sum(axis=2)
        total = X @ self.cost + (self.penalty / self.mc_samples) * violations.sum(axis=1)
        return total + self.reg * np.abs(X).sum(axis=1)


# --------------------------------------------------------------------------- #
# Ising sparsification
# --------------------------------------------------------------------------- #

ISING_MAX_NODES = 20


def grid_edges(rows: int, cols: int) -> list[tuple[int, int]]:
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return sorted(edges)


def all_spins(n: int) -> np.ndarray:
    """Every configuration in {-1, +1}^n, shape (2^n, n)."""
    if n > ISING_MAX_NODES:
        raise ValueError(f"refusing to enumerate 2^{n} spin states (limit {ISING_MAX_NODES} nodes)")
    codes = np.arange(2**n, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n)[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)


class IsingSparsification(Objective):
    """Regularized KL divergence from a zero-field Ising model to an edge-subset of it (minimize).

    Binary variable ``e`` keeps edge ``e`` of the reference graph with its
    reference coupling; dropped edges get coupling zero.
    """

    name = "ising"
    direction = MINIMIZE

    def __init__(
        self,
        rows: int = 4,
        cols: int = 4,
        reg: float = 1e-2,
        coupling_range: tuple[float, float] = (0.05, 5.0),
        seed: int = 0,
    ):
        self.rows, self.cols = int(rows), int(cols)
        self.nodes = self.rows * self.cols
        if self.nodes > ISING_MAX_NODES:
            raise ValueError(f"refusing {self.nodes} nodes (limit {ISING_MAX_NODES})")
        self.reg = float(reg)
        self.seed = int(seed)
        self.coupling_range = tuple(map(float, coupling_range))
        self.edges = np.asarray(grid_edges(self.rows, self.cols), dtype=np.int64)
        rng = np.random.default_rng(self.seed)
        magnitude = rng.uniform(*coupling_range, size=len(self.edges))
        sign = rng.choice([-1.0, 1.0], size=len(self.edges))
        self.couplings = magnitude * sign

        spins = all_spins(self.nodes)
        # z_i z_j for every state and edge
        self._edge_products = (spins[:, self.edges[:, 0]] * spins[:, self.edges[:, 1]]).astype(float)
        log_weights = self._edge_products @ self.couplings
        self.log_partition_p = float(logsumexp(log_weights))
        prob = np.exp(log_weights - self.log_partition_p)
        self.moments = prob @ self._edge_products
        super().__init__(DiscreteSpace.binary(len(self.edges)))

    @property
    def params(self):
        return {"rows": self.rows, "cols": self.cols, "reg": self.reg, "seed": self.seed,
                "coupling_range": list(self.coupling_range)}

    def log_partition(self, couplings: np.ndarray) -> np.ndarray:
        """log Z for one coupling vector (1-D) or several (rows of a 2-D array)."""
        couplings = np.asarray(couplings, dtype=float)
        return logsumexp(self._edge_products @ couplings.T, axis=0)

    def kl_divergence(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        q = X * self.couplings[None, :]
        return (self.couplings[None, :] - q) @ self.moments + self.log_partition(q) - self.log_partition_p

    def evaluate_batch(self, X):
        X = np.asarray(X)
        out = np.empty(len(X))
        for start in range(0, len(X), 64):
            part = X[start : start + 64]
            out[start : start + 64] = self.kl_divergence(part) + self.reg * part.sum(axis=1)
        return out


# --------------------------------------------------------------------------- #
# Synthetic cardinality-constrained placement
# --------------------------------------------------------------------------- #


def _default_counts(d: int) -> tuple[int, int, int]:
    # 8 : 40 : 16 core-type ratio scaled to d variables
    ratio = np.array([8, 40, 16]) / 64.0
    counts = np.floor(ratio * d).astype(int)
    counts[1] += d - counts.sum()
    return tuple(int(c) for c in counts)


class SyntheticPlacement(Objective):
    """Random pseudo-Boolean cost of placing three component types on ``d`` slots (minimize).

    The cost is a polynomial in the indicators ``[x_i == v]``: linear and
    pairwise terms over every slot pair plus sparse third-order terms. The
    validity constraint fixes how many slots take each type.
    """

    name = "synthetic"
    direction = MINIMIZE
    neighborhood = SWAP

    def __init__(self, d: int = 24, counts: Optional[Sequence[int]] = None, n_triples: Optional[int] = None,
                 seed: int = 0):
        self.d = int(d)
        self.counts = tuple(int(c) for c in counts) if counts is not None else _default_counts(self.d)
        if sum(self.counts) != self.d or len(self.counts) != 3:
            raise ValueError("counts must give three type counts summing to d")
        self.seed = int(seed)
        self.n_triples = int(n_triples) if n_triples is not None else 2 * self.d
        k = 3
        m = self.d * k
        rng = np.random.default_rng(self.seed)
        self.linear = rng.normal(size=m)
        upper = np.triu(rng.normal(scale=1.0 / math.sqrt(self.d), size=(m, m)), k=1)
        same_slot = np.repeat(np.arange(self.d), k)
        upper[same_slot[:, None] == same_slot[None, :]] = 0.0
        self.pairwise = upper
        slots = np.stack([rng.choice(self.d, size=3, replace=False) for _ in range(self.n_triples)])
        values = rng.integers(0, k, size=(self.n_triples, 3))
        self.triple_index = slots * k + values
        self.triple_weight = rng.normal(scale=2.0, size=self.n_triples)
        super().__init__(DiscreteSpace((k,) * self.d, Cardinality(self.counts)))

    @property
    def params(self):
        return {"d": self.d, "counts": list(self.counts), "n_triples": self.n_triples, "seed": self.seed}

    def _one_hot(self, X):
        X = np.asarray(X, dtype=np.int64)
        U = np.zeros((len(X), self.d * 3))
        U[np.arange(len(X))[:, None], np.arange(self.d)[None, :] * 3 + X] = 1.0
        return U

    def evaluate(self, x):
        # validate() raises on a cardinality violation
        x = self.space.validate(x)
        return float(self._score(x[None, :])[0])

    def evaluate_batch(self, X):
        X = np.asarray(X)
        if not self.space.valid_mask(X).all():
            raise InvalidStructureError("structure violates the cardinality constraint")
        return self._score(X)

    def _score(self, X):
        U = self._one_hot(X)
        cubic = U[:, self.triple_index].prod(axis=2) @ self.triple_weight
        return U @ self.linear + np.einsum("ij,ij->i", U @ self.pairwise, U) + cubic


# --------------------------------------------------------------------------- #
# construction from configuration
# --------------------------------------------------------------------------- #

BENCHMARKS = {
    "labs": Labs,
    "contamination": Contamination,
    "ising": IsingSparsification,
    "synthetic": SyntheticPlacement,
}


def make_objective(params: dict) -> Objective:
    """Build an objective from a ``{"name": ..., **kwargs}`` mapping."""
    params = dict(params)
    name = params.pop("name")
    if name not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}")
    if "instance_seed" in params:
        params["seed"] = params.pop("instance_seed")
    for key in ("initial_beta", "spread_beta", "decay_beta", "coupling_range"):
        if key in params:
            params[key] = tuple(params[key])
    return BENCHMARKS[name](**params)

