"""Expected improvement and upper-confidence-bound acquisition functions.

Targets are always maximized here; minimization problems are negated before
the surrogate sees them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .surrogate import ForestModel

EI = "ei"
UCB = "ucb"

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def expected_improvement(mean, std, best):
    """Closed-form EI of a Gaussian belief ``N(mean, std^2)`` over the incumbent ``best``.

    Where ``std == 0`` the value degenerates to ``max(mean - best, 0)``.
    """
    mean, std = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(std, dtype=float))
    scalar = mean.ndim == 0
    mean, std = np.atleast_1d(mean, std)
    gap = mean - best
    out = np.maximum(gap, 0.0)
    pos = std > 0
    z = gap[pos] / std[pos]
    out[pos] = np.maximum(gap[pos] * ndtr(z) + std[pos] * _INV_SQRT_2PI * np.exp(-0.5 * z * z), 0.0)
    return float(out[0]) if scalar else out


def ucb_beta(n_structures: int, iteration: int, delta: float = 0.1) -> float:
    """Exploration weight ``2 log(|X| i^2 pi^2 / (6 delta))`` for a finite candidate set.

    Clamped at zero when the log argument drops below one.
    """
    if iteration < 1:
        raise ValueError("iteration index starts at 1")
    # log|X| is added separately so huge spaces do not overflow a float
    log_arg = math.log(n_structures) + 2 * math.log(iteration) + math.log(math.pi**2 / (6.0 * delta))
    return max(2.0 * log_arg, 0.0)


def upper_confidence_bound(mean, std, beta: float):
    return np.asarray(mean, dtype=float) + math.sqrt(beta) * np.asarray(std, dtype=float)


@dataclass
class AcquisitionState:
    """Everything an acquisition function needs at one BO iteration.

    ``incumbent`` is the best (maximized) training target and ``iteration``
    counts BO iterations after initialization, starting at 1.
    """

    model: ForestModel
    incumbent: float
    iteration: int = 1
    kind: str = UCB
    delta: float = 0.1
    n_structures: int = 2

    def __post_init__(self):
        if self.kind not in (EI, UCB):
            raise ValueError(f"unknown acquisition kind {self.kind!r}")
        if self.iteration < 1:
            raise ValueError("iteration index starts at 1")

    @property
    def beta(self) -> float:
        return ucb_beta(self.n_structures, self.iteration, self.delta)

    def __call__(self, X) -> np.ndarray:
        """Score each row of ``X``."""
        mean, var = self.model.predict(X)
        return self.from_moments(mean, np.sqrt(var))

    def from_moments(self, mean, std):
        if self.kind == EI:
            return expected_improvement(mean, std, self.incumbent)
        return upper_confidence_bound(mean, std, self.beta)

    def score_one(self, x) -> float:
        return float(self(np.asarray(x)[None, :])[0])


def ei(state: AcquisitionState, x) -> float:
    mean, var = state.model.predict_one(x)
    return float(expected_improvement(mean, math.sqrt(var), state.incumbent))


def ucb(state: AcquisitionState, x) -> float:
    mean, var = state.model.predict_one(x)
    return float(upper_confidence_bound(mean, math.sqrt(var), state.beta))
