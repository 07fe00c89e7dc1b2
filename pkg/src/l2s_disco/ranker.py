"""Learned restart heuristic: a small pairwise-ranking scorer over structures.

States from a local-search trajectory that ended at a better local optimum
should score above every state from a trajectory that ended worse. The scorer
is a one-hidden-layer tanh network on the one-hot encoding of a structure,
trained with the pairwise logistic loss ``log(1 + exp(-(s_pref - s_dis)))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .space import InvalidStructureError


@dataclass(frozen=True)
class RankerConfig:
    hidden: int = 32
    step_size: float = 0.01
    epochs: int = 5
    pair_cap: int = 256
    init_scale: float = 0.1
    seed: int = 0


@dataclass
class Trajectory:
    """States visited by one local search, start first, plus ``value = AF(end state)``."""

    states: np.ndarray
    value: float

    def __len__(self):
        return len(self.states)

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]


def generate_pairs(t1: Trajectory, t2: Trajectory, cap: int, rng: np.random.Generator):
    """Ranking pairs between the states of two trajectories.

    Returns ``(preferred, dispreferred)`` row-aligned arrays, preferred rows
    taken from whichever trajectory has the higher value. The full cross
    product is returned when it has at most ``cap`` pairs, otherwise ``cap``
    pairs drawn uniformly without replacement. Equal values give no pairs.
    """
    d = t1.states.shape[1]
    if t1.value == t2.value:
        empty = np.zeros((0, d), dtype=np.int64)
        return empty, empty.copy()
    hi, lo = (t1, t2) if t1.value > t2.value else (t2, t1)
    n_hi, n_lo = len(hi.states), len(lo.states)
    total = n_hi * n_lo
    if total <= cap:
        flat = np.arange(total)
    else:
        flat = np.sort(rng.choice(total, size=cap, replace=False))
    return hi.states[flat // n_lo].copy(), lo.states[flat % n_lo].copy()


@dataclass
class PairBuffer:
    """Ranking pairs gathered during one acquisition optimization."""

    d: int
    preferred: list = field(default_factory=list)
    dispreferred: list = field(default_factory=list)
    sources: list = field(default_factory=list)

    def add(self, preferred, dispreferred, source=None):
        if len(preferred):
            self.preferred.append(preferred)
            self.dispreferred.append(dispreferred)
            self.sources.append((source, len(preferred)))

    def __len__(self):
        return sum(len(p) for p in self.preferred)

    def arrays(self):
        if not self.preferred:
            empty = np.zeros((0, self.d), dtype=np.int64)
            return empty, empty.copy()
        return np.concatenate(self.preferred), np.concatenate(self.dispreferred)

    def clear(self):
        self.preferred.clear()
        self.dispreferred.clear()
        self.sources.clear()


# --------------------------------------------------------------------------- #
# numba training kernel
# --------------------------------------------------------------------------- #


@numba.njit(cache=True)
def _sgd(theta, n_inputs, hidden, pref, dis, order, step):
    """In-place SGD over the pairs in ``order``; inputs are active one-hot column indices."""
    w1_end = n_inputs * hidden
    b1_end = w1_end + hidden
    w2_end = b1_end + hidden
    d = pref.shape[1]
    ha = np.empty(hidden)
    hb = np.empty(hidden)
    for p in order:
        for k in range(hidden):
            ha[k] = theta[w1_end + k]
            hb[k] = theta[w1_end + k]
        for i in range(d):
            ra = pref[p, i] * hidden
            rb = dis[p, i] * hidden
            for k in range(hidden):
                ha[k] += theta[ra + k]
                hb[k] += theta[rb + k]
        margin = 0.0
        for k in range(hidden):
            ha[k] = np.tanh(ha[k])
            hb[k] = np.tanh(hb[k])
            margin += theta[b1_end + k] * (ha[k] - hb[k])
        # d loss / d margin = -sigmoid(-margin)
        if margin >= 0:
            e = np.exp(-margin)
            g = -e / (1.0 + e)
        else:
            g = -1.0 / (1.0 + np.exp(margin))
        for k in range(hidden):
            w2 = theta[b1_end + k]
            ga = g * w2 * (1.0 - ha[k] * ha[k])
            gb = -g * w2 * (1.0 - hb[k] * hb[k])
            theta[b1_end + k] -= step * g * (ha[k] - hb[k])
            theta[w1_end + k] -= step * (ga + gb)
            for i in range(d):
                theta[pref[p, i] * hidden + k] -= step * ga
                theta[dis[p, i] * hidden + k] -= step * gb
        # output bias cancels in the score difference; its gradient is zero
    return theta


# --------------------------------------------------------------------------- #
# model
# --------------------------------------------------------------------------- #


class RankerModel:
    """Scorer ``H(theta, x)``; higher means a more promising local-search start.

    ``theta`` is one flat vector laid out as W1 (inputs x hidden, row-major),
    b1, w2, b2. Hidden weights start uniform in ``[-init_scale, init_scale]``;
    the output layer starts at zero, so a fresh model scores everything 0.
    """

    def __init__(self, sizes: Sequence[int], config: RankerConfig = RankerConfig(), theta: Optional[np.ndarray] = None):
        self.sizes = tuple(int(s) for s in sizes)
        self.config = config
        self.hidden = config.hidden
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.int64)
        self.n_inputs = int(sum(self.sizes))
        n_params = self.n_inputs * self.hidden + 2 * self.hidden + 1
        if theta is None:
            rng = np.random.default_rng(config.seed)
            theta = np.zeros(n_params)
            n_hidden = self.n_inputs * self.hidden + self.hidden
            theta[:n_hidden] = rng.uniform(-config.init_scale, config.init_scale, size=n_hidden)
        elif len(theta) != n_params:
            raise ValueError(f"expected {n_params} parameters, got {len(theta)}")
        self.theta = np.array(theta, dtype=float)

    # ---------------------------------------------------------------- layout

    def unpack(self, theta=None):
        theta = self.theta if theta is None else theta
        h = self.hidden
        w1_end = self.n_inputs * h
        W1 = theta[:w1_end].reshape(self.n_inputs, h)
        b1 = theta[w1_end : w1_end + h]
        w2 = theta[w1_end + h : w1_end + 2 * h]
        b2 = theta[w1_end + 2 * h]
        return W1, b1, w2, b2

    def active(self, X) -> np.ndarray:
        """One-hot column index of every variable's value, shape (m, d)."""
        X = np.asarray(X, dtype=np.int64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.sizes):
            raise InvalidStructureError(f"ranker expects {len(self.sizes)} variables, got {X.shape[1]}")
        return X + self.offsets[None, :]

    def encode(self, X) -> np.ndarray:
        cols = self.active(X)
        out = np.zeros((len(cols), self.n_inputs))
        np.put_along_axis(out, cols, 1.0, axis=1)
        return out

    # --------------------------------------------------------------- scoring

    def score(self, X, theta=None) -> np.ndarray:
        W1, b1, w2, b2 = self.unpack(theta)
        cols = self.active(X)
        hidden = np.tanh(W1[cols].sum(axis=1) + b1)
        return hidden @ w2 + b2

    def score_one(self, x) -> float:
        return float(self.score(np.asarray(x)[None, :])[0])

    def pair_loss(self, preferred, dispreferred, theta=None) -> np.ndarray:
        margin = self.score(preferred, theta) - self.score(dispreferred, theta)
        return np.logaddexp(0.0, -margin)

    def pair_loss_grad(self, preferred, dispreferred, theta=None) -> np.ndarray:
        """Gradient of the summed pairwise loss with respect to ``theta``."""
        theta = self.theta if theta is None else theta
        W1, b1, w2, _ = self.unpack(theta)
        grad = np.zeros_like(theta)
        gW1, gb1, gw2, _ = self.unpack(grad)
        xa, xb = self.encode(preferred), self.encode(dispreferred)
        ha = np.tanh(xa @ W1 + b1)
        hb = np.tanh(xb @ W1 + b1)
        margin = (ha - hb) @ w2
        g = -0.5 * (1.0 - np.tanh(0.5 * margin))  # -sigmoid(-margin)
        gw2 += g @ (ha - hb)
        da = (g[:, None] * w2[None, :]) * (1.0 - ha**2)
        db = -(g[:, None] * w2[None, :]) * (1.0 - hb**2)
        gW1 += xa.T @ da + xb.T @ db
        gb1 += (da + db).sum(axis=0)
        return grad

    # -------------------------------------------------------------- training

    def update(self, preferred, dispreferred, epochs: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> "RankerModel":
        """Per-pair SGD on the pairwise logistic loss, pairs reshuffled every epoch.

        Mutates and returns ``self``. An empty pair set is a no-op.
        """
        if len(preferred) == 0:
            return self
        epochs = self.config.epochs if epochs is None else epochs
        rng = np.random.default_rng(self.config.seed) if rng is None else rng
        pa = np.ascontiguousarray(self.active(preferred))
        pb = np.ascontiguousarray(self.active(dispreferred))
        for _ in range(epochs):
            order = rng.permutation(len(pa))
            _sgd(self.theta, self.n_inputs, self.hidden, pa, pb, order, self.config.step_size)
        return self

    def copy(self) -> "RankerModel":
        return RankerModel(self.sizes, self.config, self.theta.copy())


def update(model: RankerModel, buffer: PairBuffer, epochs: Optional[int] = None, rng=None) -> RankerModel:
    preferred, dispreferred = buffer.arrays()
    return model.update(preferred, dispreferred, epochs, rng)


def score(model: RankerModel, x) -> float:
    return model.score_one(x)
