"""Combinatorial search spaces over complete assignments of discrete variables.

A structure is a 1-D integer array whose ``i``-th entry indexes into the
candidate set of variable ``i``. Spaces are immutable; every random draw goes
through a ``numpy.random.Generator`` supplied by the caller.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

ENUMERATION_LIMIT = 2**24
SAMPLE_ATTEMPTS = 10_000


class InvalidStructureError(ValueError):
    """Raised when a structure is malformed or violates the space's constraint."""


class SpaceTooConstrainedError(RuntimeError):
    pass


class SpaceTooLargeError(ValueError):
    pass


# --------------------------------------------------------------------------- #
# Constraints
# --------------------------------------------------------------------------- #


class Constraint:
    """Opaque validity predicate over structures.

    Subclasses implement ``__call__``. ``mask``, ``sample`` and ``count``
    are optional fast paths; the defaults loop over ``__call__``, defer to
    rejection sampling and report an unknown count respectively.
    """

    name = "predicate"

    def __call__(self, x: np.ndarray) -> bool:
        raise NotImplementedError

    def mask(self, X: np.ndarray) -> np.ndarray:
        return np.fromiter((bool(self(row)) for row in X), dtype=bool, count=len(X))

    def sample(self, space: "DiscreteSpace", rng: np.random.Generator) -> Optional[np.ndarray]:
        return None

    def count(self, space: "DiscreteSpace") -> Optional[int]:
        """Exact number of valid structures in ``space``, if known in closed form."""
        return None


class Predicate(Constraint):
    def __init__(self, fn: Callable[[np.ndarray], bool], name: str = "predicate"):
        self.fn = fn
        self.name = name

    def __call__(self, x):
        return bool(self.fn(x))


class FixedValue(Constraint):
    """``x[index] == value``."""

    name = "fixed"

    def __init__(self, index: int, value: int):
        self.index = int(index)
        self.value = int(value)

    def __call__(self, x):
        return int(x[self.index]) == self.value

    def mask(self, X):
        return X[:, self.index] == self.value


class SumEquals(Constraint):
    """Sum of the value indices equals ``total`` (exactly-k-ones on binary spaces)."""

    name = "sum"

    def __init__(self, total: int):
        self.total = int(total)

    def __call__(self, x):
        return int(np.sum(x)) == self.total

    def mask(self, X):
        return X.sum(axis=1) == self.total


class Cardinality(Constraint):
    """Exact number of occurrences of every value index.

    ``counts[v]`` is how many variables must take value ``v``. Valid
    structures are permutations of one fixed multiset, so uniform sampling is
    a random shuffle.
    """

    name = "cardinality"

    def __init__(self, counts: Sequence[int]):
        self.counts = tuple(int(c) for c in counts)

    def __call__(self, x):
        x = np.asarray(x)
        if np.any(x >= len(self.counts)):
            return False
        return tuple(np.bincount(x, minlength=len(self.counts))) == self.counts

    def mask(self, X):
        X = np.asarray(X)
        ok = np.ones(len(X), dtype=bool)
        for v, c in enumerate(self.counts):
            ok &= (X == v).sum(axis=1) == c
        ok &= (X < len(self.counts)).all(axis=1)
        return ok

    def sample(self, space, rng):
        if sum(self.counts) != space.dims:
            return None
        base = np.repeat(np.arange(len(self.counts)), self.counts)
        return rng.permutation(base).astype(np.int64)

    def count(self, space):
        if sum(self.counts) != space.dims or min(space.sizes) < len(self.counts):
            return None
        total, left = 1, space.dims
        for c in self.counts:
            total *= math.comb(left, c)
            left -= c
        return total


# --------------------------------------------------------------------------- #
# Neighborhoods
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Neighborhood:
    """Move set used by local search.

    ``hamming1`` changes a single variable. ``swap`` exchanges the values of
    two variables that sit in the same block of ``blocks`` (one block holding
    every variable when ``blocks`` is None), which keeps value counts fixed.
    """

    kind: str = "hamming1"
    blocks: Optional[tuple[tuple[int, ...], ...]] = None

    def __post_init__(self):
        if self.kind not in ("hamming1", "swap"):
            raise ValueError(f"unknown neighborhood kind {self.kind!r}")

    @classmethod
    def swap(cls, blocks: Optional[Sequence[Sequence[int]]] = None) -> "Neighborhood":
        if blocks is not None:
            blocks = tuple(tuple(int(i) for i in b) for b in blocks)
        return cls("swap", blocks)


HAMMING1 = Neighborhood("hamming1")
SWAP = Neighborhood("swap")


# --------------------------------------------------------------------------- #
# Space
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class DiscreteSpace:
    """Product of finite domains, optionally restricted by a validity predicate.

    Parameters
    ----------
    sizes : sequence of int
        ``sizes[i]`` is the number of candidate values of variable ``i``.
    constraint : Constraint, optional
        Validity predicate; None means every assignment is valid.
    labels : optional per-variable candidate labels, for reporting only.
    """

    sizes: tuple[int, ...]
    constraint: Optional[Constraint] = None
    labels: Optional[tuple[tuple, ...]] = None
    _hamming_vars: np.ndarray = field(init=False, repr=False, compare=False)
    _hamming_vals: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if len(sizes) < 1:
            raise ValueError("space needs at least one variable")
        if min(sizes) < 2:
            raise ValueError("every domain needs at least two candidate values")
        object.__setattr__(self, "sizes", sizes)
        variables = np.repeat(np.arange(len(sizes)), sizes)
        values = np.concatenate([np.arange(s) for s in sizes])
        object.__setattr__(self, "_hamming_vars", variables)
        object.__setattr__(self, "_hamming_vals", values)

    @classmethod
    def binary(cls, d: int, constraint: Optional[Constraint] = None) -> "DiscreteSpace":
        return cls((2,) * d, constraint)

    @property
    def dims(self) -> int:
        return len(self.sizes)

    @property
    def is_binary(self) -> bool:
        return all(s == 2 for s in self.sizes)

    @property
    def n_assignments(self) -> int:
        return math.prod(self.sizes)

    def cardinality(self, count_limit: int = 2**16) -> int:
        """Number of valid structures, counted exactly only when cheap.

        Constrained spaces larger than ``count_limit`` without a closed-form
        count report the unconstrained product, an upper bound.
        """
        total = self.n_assignments
        if self.constraint is None:
            return total
        exact = self.constraint.count(self)
        if exact is not None:
            return exact
        if total > count_limit:
            return total
        return sum(len(chunk) for chunk in self.iter_chunks())

    # ------------------------------------------------------------------ validity

    def _check_shape(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim != 1 or len(x) != self.dims:
            raise InvalidStructureError(f"expected a structure of length {self.dims}, got shape {x.shape}")
        if not np.issubdtype(x.dtype, np.integer):
            if not np.all(np.equal(np.mod(x, 1), 0)):
                raise InvalidStructureError("structure entries must be integer indices")
        x = x.astype(np.int64)
        if np.any(x < 0) or np.any(x >= np.asarray(self.sizes)):
            raise InvalidStructureError("structure entry outside its domain")
        return x

    def is_valid(self, x) -> bool:
        try:
            x = self._check_shape(x)
        except InvalidStructureError:
            return False
        return self.constraint is None or bool(self.constraint(x))

    def validate(self, x) -> np.ndarray:
        """Return ``x`` as an int64 array, raising if it is not a valid structure."""
        x = self._check_shape(x)
        if self.constraint is not None and not self.constraint(x):
            raise InvalidStructureError(f"structure {x.tolist()} violates constraint {self.constraint.name!r}")
        return x

    def valid_mask(self, X: np.ndarray) -> np.ndarray:
        if self.constraint is None:
            return np.ones(len(X), dtype=bool)
        if len(X) == 0:
            return np.zeros(0, dtype=bool)
        return np.asarray(self.constraint.mask(X), dtype=bool)

    # ------------------------------------------------------------- neighborhoods

    def neighbors(self, x, kind: Neighborhood = HAMMING1) -> np.ndarray:
        """All valid neighbors of ``x`` as rows of a 2-D array.

        Rows are ordered by ascending variable index, then ascending domain
        index (for ``swap``: by the first variable of the exchanged pair, then
        the second).
        """
        x = self.validate(x)
        return self._neighbors_unchecked(x, kind)

    def _neighbors_unchecked(self, x: np.ndarray, kind: Neighborhood) -> np.ndarray:
        if kind.kind == "hamming1":
            keep = self._hamming_vals != x[self._hamming_vars]
            variables = self._hamming_vars[keep]
            out = np.repeat(x[None, :], len(variables), axis=0)
            out[np.arange(len(variables)), variables] = self._hamming_vals[keep]
        else:
            out = self._swap_neighbors(x, kind.blocks)
        if self.constraint is not None and len(out):
            out = out[self.valid_mask(out)]
        return out

    def _swap_neighbors(self, x, blocks) -> np.ndarray:
        if blocks is None:
            blocks = (tuple(range(self.dims)),)
        pairs = []
        for block in blocks:
            idx = np.asarray(sorted(block), dtype=np.int64)
            i, j = np.triu_indices(len(idx), k=1)
            i, j = idx[i], idx[j]
            differ = x[i] != x[j]
            pairs.append(np.stack([i[differ], j[differ]], axis=1))
        pairs = np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
        pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
        out = np.repeat(x[None, :], len(pairs), axis=0)
        rows = np.arange(len(pairs))
        out[rows, pairs[:, 0]] = x[pairs[:, 1]]
        out[rows, pairs[:, 1]] = x[pairs[:, 0]]
        return out

    # ------------------------------------------------------------------ sampling

    def sample_uniform(self, rng: np.random.Generator, n: Optional[int] = None) -> np.ndarray:
        """Unconstrained uniform draw(s), ignoring validity."""
        shape = (self.dims,) if n is None else (n, self.dims)
        return rng.integers(0, np.asarray(self.sizes), size=shape).astype(np.int64)

    def sample_valid(self, rng: np.random.Generator) -> np.ndarray:
        """Uniformly random valid structure.

        Uses the constraint's own uniform sampler when it provides one,
        otherwise rejection sampling with a budget of ``SAMPLE_ATTEMPTS``.
        """
        if self.constraint is None:
            return self.sample_uniform(rng)
        direct = self.constraint.sample(self, rng)
        if direct is not None:
            return direct
        for _ in range(SAMPLE_ATTEMPTS):
            x = self.sample_uniform(rng)
            if self.constraint(x):
                return x
        raise SpaceTooConstrainedError(
            f"space too constrained: no valid structure in {SAMPLE_ATTEMPTS} attempts"
        )

    # --------------------------------------------------------------- enumeration

    def _guard(self):
        if self.n_assignments > ENUMERATION_LIMIT:
            raise SpaceTooLargeError(
                f"space has {self.n_assignments} assignments; enumeration is limited to {ENUMERATION_LIMIT}"
            )

    def enumerate(self) -> Iterator[np.ndarray]:
        """Yield every valid structure once, in lexicographic order."""
        self._guard()
        for values in itertools.product(*(range(s) for s in self.sizes)):
            x = np.asarray(values, dtype=np.int64)
            if self.constraint is None or self.constraint(x):
                yield x

    def iter_chunks(self, chunk_size: int = 1 << 16) -> Iterator[np.ndarray]:
        """Vectorized counterpart of :meth:`enumerate`: blocks of valid rows, same order."""
        self._guard()
        total = self.n_assignments
        sizes = np.asarray(self.sizes, dtype=np.int64)
        # place values: rightmost variable changes fastest
        strides = np.concatenate([np.cumprod(sizes[::-1])[::-1][1:], [1]])
        for start in range(0, total, chunk_size):
            codes = np.arange(start, min(start + chunk_size, total), dtype=np.int64)
            block = (codes[:, None] // strides[None, :]) % sizes[None, :]
            if self.constraint is not None:
                block = block[self.valid_mask(block)]
            if len(block):
                yield block

    def enumerate_array(self) -> np.ndarray:
        chunks = list(self.iter_chunks())
        if not chunks:
            return np.zeros((0, self.dims), dtype=np.int64)
        return np.concatenate(chunks)


def key(x: np.ndarray) -> bytes:
    """Hashable identity of a structure."""
    return np.asarray(x, dtype=np.int64).tobytes()


def hamming(a, b) -> int:
    return int(np.sum(np.asarray(a) != np.asarray(b)))
