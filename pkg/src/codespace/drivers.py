"""Symbol sources driving the chaos game.

Every driver is an unbounded, stateful stream over {1..N}. Stochastic kinds
own a numpy Generator built from an explicit seed, so next() and take(n)
produce the same stream however the draws are split.
"""
import itertools
import logging
import math
from collections.abc import Iterator, Sequence

import numpy as np

from codespace.words import Word, champernowne_stream
from config.config import DEFAULTS
from errors.exceptions import ValidationError

logger = logging.getLogger(__name__)

MINORANT_FAMILIES = ("const", "logpow", "pow", "sinpow")
# families whose minorant satisfies p_n^-1 / n^c -> 0 for every c > 0
MINORANT_PASSING = frozenset({"const", "logpow"})


class Driver:
    kind = "abstract"

    def __init__(self, N: int, seed: int | None = None):
        if N < 1:
            raise ValidationError(f"alphabet size must be >= 1, got {N}")
        self.N = N
        self.seed = seed

    def take(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def next(self) -> int:
        return int(self.take(1)[0])

    def __iter__(self) -> Iterator[int]:
        return self

    def __next__(self) -> int:
        return self.next()

    def clone(self, seed: int | None = None) -> "Driver":
        """A fresh replica from the start of the stream, optionally reseeded."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "N": self.N, "seed": self.seed}


class _IteratorDriver(Driver):
    def __init__(self, N: int):
        super().__init__(N)
        self._stream = self._fresh_stream()

    def _fresh_stream(self) -> Iterator[int]:
        raise NotImplementedError

    def take(self, n: int) -> np.ndarray:
        return np.fromiter(itertools.islice(self._stream, n), dtype=np.int64, count=n)


class ChampernowneDriver(_IteratorDriver):
    kind = "champernowne"

    def _fresh_stream(self) -> Iterator[int]:
        return champernowne_stream(self.N)

    def clone(self, seed: int | None = None) -> "ChampernowneDriver":
        return ChampernowneDriver(self.N)


class PeriodicDriver(_IteratorDriver):
    kind = "periodic"

    def __init__(self, pattern: Word):
        if not len(pattern):
            raise ValidationError("periodic driver needs a nonempty pattern")
        self.pattern = pattern
        super().__init__(pattern.N)

    def _fresh_stream(self) -> Iterator[int]:
        return itertools.cycle(self.pattern.symbols)

    def clone(self, seed: int | None = None) -> "PeriodicDriver":
        return PeriodicDriver(self.pattern)

    def describe(self) -> dict:
        return {**super().describe(), "pattern": str(self.pattern)}


class ExplicitDriver(_IteratorDriver):
    """Replays a fixed prefix, then continues with the Champernowne sequence."""

    kind = "explicit"

    def __init__(self, prefix: Word):
        self.prefix = prefix
        super().__init__(prefix.N)

    def _fresh_stream(self) -> Iterator[int]:
        return itertools.chain(self.prefix.symbols, champernowne_stream(self.N))

    def clone(self, seed: int | None = None) -> "ExplicitDriver":
        return ExplicitDriver(self.prefix)

    def describe(self) -> dict:
        return {**super().describe(), "prefix": str(self.prefix)}


class BernoulliDriver(Driver):
    kind = "bernoulli"

    def __init__(self, weights: Sequence[float], seed: int = DEFAULTS["seed"]):
        weights = np.asarray(weights, dtype=float)
        super().__init__(len(weights), seed)
        if np.any(weights < 0) or abs(weights.sum() - 1) > DEFAULTS["weight_tolerance"]:
            raise ValidationError(f"bernoulli weights must be a probability vector, got {weights.tolist()}")
        self.weights = weights
        self._cdf = np.cumsum(weights)
        self._cdf[-1] = 1.0
        self._rng = np.random.default_rng(seed)

    def take(self, n: int) -> np.ndarray:
        u = self._rng.random(n)
        return np.searchsorted(self._cdf, u, side="right").astype(np.int64) + 1

    def clone(self, seed: int | None = None) -> "BernoulliDriver":
        return BernoulliDriver(self.weights, self.seed if seed is None else seed)

    def describe(self) -> dict:
        return {**super().describe(), "weights": self.weights.tolist()}


class MarkovChainDriver(Driver):
    """Emits the states of a Markov chain on {1..N}, starting from `initial`."""

    kind = "markov"

    def __init__(self, rows: Sequence[Sequence[float]], seed: int = DEFAULTS["seed"], initial: int = 1):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        N = rows.shape[0]
        super().__init__(N, seed)
        if rows.shape != (N, N):
            raise ValidationError(f"transition matrix must be square, got shape {rows.shape}")
        if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=1) - 1) > DEFAULTS["weight_tolerance"]):
            raise ValidationError("every transition row must be a probability vector")
        if not 1 <= initial <= N:
            raise ValidationError(f"initial state {initial} outside 1..{N}")
        self.rows = rows
        self.initial = initial
        self._cdf = np.cumsum(rows, axis=1)
        self._cdf[:, -1] = 1.0
        self._rng = np.random.default_rng(seed)
        self._state: int | None = None

    def take(self, n: int) -> np.ndarray:
        u = self._rng.random(n)
        out = np.empty(n, dtype=np.int64)
        state = self._state
        for i in range(n):
            if state is None:
                state = self.initial
            else:
                state = int(np.searchsorted(self._cdf[state - 1], u[i], side="right")) + 1
            out[i] = state
        self._state = state
        return out

    def clone(self, seed: int | None = None) -> "MarkovChainDriver":
        return MarkovChainDriver(self.rows, self.seed if seed is None else seed, self.initial)

    def describe(self) -> dict:
        return {**super().describe(), "rows": self.rows.tolist(), "initial": self.initial}


def minorant_probability(family: str, param: float, n: np.ndarray) -> np.ndarray:
    """p_n for the closed-form minorant families (n is 1-based)."""
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore"):
        if family == "const":
            return np.full_like(n, param)
        if family == "logpow":
            return np.log(n) ** -param
        if family == "pow":
            return n ** -param
        if family == "sinpow":
            return np.sin(n ** -param)
    raise ValidationError(f"unknown minorant family '{family}', expected one of {list(MINORANT_FAMILIES)}")


class MinorantDriver(Driver):
    """Non-stationary chain whose conditional probabilities stay >= min(p_n, 1/N).

    At step n a fresh uniform symbol is drawn with probability min(1, N * p_n);
    otherwise the previous symbol repeats.
    """

    kind = "minorant"

    def __init__(self, N: int, family: str, param: float, seed: int = DEFAULTS["seed"]):
        super().__init__(N, seed)
        if family not in MINORANT_FAMILIES:
            raise ValidationError(f"unknown minorant family '{family}', expected one of {list(MINORANT_FAMILIES)}")
        if param <= 0:
            raise ValidationError(f"minorant parameter must be positive, got {param}")
        self.family = family
        self.param = float(param)
        self._rng = np.random.default_rng(seed)
        self._n = 0
        self._last: int | None = None

    def take(self, n: int) -> np.ndarray:
        draws = self._rng.random((n, 2))
        steps = np.arange(self._n + 1, self._n + n + 1)
        fresh_prob = np.minimum(1.0, self.N * minorant_probability(self.family, self.param, steps))
        fresh = draws[:, 0] < fresh_prob
        if self._last is None and n:
            fresh[0] = True
        symbols = np.minimum((draws[:, 1] * self.N).astype(np.int64), self.N - 1) + 1

        source = np.maximum.accumulate(np.where(fresh, np.arange(n), -1))
        out = np.where(source >= 0, symbols[np.maximum(source, 0)], self._last if self._last is not None else 1)
        self._n += n
        if n:
            self._last = int(out[-1])
        return out.astype(np.int64)

    def clone(self, seed: int | None = None) -> "MinorantDriver":
        return MinorantDriver(self.N, self.family, self.param, self.seed if seed is None else seed)

    def describe(self) -> dict:
        return {**super().describe(), "family": self.family, "param": self.param}


def minorant_verdict(family: str, param: float) -> dict:
    """Whether p_n^-1 / n^c -> 0 for every c > 0, with a numeric illustration.

    The verdict is analytic per family: constants and negative powers of
    log n pass, negative powers of n and sin(n^-b) fail.
    """
    if family not in MINORANT_FAMILIES:
        raise ValidationError(f"unknown minorant family '{family}', expected one of {list(MINORANT_FAMILIES)}")
    table = []
    for n in (1e2, 1e4, 1e6):
        p = float(minorant_probability(family, param, np.array([n]))[0])
        for c in (0.5, 1.0, 2.0):
            table.append({"n": int(n), "c": c, "value": (1 / p) / n ** c if p > 0 else math.inf})
    return {
        "family": family,
        "param": param,
        "satisfies": family in MINORANT_PASSING,
        "table": table,
    }
