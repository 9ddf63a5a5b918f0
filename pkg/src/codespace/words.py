"""Finite words over {1..N}, the Baire metric, and disjunctivity checks."""
import itertools
import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from config.config import DEFAULTS
from errors.exceptions import AlphabetMismatchError, BudgetExceededError, SymbolOutOfRangeError, ValidationError

logger = logging.getLogger(__name__)

MAX_WITNESSES = 10


@dataclass(frozen=True)
class Word:
    symbols: tuple[int, ...]
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValidationError(f"alphabet size must be >= 1, got {self.N}")
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        for s in self.symbols:
            if not 1 <= s <= self.N:
                raise SymbolOutOfRangeError(s, self.N)

    @classmethod
    def parse(cls, text: str, N: int) -> "Word":
        text = text.strip()
        if not text:
            return cls((), N)
        try:
            return cls(tuple(int(part) for part in text.split(",")), N)
        except ValueError as exc:
            raise ValidationError(f"word '{text}' is not a comma-separated list of integers") from exc

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[int]:
        return iter(self.symbols)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Word(self.symbols[item], self.N)
        return self.symbols[item]

    def __add__(self, other: "Word") -> "Word":
        if other.N != self.N:
            raise AlphabetMismatchError(f"cannot concatenate words over 1..{self.N} and 1..{other.N}")
        return Word(self.symbols + other.symbols, self.N)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=np.int64)

    def __str__(self) -> str:
        return ",".join(str(s) for s in self.symbols)


def baire_distance(alpha: Word, beta: Word, length: int | None = None) -> tuple[float, bool]:
    """2^-m for the first differing (1-based) index m.

    Compared on the first `length` symbols (default: the shorter word).
    Returns (0.0, True) when no difference shows up in the compared prefix.
    """
    if alpha.N != beta.N:
        raise AlphabetMismatchError(f"words over 1..{alpha.N} and 1..{beta.N}")
    common = min(len(alpha), len(beta))
    if length is not None:
        if length > common:
            raise ValidationError(f"comparison length {length} exceeds the shorter word ({common})")
        common = length

    a = alpha.as_array()[:common]
    b = beta.as_array()[:common]
    differ = np.flatnonzero(a != b)
    if not len(differ):
        return 0.0, True
    return 2.0 ** -(int(differ[0]) + 1), False


def champernowne_stream(N: int) -> Iterator[int]:
    """1, ..., N, then all 2-letter words in lexicographic order, and so on."""
    for k in itertools.count(1):
        for word in itertools.product(range(1, N + 1), repeat=k):
            yield from word


def champernowne(N: int, length: int) -> Word:
    if N < 1 or length < 0:
        raise ValidationError(f"champernowne needs N >= 1 and length >= 0, got N={N}, length={length}")
    return Word(tuple(itertools.islice(champernowne_stream(N), length)), N)


def _decode(code: int, k: int, N: int) -> tuple[int, ...]:
    digits = []
    for _ in range(k):
        code, digit = divmod(code, N)
        digits.append(digit + 1)
    return tuple(reversed(digits))


def is_disjunctive_upto(prefix: Word, k: int) -> tuple[bool, list[tuple[int, ...]]]:
    """Whether every word of length <= k occurs as a block of prefix.

    Missing witnesses (at most 10) are listed shortest first, then in
    lexicographic order.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    N = prefix.N
    budget = DEFAULTS["disjunctive_budget"]
    if N ** k > budget:
        raise BudgetExceededError(f"disjunctivity check over {N} symbols", N ** k, budget)

    seq = prefix.as_array() - 1
    missing: list[tuple[int, ...]] = []
    complete = True
    for length in range(1, k + 1):
        if len(seq) >= length:
            powers = N ** np.arange(length - 1, -1, -1, dtype=np.int64)
            present = np.unique(sliding_window_view(seq, length) @ powers)
        else:
            present = np.empty(0, dtype=np.int64)
        absent = np.setdiff1d(np.arange(N ** length, dtype=np.int64), present, assume_unique=True)
        if len(absent):
            complete = False
            room = MAX_WITNESSES - len(missing)
            missing.extend(_decode(int(code), length, N) for code in absent[:room])
    return complete, missing


def all_words(N: int, k: int) -> Iterator[tuple[int, ...]]:
    """Every word of length 1..k, shortest first, lexicographic within a length."""
    for length in range(1, k + 1):
        yield from itertools.product(range(1, N + 1), repeat=length)


def as_word(symbols: Sequence[int] | Word, N: int) -> Word:
    return symbols if isinstance(symbols, Word) else Word(tuple(symbols), N)
