"""Coalition games over bitset coalitions with memoized utility evaluation.

A coalition is a plain ``int`` used as a bitset: bit ``i`` set means player
``i`` is a member. Using machine integers keeps coalition handling allocation
free and makes dictionary memoization cheap. Games are sized at construction;
any number of players up to the word size works, and solvers impose their own
tighter caps.

A utility oracle is any callable ``oracle(coalition) -> float``. Oracles must
be pure and deterministic: repeated calls with the same coalition return the
same value bit for bit. Oracles signal failure by raising, most specifically
:class:`~royaltyshare.errors.OracleFailureError`, which callers see unchanged.
"""

from __future__ import annotations

import itertools
import threading
from typing import Callable, Iterable, Iterator

from .errors import CoalitionBoundsError

Coalition = int
UtilityOracle = Callable[[Coalition], float]

EMPTY: Coalition = 0

# Coalitions are word-sized bitsets; solvers cap n far below this anyway.
MAX_PLAYERS = 64


def coalition_from_members(members: Iterable[int], n: int) -> Coalition:
    """Build a coalition bitset from player indices.

    Duplicates collapse silently. Indices outside ``range(n)`` raise
    :class:`CoalitionBoundsError`.
    """
    mask = 0
    for i in members:
        if not 0 <= i < n:
            raise CoalitionBoundsError(f"player index {i} outside range(0, {n})")
        mask |= 1 << i
    return mask


def coalition_members(s: Coalition) -> list[int]:
    """Return the sorted player indices contained in ``s``."""
    out = []
    i = 0
    while s:
        if s & 1:
            out.append(i)
        s >>= 1
        i += 1
    return out


def coalition_size(s: Coalition) -> int:
    return int(s).bit_count()


def full_coalition(n: int) -> Coalition:
    return (1 << n) - 1


def subsets_excluding(n: int, i: int, size: int) -> Iterator[Coalition]:
    """Yield every size-``size`` coalition drawn from ``range(n)`` minus ``i``.

    The order is deterministic (lexicographic over ascending member tuples),
    which keeps accumulation reproducible across runs.
    """
    if not 0 <= i < n:
        raise CoalitionBoundsError(f"player index {i} outside range(0, {n})")
    others = [p for p in range(n) if p != i]
    for combo in itertools.combinations(others, size):
        mask = 0
        for p in combo:
            mask |= 1 << p
        yield mask


class CoalitionGame:
    """A cooperative game: player count plus a memoized utility oracle.

    Evaluation results are cached per coalition, so any solver built on top
    pays for each coalition at most once. ``eval_count`` reports how many
    oracle invocations actually happened; with memoization enabled it never
    exceeds ``2**n``.

    Evaluation is safe to call from several threads. Distinct coalitions
    evaluate in parallel; concurrent calls on the same coalition may duplicate
    oracle work, but the first stored value wins and every caller sees it.
    """

    def __init__(self, n: int, oracle: UtilityOracle, *, memoize: bool = True):
        if not 0 <= n <= MAX_PLAYERS:
            raise CoalitionBoundsError(f"player count {n} outside [0, {MAX_PLAYERS}]")
        self.n = n
        self._oracle = oracle
        self._memoize = memoize
        self._cache: dict[Coalition, float] = {}
        self._eval_count = 0
        self._lock = threading.Lock()

    @property
    def eval_count(self) -> int:
        return self._eval_count

    @property
    def cache(self) -> dict[Coalition, float]:
        """Read-only view intent: mutate only through :meth:`evaluate`."""
        return self._cache

    def evaluate(self, s: Coalition) -> float:
        """Return the oracle's utility for coalition ``s``, caching it.

        Raises :class:`CoalitionBoundsError` if ``s`` sets bits at or above
        ``self.n``. Oracle exceptions propagate to the caller and nothing is
        cached for that coalition.
        """
        if s < 0 or (s >> self.n):
            raise CoalitionBoundsError(
                f"coalition {bin(s)} uses players outside range(0, {self.n})"
            )
        if not self._memoize:
            value = float(self._oracle(s))
            with self._lock:
                self._eval_count += 1
            return value
        try:
            return self._cache[s]
        except KeyError:
            pass
        value = float(self._oracle(s))
        with self._lock:
            if s not in self._cache:
                self._cache[s] = value
                self._eval_count += 1
            return self._cache[s]

    def grand_coalition(self) -> Coalition:
        return full_coalition(self.n)
