"""Exact Shapley solvers and the leave-one-out contrast.

Two independent exact routes are provided. :func:`exact_shapley` implements
the stratified subset formula

    phi_i = (1/n) * sum_{k=1..n} C(n-1, k-1)^{-1}
                  * sum_{S subset of N\\{i}, |S| = k-1} [v(S + i) - v(S)]

with exact integer binomial weights and exactly rounded (fsum) accumulation
per stratum. :func:`exact_shapley_by_permutations` averages marginal
contributions over all ``n!`` orderings instead; it exists so each route can
check the other. Both share a game's memoization, so the oracle is still paid
at most once per coalition.

fsum accumulation is order independent, which has a useful consequence:
players whose marginal contribution multisets coincide get bit-identical
Shapley values, so symmetry and duplication results hold exactly rather than
within a tolerance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import TooManyPlayersError
from .games import CoalitionGame, full_coalition, subsets_excluding

# Above this the 2^n subset enumeration stops being a desk-scale computation.
DEFAULT_EXACT_LIMIT = 20

# n! enumeration grows faster still.
PERMUTATION_LIMIT = 10

# Compact fsum buffers once they reach this length; keeps memory bounded for
# the n=10 permutation enumeration without giving up exact rounding.
_FSUM_CHUNK = 1 << 16


@dataclass(frozen=True)
class ShapleyVector:
    """Attribution scores, one per player, plus the method that produced them.

    ``method`` is ``"stratified"`` or ``"permutation"`` for the exact solvers
    and ``"estimated"`` for Monte Carlo estimates.
    """

    values: np.ndarray
    method: str

    def __len__(self) -> int:
        return len(self.values)


def exact_shapley(game: CoalitionGame, exact_limit: int = DEFAULT_EXACT_LIMIT) -> ShapleyVector:
    """Compute exact Shapley values by stratified subset enumeration.

    Raises :class:`TooManyPlayersError` when ``game.n`` exceeds
    ``exact_limit`` (default 20); beyond that the 2^n enumeration is no
    longer appropriate and a sampling estimator should be used.
    """
    n = game.n
    if n > exact_limit:
        raise TooManyPlayersError(f"{n} players exceeds exact enumeration limit {exact_limit}")
    values = np.empty(n, dtype=float)
    for i in range(n):
        bit = 1 << i
        strata = []
        for k in range(1, n + 1):
            marginals = [
                game.evaluate(s | bit) - game.evaluate(s)
                for s in subsets_excluding(n, i, k - 1)
            ]
            strata.append(math.fsum(marginals) / math.comb(n - 1, k - 1))
        values[i] = math.fsum(strata) / n
    return ShapleyVector(values, method="stratified")


def exact_shapley_by_permutations(game: CoalitionGame) -> ShapleyVector:
    """Compute exact Shapley values by enumerating all ``n!`` orderings.

    Deliberately a different code path from :func:`exact_shapley`; agreement
    between the two is a correctness check, not a tautology. Capped at
    ``n <= 10``.
    """
    n = game.n
    if n > PERMUTATION_LIMIT:
        raise TooManyPlayersError(
            f"{n} players exceeds permutation enumeration limit {PERMUTATION_LIMIT}"
        )
    # Pre-evaluate every coalition once; the walks below then index a list,
    # which is much faster than hitting the cache dict n * n! times.
    vals = [game.evaluate(mask) for mask in range(1 << n)]
    buffers: list[list[float]] = [[] for _ in range(n)]
    for perm in itertools.permutations(range(n)):
        mask = 0
        prev = vals[0]
        for p in perm:
            mask |= 1 << p
            cur = vals[mask]
            buffers[p].append(cur - prev)
            prev = cur
        for buf in buffers:
            if len(buf) >= _FSUM_CHUNK:
                buf[:] = [math.fsum(buf)]
    total = math.factorial(n)
    values = np.array([math.fsum(buf) / total for buf in buffers])
    return ShapleyVector(values, method="permutation")


def loo_scores(game: CoalitionGame) -> np.ndarray:
    """Leave-one-out scores: ``v(N) - v(N minus i)`` for each player.

    Costs exactly ``n + 1`` distinct oracle evaluations. Provided as the
    contrast baseline: under exact data duplication LOO collapses to zero for
    every copy while Shapley values split the credit.
    """
    n = game.n
    grand = full_coalition(n)
    v_n = game.evaluate(grand)
    return np.array([v_n - game.evaluate(grand & ~(1 << i)) for i in range(n)])
