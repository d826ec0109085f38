"""Monte Carlo Shapley estimation by permutation sampling.

The estimator samples player orderings and walks each one once, charging each
player its marginal contribution when it joins the growing prefix. Averaged
over uniformly random orderings this is an unbiased estimate of the Shapley
value; with a memoized game the walks share coalition evaluations.

Reproducibility contract: ordering ``j`` is drawn from a counter-based stream
derived from ``(config.seed, j)``, and per-permutation results are reduced in
index order. Estimates are therefore a pure function of ``(game, config)``,
bit for bit, no matter how many workers execute the walks.

Truncation: with ``truncation_tolerance > 0`` a walk stops as soon as the
prefix utility is within the tolerance of the grand coalition's utility, and
every remaining player is charged exactly zero. The grand coalition value is
read through the memoized game, so across a whole run it is paid for once.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .exact import ShapleyVector
from .games import CoalitionGame, EMPTY, full_coalition
from .seeding import rng_for

DEFAULT_NUM_PERMUTATIONS = 2000


@dataclass(frozen=True)
class EstimatorConfig:
    """Sampling budget, root seed, and optional truncation tolerance."""

    num_permutations: int = DEFAULT_NUM_PERMUTATIONS
    seed: int = 0
    truncation_tolerance: float = 0.0

    def __post_init__(self) -> None:
        if self.num_permutations < 1:
            raise ValueError("num_permutations must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if not (math.isfinite(self.truncation_tolerance) and self.truncation_tolerance >= 0):
            raise ValueError("truncation_tolerance must be finite and nonnegative")


@dataclass(frozen=True)
class EstimateReport:
    """A Monte Carlo estimate with its sampling uncertainty and cost."""

    estimate: ShapleyVector
    stderr: np.ndarray
    permutations_used: int
    oracle_calls: int


@dataclass(frozen=True)
class IncrementalOracle:
    """Utility evaluation that grows a coalition one player at a time.

    ``start`` yields the empty-coalition state, ``extend`` adds one player,
    and ``utility_of`` reads the current utility. For oracles whose state
    update is cheaper than a fresh evaluation (running sums, sufficient
    statistics), this turns each permutation walk into ``n`` extend steps and
    ``n + 1`` utility reads. ``utility_of`` must be insensitive to the order
    in which players were added.
    """

    start: Callable[[], Any]
    extend: Callable[[Any, int], Any]
    utility_of: Callable[[Any], float]


def sampled_ordering(seed: int, index: int, n: int) -> np.ndarray:
    """The ``index``-th sampled player ordering for a given root seed."""
    return rng_for(seed, index).permutation(n)


def truncated_walk(
    game: CoalitionGame,
    ordering: Sequence[int],
    tolerance: float = 0.0,
    *,
    total_utility: float | None = None,
) -> np.ndarray:
    """Walk one ordering and return each player's marginal contribution.

    With ``tolerance == 0`` this is the plain full walk. With a positive
    tolerance the walk stops once ``|v(N) - v(prefix)| <= tolerance`` and the
    players not yet seen are charged exactly 0.0. ``total_utility`` may be
    passed when v(N) is already known; otherwise it is read through the
    game's cache.
    """
    n = game.n
    if sorted(ordering) != list(range(n)):
        raise ValueError("ordering must be a permutation of range(game.n)")
    check = tolerance > 0
    if check and total_utility is None:
        total_utility = game.evaluate(full_coalition(n))
    marginals = np.zeros(n, dtype=float)
    mask = EMPTY
    prev = game.evaluate(EMPTY)
    for p in ordering:
        if check and abs(total_utility - prev) <= tolerance:
            break
        mask |= 1 << int(p)
        cur = game.evaluate(mask)
        marginals[p] = cur - prev
        prev = cur
    return marginals


def _reduce(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = matrix.shape[0]
    estimate = matrix.mean(axis=0)
    if m > 1:
        stderr = matrix.std(axis=0, ddof=1) / math.sqrt(m)
    else:
        stderr = np.zeros(matrix.shape[1])
    return estimate, stderr


def permutation_sample(
    game: CoalitionGame, config: EstimatorConfig, *, workers: int = 1
) -> EstimateReport:
    """Estimate Shapley values from ``config.num_permutations`` sampled walks.

    ``workers`` only sets how walks are executed; the sampled orderings and
    the returned numbers are identical for any worker count.
    """
    n = game.n
    m = config.num_permutations
    calls_before = game.eval_count
    if config.truncation_tolerance > 0:
        game.evaluate(full_coalition(n))  # pay for v(N) once, outside the walks
    marginals = np.empty((m, n), dtype=float)

    def run(j: int) -> None:
        ordering = sampled_ordering(config.seed, j, n)
        marginals[j] = truncated_walk(game, ordering, config.truncation_tolerance)

    if workers <= 1:
        for j in range(m):
            run(j)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(m)))
    estimate, stderr = _reduce(marginals)
    return EstimateReport(
        estimate=ShapleyVector(estimate, method="estimated"),
        stderr=stderr,
        permutations_used=m,
        oracle_calls=game.eval_count - calls_before,
    )


def permutation_sample_incremental(
    oracle: IncrementalOracle, n: int, config: EstimatorConfig
) -> EstimateReport:
    """The same estimator as :func:`permutation_sample`, on incremental state.

    Each walk costs ``n`` extend steps and ``n + 1`` utility reads instead of
    fresh coalition evaluations. Orderings come from the same
    ``(seed, index)`` streams, so for an order-insensitive oracle that matches
    its coalition counterpart, the estimates agree exactly for the same seed.
    """
    m = config.num_permutations
    tolerance = config.truncation_tolerance
    reads = 0
    total_utility = 0.0
    if tolerance > 0:
        # v(N) is order insensitive, so one chain up front suffices.
        state = oracle.start()
        for p in range(n):
            state = oracle.extend(state, p)
        total_utility = oracle.utility_of(state)
        reads += 1
    marginals = np.empty((m, n), dtype=float)
    for j in range(m):
        ordering = sampled_ordering(config.seed, j, n)
        state = oracle.start()
        prev = oracle.utility_of(state)
        reads += 1
        row = np.zeros(n, dtype=float)
        for p in ordering:
            if tolerance > 0 and abs(total_utility - prev) <= tolerance:
                break
            state = oracle.extend(state, int(p))
            cur = oracle.utility_of(state)
            reads += 1
            row[p] = cur - prev
            prev = cur
        marginals[j] = row
    estimate, stderr = _reduce(marginals)
    return EstimateReport(
        estimate=ShapleyVector(estimate, method="estimated"),
        stderr=stderr,
        permutations_used=m,
        oracle_calls=reads,
    )


def make_mc_solver(
    config: EstimatorConfig, *, workers: int = 1
) -> Callable[[CoalitionGame], ShapleyVector]:
    """Package the sampler as a solver callable for the royalty layer."""

    def solve(game: CoalitionGame) -> ShapleyVector:
        return permutation_sample(game, config, workers=workers).estimate

    return solve
