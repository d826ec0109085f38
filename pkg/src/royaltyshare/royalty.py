"""Turning Shapley values into royalty shares and a developer/data split.

Royalty shares normalize a Shapley vector onto the probability simplex:
negative values are clamped to zero in both numerator and denominator, since
a negative score means a player's data made the output less likely and a
royalty cannot be negative. If every score clamps to zero the shares
degenerate; the vector falls back to uniform and is flagged so callers can
route the case by policy rather than by crash.

The developer's cut comes from a permission structure: an augmented game adds
the model developer as player ``n``, and any coalition without the developer
is worth nothing, because without the trained model there is no output to
sell. Shapley values of the augmented game then price the developer's veto
alongside the owners' data. ``beta_data``, the fraction of revenue flowing to
data owners collectively, is one minus the developer's share of the augmented
game.

Utilities are in nats throughout; :func:`nats_to_bits` converts for display
only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonFiniteError
from .exact import ShapleyVector, exact_shapley
from .games import Coalition, CoalitionGame, EMPTY

Solver = Callable[[CoalitionGame], ShapleyVector]


def relative_utility(absolute_utility: float, baseline_utility: float) -> float:
    """Log-likelihood utility relative to an ownerless baseline, in nats.

    Shapley values are shift invariant, so subtracting the baseline changes
    no attribution; it pins v(empty) to zero, which the royalty layer relies
    on. Raises :class:`NonFiniteError` on NaN or infinite inputs.
    """
    if not (math.isfinite(absolute_utility) and math.isfinite(baseline_utility)):
        raise NonFiniteError(
            f"utilities must be finite, got {absolute_utility!r} and {baseline_utility!r}"
        )
    return absolute_utility - baseline_utility


def nats_to_bits(nats: float) -> float:
    return nats / math.log(2.0)


@dataclass(frozen=True)
class ShareVector:
    """Nonnegative shares on the simplex, with a degeneracy flag.

    ``degenerate`` is True when every underlying score was zero or negative
    and the shares fell back to uniform. ``solver`` records which method
    produced the underlying Shapley vector, when known.
    """

    shares: np.ndarray
    degenerate: bool
    solver: str | None = None

    def __len__(self) -> int:
        return len(self.shares)


def royalty_shares(phi: ShapleyVector | np.ndarray) -> ShareVector:
    """Normalize Shapley values into royalty shares.

    Negative scores are clamped to zero before normalizing. An all-clamped
    vector yields uniform shares with ``degenerate=True``.
    """
    if isinstance(phi, ShapleyVector):
        values = np.asarray(phi.values, dtype=float)
        solver = phi.method
    else:
        values = np.asarray(phi, dtype=float)
        solver = None
    if values.size and not np.all(np.isfinite(values)):
        raise NonFiniteError("Shapley values must be finite to define shares")
    clamped = np.maximum(values, 0.0)
    total = math.fsum(clamped.tolist())
    if total > 0.0:
        return ShareVector(clamped / total, degenerate=False, solver=solver)
    n = len(values)
    uniform = np.full(n, 1.0 / n) if n else np.empty(0)
    return ShareVector(uniform, degenerate=True, solver=solver)


def shares_from_game(game: CoalitionGame, solver: Solver = exact_shapley) -> ShareVector:
    """Solve the game and normalize; the solver is any callable game -> phi."""
    return royalty_shares(solver(game))


class PermissionGame:
    """The owners' game augmented with the developer as a veto player.

    Player indices 0..n-1 are the data owners, player ``n`` is the developer.
    The augmented utility is v(S minus developer) when the developer is in S
    and zero otherwise. The base game must satisfy v(empty) = 0, which holds
    for relative utilities by construction; this is checked eagerly with one
    (cached) evaluation.

    The augmented game reads the base game through its cache, so solving the
    permission game costs no more base-oracle calls than solving the base
    game itself.
    """

    def __init__(self, base: CoalitionGame):
        if base.evaluate(EMPTY) != 0.0:
            raise ValueError("permission games require a base game with v(empty) = 0")
        self.base = base
        self.developer = base.n
        dev_bit = 1 << base.n

        def augmented(s: Coalition) -> float:
            if s & dev_bit:
                return base.evaluate(s & ~dev_bit)
            return 0.0

        self.augmented = CoalitionGame(base.n + 1, augmented)

    @property
    def num_owners(self) -> int:
        return self.base.n


def permission_shapley(pg: PermissionGame, solver: Solver = exact_shapley) -> ShapleyVector:
    """Shapley values of the augmented game; entry ``pg.developer`` is the developer."""
    return solver(pg.augmented)


@dataclass(frozen=True)
class DeveloperSplit:
    """How one unit of revenue divides between the developer and the owners.

    ``owner_payout_fractions[i]`` is owner i's fraction of total revenue, not
    of the owners' pool; the fractions sum to ``beta_data`` unless the split
    is degenerate.
    """

    beta_data: float
    developer_share: float
    owner_payout_fractions: np.ndarray
    degenerate: bool = False


def developer_split(pg: PermissionGame, solver: Solver = exact_shapley) -> DeveloperSplit:
    """Price the developer's share from the permission game itself.

    The owners' payout fractions equal the augmented-game royalty shares
    restricted to the owners: scaling the owner-renormalized shares by
    ``beta_data`` cancels the renormalization.
    """
    shares = royalty_shares(permission_shapley(pg, solver))
    developer_share = float(shares.shares[pg.developer])
    return DeveloperSplit(
        beta_data=1.0 - developer_share,
        developer_share=developer_share,
        owner_payout_fractions=shares.shares[: pg.developer].copy(),
        degenerate=shares.degenerate,
    )


def fixed_split(beta_data: float, owner_shares: ShareVector) -> DeveloperSplit:
    """Apply a negotiated ``beta_data`` to already-computed owner shares."""
    if not 0.0 <= beta_data <= 1.0:
        raise ValueError(f"beta_data must lie in [0, 1], got {beta_data}")
    return DeveloperSplit(
        beta_data=beta_data,
        developer_share=1.0 - beta_data,
        owner_payout_fractions=beta_data * owner_shares.shares,
        degenerate=owner_shares.degenerate,
    )
