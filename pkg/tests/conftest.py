"""Shared fixtures: table-backed games and the seeded random-game corpus."""

from __future__ import annotations

import numpy as np
import pytest

from royaltyshare import CoalitionGame

CORPUS_SEED = 20260816
CORPUS_SIZE = 200


def table_game(table, n=None):
    """A game whose oracle indexes a dense 2^n utility table."""
    table = np.asarray(table, dtype=float)
    if n is None:
        n = table.size.bit_length() - 1
    assert table.size == 1 << n
    return CoalitionGame(n, lambda s: float(table[s]))


def random_table(rng, n):
    """Utilities i.i.d. uniform on [-1, 1] with v(empty) = 0."""
    table = rng.uniform(-1.0, 1.0, size=1 << n)
    table[0] = 0.0
    return table


@pytest.fixture(scope="session")
def game_corpus():
    """200 random games with n in {2..8}; shared by the axiom criteria."""
    rng = np.random.default_rng(CORPUS_SEED)
    corpus = []
    for _ in range(CORPUS_SIZE):
        n = int(rng.integers(2, 9))
        corpus.append((n, random_table(rng, n)))
    return corpus


GLOVE_TABLE = np.zeros(8)
for _mask in range(8):
    if (_mask & 0b011) and (_mask & 0b100):
        GLOVE_TABLE[_mask] = 1.0

GLOVE_EXACT = np.array([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0])


@pytest.fixture()
def glove_game():
    """Two left-glove holders and one right-glove holder; phi (1/6, 1/6, 2/3)."""
    return table_game(GLOVE_TABLE)
