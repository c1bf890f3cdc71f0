"""Shared fixtures and constants for the flipgraph_mm test suite."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from flipgraph_mm.config import SearchConfig
from flipgraph_mm.core import (
    GF2,
    Format,
    GF2Matrix,
    Ring,
    Scheme,
    Term,
    matrix_from_entries,
    to_ring,
)
from flipgraph_mm.moves import FlipGraphState
from flipgraph_mm.schemeio import load_scheme
from flipgraph_mm.search import RandomStream

# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

FIXTURES: Path = Path(__file__).parent / "fixtures"
"""Vendored scheme files."""

PUBLISHED: Path = FIXTURES / "published"
"""Optional published corpus; tests using it skip when a file is missing."""

STRASSEN_PATH: Path = FIXTURES / "strassen.scheme"
"""Strassen's rank-7 integer scheme for (2,2,2)."""

SMALL_FORMATS: list[Format] = [
    Format(n, m, p) for n in range(1, 5) for m in range(1, 5) for p in range(1, 5)
]
"""Every format with all dimensions at most 4."""

# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------


@pytest.fixture
def strassen() -> Scheme:
    """Strassen's scheme over the integers."""
    return load_scheme(STRASSEN_PATH)


@pytest.fixture
def strassen_gf2(strassen: Scheme) -> Scheme:
    """Strassen's scheme reduced mod 2."""
    return to_ring(strassen, GF2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20250417)


# ---------------------------------------------------------------------------
# Helpers (imported explicitly where needed)
# ---------------------------------------------------------------------------


def _make_search_config(**overrides: object) -> SearchConfig:
    """Build a SearchConfig with a small budget for unit tests."""
    values: dict[str, object] = {
        "max_steps": 20_000,
        "escape_after": 500,
        "max_splits_above_best": 2,
        "restart_after": 5_000,
        "seed": 1,
        "workers": 1,
        "sync_every": 100,
    }
    values.update(overrides)
    return SearchConfig(**values)  # type: ignore[arg-type]


def _random_scheme(
    rng: np.random.Generator, fmt: Format, rank: int, ring: Ring = GF2, bound: int = 1
) -> Scheme:
    """A scheme with random coefficients in [-bound, bound]; usually not correct."""
    terms = []
    for _ in range(rank):
        parts = []
        for rows, cols in fmt.shapes:
            entries = [int(v) for v in rng.integers(-bound, bound + 1, size=rows * cols)]
            if not any(entries):
                entries[0] = 1
            parts.append(matrix_from_entries(ring, rows, cols, entries))
        terms.append(Term(*parts))
    return Scheme(fmt, ring, tuple(terms))


def _random_gf2_matrix(rng: np.random.Generator, rows: int, cols: int) -> GF2Matrix:
    return GF2Matrix(rows, cols, int(rng.integers(0, 1 << (rows * cols))))


def _scrambled(s: Scheme, seed: int, flips: int) -> Scheme:
    """Apply random flips (with greedy reductions) to a GF(2) scheme."""
    state = FlipGraphState.from_scheme(s)
    stream = RandomStream(seed)
    for _ in range(flips):
        if not state.random_flip(stream):
            break
    return state.to_scheme()
