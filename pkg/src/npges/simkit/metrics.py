"""Structure-recovery metrics on CPDAGs."""

from __future__ import annotations

import itertools

from npges.graphs import Pdag

__all__ = ["shd_cpdag", "mec_equal"]


def shd_cpdag(a: Pdag, b: Pdag) -> int:
    """Vertex pairs whose status (absent, undirected, or either direction) differs."""
    if a.d != b.d:
        raise ValueError(f"vertex counts differ: {a.d} vs {b.d}")
    return sum(a.edge_status(k, j) != b.edge_status(k, j)
               for k, j in itertools.combinations(range(a.d), 2))


def mec_equal(a: Pdag, b: Pdag) -> bool:
    return a.d == b.d and shd_cpdag(a, b) == 0
