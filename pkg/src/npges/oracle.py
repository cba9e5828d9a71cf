"""Conditional-independence oracles and the population-level comparison test."""

from __future__ import annotations

import itertools
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache
from typing import Iterable, Iterator

from npges.graphs import Dag, cpdag_of, d_separated, descendants, mec_members

__all__ = [
    "Decision",
    "CiOracle",
    "DsepOracle",
    "local_markov_statements",
    "ci_statements",
    "is_markov",
    "is_perfect_map",
    "PopulationTest",
    "population_test",
]


class Decision(IntEnum):
    """Outcome of comparing a challenger ``g`` with an incumbent ``h``.

    The integer values match the 0/1 convention for test functions.
    """

    PREFER_H = 0
    PREFER_G = 1


class CiOracle(ABC):
    """Answers ``a ⫫ b | c`` queries on disjoint vertex sets of a fixed size ``d``."""

    d: int

    @abstractmethod
    def indep(self, a: Iterable[int], b: Iterable[int], c: Iterable[int] = ()) -> bool:
        ...


@dataclass(frozen=True)
class DsepOracle(CiOracle):
    """CI relations read off a ground-truth DAG by d-separation."""

    truth: Dag

    @property
    def d(self) -> int:
        return self.truth.d

    def indep(self, a, b, c=()) -> bool:
        a, b, c = frozenset(a), frozenset(b), frozenset(c)
        # canonical order makes the cache symmetric in (a, b)
        if sorted(b) < sorted(a):
            a, b = b, a
        return _dsep_cached(self.truth, a, b, c)


@lru_cache(maxsize=1 << 20)
def _dsep_cached(g: Dag, a: frozenset, b: frozenset, c: frozenset) -> bool:
    return d_separated(g, a, b, c)


def local_markov_statements(g: Dag) -> list[tuple[int, frozenset[int], frozenset[int]]]:
    """``(j, nd(j) minus pa(j), pa(j))`` for every vertex with a non-trivial statement."""
    out = []
    for j in range(g.d):
        rest = frozenset(range(g.d)) - descendants(g, j) - g.parents[j] - {j}
        if rest:
            out.append((j, rest, g.parents[j]))
    return out


def ci_statements(d: int) -> Iterator[tuple[int, int, frozenset[int]]]:
    """All singleton-pair statements ``(i, j, C)`` with ``i < j``."""
    for i, j in itertools.combinations(range(d), 2):
        rest = [v for v in range(d) if v not in (i, j)]
        for r in range(len(rest) + 1):
            for c in itertools.combinations(rest, r):
                yield i, j, frozenset(c)


def is_markov(g: Dag, oracle: CiOracle) -> bool:
    """True iff the oracle's distribution is Markov to ``g`` (local Markov property)."""
    if oracle.d != g.d:
        raise ValueError(f"oracle has {oracle.d} vertices, graph has {g.d}")
    return all(oracle.indep({j}, rest, pa) for j, rest, pa in local_markov_statements(g))


def is_perfect_map(g: Dag, oracle: CiOracle) -> bool:
    """True iff d-separation in ``g`` and the oracle agree on every pairwise statement."""
    return all(
        d_separated(g, {i}, {j}, c) == oracle.indep({i}, {j}, c)
        for i, j, c in ci_statements(g.d)
    )


def _single_edge_witness(g: Dag, h: Dag) -> tuple[int, int, frozenset[int], bool] | None:
    """Locate ``g`` as a one-edge move from some member of the class of ``h``.

    Returns ``(k, j, S, added)`` where the move adds (``added``) or removes
    ``k -> j`` and ``S`` is the parent set of ``j`` without ``k``.  The
    incumbent itself is tried before its equivalent DAGs.
    """
    diff = g.n_edges - h.n_edges
    if abs(diff) != 1:
        return None
    candidates = itertools.chain([h], (m for m in mec_members(cpdag_of(h)) if m != h))
    for m in candidates:
        if diff == 1:
            big_, small_ = g, m
        else:
            big_, small_ = m, g
        extra = [(k, j) for k, j in big_.edges if not small_.has_edge(k, j)]
        if len(extra) == 1 and all(big_.has_edge(k, j) for k, j in small_.edges):
            k, j = extra[0]
            return k, j, small_.parents[j], diff == 1
    return None


@dataclass(frozen=True)
class PopulationTest:
    """Population comparison test backed by a CI oracle.

    When the challenger is a single-edge addition or removal relative to
    a member of the incumbent's equivalence class, the decision is the
    conditional-independence check for that edge given the child's other
    parents.  All other pairs fall back to the global rules: prefer a
    Markov challenger over a non-Markov incumbent, and among two Markov
    models prefer the one with fewer edges.  Remaining cases keep the
    incumbent.  ``local=False`` disables the edge rule.
    """

    oracle: CiOracle
    local: bool = True
    _markov: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    @property
    def d(self) -> int:
        return self.oracle.d

    def markov(self, g: Dag) -> bool:
        try:
            return self._markov[g]
        except KeyError:
            return self._markov.setdefault(g, is_markov(g, self.oracle))

    def compare(self, g: Dag, h: Dag) -> Decision:
        return population_test(self, g, h)


def population_test(pt: PopulationTest, g: Dag, h: Dag) -> Decision:
    """Decide between challenger ``g`` and incumbent ``h``."""
    if g.d != h.d:
        raise ValueError("graphs must share a vertex set")
    if pt.local:
        w = _single_edge_witness(g, h)
        if w is not None:
            k, j, rest, added = w
            dependent = not pt.oracle.indep({k}, {j}, rest)
            return Decision.PREFER_G if dependent == added else Decision.PREFER_H
    g_ok, h_ok = pt.markov(g), pt.markov(h)
    if g_ok and not h_ok:
        return Decision.PREFER_G
    if g_ok and h_ok and g.n_edges < h.n_edges:
        return Decision.PREFER_G
    return Decision.PREFER_H
