"""Greedy equivalence search driven by a two-model comparison test.

Both phases scan the neighbourhood of the current DAG in a fixed order and
move to the first neighbour the test prefers over the incumbent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Protocol

from npges.graphs import Cpdag, Dag, cpdag_of, format_dag, nb_minus, nb_plus
from npges.oracle import Decision

__all__ = ["ComparisonTest", "SearchTrace", "forward_phase", "backward_phase", "ges"]


class ComparisonTest(Protocol):
    def compare(self, g: Dag, h: Dag) -> Decision:
        """Prefer challenger ``g`` or incumbent ``h``."""
        ...


@dataclass
class SearchTrace:
    """Iterates and comparisons of one search run.

    ``iterates`` holds ``(t, dag, phase)``; ``comparisons`` holds
    ``(t, challenger, incumbent, decision)``.  ``t0`` is the last forward
    index and ``r`` the final one.
    """

    iterates: list[tuple[int, Dag, str]] = field(default_factory=list)
    comparisons: list[tuple[int, Dag, Dag, Decision]] = field(default_factory=list)
    t0: int = 0
    r: int = 0

    def records(self) -> list[dict]:
        """One record per comparison and per accepted move, in execution order."""
        out = []
        moves = {t: (g, phase) for t, g, phase in self.iterates}
        ci = 0
        for t in sorted(moves):
            while ci < len(self.comparisons) and self.comparisons[ci][0] < t:
                ct, g, h, dec = self.comparisons[ci]
                out.append({
                    "type": "comparison", "t": ct, "challenger": format_dag(g),
                    "incumbent": format_dag(h), "decision": dec.name.lower(),
                })
                ci += 1
            g, phase = moves[t]
            out.append({"type": "iterate", "t": t, "phase": phase, "dag": format_dag(g)})
        for ct, g, h, dec in self.comparisons[ci:]:
            out.append({
                "type": "comparison", "t": ct, "challenger": format_dag(g),
                "incumbent": format_dag(h), "decision": dec.name.lower(),
            })
        out.append({"type": "summary", "t0": self.t0, "r": self.r})
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(rec, ensure_ascii=False) + "\n" for rec in self.records())


def _phase(test: ComparisonTest, start: Dag, neighbours, tag: str, t: int,
           trace: SearchTrace, best_improvement: bool) -> tuple[Dag, int]:
    current = start
    while True:
        chosen = None
        if best_improvement:
            best = None
            for cand in neighbours(current):
                value = test.log_odds(cand, current)  # type: ignore[attr-defined]
                dec = test.compare(cand, current)
                trace.comparisons.append((t, cand, current, dec))
                if dec == Decision.PREFER_G and (best is None or value > best[0]):
                    best = (value, cand)
            chosen = best[1] if best else None
        else:
            for cand in neighbours(current):
                dec = test.compare(cand, current)
                trace.comparisons.append((t, cand, current, dec))
                if dec == Decision.PREFER_G:
                    chosen = cand
                    break
        if chosen is None:
            return current, t
        t += 1
        current = chosen
        trace.iterates.append((t, current, tag))


def forward_phase(test: ComparisonTest, start: Dag | int, *, best_improvement: bool = False,
                  trace: SearchTrace | None = None) -> tuple[Dag, SearchTrace]:
    """Add edges until no neighbour in ``nb_plus`` is preferred.

    ``start`` may be a DAG or a vertex count (meaning the empty graph).
    """
    if isinstance(start, int):
        start = Dag.empty(start)
    trace = trace if trace is not None else SearchTrace()
    if not trace.iterates:
        trace.iterates.append((0, start, "forward"))
    t = trace.iterates[-1][0]
    g, t = _phase(test, start, nb_plus, "forward", t, trace, best_improvement)
    trace.t0 = trace.r = t
    return g, trace


def backward_phase(test: ComparisonTest, start: Dag, *, best_improvement: bool = False,
                   trace: SearchTrace | None = None) -> tuple[Dag, SearchTrace]:
    """Remove edges until no neighbour in ``nb_minus`` is preferred."""
    trace = trace if trace is not None else SearchTrace()
    if not trace.iterates:
        trace.iterates.append((0, start, "backward"))
    t = trace.iterates[-1][0]
    g, t = _phase(test, start, nb_minus, "backward", t, trace, best_improvement)
    trace.r = t
    return g, trace


def ges(test: ComparisonTest, d: int | None = None, *,
        best_improvement: bool = False) -> tuple[Cpdag, SearchTrace]:
    """Run the forward phase from the empty graph, then the backward phase.

    ``d`` defaults to ``test.d``.

    ``best_improvement=True`` replaces first acceptance with the classical
    highest-odds move; the test must then provide ``log_odds``.
    """
    if best_improvement and not hasattr(test, "log_odds"):
        raise ValueError("best-improvement search needs a test exposing log_odds")
    if d is None:
        d = test.d  # type: ignore[attr-defined]
    g, trace = forward_phase(test, d, best_improvement=best_improvement)
    g, trace = backward_phase(test, g, best_improvement=best_improvement, trace=trace)
    return cpdag_of(g), trace
