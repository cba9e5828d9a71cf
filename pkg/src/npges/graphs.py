"""DAGs, partially directed graphs and Markov equivalence.

Vertices are ``0..d-1`` internally.  The inline text notation
``[S1|S2|...|Sd]`` lists the parents of each vertex with 1-based labels,
e.g. ``[∅|1|12]`` is the complete DAG 1->2, 1->3, 2->3.
"""

from __future__ import annotations

import heapq
import itertools
import json
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator

__all__ = [
    "GraphError",
    "CycleError",
    "Dag",
    "Pdag",
    "Cpdag",
    "CiStatement",
    "parse_dag",
    "format_dag",
    "topological_order",
    "descendants",
    "ancestors",
    "d_separated",
    "skeleton",
    "unshielded_colliders",
    "markov_equivalent",
    "cpdag_of",
    "mec_members",
    "add_edge",
    "remove_edge",
    "nb_plus",
    "nb_minus",
    "all_dags",
]


class GraphError(ValueError):
    """Malformed graph input."""


class CycleError(GraphError):
    """The requested graph would contain a directed cycle."""


def _kahn(d: int, parents: tuple[frozenset[int], ...]) -> tuple[int, ...] | None:
    children: list[list[int]] = [[] for _ in range(d)]
    indeg = [len(p) for p in parents]
    for j, pa in enumerate(parents):
        for k in pa:
            children[k].append(j)
    heap = [j for j in range(d) if indeg[j] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    return tuple(order) if len(order) == d else None


@dataclass(frozen=True)
class Dag:
    """A DAG stored as one parent set per vertex."""

    d: int
    parents: tuple[frozenset[int], ...]

    def __post_init__(self):
        parents = tuple(frozenset(int(k) for k in p) for p in self.parents)
        object.__setattr__(self, "parents", parents)
        if self.d < 1:
            raise GraphError(f"vertex count must be positive, got {self.d}")
        if len(parents) != self.d:
            raise GraphError(f"expected {self.d} parent sets, got {len(parents)}")
        for j, pa in enumerate(parents):
            for k in pa:
                if not 0 <= k < self.d:
                    raise GraphError(f"parent {k + 1} of vertex {j + 1} out of range")
                if k == j:
                    raise GraphError(f"self-loop at vertex {j + 1}")
        order = _kahn(self.d, parents)
        if order is None:
            raise CycleError(f"graph {format_dag(self)} is cyclic")
        object.__setattr__(self, "_order", order)

    @classmethod
    def empty(cls, d: int) -> "Dag":
        return cls(d, tuple(frozenset() for _ in range(d)))

    @classmethod
    def from_edges(cls, d: int, edges: Iterable[tuple[int, int]]) -> "Dag":
        parents: list[set[int]] = [set() for _ in range(d)]
        for k, j in edges:
            parents[j].add(k)
        return cls(d, tuple(frozenset(p) for p in parents))

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted((k, j) for j, pa in enumerate(self.parents) for k in pa)

    @property
    def n_edges(self) -> int:
        return sum(len(p) for p in self.parents)

    @property
    def sparsity(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.parents)

    def has_edge(self, k: int, j: int) -> bool:
        return k in self.parents[j]

    def adjacent(self, k: int, j: int) -> bool:
        return k in self.parents[j] or j in self.parents[k]

    def children(self, k: int) -> frozenset[int]:
        return frozenset(j for j, pa in enumerate(self.parents) if k in pa)

    def sort_key(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(sorted(p)) for p in self.parents)

    def __str__(self) -> str:
        return format_dag(self)

    def __repr__(self) -> str:
        return f"Dag({format_dag(self)})"


# -- text notation -----------------------------------------------------------

_EMPTY_TOKENS = {"", "∅", "0", "{}"}


def parse_dag(text: str) -> Dag:
    """Parse ``[S1|...|Sd]`` into a :class:`Dag`.

    Each ``Sj`` is a comma- or blank-separated list of 1-based parent
    labels.  ``∅``, ``0`` or nothing mean no parents.  With fewer than ten
    vertices a run of digits such as ``12`` is read label by label.
    """
    s = text.strip()
    if not (s.startswith("[") and s.endswith("]")):
        raise GraphError(f"expected '[...]', got {text!r}")
    parts = s[1:-1].split("|")
    d = len(parts)
    parents = []
    for j, part in enumerate(parts):
        part = part.strip()
        if part in _EMPTY_TOKENS:
            parents.append(frozenset())
            continue
        tokens = [t for t in re.split(r"[,\s]+", part) if t]
        if len(tokens) == 1 and d < 10:
            tokens = list(tokens[0])
        labels = set()
        for t in tokens:
            if not t.isdigit():
                raise GraphError(f"bad parent label {t!r} for vertex {j + 1}")
            k = int(t)
            if not 1 <= k <= d:
                raise GraphError(f"parent label {k} out of range 1..{d}")
            labels.add(k - 1)
        parents.append(frozenset(labels))
    return Dag(d, tuple(parents))


def format_dag(g: Dag) -> str:
    """Inverse of :func:`parse_dag`."""
    sep = "" if g.d < 10 else ","
    parts = []
    for pa in g.parents:
        parts.append(sep.join(str(k + 1) for k in sorted(pa)) if pa else "∅")
    return "[" + "|".join(parts) + "]"


# -- basic structure ---------------------------------------------------------

def topological_order(g: Dag) -> tuple[int, ...]:
    """Topological order, smallest index first among available vertices."""
    return g._order  # type: ignore[attr-defined]


def descendants(g: Dag, v: int) -> frozenset[int]:
    """Vertices reachable from ``v`` by a directed path (excluding ``v``)."""
    kids = [g.children(k) for k in range(g.d)] if g.d else []
    seen: set[int] = set()
    stack = list(kids[v])
    while stack:
        u = stack.pop()
        if u not in seen:
            seen.add(u)
            stack.extend(kids[u])
    return frozenset(seen)


def ancestors(g: Dag, vs: Iterable[int]) -> frozenset[int]:
    """Ancestors of a vertex set, the set itself included."""
    seen = set(vs)
    stack = list(seen)
    while stack:
        u = stack.pop()
        for k in g.parents[u]:
            if k not in seen:
                seen.add(k)
                stack.append(k)
    return frozenset(seen)


@dataclass(frozen=True)
class CiStatement:
    """``a ⫫ b | c`` for pairwise disjoint vertex sets."""

    a: frozenset[int]
    b: frozenset[int]
    c: frozenset[int] = frozenset()

    def __post_init__(self):
        for name in ("a", "b", "c"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.a & self.b or self.a & self.c or self.b & self.c:
            raise ValueError("CI statement sets must be pairwise disjoint")


def d_separated(g: Dag, a: Iterable[int], b: Iterable[int], c: Iterable[int] = ()) -> bool:
    """True iff ``a`` and ``b`` are d-separated by ``c`` in ``g``.

    Reachability over (vertex, direction) states: a collider passes the
    ball only when it or one of its descendants is in ``c``.
    """
    a, b, c = frozenset(a), frozenset(b), frozenset(c)
    if a & b or a & c or b & c:
        raise ValueError("vertex sets must be pairwise disjoint")
    if not a or not b:
        return True
    anc_c = ancestors(g, c)
    kids = [g.children(k) for k in range(g.d)]
    # direction True: arrived from a child (moving up)
    stack = [(x, True) for x in a]
    visited: set[tuple[int, bool]] = set()
    while stack:
        y, up = stack.pop()
        if (y, up) in visited:
            continue
        visited.add((y, up))
        if y not in c and y in b:
            return False
        if up:
            if y not in c:
                stack.extend((z, True) for z in g.parents[y])
                stack.extend((z, False) for z in kids[y])
        else:
            if y not in c:
                stack.extend((z, False) for z in kids[y])
            if y in anc_c:
                stack.extend((z, True) for z in g.parents[y])
    return True


def skeleton(g: "Dag | Pdag") -> frozenset[tuple[int, int]]:
    """Adjacencies as pairs ``(k, j)`` with ``k < j``."""
    edges = g.edges if isinstance(g, Dag) else itertools.chain(g.directed, g.undirected)
    return frozenset((min(k, j), max(k, j)) for k, j in edges)


def unshielded_colliders(g: Dag) -> frozenset[tuple[int, int, int]]:
    """Triples ``(k, j, m)``, ``k < m``, with ``k -> j <- m`` and ``k``, ``m`` non-adjacent."""
    out = set()
    for j, pa in enumerate(g.parents):
        for k, m in itertools.combinations(sorted(pa), 2):
            if not g.adjacent(k, m):
                out.add((k, j, m))
    return frozenset(out)


def markov_equivalent(g: Dag, h: Dag) -> bool:
    if g.d != h.d:
        raise GraphError(f"vertex counts differ: {g.d} vs {h.d}")
    return skeleton(g) == skeleton(h) and unshielded_colliders(g) == unshielded_colliders(h)


# -- partially directed graphs -------------------------------------------------

@dataclass(frozen=True, eq=False)
class Pdag:
    """Partially directed graph: directed pairs ``(k, j)`` and undirected pairs ``k < j``."""

    d: int
    directed: frozenset[tuple[int, int]] = frozenset()
    undirected: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        directed = frozenset((int(k), int(j)) for k, j in self.directed)
        undirected = frozenset((min(int(k), int(j)), max(int(k), int(j))) for k, j in self.undirected)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)
        seen = set()
        for k, j in itertools.chain(directed, undirected):
            if k == j:
                raise GraphError(f"self-loop at vertex {k + 1}")
            if not (0 <= k < self.d and 0 <= j < self.d):
                raise GraphError(f"edge ({k + 1}, {j + 1}) out of range")
            pair = (min(k, j), max(k, j))
            if pair in seen:
                raise GraphError(f"vertices {pair[0] + 1} and {pair[1] + 1} joined twice")
            seen.add(pair)

    def __eq__(self, other):
        if not isinstance(other, Pdag):
            return NotImplemented
        return (self.d, self.directed, self.undirected) == (other.d, other.directed, other.undirected)

    def __hash__(self):
        return hash((self.d, self.directed, self.undirected))

    def adjacent(self, k: int, j: int) -> bool:
        return ((k, j) in self.directed or (j, k) in self.directed
                or (min(k, j), max(k, j)) in self.undirected)

    @property
    def n_edges(self) -> int:
        return len(self.directed) + len(self.undirected)

    def edge_status(self, k: int, j: int) -> str:
        """One of ``"absent"``, ``"undirected"``, ``"->"``, ``"<-"`` for the pair ``k < j``."""
        if (k, j) in self.directed:
            return "->"
        if (j, k) in self.directed:
            return "<-"
        if (min(k, j), max(k, j)) in self.undirected:
            return "undirected"
        return "absent"

    def to_json(self) -> dict:
        """JSON-ready dict with 1-based vertex labels, edges sorted."""
        return {
            "d": self.d,
            "directed": [[k + 1, j + 1] for k, j in sorted(self.directed)],
            "undirected": [[k + 1, j + 1] for k, j in sorted(self.undirected)],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj: dict | str):
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            d = int(obj["d"])
            directed = [(int(k) - 1, int(j) - 1) for k, j in obj.get("directed", [])]
            undirected = [(int(k) - 1, int(j) - 1) for k, j in obj.get("undirected", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphError(f"malformed graph JSON: {exc}") from exc
        return cls(d, frozenset(directed), frozenset(undirected))

    def __repr__(self) -> str:
        parts = [f"{k + 1}->{j + 1}" for k, j in sorted(self.directed)]
        parts += [f"{k + 1}--{j + 1}" for k, j in sorted(self.undirected)]
        return f"{type(self).__name__}(d={self.d}, {', '.join(parts) or 'no edges'})"


class Cpdag(Pdag):
    """A :class:`Pdag` that is the completed PDAG of some Markov equivalence class.

    Build one with :func:`cpdag_of`; :meth:`validate` checks an arbitrary
    PDAG against the definition.
    """

    @classmethod
    def validate(cls, p: Pdag) -> "Cpdag":
        c = cls(p.d, p.directed, p.undirected)
        if not _extensions(c):
            raise GraphError(f"{p!r} is not the CPDAG of any DAG")
        return c

    @classmethod
    def from_json(cls, obj: dict | str) -> "Cpdag":
        return cls.validate(Pdag.from_json(obj))


def _meek_closure(d: int, directed: set, undirected: set) -> None:
    """Apply Meek rules R1-R4 in place until nothing changes."""

    def adj(x, y):
        return (x, y) in directed or (y, x) in directed or (min(x, y), max(x, y)) in undirected

    def und(x, y):
        return (min(x, y), max(x, y)) in undirected

    def forced(x, y):
        # R1: z -> x - y, z and y non-adjacent
        for z in range(d):
            if (z, x) in directed and z != y and not adj(z, y):
                return True
        # R2: x -> z -> y
        for z in range(d):
            if (x, z) in directed and (z, y) in directed:
                return True
        # R3: x - z -> y, x - w -> y, z and w non-adjacent
        mids = [z for z in range(d) if und(x, z) and (z, y) in directed]
        for z, w in itertools.combinations(mids, 2):
            if not adj(z, w):
                return True
        # R4: x - w -> z -> y, x adjacent to z, w and y non-adjacent
        for w in range(d):
            if w in (x, y) or not und(x, w):
                continue
            for z in range(d):
                if (w, z) in directed and (z, y) in directed and adj(x, z) and not adj(w, y):
                    return True
        return False

    changed = True
    while changed:
        changed = False
        for k, j in sorted(undirected):
            if forced(k, j):
                undirected.discard((k, j))
                directed.add((k, j))
                changed = True
            elif forced(j, k):
                undirected.discard((k, j))
                directed.add((j, k))
                changed = True


@lru_cache(maxsize=None)
def cpdag_of(g: Dag) -> Cpdag:
    """CPDAG of the Markov equivalence class of ``g``.

    Unshielded colliders are oriented, the rest of the skeleton is left
    undirected, then Meek's rules are applied to a fixpoint.
    """
    directed = set()
    for k, j, m in unshielded_colliders(g):
        directed.add((k, j))
        directed.add((m, j))
    undirected = {e for e in skeleton(g) if e not in directed and e[::-1] not in directed}
    _meek_closure(g.d, directed, undirected)
    return Cpdag(g.d, frozenset(directed), frozenset(undirected))


def _extensions(c: Pdag) -> tuple[Dag, ...]:
    und = sorted(c.undirected)
    base = [set() for _ in range(c.d)]
    for k, j in c.directed:
        base[j].add(k)
    out = []
    for flips in itertools.product((False, True), repeat=len(und)):
        parents = [set(p) for p in base]
        for (k, j), flip in zip(und, flips):
            if flip:
                parents[k].add(j)
            else:
                parents[j].add(k)
        fp = tuple(frozenset(p) for p in parents)
        if _kahn(c.d, fp) is None:
            continue
        g = Dag(c.d, fp)
        if cpdag_of(g) == c:
            out.append(g)
    out.sort(key=Dag.sort_key)
    return tuple(out)


@lru_cache(maxsize=None)
def _mec_members_cached(c: Pdag) -> tuple[Dag, ...]:
    return _extensions(c)


def mec_members(c: Pdag) -> list[Dag]:
    """All DAGs whose CPDAG is ``c``, sorted by parent sets.

    Enumerates every orientation of the undirected edges, so keep ``d``
    small.
    """
    members = _mec_members_cached(Pdag(c.d, c.directed, c.undirected))
    if not members:
        raise GraphError(f"{c!r} is not the CPDAG of any DAG")
    return list(members)


# -- single-edge moves -------------------------------------------------------

def add_edge(g: Dag, k: int, j: int) -> Dag:
    """``g`` with ``k -> j`` added (``g`` itself if already present)."""
    if k == j:
        raise GraphError("cannot add a self-loop")
    if k in g.parents[j]:
        return g
    parents = list(g.parents)
    parents[j] = parents[j] | {k}
    return Dag(g.d, tuple(parents))


def remove_edge(g: Dag, k: int, j: int) -> Dag:
    """``g`` with ``k -> j`` removed (``g`` itself if absent)."""
    if k == j:
        raise GraphError("cannot remove a self-loop")
    if k not in g.parents[j]:
        return g
    parents = list(g.parents)
    parents[j] = parents[j] - {k}
    return Dag(g.d, tuple(parents))


def _dedupe_by_mec(cands: list[tuple]) -> list[Dag]:
    cands.sort(key=lambda t: t[:3])
    seen = set()
    out = []
    for *_, h in cands:
        key = cpdag_of(h)
        if key not in seen:
            seen.add(key)
            out.append(h)
    return out


@lru_cache(maxsize=None)
def _nb_plus(g: Dag) -> tuple[Dag, ...]:
    cands = []
    for h in mec_members(cpdag_of(g)):
        for j in range(g.d):
            for k in range(g.d):
                if k == j or h.adjacent(k, j):
                    continue
                parents = list(h.parents)
                parents[j] = parents[j] | {k}
                fp = tuple(parents)
                if _kahn(g.d, fp) is None:
                    continue
                hk = Dag(g.d, fp)
                cands.append((j, k, hk.sort_key(), hk))
    return tuple(_dedupe_by_mec(cands))


@lru_cache(maxsize=None)
def _nb_minus(g: Dag) -> tuple[Dag, ...]:
    cands = []
    for h in mec_members(cpdag_of(g)):
        for k, j in h.edges:
            hk = remove_edge(h, k, j)
            cands.append((j, k, hk.sort_key(), hk))
    return tuple(_dedupe_by_mec(cands))


def nb_plus(g: Dag) -> list[Dag]:
    """Single-edge additions to any member of the MEC of ``g``, one DAG per class.

    Ordered by the added edge ``(j, k)`` and then by parent sets; the first
    DAG met in that order represents its class.
    """
    return list(_nb_plus(g))


def nb_minus(g: Dag) -> list[Dag]:
    """Single-edge removals from any member of the MEC of ``g``, one DAG per class."""
    return list(_nb_minus(g))


def all_dags(d: int) -> Iterator[Dag]:
    """Every DAG on ``d`` vertices (543 for ``d = 4``), in a fixed order."""
    pairs = list(itertools.combinations(range(d), 2))
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        parents = [set() for _ in range(d)]
        for (k, j), s in zip(pairs, states):
            if s == 1:
                parents[j].add(k)
            elif s == 2:
                parents[k].add(j)
        fp = tuple(frozenset(p) for p in parents)
        if _kahn(d, fp) is not None:
            yield Dag(d, fp)
