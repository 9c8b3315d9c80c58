"""Immutable simple undirected graphs with bit-row adjacency.

A ``Graph`` stores one int bitmask per vertex (its neighbourhood row), so
cross-edge counts and common neighbourhoods are row-ANDs plus popcounts.
Also home to the exact verifier for powers of paths and cycles.

Path-end convention used throughout: for a sequence ``(u_1, ..., u_L)``
the start k-tuple is ``(u_k, ..., u_1)`` and the end k-tuple is
``(u_{L-k+1}, ..., u_L)``.  Both list the exposed (outermost) vertex last,
so the two ends of a path behave identically under extension.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Tuple

from .bits import iter_bits


class Graph:
    """Immutable n-vertex graph; ``rows[v]`` is the neighbour bitmask of v."""

    __slots__ = ("n", "rows", "m")

    def __init__(self, n: int, rows: Sequence[int]):
        if len(rows) != n:
            raise ValueError(f"expected {n} adjacency rows, got {len(rows)}")
        self.n = n
        self.rows = tuple(rows)
        self.m = sum(r.bit_count() for r in self.rows) // 2

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    def row(self, v: int) -> int:
        return self.rows[v]

    def degree(self, v: int) -> int:
        return self.rows[v].bit_count()

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.rows[u] >> v & 1)

    def neighbors(self, v: int) -> Iterator[int]:
        return iter_bits(self.rows[v])

    def edges(self) -> Iterator[Tuple[int, int]]:
        for u in range(self.n):
            for v in iter_bits(self.rows[u] >> (u + 1) << (u + 1)):
                yield (u, v)

    def min_degree(self) -> int:
        return min((self.degree(v) for v in range(self.n)), default=0)

    def regular_degree(self) -> int:
        """Common degree of a regular graph; raises if not regular."""
        degs = {self.degree(v) for v in range(self.n)}
        if len(degs) != 1:
            raise ValueError("graph is not regular")
        return degs.pop()

    def density(self) -> float:
        if self.n < 2:
            return 0.0
        return 2.0 * self.m / (self.n * (self.n - 1))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Graph) and self.n == other.n and self.rows == other.rows
        )

    def __hash__(self) -> int:
        return hash((self.n, self.rows))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


def build_graph(n: int, edges: Iterable[Tuple[int, int]]) -> Graph:
    """Build a graph from an edge list; duplicates collapse, loops rejected."""
    rows = [0] * n
    for idx, (u, v) in enumerate(edges):
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge {idx}: vertex out of range in ({u}, {v})")
        if u == v:
            raise ValueError(f"edge {idx}: loop ({u}, {v}) not allowed")
        rows[u] |= 1 << v
        rows[v] |= 1 << u
    return Graph(n, rows)


def edges_between(g: Graph, a_mask: int, b_mask: int) -> int:
    """e(A, B): edges with one end in A and the other in B.  A, B disjoint."""
    if a_mask & b_mask:
        raise ValueError("edges_between requires disjoint vertex sets")
    return sum((g.rows[a] & b_mask).bit_count() for a in iter_bits(a_mask))


def common_neighborhood(g: Graph, t: Sequence[int], x_mask: int) -> int:
    """N_X(t_1, ..., t_s) as a mask.  An empty tuple returns X itself."""
    out = x_mask
    for v in t:
        out &= g.rows[v]
        if not out:
            break
    return out


def tuple_degree(g: Graph, t: Sequence[int], x_mask: int) -> int:
    return common_neighborhood(g, t, x_mask).bit_count()


def is_clique(g: Graph, t: Sequence[int]) -> bool:
    seen = 0
    for v in t:
        bit = 1 << v
        if seen & bit:
            return False
        if seen & ~g.rows[v]:
            return False
        seen |= bit
    return True


def verify_kpower(g: Graph, order: Sequence[int], k: int, cyclic: bool = False) -> bool:
    """True iff ``order`` spells out the k-th power of a path (or cycle).

    All vertices must be distinct, and every pair at (cyclic) sequence
    distance at most k must be adjacent in g.  Sequences shorter than k+1
    are accepted iff they span a clique.
    """
    length = len(order)
    if length == 0:
        return True
    seen = 0
    for v in order:
        if not 0 <= v < g.n:
            return False
        bit = 1 << v
        if seen & bit:
            return False
        seen |= bit
    for i, v in enumerate(order):
        top = min(length, i + k + 1)
        for j in range(i + 1, top):
            if not g.has_edge(v, order[j]):
                return False
    if cyclic:
        for i in range(length):
            for d in range(1, k + 1):
                j = (i + d) % length
                if j == i:
                    continue
                if j < i and not g.has_edge(order[i], order[j]):
                    return False
    return True


def start_tuple(order: Sequence[int], k: int) -> Tuple[int, ...]:
    """Start k-tuple: the first k vertices, reversed (outermost last)."""
    return tuple(reversed(order[:k]))


def end_tuple(order: Sequence[int], k: int) -> Tuple[int, ...]:
    """End k-tuple: the last k vertices in path order (outermost last)."""
    return tuple(order[-k:])


@dataclass(frozen=True)
class KPath:
    """Vertex sequence claiming the k-path property in some host graph."""

    order: Tuple[int, ...]
    k: int

    def __len__(self) -> int:
        return len(self.order)

    def start(self) -> Tuple[int, ...]:
        return start_tuple(self.order, self.k)

    def end(self) -> Tuple[int, ...]:
        return end_tuple(self.order, self.k)

    def vertex_mask(self) -> int:
        m = 0
        for v in self.order:
            m |= 1 << v
        return m

    def verify(self, g: Graph, cyclic: bool = False) -> bool:
        return verify_kpower(g, self.order, self.k, cyclic)
