"""Undirected graphs, breadth-first orderings, and complements."""

from __future__ import annotations

from dataclasses import dataclass
from collections import deque

import numpy as np

from .errors import InputError
from .rng import stream


class Graph:
    """Immutable simple undirected graph on nodes 0..n-1.

    Edges are unordered pairs (i, j) with i < j, no self-loops, no
    duplicates. The per-node neighbor lists are derived from the edge set
    at construction time.
    """

    __slots__ = ("n", "edges", "neighbors", "_edge_set")

    def __init__(self, n: int, edges) -> None:
        if n < 0:
            raise InputError(f"node count must be >= 0, got {n}")
        canon = []
        seen = set()
        for (u, v) in edges:
            u, v = int(u), int(v)
            if u == v:
                raise InputError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise InputError(f"edge ({u}, {v}) out of range for n={n}")
            if u > v:
                u, v = v, u
            if (u, v) in seen:
                raise InputError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
            canon.append((u, v))
        canon.sort()
        self.n = n
        self.edges = tuple(canon)
        self._edge_set = frozenset(canon)
        nbrs = [[] for _ in range(n)]
        for (u, v) in canon:
            nbrs[u].append(v)
            nbrs[v].append(u)
        self.neighbors = tuple(tuple(sorted(a)) for a in nbrs)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self, i: int) -> int:
        return len(self.neighbors[i])

    def has_edge(self, u: int, v: int) -> bool:
        if u > v:
            u, v = v, u
        return (u, v) in self._edge_set

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.n == other.n and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={len(self.edges)})"


@dataclass(frozen=True)
class NodeOrdering:
    """A permutation of 0..n-1 and its inverse."""

    order: np.ndarray
    rank: np.ndarray

    def __post_init__(self):
        order = np.asarray(self.order, dtype=np.int64)
        rank = np.asarray(self.rank, dtype=np.int64)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "rank", rank)
        n = order.shape[0]
        if rank.shape[0] != n or not np.array_equal(np.sort(order), np.arange(n)):
            raise InputError("order must be a permutation with matching rank")
        if not np.array_equal(rank[order], np.arange(n)):
            raise InputError("rank is not the inverse of order")

    @classmethod
    def from_order(cls, order) -> "NodeOrdering":
        order = np.asarray(order, dtype=np.int64)
        rank = np.empty_like(order)
        rank[order] = np.arange(order.shape[0])
        return cls(order=order, rank=rank)

    def __len__(self) -> int:
        return int(self.order.shape[0])


def bfs_order(g: Graph, start: int, tiebreak_seed: int = 0) -> NodeOrdering:
    """Breadth-first ordering of g's nodes beginning at `start`.

    Within a frontier, newly discovered neighbors are appended in a
    uniformly random order drawn from a counter-based stream keyed by
    tiebreak_seed, so distinct seeds realize distinct valid BFS orderings
    while each seed is fully deterministic. On disconnected graphs the
    search restarts at the smallest-id unvisited node.
    """
    if not (0 <= start < g.n):
        raise InputError(f"start {start} out of range for n={g.n}")
    rng = stream(tiebreak_seed, "bfs")
    visited = np.zeros(g.n, dtype=bool)
    order = []

    def run(root: int) -> None:
        visited[root] = True
        queue = deque([root])
        while queue:
            u = queue.popleft()
            order.append(u)
            fresh = [v for v in g.neighbors[u] if not visited[v]]
            if len(fresh) > 1:
                rng.shuffle(fresh)
            for v in fresh:
                visited[v] = True
                queue.append(v)

    run(start)
    while len(order) < g.n:
        root = int(np.flatnonzero(~visited)[0])
        run(root)
    return NodeOrdering.from_order(order)


def random_bfs_order(g: Graph, seed: int, restrict_start_to: int | None = None) -> NodeOrdering:
    """BFS ordering with a seeded uniform start node.

    restrict_start_to limits the start choice to nodes < restrict_start_to
    (used so appended padding nodes are never chosen as the root).
    """
    hi = g.n if restrict_start_to is None else restrict_start_to
    if hi <= 0:
        raise InputError("graph has no eligible start node")
    start = int(stream(seed, "bfs_start").integers(hi))
    return bfs_order(g, start, tiebreak_seed=seed)


def complement(g: Graph) -> Graph:
    """Graph on the same nodes whose edges are exactly the non-edges of g."""
    edges = [
        (i, j)
        for i in range(g.n)
        for j in range(i + 1, g.n)
        if not g.has_edge(i, j)
    ]
    return Graph(g.n, edges)


def bfs_distances(g: Graph, start: int) -> np.ndarray:
    """Hop distances from start; unreachable nodes get -1. Test helper."""
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[start] = 0
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in g.neighbors[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist
