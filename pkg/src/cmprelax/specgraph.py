"""Partial matrices, their pattern graphs, chordality and block-clique tests."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError


@dataclass(frozen=True)
class PartialMatrix:
    """Symmetric matrix with a symmetric mask of known entries.

    Unspecified entries of ``values`` are stored as 0 and never read.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        V = np.array(self.values, dtype=float)
        M = np.array(self.mask, dtype=bool)
        if V.ndim != 2 or V.shape[0] != V.shape[1] or M.shape != V.shape:
            raise DimensionError(f"values {V.shape} and mask {M.shape} must be equal and square")
        if not np.array_equal(M, M.T):
            raise InputError("mask of known entries is not symmetric")
        np.fill_diagonal(M, True)
        if not np.all(np.isfinite(V[M])):
            raise InputError("specified entries must be finite")
        V = np.where(M, V, 0.0)
        if not np.allclose(V, V.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(V).max(initial=0.0))):
            raise InputError("specified entries are not symmetric")
        object.__setattr__(self, "values", 0.5 * (V + V.T))
        object.__setattr__(self, "mask", M)

    @property
    def order(self) -> int:
        return self.values.shape[0]


class SpecGraph:
    """Undirected simple graph on vertices 0..n-1."""

    def __init__(self, n: int, edges=()):
        self.n = int(n)
        self.adj = [set() for _ in range(self.n)]
        for u, v in edges:
            self.add_edge(u, v)

    def add_edge(self, u: int, v: int):
        if u == v:
            return
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise InputError(f"edge ({u}, {v}) outside vertex range 0..{self.n - 1}")
        self.adj[u].add(v)
        self.adj[v].add(u)

    def edges(self) -> set:
        return {(u, v) for u in range(self.n) for v in self.adj[u] if u < v}

    def is_complete_on(self, verts) -> bool:
        verts = list(verts)
        return all(v in self.adj[u] for i, u in enumerate(verts) for v in verts[i + 1:])

    def __eq__(self, other):
        return isinstance(other, SpecGraph) and self.n == other.n and self.edges() == other.edges()

    def __repr__(self):
        return f"SpecGraph(n={self.n}, edges={len(self.edges())})"


def spec_graph(P: PartialMatrix) -> SpecGraph:
    iu, ju = np.nonzero(np.triu(P.mask, 1))
    return SpecGraph(P.order, zip(iu.tolist(), ju.tolist()))


def arrowhead_groups(n1: int, n2: int, S: int):
    g0 = list(range(n1))
    return g0, [list(range(n1 + i * n2, n1 + (i + 1) * n2)) for i in range(S)]


def arrowhead_spec_graph(n1: int, n2: int, S: int) -> SpecGraph:
    """g0 (size n1) is a clique joined to everything; the S groups of size n2
    are cliques with no edges between them."""
    if min(n1, n2, S) < 0:
        raise InputError("group sizes must be nonnegative")
    g0, groups = arrowhead_groups(n1, n2, S)
    G = SpecGraph(n1 + S * n2)
    for u in g0:
        for v in range(G.n):
            G.add_edge(u, v)
    for grp in groups:
        for a in grp:
            for b in grp:
                G.add_edge(a, b)
    return G


def mcs_order(G: SpecGraph) -> list:
    """Maximum cardinality search; returns vertices in visit order.

    Ties go to the smallest vertex index, so the order is deterministic.
    """
    weight = [0] * G.n
    seen = [False] * G.n
    order = []
    for _ in range(G.n):
        v = max((u for u in range(G.n) if not seen[u]), key=lambda u: (weight[u], -u))
        seen[v] = True
        order.append(v)
        for u in G.adj[v]:
            if not seen[u]:
                weight[u] += 1
    return order


def _shortest_path_avoiding(G: SpecGraph, a: int, b: int, banned: set):
    prev = {a: None}
    q = deque([a])
    while q:
        u = q.popleft()
        if u == b:
            path = []
            while u is not None:
                path.append(u)
                u = prev[u]
            return path[::-1]
        for w in G.adj[u]:
            if w not in prev and w not in banned:
                prev[w] = u
                q.append(w)
    return None


def _chordless_cycle(G: SpecGraph):
    # A graph is chordal iff no vertex v has two non-adjacent neighbours a, b
    # joined by a path avoiding the rest of N[v]; the shortest such path
    # closes a chordless cycle through v.
    best = None
    for v in range(G.n):
        nbrs = sorted(G.adj[v])
        closed = set(nbrs) | {v}
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                if b in G.adj[a]:
                    continue
                path = _shortest_path_avoiding(G, a, b, closed - {a, b})
                if path is not None and (best is None or len(path) + 1 < len(best)):
                    best = [v] + path
    return best


def is_chordal(G: SpecGraph):
    """Return ``(True, elimination_order)`` or ``(False, chordless_cycle)``.

    The elimination order is the reverse MCS order; it is verified to be a
    perfect elimination ordering by checking that each vertex's later
    neighbours form a clique.
    """
    visit = mcs_order(G)
    peo = visit[::-1]
    pos = {v: i for i, v in enumerate(peo)}
    ok = True
    for v in peo:
        later = [u for u in G.adj[v] if pos[u] > pos[v]]
        if not later:
            continue
        # only the first later neighbour needs to be adjacent to the rest
        parent = min(later, key=pos.__getitem__)
        if any(u != parent and u not in G.adj[parent] for u in later):
            ok = False
            break
    if ok:
        return True, peo
    return False, _chordless_cycle(G)


def biconnected_components(G: SpecGraph) -> list:
    """Blocks of G as vertex sets (isolated vertices form singleton blocks)."""
    index = [-1] * G.n
    low = [0] * G.n
    counter = 0
    blocks = []
    for root in range(G.n):
        if index[root] != -1:
            continue
        if not G.adj[root]:
            index[root] = counter
            counter += 1
            blocks.append({root})
            continue
        index[root] = low[root] = counter
        counter += 1
        edge_stack = []
        stack = [(root, -1, iter(sorted(G.adj[root])))]
        while stack:
            v, parent, it = stack[-1]
            advanced = False
            for w in it:
                if index[w] == -1:
                    edge_stack.append((v, w))
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append((w, v, iter(sorted(G.adj[w]))))
                    advanced = True
                    break
                if w != parent and index[w] < index[v]:
                    edge_stack.append((v, w))
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            stack.pop()
            if parent != -1:
                low[parent] = min(low[parent], low[v])
                if low[v] >= index[parent]:
                    comp = set()
                    while True:
                        e = edge_stack.pop()
                        comp.update(e)
                        if e == (parent, v):
                            break
                    blocks.append(comp)
    return blocks


def is_block_clique(G: SpecGraph) -> bool:
    """Every biconnected component induces a complete subgraph."""
    return all(G.is_complete_on(b) for b in biconnected_components(G))
