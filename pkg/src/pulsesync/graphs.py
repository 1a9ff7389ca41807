"""Graph families used in the experiments, plus branch bookkeeping on trees."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np


class GraphError(ValueError):
    pass


class Graph:
    """Finite simple undirected graph on nodes ``0..n-1``. Immutable."""

    def __init__(self, node_count: int, edges: Iterable[tuple[int, int]] = ()):
        if node_count < 0:
            raise GraphError("node_count must be >= 0")
        self.n = int(node_count)
        adj: list[set[int]] = [set() for _ in range(self.n)]
        canon = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) out of range for {self.n} nodes")
            if u == v:
                raise GraphError(f"self-loop at {u}")
            e = (u, v) if u < v else (v, u)
            if e in canon:
                raise GraphError(f"multi-edge {e}")
            canon.add(e)
            adj[u].add(v)
            adj[v].add(u)
        self._edges = tuple(sorted(canon))
        self._adj = tuple(tuple(sorted(a)) for a in adj)

    # basic queries -------------------------------------------------------

    @property
    def node_count(self) -> int:
        return self.n

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return self._edges

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj[u]

    @cached_property
    def max_degree(self) -> int:
        return max((len(a) for a in self._adj), default=0)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` int64 arrays for the kernels."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(a) for a in self._adj])
        indices = np.fromiter((u for a in self._adj for u in a), dtype=np.int64,
                              count=int(indptr[-1]))
        return indptr, indices

    @cached_property
    def edge_array(self) -> np.ndarray:
        return np.asarray(self._edges, dtype=np.int64).reshape(-1, 2)

    def bfs(self, source: int) -> list[int]:
        dist = [-1] * self.n
        dist[source] = 0
        q = deque([source])
        while q:
            u = q.popleft()
            for w in self._adj[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    q.append(w)
        return dist

    @cached_property
    def is_connected(self) -> bool:
        return self.n <= 1 or min(self.bfs(0)) >= 0

    @cached_property
    def is_tree(self) -> bool:
        return self.is_connected and self.edge_count == max(self.n - 1, 0)

    @cached_property
    def diameter(self) -> int:
        if self.n == 0:
            return 0
        if not self.is_connected:
            raise GraphError("diameter of a disconnected graph")
        if self.is_tree:
            # double sweep is exact on trees
            d0 = self.bfs(0)
            a = int(np.argmax(d0))
            return max(self.bfs(a))
        return max(max(self.bfs(s)) for s in range(self.n))

    def validate(self) -> None:
        for v, a in enumerate(self._adj):
            if v in a:
                raise GraphError(f"self-loop at {v}")
            for u in a:
                if v not in self._adj[u]:
                    raise GraphError(f"asymmetric adjacency {v}->{u}")
        if sum(len(a) for a in self._adj) != 2 * len(self._edges):
            raise GraphError("edge count mismatch")

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.n == other.n and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((self.n, self._edges))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.edge_count})"

    # text format ----------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"nodes {self.n}"]
        lines += [f"{u} {v}" for u, v in self._edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Graph":
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        if not lines or not lines[0].startswith("nodes"):
            raise GraphError("graph file must start with 'nodes N'")
        n = int(lines[0].split()[1])
        edges = []
        for ln in lines[1:]:
            u, v = ln.split()
            edges.append((int(u), int(v)))
        return cls(n, edges)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "Graph":
        return cls.from_text(Path(path).read_text())


# generators --------------------------------------------------------------


def make_path(n: int) -> Graph:
    if n < 1:
        raise GraphError("path needs n >= 1")
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def make_cycle(n: int) -> Graph:
    if n < 3:
        raise GraphError("cycle needs n >= 3")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def make_star(k: int) -> Graph:
    """Star with center 0 and leaves 1..k."""
    if k < 1:
        raise GraphError("star needs k >= 1")
    return Graph(k + 1, [(0, i) for i in range(1, k + 1)])


def make_complete(n: int) -> Graph:
    if n < 1:
        raise GraphError("complete graph needs n >= 1")
    return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def make_torus_moore(w: int, h: int) -> Graph:
    """``w x h`` wrap-around lattice, every site joined to its 8 Moore neighbors."""
    if w < 3 or h < 3:
        raise GraphError("Moore torus needs w, h >= 3")
    edges = set()
    for x in range(w):
        for y in range(h):
            u = y * w + x
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    if dx == dy == 0:
                        continue
                    v = ((y + dy) % h) * w + (x + dx) % w
                    if u != v:
                        edges.add((min(u, v), max(u, v)))
    return Graph(w * h, edges)


def prufer_decode(seq) -> list[tuple[int, int]]:
    n = len(seq) + 2
    degree = np.ones(n, dtype=np.int64)
    for x in seq:
        degree[x] += 1
    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    edges = []
    for x in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, int(x)))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(leaves, int(x))
    u, v = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((u, v))
    return edges


def make_tree_random(n: int, max_degree: int | None = None, seed=None,
                     max_tries: int = 1_000_000) -> Graph:
    """Uniform labelled tree on ``n`` nodes, conditioned on a degree cap.

    Prufer sequences are drawn uniformly and rejected while some node would
    exceed ``max_degree``.  With cap 2 the conditional law is the uniform
    random path, which is sampled directly.
    """
    rng = np.random.default_rng(seed)
    if n < 1:
        raise GraphError("tree needs n >= 1")
    if n <= 2:
        return make_path(n)
    if max_degree is None:
        max_degree = n - 1
    if max_degree < 2:
        raise GraphError(f"no tree on {n} nodes has max degree {max_degree}")
    if max_degree == 2:
        perm = rng.permutation(n)
        return Graph(n, [(int(perm[i]), int(perm[i + 1])) for i in range(n - 1)])
    for _ in range(max_tries):
        seq = rng.integers(0, n, size=n - 2)
        if np.bincount(seq, minlength=n).max() <= max_degree - 1:
            return Graph(n, prufer_decode(seq))
    raise GraphError(f"rejection sampling exhausted for n={n}, cap={max_degree}")


def make_random_connected(n: int, max_degree: int | None = None, extra_edges: int | None = None,
                          seed=None) -> Graph:
    """Random tree (degree capped) plus up to ``extra_edges`` random chords under the cap."""
    rng = np.random.default_rng(seed)
    cap = max_degree if max_degree is not None else n - 1
    tree = make_tree_random(n, max(cap, 2) if n > 2 else cap, seed=rng)
    if extra_edges is None:
        extra_edges = int(rng.integers(0, n + 1))
    edges = set(tree.edges)
    deg = np.array([tree.degree(v) for v in range(n)])
    attempts = 0
    added = 0
    while added < extra_edges and attempts < 50 * (extra_edges + 1):
        attempts += 1
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        if u == v:
            continue
        e = (min(u, v), max(u, v))
        if e in edges or deg[u] >= cap or deg[v] >= cap:
            continue
        edges.add(e)
        deg[u] += 1
        deg[v] += 1
        added += 1
    return Graph(n, edges)


def uniform_spanning_tree(g: Graph, seed=None) -> Graph:
    """Uniform spanning tree via Wilson's loop-erased random walk."""
    if g.n == 0:
        return Graph(0)
    if not g.is_connected:
        raise GraphError("spanning tree of a disconnected graph")
    rng = np.random.default_rng(seed)
    n = g.n
    in_tree = np.zeros(n, dtype=bool)
    nxt = np.full(n, -1, dtype=np.int64)
    root = int(rng.integers(n))
    in_tree[root] = True
    adj = [np.asarray(g.neighbors(v), dtype=np.int64) for v in range(n)]
    order = rng.permutation(n)
    edges = []
    for start in order:
        u = int(start)
        # random walk recording the last exit from each vertex; this erases loops implicitly
        while not in_tree[u]:
            a = adj[u]
            nxt[u] = a[rng.integers(len(a))]
            u = int(nxt[u])
        u = int(start)
        while not in_tree[u]:
            in_tree[u] = True
            edges.append((u, int(nxt[u])))
            u = int(nxt[u])
    return Graph(n, edges)


def square_graph(g: Graph) -> Graph:
    """G^2: join every pair at distance <= 2."""
    edges = set(g.edges)
    for v in range(g.n):
        nb = g.neighbors(v)
        for i, a in enumerate(nb):
            for b in nb[i + 1:]:
                edges.add((min(a, b), max(a, b)))
    return Graph(g.n, edges)


def diameter(g: Graph) -> int:
    return g.diameter


# branches ----------------------------------------------------------------


@dataclass(frozen=True)
class BranchDescriptor:
    center: int
    root: int
    leaves: frozenset

    @property
    def k(self) -> int:
        return len(self.leaves)

    @property
    def nodes(self) -> tuple[int, ...]:
        return (self.center, *sorted(self.leaves))

    def validate(self, g: Graph) -> None:
        if not self.leaves:
            raise GraphError("branch needs at least one leaf")
        nb = set(g.neighbors(self.center))
        if nb != set(self.leaves) | {self.root}:
            raise GraphError("center neighborhood must be leaves plus root")
        for u in self.leaves:
            if g.degree(u) != 1:
                raise GraphError(f"branch leaf {u} has degree {g.degree(u)}")
        if self.root in self.leaves:
            raise GraphError("root cannot be a leaf of its own branch")


def find_branches(g: Graph) -> list[BranchDescriptor]:
    """All branches of ``g``: a center, its degree-1 neighbors, one outside root.

    A center whose neighbors are all degree-1 (a star component) yields one
    branch per choice of the leaf playing the root.
    """
    out = []
    for v in range(g.n):
        nb = g.neighbors(v)
        leaves = [u for u in nb if g.degree(u) == 1]
        others = [u for u in nb if g.degree(u) != 1]
        if len(others) == 1 and leaves:
            out.append(BranchDescriptor(v, others[0], frozenset(leaves)))
        elif not others and len(leaves) >= 2:
            for r in leaves:
                out.append(BranchDescriptor(v, r, frozenset(u for u in leaves if u != r)))
    return out


def is_terminal_branch(g: Graph, b: BranchDescriptor, branches=None) -> bool:
    """All but at most one neighbor of the root are leaves or branch centers.

    The branch's own center counts as a branch center.
    """
    if branches is None:
        branches = find_branches(g)
    centers = {br.center for br in branches}
    misses = sum(1 for u in g.neighbors(b.root) if g.degree(u) != 1 and u not in centers)
    return misses <= 1


def leaves_of(g: Graph) -> list[int]:
    return [v for v in range(g.n) if g.degree(v) == 1]
