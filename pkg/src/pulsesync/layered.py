"""Composite clock synchronization on arbitrary connected graphs.

Three layers run side by side on synchronous beats:

1. a randomized distance-2 coloring that gives every node an identifier
   unique within its 2-ball,
2. a spanning tree whose parent pointers name the parent's color,
3. the adaptive 4-coupling modulo M, exchanging pulses only along tree edges.

Layers interact only through read access: the tree reads colors, the
automaton reads colors and parent pointers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .continuous import Semantics, _coerce
from .discrete import BeatSchedule, DiscreteNodeState, DiscreteSystem, check_modulus, random_discrete_states
from .graphs import Graph, GraphError


# --------------------------------------------------------------------------
# distance-2 coloring


@dataclass
class ColoringState:
    """Colors ``R`` and, per node, counts of each color among its neighbors (capped at 2)."""

    R: np.ndarray
    NR: np.ndarray
    delta: int

    @property
    def palette(self) -> int:
        return self.delta * self.delta + 1

    def copy(self) -> "ColoringState":
        return ColoringState(self.R.copy(), self.NR.copy(), self.delta)


def neighbor_color_counts(g: Graph, R: np.ndarray, palette: int) -> np.ndarray:
    counts = np.zeros((g.n, palette), dtype=np.int64)
    if g.edge_count:
        e = g.edge_array
        np.add.at(counts, (e[:, 0], R[e[:, 1]]), 1)
        np.add.at(counts, (e[:, 1], R[e[:, 0]]), 1)
    return np.minimum(counts, 2)


def random_coloring_state(g: Graph, delta: int | None = None, seed=None) -> ColoringState:
    """Arbitrary colors and arbitrary (stale) neighbor-color tables."""
    delta = g.max_degree if delta is None else delta
    K = delta * delta + 1
    rng = np.random.default_rng(seed)
    return ColoringState(rng.integers(0, K, g.n), rng.integers(0, 3, (g.n, K)), delta)


def _used_nearby(g: Graph, st: ColoringState, verbatim: bool) -> tuple[np.ndarray, np.ndarray]:
    """Colors seen within distance two (excluding the node itself) and a conflict flag per node."""
    n, K = g.n, st.palette
    present = st.NR > 0
    union = np.zeros((n, K), dtype=bool)
    over = np.zeros((n, K), dtype=bool)
    indptr, indices = g.csr
    rows = np.repeat(np.arange(n), np.diff(indptr))
    if indices.size:
        np.logical_or.at(union, rows, present[indices])
        np.logical_or.at(over, rows, st.NR[indices] >= 2)
    if verbatim:
        return union, np.zeros(n, dtype=bool)
    own = np.zeros((n, K), dtype=bool)
    own[np.arange(n), st.R] = True
    # a neighbor counting our color once is only seeing us
    used = present | (union & ~own) | (over & own)
    conflict = used[np.arange(n), st.R]
    return used, conflict


def coloring_beat(g: Graph, st: ColoringState, rng: np.random.Generator, verbatim: bool = False) -> ColoringState:
    """One synchronous beat of the randomized distance-2 coloring.

    A node takes the largest color unused within distance two, with
    probability 1/2, when that color beats its own.  Unless ``verbatim``, a
    node that detects a clash (a neighbor sees its color twice, or a
    neighbor has its color) also moves; without this two clashing nodes
    holding the top color never move.
    """
    used, conflict = _used_nearby(g, st, verbatim)
    K = st.palette
    free = ~used
    cand = K - 1 - np.argmax(free[:, ::-1], axis=1)
    has_free = free.any(axis=1)
    want = has_free & ((st.R < cand) | conflict)
    coin = rng.integers(0, 2, g.n).astype(bool)
    R = np.where(want & coin, cand, st.R)
    return ColoringState(R, neighbor_color_counts(g, R, K), st.delta)


def is_distance2_coloring(g: Graph, R: np.ndarray) -> bool:
    R = np.asarray(R)
    for v in range(g.n):
        seen = {}
        for u in g.neighbors(v):
            if R[u] == R[v]:
                return False
            if R[u] in seen:
                return False
            seen[R[u]] = u
    return True


def coloring_is_stable(g: Graph, st: ColoringState, verbatim: bool = False) -> bool:
    """No node can move again: tables are current and nobody wants to move."""
    if not np.array_equal(st.NR, neighbor_color_counts(g, st.R, st.palette)):
        return False
    used, conflict = _used_nearby(g, st, verbatim)
    free = ~used
    K = st.palette
    cand = K - 1 - np.argmax(free[:, ::-1], axis=1)
    want = free.any(axis=1) & ((st.R < cand) | conflict)
    return not want.any()


def run_coloring(g: Graph, delta: int | None = None, seed=None, max_beats: int = 100_000,
                 verbatim: bool = False, initial: ColoringState | None = None):
    """Run until stable; returns ``(state, beats)`` with beats None on timeout."""
    rng = np.random.default_rng(seed)
    st = initial if initial is not None else random_coloring_state(g, delta, rng)
    for b in range(max_beats + 1):
        if coloring_is_stable(g, st, verbatim):
            return st, b
        if b < max_beats:
            st = coloring_beat(g, st, rng, verbatim)
    return st, None


# --------------------------------------------------------------------------
# spanning tree layer


class SpanningTreeLayer(Protocol):
    """Anything that turns stable local identifiers into a spanning tree, one beat at a time."""

    def beat(self, g: Graph, colors: np.ndarray) -> None: ...

    def parent_colors(self) -> np.ndarray: ...

    def is_stable(self, g: Graph, colors: np.ndarray) -> bool: ...


@dataclass
class MaxKeyTree:
    """Root election by the largest (token, color) key plus BFS parent adoption.

    Each node keeps the best key it has heard of, its distance to that key's
    owner and its parent's color (-1 marks a root).  Keys whose distance
    reaches ``dist_bound`` are dropped, which flushes keys that belong to no
    node.  Tokens are fixed random integers drawn per node.
    """

    token: np.ndarray
    key_token: np.ndarray
    key_color: np.ndarray
    dist: np.ndarray
    parent: np.ndarray
    dist_bound: int

    @classmethod
    def random(cls, g: Graph, palette: int, seed=None, dist_bound: int | None = None) -> "MaxKeyTree":
        rng = np.random.default_rng(seed)
        n = g.n
        bound = dist_bound or max(n, 1)
        tok = rng.integers(0, 2**62, n)
        return cls(tok, rng.integers(0, 2**62, n), rng.integers(0, palette, n),
                   rng.integers(0, bound, n), rng.integers(-1, palette, n), bound)

    def _step(self, g: Graph, colors: np.ndarray):
        n = g.n
        kt, kc, dist, parent = self.token.copy(), colors.copy(), np.zeros(n, np.int64), np.full(n, -1)
        for v in range(n):
            best = (int(self.token[v]), int(colors[v]), 0, -1)
            for u in g.neighbors(v):
                d = int(self.dist[u]) + 1
                if d >= self.dist_bound:
                    continue
                cand = (int(self.key_token[u]), int(self.key_color[u]), d, int(colors[u]))
                # larger key wins, then shorter distance, then smaller parent color
                if (cand[0], cand[1], -cand[2], -cand[3]) > (best[0], best[1], -best[2], -best[3]) \
                        and (cand[0], cand[1]) > (int(self.token[v]), int(colors[v])):
                    best = cand
            kt[v], kc[v], dist[v], parent[v] = best
        return kt, kc, dist, parent

    def beat(self, g: Graph, colors: np.ndarray) -> None:
        self.key_token, self.key_color, self.dist, self.parent = self._step(g, colors)

    def parent_colors(self) -> np.ndarray:
        return self.parent

    def is_stable(self, g: Graph, colors: np.ndarray) -> bool:
        kt, kc, dist, parent = self._step(g, colors)
        return (np.array_equal(kt, self.key_token) and np.array_equal(kc, self.key_color)
                and np.array_equal(dist, self.dist) and np.array_equal(parent, self.parent))


def overlay_edges(g: Graph, colors: np.ndarray, parent: np.ndarray) -> list[tuple[int, int]]:
    """Edges ``(u, v)`` of g where u's parent pointer names v's color."""
    out = set()
    for u in range(g.n):
        if parent[u] < 0:
            continue
        for v in g.neighbors(u):
            if colors[v] == parent[u]:
                out.add((min(u, v), max(u, v)))
    return sorted(out)


def overlay_graph(g: Graph, colors: np.ndarray, parent: np.ndarray) -> Graph:
    return Graph(g.n, overlay_edges(g, colors, parent))


def overlay_mask(g: Graph, colors: np.ndarray, parent: np.ndarray) -> np.ndarray:
    """CSR mask of entries v -> w that carry pulses: one endpoint's parent is the other."""
    indptr, indices = g.csr
    rows = np.repeat(np.arange(g.n), np.diff(indptr))
    return (parent[rows] == colors[indices]) | (parent[indices] == colors[rows])


# --------------------------------------------------------------------------
# composite run


@dataclass
class LayeredReport:
    coloring_beats: int | None
    tree_beats: int | None
    a4cm_beats: int | None
    overlay_diameter: int | None
    final_offset: int
    beats_run: int
    offset_after: int | None = None
    colors_used: int = 0
    trace: list[dict] = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        return {
            "coloring_beats": self.coloring_beats,
            "tree_beats": self.tree_beats,
            "a4cm_beats": self.a4cm_beats,
            "overlay_diameter": self.overlay_diameter,
            "final_offset": self.final_offset,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.trace)

    @property
    def converged(self) -> bool:
        return None not in (self.coloring_beats, self.tree_beats, self.a4cm_beats)


def composite_run(g: Graph, M: int = 64, seed=None, horizon: int = 200_000,
                  semantics=Semantics.VERBAL, delta: int | None = None,
                  schedule: BeatSchedule | None = None, settle: int | None = None,
                  tree: SpanningTreeLayer | None = None,
                  initial_states: list[DiscreteNodeState] | None = None,
                  record_trace: bool = False, backend: str | None = None) -> LayeredReport:
    """Run coloring, spanning tree and automaton together from arbitrary states.

    Lower layers are stepped beat by beat until both are stable; the
    automaton then keeps running on the frozen overlay until it has gone
    ``settle`` rounds without a rested pull.  ``offset_after`` is the largest
    overlay offset seen from ``a4cm_beats + 3M + 1`` to the end.
    """
    if not g.is_connected:
        raise GraphError("composite run needs a connected graph")
    M = check_modulus(M)
    semantics = _coerce(semantics, Semantics)
    settle = 8 * M if settle is None else settle
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**63, 4)
    col_rng = np.random.default_rng(seeds[0])
    col = random_coloring_state(g, delta, seeds[1])
    tree = tree if tree is not None else MaxKeyTree.random(g, col.palette, seeds[2])
    states = initial_states or random_discrete_states(g, M, seeds[3])
    auto = DiscreteSystem(g, M, states, schedule, semantics, backend=backend)
    trace: list[dict] = []
    coloring_beats = tree_beats = None
    offsets = []
    beat = 0
    col_stable = tree_stable = False
    while beat < horizon and not (col_stable and tree_stable):
        # all three layers read the previous beat's state of the layers below
        colors = col.R.copy()
        parent = tree.parent_colors().copy()
        auto.active = overlay_mask(g, colors, parent)
        off_end, *_ = auto.run(1, track_boundaries=False)
        offsets.append(int(off_end[0]))
        if not col_stable:
            col = coloring_beat(g, col, col_rng)
        tree.beat(g, colors)
        beat += 1
        col_stable = coloring_is_stable(g, col)
        if col_stable and coloring_beats is None:
            coloring_beats = beat
        tree_stable = col_stable and tree.is_stable(g, col.R)
        if tree_stable:
            ov = overlay_graph(g, col.R, tree.parent_colors())
            if ov.is_tree and ov.n == g.n:
                tree_beats = beat
            else:
                tree_stable = False
        if record_trace:
            trace.append({"beat": beat, "layer": "coloring", "stable": bool(col_stable)})
            trace.append({"beat": beat, "layer": "tree", "stable": bool(tree_stable)})
            trace.append({"beat": beat, "layer": "a4cm", "offset": offsets[-1]})
    overlay_d = None
    a4cm_beats = None
    offset_after = None
    if col_stable and tree_stable:
        ov = overlay_graph(g, col.R, tree.parent_colors())
        overlay_d = ov.diameter
        auto.active = overlay_mask(g, col.R, tree.parent_colors())
        # violations before the overlay froze do not count
        auto.last_violation = max(auto.last_violation, beat - 1)
        off_end, *_ = auto.run(max(horizon - beat, 0), settle=settle, track_boundaries=None)
        offsets.extend(int(x) for x in off_end)
        beat = auto.round
        if auto.last_violation < beat - 1 and beat - (auto.last_violation + 1) >= settle:
            a4cm_beats = auto.last_violation + 1
            lim = a4cm_beats + 3 * M + 1
            tail = offsets[lim:]
            offset_after = max(tail) if tail else None
        if record_trace:
            trace.append({"beat": beat, "layer": "a4cm", "offset": offsets[-1] if offsets else 0})
    return LayeredReport(coloring_beats, tree_beats, a4cm_beats, overlay_d,
                         offsets[-1] if offsets else 0, beat, offset_after,
                         int(np.unique(col.R).size), trace)
