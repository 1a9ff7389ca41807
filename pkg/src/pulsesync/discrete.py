"""Beat-driven distributed system running the adaptive 4-coupling modulo M.

Each node is a finite automaton with state (phi, beta, mu1, mu2, mu3, sigma)
plus a one-bit pulse flag.  Local clocks beat at ``t_v + k * epsilon``;
pulses are delivered with zero delay and read at the receiver's next beat.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import _kernels_discrete as KD
from ._accel import resolve_backend
from .continuous import Semantics, _coerce
from .graphs import Graph
from .phase import RatLike, as_rat


def check_modulus(M: int) -> int:
    if not isinstance(M, (int, np.integer)) or M < 4 or M % 4:
        raise ValueError(f"M must be a positive multiple of 4, got {M!r}")
    return int(M)


@dataclass(frozen=True)
class DiscreteNodeState:
    phi: int
    beta: int = 0
    mu1: int = 3
    mu2: int = 0
    mu3: int = 0
    sigma: int = 0
    pulse_flag: int = 0

    def validate(self, M: int) -> None:
        if not (0 <= self.phi < M and 0 <= self.beta < M):
            raise ValueError(f"phi and beta must lie in Z_{M}")
        if self.mu1 not in (1, 3) or self.mu2 not in (0, 1) or not 0 <= self.mu3 <= 3:
            raise ValueError(f"invalid memory {self.mu1, self.mu2, self.mu3}")
        if self.sigma not in (0, 1, 2) or self.pulse_flag not in (0, 1):
            raise ValueError("invalid sigma or pulse flag")

    @staticmethod
    def state_bits(M: int) -> int:
        """Bits needed to store one node: two Z_M counters, the memory, sigma and the flag."""
        zm = (M - 1).bit_length()
        return 2 * zm + 1 + 1 + 2 + 2 + 1


def a4cm_beat(state: DiscreteNodeState, M: int, semantics=Semantics.PSEUDOCODE,
              adaptive: bool = True) -> tuple[DiscreteNodeState, bool]:
    """One beat of a single node; returns the new state and whether it emits a pulse.

    This is the readable reference for the compiled round kernels.
    """
    M = check_modulus(M)
    verbal = _coerce(semantics, Semantics) is Semantics.VERBAL
    Q, H = M // 4, M // 2
    phi, beta, mu1, mu2, mu3, sigma, flag = (state.phi, state.beta, state.mu1, state.mu2,
                                             state.mu3, state.sigma, state.pulse_flag)
    old_mu2 = mu2
    if adaptive:
        mu2 = 0 if (mu2 == 0 and beta < Q) else 1
    if flag == 1 and 0 < phi <= H:
        if not adaptive or sigma == 0:
            phi = phi - Q if phi > Q else 0
        if adaptive:
            pre_mu3 = mu3
            if sigma == 0 and mu1 == pre_mu3:
                sigma = 1
            if verbal:
                mu3 = int(beta == Q) if old_mu2 == 0 else pre_mu3 + (pre_mu3 != 3)
            else:
                inc = pre_mu3 + int(pre_mu3 != 3 and mu2 == 1)
                mu3 = inc if beta == M - 1 else 0
    emitted = phi == M - 1
    if emitted:
        if adaptive:
            mu1, mu2, mu3 = (1 if sigma == 2 else 3), 0, 0
            sigma = (sigma + (sigma != 0)) % 3
        beta = 0
    else:
        if adaptive and verbal and beta == M - 1:
            mu2, mu3 = 1, 0
        beta = (beta + 1) % M
    phi = (phi + 1) % M
    return DiscreteNodeState(phi, beta, mu1, mu2, mu3, sigma, 0), emitted


@dataclass(frozen=True)
class BeatSchedule:
    """Local clock offsets ``t_v`` in ``[0, epsilon)``."""

    epsilon: Fraction
    offsets: tuple[Fraction, ...]

    def __post_init__(self):
        eps = as_rat(self.epsilon)
        object.__setattr__(self, "epsilon", eps)
        offs = tuple(as_rat(t) for t in self.offsets)
        if eps <= 0 or any(not 0 <= t < eps for t in offs):
            raise ValueError("offsets must lie in [0, epsilon)")
        object.__setattr__(self, "offsets", offs)

    @classmethod
    def synchronous(cls, n: int, epsilon: RatLike = Fraction(1, 64)) -> "BeatSchedule":
        return cls(as_rat(epsilon), (Fraction(0),) * n)

    @classmethod
    def random_async(cls, n: int, epsilon: RatLike = Fraction(1, 64), seed=None,
                     resolution: int = 1 << 16) -> "BeatSchedule":
        eps = as_rat(epsilon)
        rng = np.random.default_rng(seed)
        ks = rng.integers(0, resolution, size=n)
        return cls(eps, tuple(eps * Fraction(int(k), resolution) for k in ks))

    @property
    def is_synchronous(self) -> bool:
        return len(set(self.offsets)) <= 1

    def groups(self) -> tuple[np.ndarray, np.ndarray]:
        """Node order and group boundaries: ascending offset, ties atomic, ids ascending."""
        n = len(self.offsets)
        keys = sorted(range(n), key=lambda v: (self.offsets[v], v))
        order = np.array(keys, dtype=np.int64)
        starts = [0]
        for i in range(1, n):
            if self.offsets[keys[i]] != self.offsets[keys[i - 1]]:
                starts.append(i)
        starts.append(n)
        return order, np.array(starts, dtype=np.int64)

    def beat_time(self, v: int, k: int) -> Fraction:
        return self.offsets[v] + k * self.epsilon


def offset(phi: Sequence[int], g: Graph, M: int, circular: bool = True) -> int:
    """Largest phase difference across an edge, circular ``min(r, M - r)`` by default."""
    if g.edge_count == 0:
        return 0
    e = g.edge_array
    p = np.asarray(phi, dtype=np.int64)
    r = (p[e[:, 0]] - p[e[:, 1]]) % M
    if circular:
        return int(np.minimum(r, M - r).max())
    r2 = (p[e[:, 1]] - p[e[:, 0]]) % M
    return int(np.maximum(r, r2).max())


def random_discrete_states(g: Graph, M: int, seed=None) -> list[DiscreteNodeState]:
    """Uniform arbitrary automaton states (pulse flags included)."""
    M = check_modulus(M)
    rng = np.random.default_rng(seed)
    n = g.n
    cols = (rng.integers(0, M, n), rng.integers(0, M, n), rng.choice([1, 3], n),
            rng.integers(0, 2, n), rng.integers(0, 4, n), rng.integers(0, 3, n), rng.integers(0, 2, n))
    return [DiscreteNodeState(*(int(c[v]) for c in cols)) for v in range(n)]


def standard_discrete_states(phases: Iterable[int]) -> list[DiscreteNodeState]:
    return [DiscreteNodeState(int(p)) for p in phases]


@dataclass
class DiscreteTrace:
    """Per-round record of a run.

    ``offset_end[i]`` is the offset after round ``start + i``; ``offset_max``
    is the largest offset seen at any group boundary in that round.
    ``violations`` counts rested pulls, the only beats where a phase does
    not advance by exactly one.
    """

    graph: Graph
    M: int
    schedule: BeatSchedule
    semantics: Semantics
    adaptive: bool
    rounds: int
    offset_end: np.ndarray
    offset_max: np.ndarray
    violations: np.ndarray
    blinks: np.ndarray
    final: list[DiscreteNodeState]
    last_violation: int
    phi: np.ndarray | None = None
    sigma: np.ndarray | None = None
    emitted: np.ndarray | None = None

    @property
    def free_running_from(self) -> int | None:
        return detect_free_running(self)

    def blink_beats(self, v: int) -> np.ndarray:
        if self.emitted is None:
            raise ValueError("run with record=True to keep per-node emissions")
        return np.flatnonzero(self.emitted[:, v])

    def to_jsonl(self, fh) -> int:
        """One line per node and beat: ``{beat, node, phi, sigma, emitted}``."""
        if self.phi is None:
            raise ValueError("run with record=True to export a trace")
        k = 0
        for b in range(self.phi.shape[0]):
            for v in range(self.graph.n):
                fh.write(json.dumps({"beat": b, "node": v, "phi": int(self.phi[b, v]),
                                     "sigma": int(self.sigma[b, v]),
                                     "emitted": bool(self.emitted[b, v])}) + "\n")
                k += 1
        return k

    def offset_csv(self) -> str:
        lines = ["beat,offset,offset_max"]
        lines += [f"{i},{int(a)},{int(b)}" for i, (a, b) in enumerate(zip(self.offset_end, self.offset_max))]
        return "\n".join(lines) + "\n"


def detect_free_running(trace: DiscreteTrace, window: int | None = None) -> int | None:
    """First round from which every beat of every node advances phi by exactly one.

    Only meaningful up to the end of the run, so at least ``window`` clean
    rounds (default M, one full cycle) must follow; otherwise returns None.
    """
    if trace.rounds == 0:
        return 0
    window = trace.M if window is None else window
    t0 = trace.last_violation + 1
    if trace.rounds - t0 < min(window, trace.rounds):
        return None
    return t0


class DiscreteSystem:
    """Arrays and schedule of one run; :meth:`run` may be called repeatedly."""

    def __init__(self, g: Graph, M: int, states: Sequence[DiscreteNodeState],
                 schedule: BeatSchedule | None = None, semantics=Semantics.PSEUDOCODE,
                 adaptive: bool = True, backend: str | None = None):
        self.graph = g
        self.M = check_modulus(M)
        if len(states) != g.n:
            raise ValueError(f"expected {g.n} states, got {len(states)}")
        for s in states:
            s.validate(self.M)
        self.schedule = schedule or BeatSchedule.synchronous(g.n)
        if len(self.schedule.offsets) != g.n:
            raise ValueError("schedule size does not match the graph")
        self.semantics = _coerce(semantics, Semantics)
        self.adaptive = adaptive
        self.backend = resolve_backend(backend)
        cols = np.array([[s.phi, s.beta, s.mu1, s.mu2, s.mu3, s.sigma, s.pulse_flag] for s in states],
                        dtype=np.int64).reshape(g.n, 7)
        (self.phi, self.beta, self.mu1, self.mu2, self.mu3,
         self.sigma, self.flag) = (np.ascontiguousarray(cols[:, c]) for c in range(7))
        self.indptr, self.indices = g.csr
        self.active = np.ones(self.indices.shape[0], dtype=np.bool_)
        self.order, self.gstart = self.schedule.groups()
        self.round = 0
        self.last_violation = -1

    def states(self) -> list[DiscreteNodeState]:
        return [DiscreteNodeState(int(self.phi[v]), int(self.beta[v]), int(self.mu1[v]), int(self.mu2[v]),
                                  int(self.mu3[v]), int(self.sigma[v]), int(self.flag[v]))
                for v in range(self.graph.n)]

    def run(self, rounds: int, settle: int = 0, record: bool = False,
            track_boundaries: bool | None = None):
        """Advance up to ``rounds`` rounds; returns per-round arrays of the rounds run."""
        n = self.graph.n
        if track_boundaries is None:
            track_boundaries = not self.schedule.is_synchronous
        off_end = np.zeros(rounds, dtype=np.int64)
        off_max = np.zeros(rounds, dtype=np.int64)
        viol = np.zeros(rounds, dtype=np.int64)
        blinks = np.zeros(rounds, dtype=np.int64)
        shape = (rounds, n) if record else (0, n)
        rec_phi = np.zeros(shape, dtype=np.int64)
        rec_sigma = np.zeros(shape, dtype=np.int64)
        rec_emit = np.zeros(shape, dtype=np.int8)
        kernel = KD.run_numba if self.backend == "numba" else KD.run_numpy
        r0 = self.round
        r, self.last_violation = kernel(
            self.indptr, self.indices, self.active, self.order, self.gstart, self.M, self.adaptive,
            self.semantics is Semantics.VERBAL, self.phi, self.beta, self.mu1, self.mu2, self.mu3,
            self.sigma, self.flag, r0, r0 + rounds, settle, self.last_violation,
            off_end, off_max, viol, blinks, track_boundaries, rec_phi, rec_sigma, rec_emit)
        k = r - r0
        self.round = r
        if record:
            return off_end[:k], off_max[:k], viol[:k], blinks[:k], rec_phi[:k], rec_sigma[:k], rec_emit[:k]
        return off_end[:k], off_max[:k], viol[:k], blinks[:k], None, None, None


def run_system(g: Graph, M: int, initial: Sequence[DiscreteNodeState],
               horizon_beats: int, schedule: BeatSchedule | None = None,
               semantics=Semantics.PSEUDOCODE, adaptive: bool = True, settle: int = 0,
               record: bool = False, backend: str | None = None,
               track_boundaries: bool | None = None) -> DiscreteTrace:
    """Simulate ``horizon_beats`` rounds (fewer if ``settle`` triggers an early stop)."""
    sys_ = DiscreteSystem(g, M, initial, schedule, semantics, adaptive, backend)
    off_end, off_max, viol, blinks, rp, rs, re = sys_.run(horizon_beats, settle, record, track_boundaries)
    return DiscreteTrace(
        graph=g, M=sys_.M, schedule=sys_.schedule, semantics=sys_.semantics, adaptive=adaptive,
        rounds=sys_.round, offset_end=off_end, offset_max=off_max, violations=viol, blinks=blinks,
        final=sys_.states(), last_violation=sys_.last_violation, phi=rp, sigma=rs,
        emitted=None if re is None else re.astype(bool),
    )


def run_system_reference(g: Graph, M: int, initial: Sequence[DiscreteNodeState], horizon_beats: int,
                         schedule: BeatSchedule | None = None, semantics=Semantics.PSEUDOCODE,
                         adaptive: bool = True) -> tuple[list[list[DiscreteNodeState]], list[list[bool]]]:
    """Event-queue simulation built from :func:`a4cm_beat`, one beat at a time.

    Beats are ordered by ``(k, t_v, v)`` in real time.  Pulses are queued per
    receiver and drained at the receiver's next beat.  Returns the states at
    the start of each round and the per-round emissions.
    """
    schedule = schedule or BeatSchedule.synchronous(g.n)
    states = list(initial)
    inbox = [[] for _ in range(g.n)]
    for v, s in enumerate(states):
        if s.pulse_flag:
            inbox[v].append(-1)
    order = sorted(range(g.n), key=lambda v: (schedule.offsets[v], v))
    history, emits = [], []
    for _ in range(horizon_beats):
        history.append([replace(s, pulse_flag=int(bool(inbox[v]))) for v, s in enumerate(states)])
        row = [False] * g.n
        i = 0
        while i < len(order):
            j = i
            while j < len(order) and schedule.offsets[order[j]] == schedule.offsets[order[i]]:
                j += 1
            group = order[i:j]
            fired = []
            for v in group:
                s = replace(states[v], pulse_flag=int(bool(inbox[v])))
                inbox[v].clear()
                states[v], e = a4cm_beat(s, M, semantics, adaptive)
                if e:
                    fired.append(v)
                    row[v] = True
            for v in fired:
                for u in g.neighbors(v):
                    inbox[u].append(v)
            i = j
        emits.append(row)
    return history, emits


def state_dicts(states: Sequence[DiscreteNodeState]) -> list[dict]:
    return [asdict(s) for s in states]
