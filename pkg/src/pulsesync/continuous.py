"""Exact event-driven simulation of the 4-coupling and the adaptive 4-coupling.

Two engines share one set of semantics:

* :class:`World` steps a configuration of :class:`JointState` objects one
  instant at a time with :class:`~fractions.Fraction` arithmetic.  It is slow
  and easy to read, and serves as the reference in tests.
* :func:`simulate` maps everything onto an integer grid and runs the compiled
  (or vectorized) kernels from :mod:`pulsesync._kernels_continuous`.

Simultaneous blinks form one atomic instant.  A node with several blinking
neighbors receives a single pulse event.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _kernels_continuous as K
from ._accel import resolve_backend
from .graphs import Graph
from .phase import HALF, QUARTER, JointState, Phase, RatLike, as_rat, format_rat, prc_f0

_MAX_TICK = 2**62


class Coupling(enum.Enum):
    FOUR = "four"
    ADAPTIVE = "adaptive"


class Semantics(enum.Enum):
    """How a pull updates the pull counter mu3 while mu2 == 1.

    ``PSEUDOCODE`` keeps the increment only when beta == 1 at the pull and
    zeroes the counter otherwise.  ``VERBAL`` treats mu3 as the number of
    pulls since beta last passed 0: a pull at the wrap instant first restarts
    the window and is then counted.
    """

    PSEUDOCODE = "pseudocode"
    VERBAL = "verbal"


class EventKind(enum.IntEnum):
    BLINK = K.BLINK
    PULSE_RECEIVED = K.RECEIVED
    PULLED = K.PULLED
    EXCITED = K.EXCITED
    BETA_QUARTER = K.BETA_QUARTER
    BETA_ONE = K.BETA_ONE
    STATE_JUMP = K.STATE_JUMP

    @property
    def label(self) -> str:
        return K.KIND_NAMES[self.value]


def _coerce(value, enum_cls):
    return value if isinstance(value, enum_cls) else enum_cls(value)


@dataclass(frozen=True)
class SimEvent:
    time: Fraction
    node: int
    kind: EventKind
    before: JointState
    after: JointState

    def to_json(self) -> dict:
        return {
            "t": format_rat(self.time),
            "node": self.node,
            "kind": self.kind.label,
            "before": self.before.as_dict(),
            "after": self.after.as_dict(),
        }


# --------------------------------------------------------------------------
# initial configurations


def initial_standard(g: Graph, phases) -> list[JointState]:
    """Standard joint configuration: beta = 0, (mu1, mu2, mu3, sigma) = (3, 0, 0, 0)."""
    if isinstance(phases, dict):
        phases = [phases[v] for v in range(g.n)]
    phases = list(phases)
    if len(phases) != g.n:
        raise ValueError(f"expected {g.n} phases, got {len(phases)}")
    return [JointState(Phase(p)) for p in phases]


def random_phases(n: int, denom: int, seed=None) -> list[Fraction]:
    rng = np.random.default_rng(seed)
    return [Fraction(int(k), denom) for k in rng.integers(0, denom, size=n)]


def random_joint_config(g: Graph, denom: int, seed=None) -> list[JointState]:
    """Uniform arbitrary joint configuration with phi and beta on the 1/denom grid."""
    if denom <= 0 or denom % 4:
        raise ValueError("denom must be a positive multiple of 4")
    rng = np.random.default_rng(seed)
    n = g.n
    phi = rng.integers(0, denom, size=n)
    beta = rng.integers(0, denom, size=n)
    mu1 = rng.choice([1, 3], size=n)
    mu2 = rng.integers(0, 2, size=n)
    mu3 = rng.integers(0, 4, size=n)
    sigma = rng.integers(0, 3, size=n)
    return [
        JointState(Phase(Fraction(int(phi[v]), denom)), Phase(Fraction(int(beta[v]), denom)),
                   int(mu1[v]), int(mu2[v]), int(mu3[v]), int(sigma[v]))
        for v in range(n)
    ]


def theorem_constant(max_degree: int) -> int:
    return 51 + 32 * (max_degree >= 4)


def default_horizon(g: Graph) -> Fraction:
    """``C * d + 5`` with the tree constant for the graph's maximum degree."""
    d = g.diameter if g.n > 1 else 0
    return Fraction(theorem_constant(g.max_degree) * d + 5)


# --------------------------------------------------------------------------
# reference engine


class World:
    """Fraction-exact reference engine stepping one instant at a time."""

    def __init__(self, g: Graph, initial: Sequence[JointState], coupling=Coupling.FOUR,
                 semantics=Semantics.PSEUDOCODE, time: RatLike = 0):
        if len(initial) != g.n:
            raise ValueError(f"expected {g.n} states, got {len(initial)}")
        self.graph = g
        self.coupling = _coerce(coupling, Coupling)
        self.semantics = _coerce(semantics, Semantics)
        self.time = as_rat(time)
        self.phi = [s.phi.value for s in initial]
        self.beta = [s.beta.value for s in initial]
        self.mu1 = [s.mu1 for s in initial]
        self.mu2 = [s.mu2 for s in initial]
        self.mu3 = [s.mu3 for s in initial]
        self.sigma = [s.sigma for s in initial]

    @property
    def adaptive(self) -> bool:
        return self.coupling is Coupling.ADAPTIVE

    def states(self) -> list[JointState]:
        return [self._state(v) for v in range(self.graph.n)]

    def _state(self, v) -> JointState:
        return JointState(Phase(self.phi[v]), Phase(self.beta[v]),
                          self.mu1[v], self.mu2[v], self.mu3[v], self.sigma[v])

    def time_to_next_event(self) -> Fraction:
        dt = min((1 - p for p in self.phi), default=Fraction(1))
        if self.adaptive:
            for b in self.beta:
                dt = min(dt, QUARTER - b if b < QUARTER else 1 - b)
        return dt

    def advance(self, dt: Fraction) -> None:
        """Flow without events; ``dt`` must not pass the next event."""
        if dt > self.time_to_next_event():
            raise ValueError("advance would skip an event")
        self.time += dt
        self.phi = [p + dt for p in self.phi]
        if self.adaptive:
            self.beta = [b + dt for b in self.beta]

    def step_to_next_event(self) -> tuple[Fraction, list[SimEvent]]:
        """Flow to the next instant, apply its jumps and return its events."""
        dt = self.time_to_next_event()
        self.time += dt
        self.phi = [p + dt for p in self.phi]
        if self.adaptive:
            self.beta = [b + dt for b in self.beta]
        blinkers = [v for v, p in enumerate(self.phi) if p == 1]
        return self.time, self.apply_instant(blinkers)

    def apply_instant(self, blinkers: Iterable[int]) -> list[SimEvent]:
        """Apply the jump map at the current instant for the given set of blinkers."""
        g = self.graph
        t = self.time
        blink = set(blinkers)
        recv = {v for v in range(g.n) if v not in blink and any(u in blink for u in g.neighbors(v))}
        before = {v: (self.phi[v], self.beta[v], self.mu1[v], self.mu2[v], self.mu3[v], self.sigma[v])
                  for v in range(g.n)}
        head, tail = [], []
        for v in sorted(blink):
            assert self.phi[v] == 1, "blinker must sit at phase 1"
            self.phi[v] = Fraction(0)
            if self.adaptive:
                s = self.sigma[v]
                self.beta[v] = Fraction(0)
                self.mu1[v] = 1 if s == 2 else 3
                self.mu2[v] = 0
                self.mu3[v] = 0
                self.sigma[v] = (s + (s != 0)) % 3
            head.append((v, EventKind.BLINK))
            if self.sigma[v] != before[v][5]:
                head.append((v, EventKind.STATE_JUMP))
        for v in range(g.n):
            if v in blink:
                continue
            kinds = self._jump_non_blinker(v, v in recv)
            tail.extend((v, k) for k in kinds)
        # the jump of a single node is reported on every event row it produced
        events = []
        for v, kind in head + tail:
            b = before[v]
            pre = JointState(Phase(0 if b[0] == 1 else b[0]), Phase(b[1]), *b[2:])
            events.append(SimEvent(t, v, kind, pre, self._state(v)))
        if self.adaptive:
            self.beta = [b % 1 for b in self.beta]
        return events

    def _jump_non_blinker(self, v, received) -> list[EventKind]:
        phi, b = self.phi[v], self.beta[v]
        pulled = received and 0 < phi <= HALF
        kinds = [EventKind.PULSE_RECEIVED] if received else []
        if not self.adaptive:
            if pulled:
                self.phi[v] = prc_f0(phi)
                kinds.append(EventKind.PULLED)
            return kinds
        if pulled:
            kinds.append(EventKind.PULLED)
            if self.semantics is Semantics.VERBAL and b == 1:
                self.mu2[v] = 1
                self.mu3[v] = 0
            if self.sigma[v] == 0:
                self.phi[v] = prc_f0(phi)
                if self.mu1[v] == self.mu3[v]:
                    self.sigma[v] = 1
                    kinds.append(EventKind.EXCITED)
            if self.mu2[v] == 0:
                self.mu2[v] = self.mu3[v] = int(b == QUARTER)
            else:
                inc = self.mu3[v] + (self.mu3[v] != 3)
                if self.semantics is Semantics.VERBAL:
                    self.mu3[v] = inc
                else:
                    self.mu3[v] = inc if b == 1 else 0
            if b == 1:
                self.beta[v] = Fraction(0)
        elif b == 1:
            self.beta[v] = Fraction(0)
            self.mu2[v] = 1
            self.mu3[v] = 0
            kinds.append(EventKind.BETA_ONE)
        elif b == QUARTER:
            self.mu2[v] = 1
            kinds.append(EventKind.BETA_QUARTER)
        return kinds

    def run_until(self, horizon: RatLike) -> list[SimEvent]:
        horizon = as_rat(horizon)
        out = []
        while self.time + self.time_to_next_event() <= horizon:
            out.extend(self.step_to_next_event()[1])
        self.advance(horizon - self.time)
        return out


# --------------------------------------------------------------------------
# fast engine


@dataclass
class Trajectory:
    """Result of :func:`simulate`.

    Times are integer ticks of length ``1/grid``.  ``log`` has one row per
    event with columns :data:`LOG_COLUMNS`; ``samples[i, v]`` holds
    ``(phi, beta, mu1, mu2, mu3, sigma)`` of node v at ``probe_times[i]`` with
    phi and beta in ticks.
    """

    graph: Graph
    initial: list[JointState]
    coupling: Coupling
    semantics: Semantics
    grid: int
    horizon: Fraction
    end_tick: int
    log: np.ndarray
    probe_times: list[Fraction]
    samples: np.ndarray
    sync_tick: int | None
    stopped_after_sync: bool
    log_level: int = K.LOG_ALL
    final: list[JointState] = field(default_factory=list)

    LOG_COLUMNS = K.LOG_COLUMNS

    @property
    def end_time(self) -> Fraction:
        return Fraction(self.end_tick, self.grid)

    @property
    def sync_time(self) -> Fraction | None:
        """Event instant after which all phases coincided through the end of the run."""
        return None if self.sync_tick is None else Fraction(self.sync_tick, self.grid)

    def tick(self, t: RatLike) -> int:
        t = as_rat(t) * self.grid
        if t.denominator != 1:
            raise ValueError(f"time {t / self.grid} is not on the 1/{self.grid} grid")
        return int(t)

    def initial_arrays(self) -> np.ndarray:
        return _pack(self.initial, self.grid)

    def rows(self, kind: EventKind | None = None, node: int | None = None) -> np.ndarray:
        m = np.ones(self.log.shape[0], dtype=bool)
        if kind is not None:
            m &= self.log[:, 2] == int(kind)
        if node is not None:
            m &= self.log[:, 1] == node
        return self.log[m]

    def blink_ticks(self, node: int) -> np.ndarray:
        return self.rows(EventKind.BLINK, node)[:, 0]

    def blink_times(self, node: int) -> list[Fraction]:
        return [Fraction(int(t), self.grid) for t in self.blink_ticks(node)]

    def blink_counts(self) -> np.ndarray:
        b = self.rows(EventKind.BLINK)
        return np.bincount(b[:, 1], minlength=self.graph.n)

    def events(self) -> Iterator[SimEvent]:
        L = self.grid
        for r in self.log:
            yield _row_event(r, L)

    def sample(self, i: int) -> list[JointState]:
        return _unpack(self.samples[i], self.grid)

    def phi_samples(self) -> np.ndarray:
        """Probed phases in ticks, shape (probes, n)."""
        return self.samples[:, :, 0]

    def to_jsonl(self, fh) -> int:
        n = 0
        for ev in self.events():
            fh.write(json.dumps(ev.to_json()) + "\n")
            n += 1
        return n


def _row_event(r, L) -> SimEvent:
    def js(phi, beta, m1, m2, m3, s):
        return JointState(Phase(Fraction(int(phi), L)), Phase(Fraction(int(beta), L)),
                          int(m1), int(m2), int(m3), int(s))

    return SimEvent(Fraction(int(r[0]), L), int(r[1]), EventKind(int(r[2])),
                    js(r[3], r[5], r[7], r[9], r[11], r[13]),
                    js(r[4], r[6], r[8], r[10], r[12], r[14]))


def _pack(states: Sequence[JointState], L: int) -> np.ndarray:
    a = np.empty((len(states), 6), dtype=np.int64)
    for v, s in enumerate(states):
        a[v] = (int(s.phi.value * L), int(s.beta.value * L), s.mu1, s.mu2, s.mu3, s.sigma)
    return a


def _unpack(a: np.ndarray, L: int) -> list[JointState]:
    return [JointState(Phase(Fraction(int(r[0]), L)), Phase(Fraction(int(r[1]), L)),
                       int(r[2]), int(r[3]), int(r[4]), int(r[5])) for r in a]


def _to_states(g: Graph, initial) -> list[JointState]:
    initial = list(initial)
    if initial and not isinstance(initial[0], JointState):
        return initial_standard(g, initial)
    if len(initial) != g.n:
        raise ValueError(f"expected {g.n} states, got {len(initial)}")
    return initial


def simulate(g: Graph, initial, coupling=Coupling.FOUR, horizon: RatLike = None,
             probes: Iterable[RatLike] = (), semantics=Semantics.PSEUDOCODE,
             backend: str | None = None, stop_after_sync: RatLike | None = None,
             log_level: int = K.LOG_ALL, chunk_rows: int | None = None) -> Trajectory:
    """Run the dynamics exactly from ``initial`` up to ``horizon``.

    ``initial`` is a list of :class:`JointState` or a list of phases (standard
    init).  With ``stop_after_sync`` the run ends that long after the phases
    first coincide, provided they still coincide then.  Probes past the end
    of the run are dropped.
    """
    coupling = _coerce(coupling, Coupling)
    semantics = _coerce(semantics, Semantics)
    states = _to_states(g, initial)
    horizon = default_horizon(g) if horizon is None else as_rat(horizon)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    probe_list = sorted(as_rat(p) for p in probes)
    if probe_list and probe_list[0] < 0:
        raise ValueError("probe times must be nonnegative")
    L = 4
    for x in [horizon, *probe_list] + ([as_rat(stop_after_sync)] if stop_after_sync is not None else []):
        L = lcm(L, x.denominator)
    for s in states:
        L = lcm(L, s.phi.denominator, s.beta.denominator)
    if horizon * L >= _MAX_TICK or L >= _MAX_TICK:
        raise OverflowError(f"grid 1/{L} with horizon {horizon} does not fit in int64 ticks")
    arr = _pack(states, L)
    phi, beta, mu1, mu2, mu3, sigma = (np.ascontiguousarray(arr[:, c]) for c in range(6))
    indptr, indices = g.csr
    probe_ticks = np.array([int(p * L) for p in probe_list], dtype=np.int64)
    probe_out = np.full((len(probe_list), g.n, 6), -1, dtype=np.int64)
    n = g.n
    cap = chunk_rows or max(1 << 14, 3 * n * 256)
    cap = max(cap, 3 * n + 1)
    log = np.empty((cap, K.NCOL), dtype=np.int64)
    run = K.run_numba if resolve_backend(backend) == "numba" else K.run_numpy
    sync_stop = -1 if stop_after_sync is None else int(as_rat(stop_after_sync) * L)
    t, ppos, sync_tick = 0, 0, -1
    t_end = int(horizon * L)
    chunks = []
    adaptive = coupling is Coupling.ADAPTIVE
    verbal = semantics is Semantics.VERBAL
    while True:
        t, k, ppos, sync_tick, status = run(
            indptr, indices, phi, beta, mu1, mu2, mu3, sigma, L, adaptive, verbal,
            t, t_end, sync_stop, probe_ticks, ppos, probe_out, log, log_level, sync_tick)
        chunks.append(log[:k].copy())
        if status != K.STATUS_LOG_FULL:
            break
    full = np.concatenate(chunks) if chunks else np.empty((0, K.NCOL), dtype=np.int64)
    final = np.stack([phi % L, beta % L, mu1, mu2, mu3, sigma], axis=1)
    return Trajectory(
        graph=g, initial=states, coupling=coupling, semantics=semantics, grid=L,
        horizon=horizon, end_tick=int(t), log=full, probe_times=probe_list[:ppos],
        samples=probe_out[:ppos], sync_tick=None if sync_tick < 0 else int(sync_tick),
        stopped_after_sync=status == K.STATUS_SYNC_STOP, log_level=log_level,
        final=_unpack(final, L),
    )


# --------------------------------------------------------------------------
# export


def config_to_csv(states: Sequence[JointState], fh=None) -> str:
    buf = fh if fh is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node", "phi", "beta", "mu1", "mu2", "mu3", "sigma"])
    for v, s in enumerate(states):
        w.writerow([v, str(s.phi), str(s.beta), s.mu1, s.mu2, s.mu3, s.sigma])
    return buf.getvalue() if fh is None else ""


def config_from_csv(text: str) -> list[JointState]:
    rows = sorted(csv.DictReader(io.StringIO(text)), key=lambda r: int(r["node"]))
    return [JointState(Phase(r["phi"]), Phase(r["beta"]), int(r["mu1"]), int(r["mu2"]),
                       int(r["mu3"]), int(r["sigma"])) for r in rows]
