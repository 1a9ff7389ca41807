"""Metrics and derived views over trajectories.

Widths, branch widths, total phase inhibition, the relative circular view,
synchronization time, and an independent relative-phase oracle for the
4-coupling.  Everything is exact: phases are ticks on the trajectory grid or
:class:`~fractions.Fraction` values.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .continuous import Coupling, EventKind, Trajectory
from .graphs import BranchDescriptor, Graph, find_branches
from .phase import HALF, QUARTER, RatLike, as_rat, common_grid


@dataclass(frozen=True)
class WidthReading:
    width: Fraction
    arg_pair: tuple[int, int] | None
    time: Fraction | None = None


def _circ(d, L):
    d = np.asarray(d) % L
    return np.minimum(d, L - d)


def width_ticks(phi: np.ndarray, L: int) -> tuple[int, tuple[int, int] | None]:
    """Pairwise width of integer phases modulo L, with a maximizing pair.

    For each phase the farthest one in circular distance is the one closest
    to the antipode, found by binary search on the sorted phases.
    """
    phi = np.asarray(phi, dtype=np.int64) % L
    n = phi.size
    if n < 2:
        return 0, None
    order = np.argsort(phi, kind="stable")
    s = phi[order]
    anti = (s + L // 2) % L if L % 2 == 0 else None
    if anti is None:
        # odd grids: fall back to the quadratic scan
        d = _circ(phi[:, None] - phi[None, :], L)
        i, j = np.unravel_index(np.argmax(d), d.shape)
        return int(d[i, j]), (int(min(i, j)), int(max(i, j)))
    pos = np.searchsorted(s, anti)
    best, pair = -1, None
    for off in (-1, 0):
        cand = (pos + off) % n
        d = _circ(s[cand] - s, L)
        k = int(np.argmax(d))
        if d[k] > best:
            best = int(d[k])
            a, b = int(order[k]), int(order[cand[k]])
            pair = (min(a, b), max(a, b))
    if best == 0:
        pair = (int(order[0]), int(order[1])) if order[0] < order[1] else (int(order[1]), int(order[0]))
    return best, pair


def width(phases: Sequence[RatLike], time: RatLike | None = None) -> WidthReading:
    """``max_{u,v} min(delta(u, v), delta(v, u))`` over the given phases."""
    vals = [as_rat(p) % 1 for p in phases]
    if not vals:
        raise ValueError("width of an empty configuration")
    L = common_grid(vals, base=2)
    w, pair = width_ticks(np.array([int(v * L) for v in vals], dtype=np.int64), L)
    return WidthReading(Fraction(w, L), pair, None if time is None else as_rat(time))


def covering_arc_width(phases: Sequence[RatLike]) -> Fraction:
    """Length of the shortest arc of the circle containing every phase."""
    vals = sorted({as_rat(p) % 1 for p in phases})
    if len(vals) < 2:
        return Fraction(0)
    gaps = [b - a for a, b in zip(vals, vals[1:])] + [vals[0] + 1 - vals[-1]]
    return 1 - max(gaps)


def covering_arc_ticks(phi: np.ndarray, L: int) -> int:
    """Integer version of :func:`covering_arc_width`; works row-wise on 2-D input."""
    s = np.sort(np.asarray(phi, dtype=np.int64) % L, axis=-1)
    wrap = s[..., :1] + L - s[..., -1:]
    gaps = np.concatenate([np.diff(s, axis=-1), wrap], axis=-1)
    return L - gaps.max(axis=-1)


# --------------------------------------------------------------------------
# reconstruction from the event log


def phases_at_ticks(traj: Trajectory, tick: int, right: bool = False) -> np.ndarray:
    """Phases (ticks) at ``tick``; left limit by default, right limit with ``right``.

    Needs a log that contains blinks and pulls.
    """
    L = traj.grid
    phi0 = traj.initial_arrays()[:, 0]
    log = traj.log
    m = log[:, 0] <= tick if right else log[:, 0] < tick
    rows = log[m]
    out = (phi0 + tick) % L
    if rows.size:
        # rows are time ordered; keep the last row per node
        last = np.full(traj.graph.n, -1, dtype=np.int64)
        last[rows[:, 1]] = np.arange(rows.shape[0])
        has = last >= 0
        r = rows[last[has]]
        out[has] = (r[:, 4] + tick - r[:, 0]) % L
    return out


def phases_at(traj: Trajectory, t: RatLike, right: bool = False) -> list[Fraction]:
    L = traj.grid
    return [Fraction(int(x), L) for x in phases_at_ticks(traj, traj.tick(t), right)]


def width_at(traj: Trajectory, t: RatLike, right: bool = False) -> WidthReading:
    w, pair = width_ticks(phases_at_ticks(traj, traj.tick(t), right), traj.grid)
    return WidthReading(Fraction(w, traj.grid), pair, as_rat(t))


def width_series(traj: Trajectory) -> list[WidthReading]:
    """Width at every probe time of the trajectory."""
    L = traj.grid
    out = []
    for t, row in zip(traj.probe_times, traj.phi_samples()):
        w, pair = width_ticks(row, L)
        out.append(WidthReading(Fraction(w, L), pair, t))
    return out


def branch_width(traj: Trajectory, branch: BranchDescriptor, t: RatLike, right: bool = False) -> Fraction:
    phi = phases_at_ticks(traj, traj.tick(t), right)
    nodes = list(branch.nodes)
    return Fraction(width_ticks(phi[nodes], traj.grid)[0], traj.grid)


def branch_width_of(phases: Sequence[RatLike], branch: BranchDescriptor) -> Fraction:
    return width([phases[v] for v in branch.nodes]).width


def total_phase_inhibition(traj: Trajectory, node: int, interval: tuple[RatLike, RatLike]) -> Fraction:
    """Sum of pull jumps ``phi(s+) - phi(s)`` of ``node`` for s in ``(a, b]``, taken in R."""
    a, b = (traj.tick(x) for x in interval)
    rows = traj.rows(EventKind.PULLED, node)
    rows = rows[(rows[:, 0] > a) & (rows[:, 0] <= b)]
    return Fraction(int((rows[:, 4] - rows[:, 3]).sum()), traj.grid)


def sync_time(traj: Trajectory) -> Fraction | None:
    """Earliest instant from which all phases coincide through the end of the run."""
    return traj.sync_time


def sync_time_from_probes(traj: Trajectory) -> Fraction | None:
    """Earliest probe time from which every later probe shows width 0."""
    phi = traj.phi_samples()
    if phi.shape[0] == 0:
        return None
    same = (phi == phi[:, :1]).all(axis=1)
    if not same[-1]:
        return None
    bad = np.flatnonzero(~same)
    i = 0 if bad.size == 0 else int(bad[-1]) + 1
    return traj.probe_times[i]


# --------------------------------------------------------------------------
# relative circular representation


@dataclass(frozen=True)
class RelativeView:
    alpha0: Fraction
    times: list[Fraction]
    relative: list[list[Fraction]]

    def activator(self, t: RatLike) -> Fraction:
        return (self.alpha0 - as_rat(t)) % 1


def relative_view(traj: Trajectory, alpha0: RatLike = 0) -> RelativeView:
    """``Lambda_v(t) = phi_v(t) + alpha0 - t mod 1`` at every probe time."""
    alpha0 = as_rat(alpha0) % 1
    L = traj.grid
    rel = []
    for t, row in zip(traj.probe_times, traj.phi_samples()):
        rel.append([(Fraction(int(x), L) + alpha0 - t) % 1 for x in row])
    return RelativeView(alpha0, list(traj.probe_times), rel)


def relative_schedule(g: Graph, phases: Sequence[RatLike], horizon: RatLike,
                      alpha0: RatLike = 0) -> list[tuple[Fraction, int, str]]:
    """Blink and pull schedule of the 4-coupling computed in relative coordinates.

    Relative phases stay put while the activator ``alpha(t) = alpha0 - t``
    sweeps the circle.  A node blinks when the activator reaches it; a node
    with a blinking neighbor at counterclockwise displacement in (1/4, 1/2]
    shifts by -1/4, and one at displacement in (0, 1/4] merges with the
    blinker.  Returns ``(time, node, "blink" | "pull")`` triples in log order.
    """
    horizon = as_rat(horizon)
    alpha0 = as_rat(alpha0) % 1
    lam = [(as_rat(p) + alpha0) % 1 for p in phases]
    t = Fraction(0)
    out = []
    n = g.n
    while n:
        # time until the activator reaches each node (a node at the activator now has waited 1)
        waits = [((lam[v] - (alpha0 - t)) * -1) % 1 or Fraction(1) for v in range(n)]
        dt = min(waits)
        if t + dt > horizon:
            break
        t += dt
        alpha = (alpha0 - t) % 1
        blinkers = [v for v in range(n) if lam[v] == alpha]
        bset = set(blinkers)
        new = list(lam)
        pulls = []
        for v in range(n):
            if v in bset or not any(u in bset for u in g.neighbors(v)):
                continue
            d = (lam[v] - alpha) % 1
            if QUARTER < d <= HALF:
                new[v] = (lam[v] - QUARTER) % 1
                pulls.append(v)
            elif 0 < d <= QUARTER:
                new[v] = alpha
                pulls.append(v)
        lam = new
        out.extend((t, v, "blink") for v in blinkers)
        out.extend((t, v, "pull") for v in pulls)
    return out


def log_schedule(traj: Trajectory) -> list[tuple[Fraction, int, str]]:
    """Blink and pull triples of a trajectory, in the same order as :func:`relative_schedule`."""
    L = traj.grid
    rows = traj.log[np.isin(traj.log[:, 2], (int(EventKind.BLINK), int(EventKind.PULLED)))]
    names = {int(EventKind.BLINK): "blink", int(EventKind.PULLED): "pull"}
    return [(Fraction(int(r[0]), L), int(r[1]), names[int(r[2])]) for r in rows]


# --------------------------------------------------------------------------
# structural checks on traces


def blink_frequency_violations(traj: Trajectory, lo: int = 1, hi: int = 5) -> list[tuple[int, str]]:
    """Nodes breaking "at most one blink per unit, at least one per ``hi`` units".

    Checked on ``(0, end]``: the first blink comes by ``hi``, consecutive
    blinks are at least ``lo`` and at most ``hi`` apart, and the last blink is
    less than ``hi`` before the end.  Requires blinks in the log.
    """
    L = traj.grid
    end = traj.end_tick
    bad = []
    blinks = traj.rows(EventKind.BLINK)
    by_node = [blinks[blinks[:, 1] == v, 0] for v in range(traj.graph.n)] if blinks.size else \
        [np.empty(0, dtype=np.int64)] * traj.graph.n
    for v, ts in enumerate(by_node):
        pts = np.concatenate(([0], ts))
        gaps = np.diff(pts)
        if ts.size > 1 and np.diff(ts).min() < lo * L:
            bad.append((v, "two blinks within one unit"))
        if gaps.size and gaps.max() > hi * L:
            bad.append((v, f"gap longer than {hi}"))
        if end - pts[-1] >= hi * L:
            bad.append((v, f"no blink in the last {hi} units"))
    return bad


def leaf_sigma_violations(traj: Trajectory, after: RatLike = 2) -> list[int]:
    """Degree-one nodes whose sigma is nonzero at some time after ``after``."""
    g = traj.graph
    a = traj.tick(after)
    leaves = [v for v in range(g.n) if g.degree(v) == 1]
    bad = set()
    for v in leaves:
        rows = traj.rows(node=v)
        late = rows[rows[:, 0] > a]
        if late.size and (late[:, 14] != 0).any():
            bad.add(v)
        before = rows[rows[:, 0] <= a]
        state = before[-1, 14] if before.size else traj.initial[v].sigma
        if state != 0:
            bad.add(v)
    return sorted(bad)


def excitation_inhibition(traj: Trajectory) -> list[tuple[int, Fraction, Fraction]]:
    """For each excitation after a blink, the total phase inhibition since that blink.

    Returns ``(node, excitation time, f_v((t0, t1]))`` triples; excitations
    with no earlier blink of the node are skipped.
    """
    L = traj.grid
    out = []
    exc = traj.rows(EventKind.EXCITED)
    for r in exc:
        v, t1 = int(r[1]), int(r[0])
        bl = traj.blink_ticks(v)
        bl = bl[bl < t1]
        if bl.size == 0:
            continue
        t0 = int(bl[-1])
        out.append((v, Fraction(t1, L), total_phase_inhibition(traj, v, (Fraction(t0, L), Fraction(t1, L)))))
    return out


def inhibitory_violations(traj: Trajectory) -> int:
    """Jumps that increase a non-blinking node's phase."""
    m = traj.log[:, 2] == int(EventKind.PULLED)
    return int((traj.log[m, 4] > traj.log[m, 3]).sum())


def leaf_pulls_center(traj: Trajectory, branch: BranchDescriptor) -> np.ndarray:
    """Ticks at which the center is pulled while one of its leaves blinks."""
    pulls = traj.rows(EventKind.PULLED, branch.center)[:, 0]
    blinks = traj.rows(EventKind.BLINK)
    leaf_blinks = blinks[np.isin(blinks[:, 1], list(branch.leaves)), 0]
    return pulls[np.isin(pulls, leaf_blinks)]


def branch_restriction_checks(traj: Trajectory, start: RatLike = 6,
                              branches: Iterable[BranchDescriptor] | None = None):
    """Spot-check that leaves stop pulling a branch center once they trail it tightly.

    For every branch, find the first event instant ``t0 >= start`` at which
    each leaf's right-limit phase lies in ``[phi_center, phi_center + 1/4)``
    on the circle.  Yields ``(branch, t0, offending pull ticks after t0)``
    for branches where such an instant exists.
    """
    g = traj.graph
    L = traj.grid
    q = L // 4
    branches = find_branches(g) if branches is None else branches
    s = traj.tick(start)
    instants = np.unique(traj.log[traj.log[:, 0] >= s, 0])
    for b in branches:
        leaves = np.array(sorted(b.leaves))
        found = None
        for tk in instants:
            phi = phases_at_ticks(traj, int(tk), right=True)
            d = (phi[leaves] - phi[b.center]) % L
            if (d < q).all():
                found = int(tk)
                break
        if found is None:
            continue
        bad = leaf_pulls_center(traj, b)
        yield b, Fraction(found, L), bad[bad >= found]


# --------------------------------------------------------------------------
# export


def width_csv(readings: Iterable[WidthReading]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "width"])
    for r in readings:
        w.writerow([str(r.time), str(r.width)])
    return buf.getvalue()


def branch_width_csv(traj: Trajectory, branches: Sequence[BranchDescriptor]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "branch_id", "branch_width"])
    L = traj.grid
    for t, row in zip(traj.probe_times, traj.phi_samples()):
        for i, b in enumerate(branches):
            bw = width_ticks(row[list(b.nodes)], L)[0]
            w.writerow([str(t), i, str(Fraction(bw, L))])
    return buf.getvalue()


def frame_matrix(values: Sequence[int], shape: tuple[int, int]) -> np.ndarray:
    """Arrange per-node integers (e.g. phi * M) as a row-major grid."""
    return np.asarray(values, dtype=np.int64).reshape(shape)


def write_pgm(path, frame: np.ndarray, maxval: int) -> None:
    """Plain (ASCII) PGM, one pixel per node."""
    h, w = frame.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{w} {h}\n{maxval}\n")
        for row in frame:
            fh.write(" ".join(str(int(x)) for x in row) + "\n")


def write_frame_csv(path, frame: np.ndarray) -> None:
    np.savetxt(path, frame, fmt="%d", delimiter=",")
