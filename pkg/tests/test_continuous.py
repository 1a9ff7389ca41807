import io
import json
from fractions import Fraction as F
from math import lcm

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pulsesync import observables as obs
from pulsesync.continuous import (
    Coupling,
    EventKind,
    Semantics,
    World,
    config_from_csv,
    config_to_csv,
    initial_standard,
    random_joint_config,
    random_phases,
    simulate,
)
from pulsesync.graphs import Graph, make_complete, make_path, make_random_connected, make_star, make_tree_random
from pulsesync.phase import JointState, Phase


def grid_oracle(g, phases, N, steps):
    """Per-tick brute force for the 4-coupling on the 1/N grid (N divisible by 4).

    Returns the blink ticks of every node.  Independent of the event engine:
    it walks every tick and applies the response curve directly.
    """
    phi = [int(p * N) for p in phases]
    blinks = [[] for _ in range(g.n)]
    for t in range(1, steps + 1):
        phi = [p + 1 for p in phi]
        fired = {v for v in range(g.n) if phi[v] == N}
        for v in fired:
            phi[v] = 0
            blinks[v].append(t)
        for v in range(g.n):
            if v in fired or not any(u in fired for u in g.neighbors(v)):
                continue
            if 0 < phi[v] <= N // 4:
                phi[v] = 0
            elif N // 4 < phi[v] <= N // 2:
                phi[v] -= N // 4
    return blinks


def events_equal(world_events, traj):
    mine = [(e.time, e.node, e.kind, e.before, e.after) for e in world_events]
    theirs = [(e.time, e.node, e.kind, e.before, e.after) for e in traj.events()]
    return mine == theirs


K2 = make_path(2)


def test_k2_synchronizes_at_seven_fifths(backend):
    tr = simulate(K2, [0, F(3, 5)], Coupling.FOUR, horizon=5, backend=backend)
    assert tr.sync_time == F(7, 5)
    oracle = grid_oracle(K2, [0, F(3, 5)], 20, 100)
    assert [[F(t, 20) for t in b] for b in oracle] == [tr.blink_times(0), tr.blink_times(1)]
    assert F(12, 5) in tr.blink_times(0) and F(12, 5) in tr.blink_times(1)


def test_step_examples():
    w = World(Graph(1), [JointState(F(1, 2))])
    t, ev = w.step_to_next_event()
    assert t == F(1, 2) and ev[0].kind is EventKind.BLINK
    w = World(K2, initial_standard(K2, [0, F(3, 5)]))
    t, ev = w.step_to_next_event()
    assert t == F(2, 5) and (ev[0].node, ev[0].kind) == (1, EventKind.BLINK)
    w = World(K2, [JointState(F(0), F(1, 8)), JointState(F(0), F(1, 8))], Coupling.ADAPTIVE)
    t, ev = w.step_to_next_event()
    assert t == F(1, 8) and {e.kind for e in ev} == {EventKind.BETA_QUARTER}


@pytest.mark.parametrize("other, want", [(F(2, 5), F(3, 20)), (F(4, 5), F(4, 5))])
def test_apply_instant_pulls(other, want):
    w = World(K2, initial_standard(K2, [1 - F(1, 100), other - F(1, 100)]))
    w.step_to_next_event()
    assert w.phi[1] == want


def test_simultaneous_blinks_are_one_instant():
    g = make_star(2)
    center = JointState(F(3, 8), F(1, 2), mu1=3, mu2=1, mu3=1)
    init = [center, JointState(F(0)), JointState(F(0))]
    w = World(g, init, Coupling.ADAPTIVE, Semantics.VERBAL)
    w.phi[1] = w.phi[2] = F(1)
    w.apply_instant([1, 2])
    assert (w.phi[0], w.mu3[0]) == (F(1, 8), 2)
    # feeding the two blinks one after another is a different dynamics
    s = World(g, init, Coupling.ADAPTIVE, Semantics.VERBAL)
    s.phi[1] = F(1)
    s.apply_instant([1])
    s.phi[2] = F(1)
    s.apply_instant([2])
    assert (s.phi[0], s.mu3[0]) == (F(0), 3)
    # both engines agree with the atomic reading
    start = JointState(F(7, 8), F(0), mu1=3, mu2=1, mu3=1)
    tr = simulate(g, [start, JointState(F(1, 2)), JointState(F(1, 2))], Coupling.ADAPTIVE,
                  horizon=F(1, 2), semantics="verbal")
    pulls = tr.rows(EventKind.PULLED, 0)
    assert pulls.shape[0] == 1
    L = tr.grid
    assert (F(int(pulls[0, 3]), L), F(int(pulls[0, 4]), L)) == (F(3, 8), F(1, 8))
    # the center blinked at t = 1/8, so the counter restarted from 0 and was bumped once
    assert tr.final[0].mu3 == 1


def test_star_center_never_blinks():
    g = make_star(4)
    init = [F(1, 4), F(1, 4), F(1, 2), F(3, 4), F(0)]
    tr = simulate(g, init, Coupling.FOUR, horizon=50)
    assert tr.blink_counts()[0] == 0 and tr.sync_time is None


@pytest.mark.parametrize("n", [3, 4, 6])
def test_kn_companion_orbit_has_period_five(n):
    phases = [F(1, 16), F(1, 4), F(5, 8)]
    tr = simulate(make_complete(n), [phases[i % 3] for i in range(n)], Coupling.FOUR, horizon=50, probes=[0, 5])
    assert (tr.samples[0] == tr.samples[1]).all() and tr.sync_time is None


def test_kn_stated_orbit_synchronizes():
    # {0, 1/4, 5/8} merges by t = 7/4 under this response curve; see the acceptance suite
    tr = simulate(make_complete(3), [0, F(1, 4), F(5, 8)], Coupling.FOUR, horizon=10)
    assert tr.sync_time == F(7, 4)


def test_singleton_blinks_every_unit():
    tr = simulate(Graph(1), [F(1, 3)], Coupling.FOUR, horizon=5)
    assert tr.blink_times(0) == [F(2, 3) + k for k in range(5)]


def test_random_configs_reproducible():
    g = make_tree_random(10, seed=1)
    assert random_joint_config(g, 4, seed=5) == random_joint_config(g, 4, seed=5)
    assert random_phases(8, 64, 3) == random_phases(8, 64, 3)


def test_standard_init_follows_four_coupling():
    for seed in range(10):
        g = make_tree_random(30, max_degree=3, seed=seed)
        ph = random_phases(g.n, 64, seed)
        a = simulate(g, ph, Coupling.ADAPTIVE, horizon=60)
        b = simulate(g, ph, Coupling.FOUR, horizon=60)
        ka = a.log[np.isin(a.log[:, 2], (0, 2))][:, :5]
        kb = b.log[np.isin(b.log[:, 2], (0, 2))][:, :5]
        assert np.array_equal(ka, kb)


def test_overflow_is_rejected():
    with pytest.raises(OverflowError):
        simulate(K2, [F(1, 2**40), F(1, 3**25)], horizon=10)


def test_csv_round_trip():
    g = make_path(4)
    cfg = random_joint_config(g, 16, seed=2)
    assert config_from_csv(config_to_csv(cfg)) == cfg


def test_jsonl_export():
    tr = simulate(K2, [0, F(3, 5)], horizon=3)
    buf = io.StringIO()
    n = tr.to_jsonl(buf)
    rows = [json.loads(x) for x in buf.getvalue().splitlines()]
    assert n == len(rows) == tr.log.shape[0]
    assert rows[0]["kind"] == "Blink" and rows[0]["t"] == "2/5"


def test_log_chunking_is_transparent():
    g = make_random_connected(12, seed=4)
    cfg = random_joint_config(g, 32, seed=4)
    a = simulate(g, cfg, Coupling.ADAPTIVE, horizon=80)
    b = simulate(g, cfg, Coupling.ADAPTIVE, horizon=80, chunk_rows=40)
    assert np.array_equal(a.log, b.log)


configs = st.tuples(st.integers(1, 9), st.integers(0, 2**32), st.sampled_from([4, 8, 12, 20, 64]),
                    st.sampled_from(list(Semantics)), st.sampled_from(list(Coupling)))


@given(configs)
def test_three_engines_agree(c):
    n, seed, denom, sem, coupling = c
    g = make_random_connected(n, seed=seed)
    cfg = random_joint_config(g, denom, seed)
    H = 12
    w = World(g, cfg, coupling, sem)
    ref = w.run_until(H)
    for backend in ("numpy", "numba"):
        tr = simulate(g, cfg, coupling, horizon=H, semantics=sem, backend=backend)
        assert events_equal(ref, tr)
        assert [s.as_dict() for s in tr.final] == [s.as_dict() for s in w.states()]


@given(st.integers(2, 12), st.integers(0, 2**32), st.just(Semantics.VERBAL))
def test_trace_invariants(n, seed, sem):
    g = make_random_connected(n, seed=seed)
    cfg = random_joint_config(g, 64, seed)
    tr = simulate(g, cfg, Coupling.ADAPTIVE, horizon=40, semantics=sem)
    assert obs.blink_frequency_violations(tr) == []
    assert obs.inhibitory_violations(tr) == 0
    assert obs.leaf_sigma_violations(tr, after=3) == []
    for _, _, f in obs.excitation_inhibition(tr):
        assert f < F(-1, 4)
    again = simulate(g, cfg, Coupling.ADAPTIVE, horizon=40, semantics=sem)
    assert np.array_equal(tr.log, again.log)


@given(st.integers(2, 12), st.integers(0, 2**32), st.sampled_from([3, 5, 12, 64]))
def test_denominators_stay_on_the_grid(n, seed, D):
    g = make_random_connected(n, seed=seed)
    ph = random_phases(n, D, seed)
    tr = simulate(g, ph, Coupling.FOUR, horizon=30, probes=[F(k, 2) for k in range(61)])
    grid = lcm(4, D)
    assert grid % tr.grid == 0
    values = np.concatenate([tr.log[:, 3], tr.log[:, 4], tr.phi_samples().ravel()])
    assert all(grid % F(int(x), tr.grid).denominator == 0 for x in values)


@given(st.integers(2, 12), st.integers(0, 2**32), st.fractions(0, F(1, 4), max_denominator=64))
def test_quarter_grid_is_preserved(n, seed, c):
    g = make_random_connected(n, seed=seed)
    rng = np.random.default_rng(seed)
    ph = [(c + F(int(k), 4)) % 1 for k in rng.integers(0, 4, n)]
    tr = simulate(g, ph, Coupling.ADAPTIVE, horizon=25, probes=[F(k, 8) for k in range(200)])
    q = tr.grid // 4
    phi = tr.phi_samples()
    assert ((phi - phi[:, :1]) % q == 0).all()


def test_probes_are_left_limits():
    tr = simulate(K2, [0, F(3, 5)], horizon=3, probes=[F(2, 5)])
    assert [s for s in tr.sample(0)][1].phi == Phase(F(0))
    assert tr.sample(0)[0].phi == Phase(F(2, 5))


def test_pseudocode_counter_can_starve_a_node():
    # the literal pull-counter update zeroes mu3 on every pull with beta != 1, so
    # node 8 is pulled forever without ever being excited
    g = make_random_connected(11, seed=4095)
    cfg = random_joint_config(g, 64, 4095)
    lit = simulate(g, cfg, Coupling.ADAPTIVE, horizon=40, semantics=Semantics.PSEUDOCODE)
    assert lit.blink_times(8) == [F(13, 64)]
    assert (8, "no blink in the last 5 units") in obs.blink_frequency_violations(lit)
    verbal = simulate(g, cfg, Coupling.ADAPTIVE, horizon=40, semantics=Semantics.VERBAL)
    assert obs.blink_frequency_violations(verbal) == []


def test_leaf_excited_from_arbitrary_state_clears_after_two_blinks():
    # leaf 6 starts with mu1 == mu3 == 1, is excited by its first pull at 20/64 and
    # needs blinks at 74/64 and 138/64 to come back to rest, past t = 2
    g = make_random_connected(7, seed=1995)
    cfg = random_joint_config(g, 64, 1995)
    tr = simulate(g, cfg, Coupling.ADAPTIVE, horizon=12, semantics=Semantics.VERBAL)
    assert g.degree(6) == 1
    assert obs.leaf_sigma_violations(tr, after=2) == [6]
    assert obs.leaf_sigma_violations(tr, after=3) == []
    assert tr.blink_times(6)[:2] == [F(74, 64), F(138, 64)]
