"""Compare the numba kernels with their numpy twins.

Runs the continuous simulator and the A4C/M round kernel on the same inputs
with both backends, checks that results agree and prints wall times.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time
from fractions import Fraction

import numpy as np

from pulsesync._accel import HAS_NUMBA
from pulsesync.continuous import Coupling, random_joint_config, simulate
from pulsesync.discrete import random_discrete_states, run_system
from pulsesync.graphs import make_random_connected, make_torus_moore, make_tree_random, uniform_spanning_tree


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def bench_continuous(repeat):
    g = make_random_connected(40, seed=1)
    init = random_joint_config(g, 64, seed=2)

    def run(backend):
        return simulate(g, init, Coupling.ADAPTIVE, horizon=200, semantics="verbal", backend=backend)

    run("numba")  # compile
    tn, a = _best(lambda: run("numba"), repeat)
    tp, b = _best(lambda: run("numpy"), repeat)
    assert np.array_equal(a.log, b.log)
    return "continuous adaptive n=40, t<=200", a.log.shape[0], tn, tp


def bench_discrete(repeat):
    g = uniform_spanning_tree(make_torus_moore(20, 20), seed=3)
    init = random_discrete_states(g, 64, seed=4)

    def run(backend):
        return run_system(g, 64, init, 2000, semantics="verbal", backend=backend)

    run("numba")
    tn, a = _best(lambda: run("numba"), repeat)
    tp, b = _best(lambda: run("numpy"), repeat)
    assert np.array_equal(a.offset_end, b.offset_end)
    return "A4C/M 20x20 torus UST, 2000 beats", 2000 * g.n, tn, tp


def bench_tree(repeat):
    g = make_tree_random(64, max_degree=3, seed=5)
    phases = [Fraction(int(k), 64) for k in np.random.default_rng(6).integers(0, 64, g.n)]

    def run(backend):
        return simulate(g, phases, Coupling.FOUR, horizon=51 * g.diameter, backend=backend)

    run("numba")
    tn, a = _best(lambda: run("numba"), repeat)
    tp, b = _best(lambda: run("numpy"), repeat)
    assert np.array_equal(a.log, b.log)
    return "4-coupling tree n=64 to 51d", a.log.shape[0], tn, tp


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not HAS_NUMBA:
        print("numba is not installed; both columns use the numpy path")
    print(f"{'case':<40} {'work':>10} {'numba s':>9} {'numpy s':>9} {'speedup':>8}")
    for bench in (bench_tree, bench_continuous, bench_discrete):
        name, work, tn, tp = bench(args.repeat)
        print(f"{name:<40} {work:>10} {tn:>9.4f} {tp:>9.4f} {tp / tn:>7.1f}x")


if __name__ == "__main__":
    main()
