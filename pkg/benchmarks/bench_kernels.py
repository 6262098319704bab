#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Runs value iteration and the episode simulator on the 5x5 reference
scenario (1250 states) and prints per-implementation timings.

Usage: python benchmarks/bench_kernels.py [--episodes N] [--repeat K]
"""

import argparse
import time
from fractions import Fraction

import numpy as np

import pmdpcert as pc
from pmdpcert import checker
from pmdpcert.checker import SolverConfig, _pair_indices, _prob1_with_witness, prob0_max
from pmdpcert.kernels import implementations


def bench(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--episodes", type=int, default=100_000)
    ap.add_argument("--horizon", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    prop = pc.UntilProperty("crash", "goal")
    model = pc.build_open(pc.reference_open())
    c = pc.instantiate(model, {"p1": Fraction(1, 10), "p2": Fraction(2, 5)})

    p1_mask, _ = _prob1_with_witness(c, prop)
    p0 = prob0_max(c, prop)
    x0 = np.zeros(c.state_count)
    x0[p1_mask] = 1.0
    frozen = p1_mask.copy()
    frozen[list(p0)] = True
    frozen8 = frozen.astype(np.uint8)

    res = pc.max_until(c, prop)
    required = ~c.label_mask("goal")
    required[list(p0)] = False
    pair_idx = _pair_indices(c, res.policy, required)
    cumprobs = np.empty_like(c.probs)
    for k in range(len(c.row_ptr) - 1):
        lo, hi = c.row_ptr[k], c.row_ptr[k + 1]
        cumprobs[lo:hi] = np.cumsum(c.probs[lo:hi])
    reach8 = c.label_mask("goal").astype(np.uint8)
    avoid8 = c.label_mask("crash").astype(np.uint8)

    impls = implementations()
    print(f"model: open 5x5, {c.state_count} states, {len(c.probs)} transitions")
    print(f"{'impl':<8} {'value-iteration':>18} {'simulate({}x)'.format(args.episodes):>20}")
    rows = {}
    for name, impl in impls.items():
        t_vi, (values, iters, _) = bench(
            lambda: impl.value_iteration(
                np.asarray(c.act_ptr), np.asarray(c.row_ptr), np.asarray(c.cols),
                np.asarray(c.probs), frozen8, x0, 1e-6, 1_000_000),
            args.repeat)
        t_sim, successes = bench(
            lambda: impl.simulate_episodes(
                int(c.initial), pair_idx, np.asarray(c.row_ptr), np.asarray(c.cols),
                cumprobs, reach8, avoid8, args.episodes, args.horizon, 20260809),
            args.repeat)
        rows[name] = (t_vi, t_sim, values[c.initial], iters, successes)
        print(f"{name:<8} {t_vi*1e3:>13.1f} ms ({iters} it) {t_sim*1e3:>14.1f} ms")

    if len(rows) == 2:
        vi_speedup = rows["pure"][0] / rows["cython"][0]
        sim_speedup = rows["pure"][1] / rows["cython"][1]
        same = rows["pure"][4] == rows["cython"][4]
        print(f"\nspeedup: value-iteration x{vi_speedup:.1f}, simulate x{sim_speedup:.1f}")
        print(f"simulator outcomes identical across paths: {same}")


if __name__ == "__main__":
    main()
