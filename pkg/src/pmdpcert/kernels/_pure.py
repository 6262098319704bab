"""NumPy implementations of the hot numeric kernels.

These mirror the Cython kernels in pmdpcert.kernels._core. Value iteration
may differ from the compiled path by float summation order (well below
solver tolerances); the episode simulator is bit-identical because both
paths draw from the same per-episode splitmix64 streams and use the same
first-cumulative-exceeding-u selection rule.
"""

from __future__ import annotations

import numpy as np

IMPL = "pure"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 1.0 / float(1 << 53)


def _finalize(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def episode_streams(seed: int, episodes: int) -> np.ndarray:
    """Initial splitmix64 state per episode; identical across kernel paths."""
    base = (int(seed) * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    e = np.arange(1, episodes + 1, dtype=np.uint64)
    st = np.uint64(base) + e * _MIX1
    return _finalize(_finalize(st))


def value_iteration(act_ptr, row_ptr, cols, probs, frozen, x0,
                    epsilon, max_iterations):
    """Bellman iteration x'(s) = max_a sum_t P(s,a,t) x(t) on non-frozen states.

    Returns (values, iterations, residual); residual >= epsilon after
    max_iterations signals non-convergence (caller raises). Iterates are
    clipped to [0, 1] and must be monotonically non-decreasing from the 0/1
    initialization; a violation is a solver bug and raises AssertionError.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    frozen = np.asarray(frozen, dtype=bool)
    residual = np.inf
    iterations = 0
    while iterations < max_iterations:
        pair_vals = np.add.reduceat(probs * x[cols], row_ptr[:-1])
        new_x = np.maximum.reduceat(pair_vals, act_ptr[:-1])
        np.minimum(new_x, 1.0, out=new_x)
        new_x[frozen] = x[frozen]
        assert (new_x >= x).all(), "value iteration lost monotonicity"
        residual = float(np.max(new_x - x))
        x = new_x
        iterations += 1
        if residual < epsilon:
            break
    return x, iterations, residual


def backup_pairs(row_ptr, cols, probs, x):
    """One Bellman backup per state-action pair (used for argmax extraction)."""
    return np.add.reduceat(probs * x[cols], row_ptr[:-1])


def simulate_episodes(initial, pair_of_state, row_ptr, cols, cumprobs,
                      reach, avoid, episodes, horizon, seed):
    """Count episodes that reach `reach` before `avoid` within `horizon` steps.

    Selection rule: with u uniform in [0,1), pick the first entry of the row
    whose cumulative probability exceeds u, else the last entry. One uniform
    is drawn per step from the episode's own splitmix64 stream, so outcomes
    do not depend on batching order.
    """
    reach = np.asarray(reach, dtype=bool)
    avoid = np.asarray(avoid, dtype=bool)
    if reach[initial]:
        return int(episodes)
    if avoid[initial]:
        return 0

    rng = episode_streams(seed, episodes)
    states = np.full(episodes, initial, dtype=np.int64)
    active = np.arange(episodes, dtype=np.int64)
    successes = 0
    max_width = int(np.max(np.diff(row_ptr)))

    for _ in range(horizon):
        if len(active) == 0:
            break
        st = rng[active] + _GOLDEN
        u = (_finalize(st) >> np.uint64(11)).astype(np.float64) * _U53
        rng[active] = st

        pairs = pair_of_state[states[active]]
        lo = row_ptr[pairs]
        hi = row_ptr[pairs + 1]
        sel = hi - 1
        # Descending overwrite leaves the first in-row hit in sel.
        for j in range(max_width - 1, -1, -1):
            pos = lo + j
            valid = pos < hi
            pos_c = np.where(valid, pos, 0)
            hit = valid & (cumprobs[pos_c] > u)
            sel = np.where(hit, pos_c, sel)
        nxt = cols[sel]

        done_win = reach[nxt]
        done_lose = avoid[nxt]
        successes += int(done_win.sum())
        states[active] = nxt
        active = active[~(done_win | done_lose)]

    return successes
