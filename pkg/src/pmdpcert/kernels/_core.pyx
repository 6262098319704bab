# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot numeric kernels.

Semantics match pmdpcert.kernels._pure: the simulator is bit-identical
(same splitmix64 streams, same selection rule); value iteration agrees up
to float summation order.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

IMPL = "cython"

cdef unsigned long long GOLDEN = 0x9E3779B97F4A7C15ULL
cdef unsigned long long MIX1 = 0xBF58476D1CE4E5B9ULL
cdef unsigned long long MIX2 = 0x94D049BB133111EBULL
cdef double U53 = 1.0 / 9007199254740992.0


cdef inline unsigned long long _finalize(unsigned long long z) nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


def episode_streams(seed, episodes):
    """Initial splitmix64 state per episode; identical across kernel paths."""
    cdef unsigned long long base = <unsigned long long>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    base = base * GOLDEN
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.empty(episodes, dtype=np.uint64)
    cdef Py_ssize_t i
    cdef unsigned long long st
    for i in range(episodes):
        st = base + (<unsigned long long>(i + 1)) * MIX1
        out[i] = _finalize(_finalize(st))
    return out


def value_iteration(cnp.ndarray[cnp.int64_t, ndim=1] act_ptr,
                    cnp.ndarray[cnp.int64_t, ndim=1] row_ptr,
                    cnp.ndarray[cnp.int64_t, ndim=1] cols,
                    cnp.ndarray[cnp.float64_t, ndim=1] probs,
                    frozen, x0, double epsilon, long max_iterations):
    """Bellman iteration on non-frozen states; see the pure kernel docstring."""
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] frz = \
        np.ascontiguousarray(frozen, dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = \
        np.array(x0, dtype=np.float64, copy=True)
    cdef Py_ssize_t n = act_ptr.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xn = np.empty(n, dtype=np.float64)

    cdef double residual = np.inf
    cdef long iterations = 0
    cdef Py_ssize_t s, a, t
    cdef double best, acc, diff
    cdef bint mono_ok = True

    while iterations < max_iterations:
        residual = 0.0
        with nogil:
            for s in range(n):
                if frz[s]:
                    xn[s] = x[s]
                    continue
                best = -1.0
                for a in range(act_ptr[s], act_ptr[s + 1]):
                    acc = 0.0
                    for t in range(row_ptr[a], row_ptr[a + 1]):
                        acc += probs[t] * x[cols[t]]
                    if acc > best:
                        best = acc
                if best > 1.0:
                    best = 1.0
                xn[s] = best
                diff = best - x[s]
                if diff < 0.0:
                    mono_ok = False
                if diff > residual:
                    residual = diff
            for s in range(n):
                x[s] = xn[s]
        if not mono_ok:
            raise AssertionError("value iteration lost monotonicity")
        iterations += 1
        if residual < epsilon:
            break
    return np.asarray(x), iterations, residual


def backup_pairs(cnp.ndarray[cnp.int64_t, ndim=1] row_ptr,
                 cnp.ndarray[cnp.int64_t, ndim=1] cols,
                 cnp.ndarray[cnp.float64_t, ndim=1] probs,
                 x):
    """One Bellman backup per state-action pair (used for argmax extraction)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = \
        np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t m = row_ptr.shape[0] - 1
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m, dtype=np.float64)
    cdef Py_ssize_t k, t
    cdef double acc
    with nogil:
        for k in range(m):
            acc = 0.0
            for t in range(row_ptr[k], row_ptr[k + 1]):
                acc += probs[t] * xv[cols[t]]
            out[k] = acc
    return out


def simulate_episodes(long initial,
                      cnp.ndarray[cnp.int64_t, ndim=1] pair_of_state,
                      cnp.ndarray[cnp.int64_t, ndim=1] row_ptr,
                      cnp.ndarray[cnp.int64_t, ndim=1] cols,
                      cnp.ndarray[cnp.float64_t, ndim=1] cumprobs,
                      reach, avoid, long episodes, long horizon, seed):
    """Count episodes that reach `reach` before `avoid` within `horizon` steps."""
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] rch = \
        np.ascontiguousarray(reach, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] avd = \
        np.ascontiguousarray(avoid, dtype=np.uint8)
    if rch[initial]:
        return int(episodes)
    if avd[initial]:
        return 0

    cdef unsigned long long base = <unsigned long long>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    base = base * GOLDEN

    cdef long successes = 0
    cdef Py_ssize_t e
    cdef long step, s, pair, lo, hi, t, sel
    cdef unsigned long long st, z
    cdef double u

    with nogil:
        for e in range(episodes):
            st = _finalize(_finalize(base + (<unsigned long long>(e + 1)) * MIX1))
            s = initial
            for step in range(horizon):
                st = st + GOLDEN
                z = _finalize(st)
                u = <double>(z >> 11) * U53
                pair = pair_of_state[s]
                lo = row_ptr[pair]
                hi = row_ptr[pair + 1]
                sel = hi - 1
                for t in range(lo, hi):
                    if cumprobs[t] > u:
                        sel = t
                        break
                s = cols[sel]
                if rch[s]:
                    successes += 1
                    break
                if avd[s]:
                    break
    return successes
