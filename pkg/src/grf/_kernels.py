"""Compiled inner loops for the terminating random walks.

Randomness comes from a counter-based SplitMix64 stream keyed by a per-row
seed and the walk index, so every (node, walk) pair owns an independent
stream and results do not depend on how rows are split across threads.
"""

import numpy as np
from numba import njit

UNIFORM, WEIGHTED, REINFORCED = 0, 1, 2

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(inline="always")
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(inline="always")
def _uniform(state):
    # state is a length-1 uint64 array advanced in place
    state[0] += _GOLDEN
    return np.float64(_mix(state[0]) >> _S11) * _INV53


def derive_seeds(master, keys) -> np.ndarray:
    """Vectorized seed derivation mix(mix(master) ^ mix(key + golden)).

    ``master`` and ``keys`` broadcast against each other.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    m = np.asarray(master, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix_np(_mix_np(m) ^ _mix_np(keys + _GOLDEN))


def _mix_np(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


@njit(nogil=True, cache=True)
def neighbor_probabilities(offsets, values, cumw, counts, stamp, epoch, v, sampler, alpha):
    """Exact neighbor-choice probabilities at v under the given strategy."""
    lo, hi = offsets[v], offsets[v + 1]
    deg = hi - lo
    out = np.empty(deg)
    if sampler == UNIFORM:
        out[:] = 1.0 / deg
    elif sampler == WEIGHTED:
        total = cumw[hi - 1]
        for k in range(deg):
            out[k] = values[lo + k] / total
    else:
        total = 0.0
        for k in range(deg):
            c = counts[lo + k] if stamp[lo + k] == epoch else 0
            out[k] = (1.0 + c) ** (-alpha)
            total += out[k]
        out /= total
    return out


@njit(inline="always")
def _choose(offsets, neighbors, values, cumw, counts, stamp, epoch, v, sampler, alpha, state):
    lo, hi = offsets[v], offsets[v + 1]
    deg = hi - lo
    r = _uniform(state)
    if sampler == UNIFORM:
        k = int(r * deg)
        if k >= deg:
            k = deg - 1
        return lo + k, 1.0 / deg
    if sampler == WEIGHTED:
        total = cumw[hi - 1]
        target = r * total
        a, b = lo, hi - 1
        while a < b:
            mid = (a + b) // 2
            if cumw[mid] > target:
                b = mid
            else:
                a = mid + 1
        return a, values[a] / total
    total = 0.0
    for e in range(lo, hi):
        c = counts[e] if stamp[e] == epoch else 0
        total += (1.0 + c) ** (-alpha)
    target = r * total
    acc = 0.0
    chosen = hi - 1
    for e in range(lo, hi):
        c = counts[e] if stamp[e] == epoch else 0
        acc += (1.0 + c) ** (-alpha)
        if acc > target:
            chosen = e
            break
    c = counts[chosen] if stamp[chosen] == epoch else 0
    return chosen, (1.0 + c) ** (-alpha) / total


@njit(inline="always")
def _bump(counts, stamp, epoch, e):
    if stamp[e] != epoch:
        stamp[e] = epoch
        counts[e] = 0
    counts[e] += 1


@njit(nogil=True, cache=True)
def walk_rows(offsets, neighbors, values, cumw, reverse, sources, row_seeds,
              p_term, m, sampler, alpha, max_steps, col_map, row_scale, out):
    """Run Algorithm-1 walks for each source; write scaled loads into out.

    out[r, col_map[x]] accumulates the loads deposited at node x by the m
    walks from sources[r]; nodes with col_map[x] < 0 are skipped (anchors).
    Returns per-row (transition count, truncated-walk count).
    """
    nnz = len(neighbors)
    counts = np.zeros(nnz, dtype=np.int64)
    stamp = np.full(nnz, -1, dtype=np.int64)
    steps_out = np.zeros(len(sources), dtype=np.int64)
    trunc_out = np.zeros(len(sources), dtype=np.int64)
    state = np.zeros(1, dtype=np.uint64)
    keep = 1.0 - p_term
    for r in range(len(sources)):
        i = sources[r]
        epoch = r  # history is per source node
        total_steps = 0
        truncated = 0
        for t in range(m):
            state[0] = _mix(row_seeds[r] ^ _mix(np.uint64(t) + _GOLDEN))
            load = 1.0
            v = i
            col = col_map[i]
            if col >= 0:
                out[r, col] += 1.0
            steps = 0
            while offsets[v + 1] > offsets[v]:
                if _uniform(state) < p_term:
                    break
                if steps >= max_steps:
                    truncated += 1
                    break
                e, p = _choose(offsets, neighbors, values, cumw, counts, stamp,
                               epoch, v, sampler, alpha, state)
                w = neighbors[e]
                load = load * values[e] / (p * keep)
                col = col_map[w]
                if col >= 0:
                    out[r, col] += load
                if sampler == REINFORCED:
                    _bump(counts, stamp, epoch, e)
                    _bump(counts, stamp, epoch, reverse[e])
                v = w
                steps += 1
            total_steps += steps
        for c in range(out.shape[1]):
            out[r, c] *= row_scale
        steps_out[r] = total_steps
        trunc_out[r] = truncated
    return steps_out, trunc_out
