"""Pure-Python (numpy) implementation of the Fock-space kernels.

Mirrors ``_fock.pyx``; used when the compiled extension is unavailable or
``TWOPROBE_PURE_PYTHON`` is set.

States are ``uint8`` rows in descending-lexicographic order, so
``(N, 0, ..., 0)`` has index 0.  ``counts[s, r]`` is the number of ways to
place r bosons on s sites under the cap; ``offsets[i, r, v]`` is the number
of states that precede value v at site i given r bosons left to place.
"""
import numpy as np


def enumerate_states(num_sites, num_particles, n_max, counts):
    M = num_sites
    dim = int(counts[M, num_particles])
    idx = np.arange(dim, dtype=np.int64)
    remaining = np.full(dim, num_particles, dtype=np.int64)
    states = np.zeros((dim, M), dtype=np.uint8)
    for i in range(M):
        rest = M - i - 1
        undecided = np.ones(dim, dtype=bool)
        for v in range(n_max, -1, -1):
            left = remaining - v
            block = np.where(left >= 0, counts[rest, np.clip(left, 0, None)], 0)
            take = undecided & (idx < block)
            states[take, i] = v
            skip = undecided & ~take
            idx[skip] -= block[skip]
            undecided &= ~take
        remaining -= states[:, i]
    return states


def rank_states(states, offsets):
    states = np.asarray(states)
    remaining = states.sum(axis=1, dtype=np.int64)
    rank = np.zeros(states.shape[0], dtype=np.int64)
    for i in range(states.shape[1]):
        v = states[:, i].astype(np.int64)
        rank += offsets[i, remaining, v]
        remaining -= v
    return rank


def hopping_elements(states, bonds, n_max, offsets):
    """Matrix elements of ``a_i^dag a_j`` for both directions of every bond.

    Returns ``(rows, cols, amplitudes)`` with amplitude ``sqrt((n_i+1) n_j)``
    evaluated on the column state.
    """
    states = np.asarray(states)
    src_rank = rank_states(states, offsets)
    rows, cols, vals = [], [], []
    for a, b in np.asarray(bonds, dtype=np.int64).reshape(-1, 2):
        for i, j in ((a, b), (b, a)):
            ni = states[:, i].astype(np.int64)
            nj = states[:, j].astype(np.int64)
            mask = (nj > 0) & (ni < n_max)
            moved = states[mask]
            moved[:, i] += 1
            moved[:, j] -= 1
            rows.append(rank_states(moved, offsets))
            cols.append(src_rank[mask])
            vals.append(np.sqrt(((ni[mask] + 1) * nj[mask]).astype(np.float64)))
    if not rows:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
