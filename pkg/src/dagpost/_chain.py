"""Bitmask kernels for single-edge-toggle chains over DAG space.

A state is an int64 array ``par`` of length d where bit i of ``par[j]`` is set
iff i is a parent of j. Toggles are enumerated in row-major order over the
off-diagonal positions (j, i), which matches ``dags.neighbors``.
"""

import numpy as np
from numba import njit

MAX_KERNEL_D = 16


@njit(cache=True)
def ancestors(par):
    d = par.shape[0]
    anc = par.copy()
    changed = True
    while changed:
        changed = False
        for j in range(d):
            acc = anc[j]
            m = anc[j]
            i = 0
            while m:
                if m & 1:
                    acc |= anc[i]
                m >>= 1
                i += 1
            if acc != anc[j]:
                anc[j] = acc
                changed = True
    return anc


@njit(cache=True)
def neighbor_count(par):
    d = par.shape[0]
    anc = ancestors(par)
    count = 0
    for j in range(d):
        for i in range(d):
            if i == j:
                continue
            if (par[j] >> i) & 1:
                count += 1
            elif not ((anc[i] >> j) & 1):
                count += 1
    return count


@njit(cache=True)
def pick_neighbor(par, k):
    """Return the (child, parent) position of the k-th valid toggle."""
    d = par.shape[0]
    anc = ancestors(par)
    seen = 0
    for j in range(d):
        for i in range(d):
            if i == j:
                continue
            valid = ((par[j] >> i) & 1) or not ((anc[i] >> j) & 1)
            if valid:
                if seen == k:
                    return j, i
                seen += 1
    return -1, -1


@njit(cache=True)
def state_score(table, par):
    s = 0.0
    for j in range(par.shape[0]):
        s += table[j, par[j]]
    return s


@njit(cache=True)
def run_segment(table, par, score, n_cur, u_prop, u_acc, t0, burn_in, thin,
                hastings, out_states, out_scores, out_pos, absence_counts):
    """Advance the chain len(u_prop) steps in place.

    Returns the updated (score, neighbor count, accepted moves, out_pos).
    """
    d = par.shape[0]
    accepted = 0
    for k in range(u_prop.shape[0]):
        idx = int(u_prop[k] * n_cur)
        if idx >= n_cur:
            idx = n_cur - 1
        j, i = pick_neighbor(par, idx)
        old = par[j]
        new = old ^ (np.int64(1) << i)
        delta = table[j, new] - table[j, old]
        par[j] = new
        n_cand = neighbor_count(par)
        log_alpha = delta
        if hastings:
            log_alpha += np.log(n_cur) - np.log(n_cand)
        if log_alpha >= 0.0 or u_acc[k] < np.exp(log_alpha):
            score += delta
            n_cur = n_cand
            accepted += 1
        else:
            par[j] = old
        t = t0 + k + 1
        if t > burn_in and (t - burn_in - 1) % thin == 0:
            for a in range(d):
                out_states[out_pos, a] = par[a]
            out_scores[out_pos] = score
            out_pos += 1
            for a in range(d):
                for b in range(a):
                    if not ((par[a] >> b) & 1) and not ((par[b] >> a) & 1):
                        absence_counts[a, b] += 1
    return score, n_cur, accepted, out_pos
