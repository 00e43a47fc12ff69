# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled twin of `purepy`: same algorithm on int64/uint64.

Semantics must match `purepy` bit for bit; the equivalence test drives both
backends over the same encoded profiles. The façade only routes here when
the instance's scaled values fit comfortably in 64 bits.
"""

from libc.stdint cimport int64_t, uint64_t


cdef uint64_t _reach(int n, uint64_t root, const uint64_t* out, uint64_t removed) noexcept nogil:
    cdef uint64_t alive = ~removed
    cdef uint64_t reach = root & alive
    cdef uint64_t frontier = reach
    cdef uint64_t nxt, f
    cdef int v
    while frontier:
        nxt = 0
        f = frontier
        v = 0
        while f:
            if f & 1:
                nxt |= out[v]
            f >>= 1
            v += 1
        nxt &= alive & ~reach
        reach |= nxt
        frontier = nxt
    return reach


cdef int64_t _agent_utility(int n, uint64_t root, const uint64_t* out, uint64_t nilm,
                            const int64_t* welf, const int64_t* expq,
                            const int64_t* true_expq, const int64_t* true_cost,
                            int agent, int mech) noexcept nogil:
    cdef uint64_t one = 1
    cdef uint64_t reach = _reach(n, root, out, 0)
    cdef uint64_t cand = reach & ~nilm
    if cand == 0:
        return 0

    cdef int champ = -1
    cdef int64_t best = 0
    cdef int v
    for v in range(n):
        if (cand >> v) & 1:
            if champ < 0 or welf[v] > best:
                champ = v
                best = welf[v]
    if best < 0:
        return 0

    cdef int crit_v[64]
    cdef uint64_t crit_rw[64]
    cdef int crit_n = 0
    cdef uint64_t m = reach & ~(one << champ)
    cdef uint64_t rw
    for v in range(n):
        if (m >> v) & 1:
            rw = _reach(n, root, out, one << v)
            if not ((rw >> champ) & 1):
                crit_v[crit_n] = v
                crit_rw[crit_n] = rw
                crit_n += 1

    cdef int dom[64]
    cdef int i, j
    for i in range(crit_n):
        dom[i] = 0
        for j in range(crit_n):
            if j != i and not ((crit_rw[i] >> crit_v[j]) & 1):
                dom[i] += 1

    # order critical agents by (dominated count desc, id asc); ids already ascend
    cdef int order[64]
    cdef int key
    for i in range(crit_n):
        order[i] = i
    for i in range(1, crit_n):
        key = order[i]
        j = i - 1
        while j >= 0 and (dom[order[j]] < dom[key]
                          or (dom[order[j]] == dom[key] and crit_v[order[j]] > crit_v[key])):
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = key

    cdef int members[65]
    for i in range(crit_n):
        members[i] = crit_v[order[i]]
    members[crit_n] = champ
    cdef int m_len = crit_n + 1

    cdef int64_t wv[65]
    cdef int64_t best_w
    cdef int mem, u
    cdef uint64_t cw
    for i in range(m_len):
        mem = members[i]
        rw = _reach(n, root, out, one << mem)
        cw = rw & ~nilm & ~(one << mem)
        best_w = 0
        for u in range(n):
            if (cw >> u) & 1 and welf[u] > best_w:
                best_w = welf[u]
        wv[i] = best_w

    cdef int t = m_len
    for i in range(m_len - 1):
        if welf[members[i]] == wv[i + 1]:
            t = i + 1
            break

    cdef int sel = members[t - 1]
    cdef int64_t promised
    if agent == sel:
        promised = expq[agent] if mech == 1 else true_expq[agent]
        return promised - wv[t - 1] - true_cost[agent]
    for i in range(t - 1):
        if members[i] == agent:
            return wv[i + 1] - wv[i]
    return 0


def agent_utility(int n, unsigned long long root, unsigned long long[::1] out,
                  unsigned long long nilm,
                  long long[::1] welf, long long[::1] expq,
                  long long[::1] true_expq, long long[::1] true_cost,
                  int agent, int mech):
    return _agent_utility(n, root, <const uint64_t*>&out[0], nilm,
                          <const int64_t*>&welf[0], <const int64_t*>&expq[0],
                          <const int64_t*>&true_expq[0], <const int64_t*>&true_cost[0],
                          agent, mech)


def scan_deviations(int n, unsigned long long root, unsigned long long[::1] out,
                    unsigned long long nilm,
                    long long[::1] welf, long long[::1] expq,
                    long long[::1] true_expq, long long[::1] true_cost,
                    int agent, int mech,
                    unsigned long long[::1] dev_out, unsigned char[::1] dev_nil,
                    long long[::1] dev_welf, long long[::1] dev_expq):
    cdef uint64_t keep_out = out[agent]
    cdef int64_t keep_welf = welf[agent]
    cdef int64_t keep_expq = expq[agent]
    cdef uint64_t one = 1
    cdef Py_ssize_t j, nd = dev_welf.shape[0]
    cdef Py_ssize_t best_j = -1
    cdef int64_t best_u = 0
    cdef int64_t uu
    cdef uint64_t nm
    with nogil:
        for j in range(nd):
            out[agent] = dev_out[j]
            if dev_nil[j]:
                nm = nilm | (one << agent)
            else:
                nm = nilm & ~(one << agent)
            welf[agent] = dev_welf[j]
            expq[agent] = dev_expq[j]
            uu = _agent_utility(n, root, <const uint64_t*>&out[0], nm,
                                <const int64_t*>&welf[0], <const int64_t*>&expq[0],
                                <const int64_t*>&true_expq[0], <const int64_t*>&true_cost[0],
                                agent, mech)
            if best_j < 0 or uu > best_u:
                best_j = j
                best_u = uu
        out[agent] = keep_out
        welf[agent] = keep_welf
        expq[agent] = keep_expq
    return best_j, best_u
