"""Boykov-Kolmogorov max-flow / min-cut on sparse graphs.

Two search trees grow from the terminals; paths found where they touch are
augmented and the orphaned subtrees are re-adopted. The kernel is compiled
with numba; the graph is passed as plain arrays.
"""

from __future__ import annotations

import numpy as np
from numba import njit

FREE, SOURCE, SINK = 0, 1, 2
_TERMINAL = -1
_ORPHAN = -2
_NONE = -3


@njit(cache=True)
def _origin_ok(j, parent, head, stamp, now):
    k = j
    while True:
        if stamp[k] == now:
            break
        pk = parent[k]
        if pk == _TERMINAL:
            break
        if pk == _ORPHAN or pk == _NONE:
            return False
        k = head[pk]
    k = j
    while stamp[k] != now:
        stamp[k] = now
        pk = parent[k]
        if pk == _TERMINAL:
            break
        k = head[pk]
    return True


@njit(cache=True)
def _bk(n, head, rcap, adj_start, adj_arcs, tr):
    tree = np.zeros(n, np.int8)
    parent = np.full(n, _NONE, np.int64)
    stamp = np.zeros(n, np.int64)
    queue = np.empty(n + 1, np.int64)
    inq = np.zeros(n, np.bool_)
    qh = 0
    qt = 0
    qlen = 0
    orphans = np.empty(n, np.int64)
    flow = 0.0
    now = 0

    for i in range(n):
        if tr[i] > 0.0:
            tree[i] = SOURCE
        elif tr[i] < 0.0:
            tree[i] = SINK
        else:
            continue
        parent[i] = _TERMINAL
        queue[qt] = i
        qt = (qt + 1) % (n + 1)
        qlen += 1
        inq[i] = True

    while True:
        # growth
        middle = -1
        while qlen > 0:
            i = queue[qh]
            qh = (qh + 1) % (n + 1)
            qlen -= 1
            inq[i] = False
            ti = tree[i]
            if ti == FREE:
                continue
            for k in range(adj_start[i], adj_start[i + 1]):
                a = adj_arcs[k]
                j = head[a]
                cap = rcap[a] if ti == SOURCE else rcap[a ^ 1]
                if cap <= 0.0:
                    continue
                tj = tree[j]
                if tj == FREE:
                    tree[j] = ti
                    parent[j] = a ^ 1
                    if not inq[j]:
                        queue[qt] = j
                        qt = (qt + 1) % (n + 1)
                        qlen += 1
                        inq[j] = True
                elif tj != ti:
                    middle = a if ti == SOURCE else a ^ 1
                    break
            if middle >= 0:
                if not inq[i]:
                    queue[qt] = i
                    qt = (qt + 1) % (n + 1)
                    qlen += 1
                    inq[i] = True
                break
        if middle < 0:
            break

        # augmentation
        p = head[middle ^ 1]
        q = head[middle]
        b = rcap[middle]
        i = p
        while parent[i] != _TERMINAL:
            e = parent[i]
            if rcap[e ^ 1] < b:
                b = rcap[e ^ 1]
            i = head[e]
        if tr[i] < b:
            b = tr[i]
        i = q
        while parent[i] != _TERMINAL:
            e = parent[i]
            if rcap[e] < b:
                b = rcap[e]
            i = head[e]
        if -tr[i] < b:
            b = -tr[i]

        rcap[middle] -= b
        rcap[middle ^ 1] += b
        norph = 0
        i = p
        while parent[i] != _TERMINAL:
            e = parent[i]
            nxt = head[e]
            rcap[e ^ 1] -= b
            rcap[e] += b
            if rcap[e ^ 1] <= 0.0:
                parent[i] = _ORPHAN
                orphans[norph] = i
                norph += 1
            i = nxt
        tr[i] -= b
        if tr[i] <= 0.0:
            parent[i] = _ORPHAN
            orphans[norph] = i
            norph += 1
        i = q
        while parent[i] != _TERMINAL:
            e = parent[i]
            nxt = head[e]
            rcap[e] -= b
            rcap[e ^ 1] += b
            if rcap[e] <= 0.0:
                parent[i] = _ORPHAN
                orphans[norph] = i
                norph += 1
            i = nxt
        tr[i] += b
        if tr[i] >= 0.0:
            parent[i] = _ORPHAN
            orphans[norph] = i
            norph += 1
        flow += b

        # adoption
        now += 1
        while norph > 0:
            norph -= 1
            i = orphans[norph]
            ti = tree[i]
            found = -1
            for k in range(adj_start[i], adj_start[i + 1]):
                a = adj_arcs[k]
                j = head[a]
                if tree[j] != ti:
                    continue
                cap = rcap[a ^ 1] if ti == SOURCE else rcap[a]
                if cap <= 0.0:
                    continue
                if _origin_ok(j, parent, head, stamp, now):
                    found = a
                    break
            if found >= 0:
                parent[i] = found
                stamp[i] = now
                continue
            tree[i] = FREE
            parent[i] = _NONE
            for k in range(adj_start[i], adj_start[i + 1]):
                a = adj_arcs[k]
                j = head[a]
                if tree[j] != ti:
                    continue
                cap = rcap[a ^ 1] if ti == SOURCE else rcap[a]
                if cap > 0.0 and not inq[j]:
                    queue[qt] = j
                    qt = (qt + 1) % (n + 1)
                    qlen += 1
                    inq[j] = True
                pj = parent[j]
                if pj >= 0 and head[pj] == i:
                    parent[j] = _ORPHAN
                    orphans[norph] = j
                    norph += 1
    return flow, tree


def maxflow(n, tails, heads, cap, rev_cap, source_cap, sink_cap):
    """Maximum flow between two terminals on a graph with ``n`` inner nodes.

    Parameters
    ----------
    n : int
        Number of non-terminal nodes.
    tails, heads : array of int
        Endpoints of each undirected edge.
    cap, rev_cap : array of float
        Capacity ``tails -> heads`` and ``heads -> tails``.
    source_cap, sink_cap : array of float
        Terminal link capacities ``s -> i`` and ``i -> t`` (length ``n``).

    Returns
    -------
    flow : float
        Value of the maximum flow (equal to the minimum cut).
    tree : ndarray of int8
        Final search-tree membership. Nodes labelled ``SINK`` can still reach
        the sink in the residual graph; every other node lies on the source
        side of a minimum cut.
    """
    tails = np.asarray(tails, np.int64)
    heads = np.asarray(heads, np.int64)
    m = tails.size
    head = np.empty(2 * m, np.int64)
    head[0::2] = heads
    head[1::2] = tails
    rcap = np.empty(2 * m, np.float64)
    rcap[0::2] = cap
    rcap[1::2] = rev_cap
    tail = np.empty(2 * m, np.int64)
    tail[0::2] = tails
    tail[1::2] = heads
    adj_arcs = np.argsort(tail, kind="stable").astype(np.int64)
    adj_start = np.zeros(n + 1, np.int64)
    np.cumsum(np.bincount(tail, minlength=n), out=adj_start[1:])

    source_cap = np.asarray(source_cap, np.float64)
    sink_cap = np.asarray(sink_cap, np.float64)
    base = float(np.minimum(source_cap, sink_cap).sum())
    tr = source_cap - sink_cap
    flow, tree = _bk(n, head, rcap, adj_start, adj_arcs, tr)
    return base + flow, tree
