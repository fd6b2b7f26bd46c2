"""Max-flow solvers for the column/symbol transport network.

The network has a source feeding every column with unit capacity, every
symbol draining into a sink with unit capacity, and middle edges
column k -> symbol g carrying the prescribed capacities.  A fractional
perfect matching within those capacities exists iff the max flow equals n.

Two solvers share this contract:

* a pure shortest-augmenting-path (Dinic) solver, generic over the number
  type, so it runs both in float64 (augmenting tolerance 1e-12) and in exact
  Fraction arithmetic (tolerance 0);
* an integer-scaled scipy solver for larger instances.  scipy's Dinic
  silently misbehaves once any capacity reaches 2**31, so capacities are
  floor-scaled by a power of two kept below that limit.  Scaling makes the
  feasibility verdict conservative in a narrow band; verdicts inside the
  band are reported as ambiguous and the caller re-solves exactly.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

AUGMENT_TOL = 1e-12


class _Net:
    """Adjacency-list flow network with paired reverse edges."""

    def __init__(self, n_nodes: int):
        self.head = [[] for _ in range(n_nodes)]
        self.to = []
        self.cap = []

    def add_edge(self, u: int, v: int, c) -> int:
        eid = len(self.to)
        self.to.append(v)
        self.cap.append(c)
        self.head[u].append(eid)
        self.to.append(u)
        self.cap.append(0)
        self.head[v].append(eid + 1)
        return eid


def _dinic(net: _Net, src: int, snk: int, tol):
    """Blocking-flow phases until no augmenting path of residual > tol remains."""
    n_nodes = len(net.head)
    total = 0
    while True:
        level = [-1] * n_nodes
        level[src] = 0
        queue = [src]
        for u in queue:
            for eid in net.head[u]:
                v = net.to[eid]
                if level[v] < 0 and net.cap[eid] > tol:
                    level[v] = level[u] + 1
                    queue.append(v)
        if level[snk] < 0:
            return total
        it = [0] * n_nodes

        def push(u, limit):
            if u == snk:
                return limit
            while it[u] < len(net.head[u]):
                eid = net.head[u][it[u]]
                v = net.to[eid]
                if net.cap[eid] > tol and level[v] == level[u] + 1:
                    got = push(v, min(limit, net.cap[eid]))
                    if got > tol:
                        net.cap[eid] -= got
                        net.cap[eid ^ 1] += got
                        return got
                it[u] += 1
            level[u] = -1
            return 0

        while True:
            pushed = push(src, float("inf"))
            if pushed <= tol:
                break
            total = total + pushed


def solve_transport(mid_caps, one=1.0, tol: float = AUGMENT_TOL):
    """Max flow of the transport network, generic arithmetic.

    Args:
        mid_caps: n x n capacities, indexed [column, symbol].  Any number
            type supporting +, -, comparison (float, Fraction).
        one: the unit capacity of source/sink edges in the same number type.
        tol: residual threshold; 0 for exact arithmetic.

    Returns:
        (value, flow) where flow[k][g] is the flow on the middle edge.
    """
    n = len(mid_caps)
    src, snk = 2 * n, 2 * n + 1
    net = _Net(2 * n + 2)
    src_edges = [net.add_edge(src, k, one) for k in range(n)]
    snk_edges = [net.add_edge(n + g, snk, one) for g in range(n)]
    mid_edges = {}
    for k in range(n):
        row = mid_caps[k]
        for g in range(n):
            c = row[g]
            if c > tol:
                mid_edges[(k, g)] = net.add_edge(k, n + g, c)
    value = _dinic(net, src, snk, tol)
    zero = one - one
    flow = [[zero] * n for _ in range(n)]
    for (k, g), eid in mid_edges.items():
        flow[k][g] = net.cap[eid ^ 1]  # reverse capacity equals pushed flow
    return value, flow


def scipy_transport(mid_caps: np.ndarray) -> Tuple[str, Optional[np.ndarray]]:
    """Integer-scaled scipy max flow.

    Returns ("feasible", q) with q exactly doubly stochastic up to float
    summation, ("infeasible", None), or ("ambiguous", None) when the scaled
    verdict falls inside the rounding band and an exact solver must decide.
    """
    import scipy.sparse as sp
    from scipy.sparse.csgraph import maximum_flow

    n = mid_caps.shape[0]
    cmax = float(mid_caps.max(initial=0.0))
    # largest power of two keeping every capacity strictly below 2**31
    s = 30
    while cmax * (1 << s) >= 2 ** 31 - 1 and s > 1:
        s -= 1
    scale = 1 << s
    mid_int = np.floor(mid_caps * scale).astype(np.int64)
    src, snk = 2 * n, 2 * n + 1
    kk, gg = np.nonzero(mid_int > 0)
    rows = np.concatenate([np.full(n, src), np.arange(n) + n, kk])
    cols = np.concatenate([np.arange(n), np.full(n, snk), gg + n])
    data = np.concatenate(
        [
            np.full(n, scale, dtype=np.int64),
            np.full(n, scale, dtype=np.int64),
            mid_int[kk, gg],
        ]
    )
    graph = sp.csr_matrix((data, (rows, cols)), shape=(2 * n + 2, 2 * n + 2))
    res = maximum_flow(graph, src, snk)
    full = n * scale
    if res.flow_value == full:
        q = res.flow.toarray()[0:n, n : 2 * n].astype(np.float64) / scale
        return "feasible", q
    # flooring can have cost at most one unit per positive middle edge on
    # any cut, so a deficit beyond that certifies true infeasibility
    if res.flow_value < full - int(len(kk)):
        return "infeasible", None
    return "ambiguous", None
