"""Reference constructors: Hall-regime greedy, exhaustive search, random J.

hall_greedy extends the mate one row at a time by a perfect matching of the
legality graph (column/symbol pairs not conflicting with the prefix).  Each
placed row excludes at most two symbols per column and two columns per
symbol, so after t rows the graph has minimum degree n - 2t; for m <= n/4
that stays >= n/2 and a matching always exists.

backtrack_mate answers the existence question outright at desk scale by
depth-first search over legal rows in lexicographic symbol order with
forward checking.

random_latin_rectangle extends a random prefix row by row; the availability
graph after t rows is (n - t)-regular, so an extension always exists.  The
sampler is "extension-random", not uniform over all Latin rectangles
(uniform sampling is a known hard problem); the first row is an exactly
uniform random permutation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import LatinRectangle, OrthomateError, Shape
from .bipartite import hopcroft_karp


class NoPerfectMatching(OrthomateError):
    """Legality graph of the active row has no perfect matching."""


class LimitExceeded(OrthomateError):
    """Backtracking node budget exhausted."""


@dataclass(frozen=True)
class LegalityGraph:
    """Allowed (column, symbol) pairs for the active row of a mate prefix."""

    t: int
    allowed: np.ndarray  # (n, n) bool

    def min_degree(self) -> int:
        return int(min(self.allowed.sum(axis=0).min(),
                       self.allowed.sum(axis=1).min()))


def _as_rng(rng: Union[int, np.random.Generator, None]) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def build_legality_graph(J: LatinRectangle, prefix: np.ndarray, t: int
                         ) -> LegalityGraph:
    """Legal pairs at row t given the first t placed rows of the mate.

    (k, g) is allowed unless some earlier row already put g in column k or
    put g on the diagonal of J that passes through cell (t, k).
    """
    n = J.shape.n
    allowed = np.ones((n, n), dtype=bool)
    inv = J.row_inverse()
    cols = np.arange(n)
    for s in range(t):
        allowed[cols, prefix[s]] = False
        # column of row s on the diagonal through (t, k) is inv[s, J[t, k]]
        diag_cols = inv[s, J.grid[t]]
        allowed[cols, prefix[s][diag_cols]] = False
    return LegalityGraph(t=t, allowed=allowed)


def hall_greedy(J: LatinRectangle, m: Optional[int] = None,
                rng: Union[int, np.random.Generator, None] = 0
                ) -> LatinRectangle:
    """Row-by-row perfect-matching extension of an orthogonal mate.

    Guaranteed to succeed for m <= n/4; may legitimately fail beyond.

    Args:
        J: reference rectangle; only its first m rows are mated.
        m: number of rows to build (defaults to all of J's rows).
        rng: seed or generator; randomizes the matching vertex order.

    Raises:
        NoPerfectMatching: some row's legality graph has no perfect matching
            (only possible when m > n/4).
    """
    rng = _as_rng(rng)
    n = J.shape.n
    m = J.shape.m if m is None else m
    if m > J.shape.m:
        raise ValueError(f"m={m} exceeds J's row count {J.shape.m}")
    grid = np.zeros((m, n), dtype=np.int64)
    for t in range(m):
        graph = build_legality_graph(J, grid, t)
        sym_order = rng.permutation(n)
        col_order = rng.permutation(n)
        adj = [sym_order[graph.allowed[k, sym_order]].tolist() for k in range(n)]
        match = hopcroft_karp(adj, n, order=col_order)
        if (match < 0).any():
            raise NoPerfectMatching(
                f"row {t}: legality graph has no perfect matching "
                f"(min degree {graph.min_degree()})"
            )
        grid[t] = match
    if m == J.shape.m:
        return LatinRectangle(J.shape, grid)
    return LatinRectangle(Shape(n=n, m=m), grid)


def random_latin_rectangle(n: int, m: int,
                           rng: Union[int, np.random.Generator, None] = 0
                           ) -> LatinRectangle:
    """A random m x n Latin rectangle, built row by row.

    Each row is drawn by shuffled greedy choice over the still-available
    symbols per column, with augmenting-path repair when a column runs out.
    The first row is a uniform random permutation.
    """
    rng = _as_rng(rng)
    if not (1 <= m <= n):
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    avail = np.ones((n, n), dtype=bool)  # symbol g unused in column k
    grid = np.zeros((m, n), dtype=np.int64)
    for t in range(m):
        row = _random_row(avail, rng)
        grid[t] = row
        avail[np.arange(n), row] = False
    return LatinRectangle(Shape(n=n, m=m), grid)


def _random_row(avail: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One perfect matching of the availability graph, greedy + repair."""
    n = avail.shape[0]
    row = np.full(n, -1, dtype=np.int64)
    owner = np.full(n, -1, dtype=np.int64)  # symbol -> column holding it
    for k in rng.permutation(n):
        choices = np.nonzero(avail[k] & (owner < 0))[0]
        if choices.size:
            g = int(rng.choice(choices))
            row[k] = g
            owner[g] = k
        elif not _augment(int(k), avail, row, owner, rng):
            raise AssertionError(
                "availability graph lost Hall's condition; corrupted state")
    return row


def _augment(k: int, avail, row, owner, rng) -> bool:
    """Alternating-path repair assigning column k some symbol."""
    n = avail.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [k]
    parent_sym = {}
    while stack:
        u = stack.pop()
        for g in rng.permutation(np.nonzero(avail[u] & ~seen)[0]):
            g = int(g)
            seen[g] = True
            parent_sym[g] = u
            w = int(owner[g])
            if w < 0:
                # unwind the alternating path
                while True:
                    u2 = parent_sym[g]
                    prev = int(row[u2])
                    row[u2] = g
                    owner[g] = u2
                    if u2 == k:
                        return True
                    g = prev
            else:
                stack.append(w)
    return False


def backtrack_mate(J: LatinRectangle, node_limit: int = 2_000_000
                   ) -> Optional[LatinRectangle]:
    """Exhaustive depth-first search for an orthogonal mate of J.

    Rows are enumerated in lexicographic symbol order, columns left to
    right, with forward checking that every remaining column of the current
    row still has a legal symbol.  Deterministic.  Intended for n <= 7.

    Returns:
        A verified mate, or None once the whole space is exhausted.

    Raises:
        LimitExceeded: node budget spent before exhaustion.
    """
    n, m = J.shape.n, J.shape.m
    inv = J.row_inverse()
    col_used = np.zeros((n, n), dtype=bool)   # [k, g]: g used in column k
    diag_used = np.zeros((n, n), dtype=bool)  # [d, g]: g used on diagonal d
    grid = np.zeros((m, n), dtype=np.int64)
    nodes = 0

    def row_allowed(t: int) -> np.ndarray:
        diag = J.grid[t]  # diagonal through (t, k) is J[t, k]
        return ~(col_used | diag_used[diag, :])

    def search(t: int) -> bool:
        nonlocal nodes
        if t == m:
            return True
        allowed = row_allowed(t)
        row_used = np.zeros(n, dtype=bool)

        def rec(k: int) -> bool:
            nonlocal nodes
            if k == n:
                diag = J.grid[t]
                cols = np.arange(n)
                col_used[cols, grid[t]] = True
                diag_used[diag, grid[t]] = True
                if search(t + 1):
                    return True
                col_used[cols, grid[t]] = False
                diag_used[diag, grid[t]] = False
                return False
            for g in np.nonzero(allowed[k] & ~row_used)[0]:
                nodes += 1
                if nodes > node_limit:
                    raise LimitExceeded(f"node budget {node_limit} exhausted")
                feasible = True
                row_used[g] = True
                grid[t, k] = g
                for k2 in range(k + 1, n):
                    if not (allowed[k2] & ~row_used).any():
                        feasible = False
                        break
                if feasible and rec(k + 1):
                    return True
                row_used[g] = False
            return False

        return rec(0)

    if search(0):
        return LatinRectangle(J.shape, grid.copy())
    return None
