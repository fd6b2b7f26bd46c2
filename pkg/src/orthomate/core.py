"""Domain types for Latin rectangles: points, lines, exact verifiers, I/O.

An m x n Latin rectangle assigns one of n symbols to each cell of an
m x n grid so that every row contains each symbol exactly once and every
column contains each symbol at most once.  Two rectangles J, L on the same
grid are orthogonal when the mn ordered pairs (J(i,k), L(i,k)) are all
distinct; equivalently, every L-colour class is a partial transversal
of J.

Everything here is immutable after construction and safe to share across
parallel runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np


class OrthomateError(Exception):
    """Base class for all package errors."""


class ParseError(OrthomateError):
    """Malformed rectangle text."""


class NotLatin(OrthomateError):
    """A grid violates the Latin rectangle invariants."""


class ShapeMismatch(OrthomateError):
    """Two rectangles do not share the same (m, n)."""


class NotOrthogonal(OrthomateError):
    """An operation required an orthogonal pair and did not get one."""


class IndexOutOfRange(OrthomateError):
    """A line or point index is outside the grid."""


@dataclass(frozen=True)
class Shape:
    """Grid dimensions: n columns (= symbols), m <= n rows."""

    n: int
    m: int

    def __post_init__(self):
        if not (1 <= self.m <= self.n):
            raise ValueError(f"need 1 <= m <= n, got m={self.m}, n={self.n}")

    @property
    def epsilon(self) -> float:
        """Row deficit 1 - m/n, in [0, 1)."""
        return 1.0 - self.m / self.n


class Point(NamedTuple):
    """A (row, column, symbol) triple."""

    row: int
    col: int
    sym: int


#: Line classes.  RC and RS lines live inside a single row ("local" lines);
#: CS and DS lines run across rows ("central" lines).  A DS line is indexed
#: by a diagonal of the reference rectangle J, i.e. a J-colour class.
LINE_CLASSES = ("RC", "RS", "CS", "DS")


@dataclass(frozen=True)
class LineId:
    """A line: all points with two coordinates fixed.

    Interpretation of (first, second) by class:
      RC: (row, col)   RS: (row, sym)   CS: (col, sym)   DS: (diagonal, sym)
    """

    cls: str
    first: int
    second: int

    def __post_init__(self):
        if self.cls not in LINE_CLASSES:
            raise ValueError(f"unknown line class {self.cls!r}")


@dataclass(frozen=True)
class LatinRectangle:
    """An m x n grid of symbol indices in [0, n), row-Latin, column-injective."""

    shape: Shape
    grid: np.ndarray = field(repr=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.int64)
        if g.shape != (self.shape.m, self.shape.n):
            raise NotLatin(
                f"grid shape {g.shape} does not match (m, n)="
                f"({self.shape.m}, {self.shape.n})"
            )
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)
        rep = verify_latin_grid(g, self.shape.n)
        if not rep.ok:
            raise NotLatin(rep.violations[0])

    @classmethod
    def cyclic(cls, n: int, m: Optional[int] = None) -> "LatinRectangle":
        """The first m rows of the cyclic square L(i,k) = (i + k) mod n."""
        m = n if m is None else m
        i, k = np.ogrid[0:m, 0:n]
        return cls(Shape(n=n, m=m), (i + k) % n)

    def row_inverse(self) -> np.ndarray:
        """inv[i, s] = the column of symbol s in row i."""
        m, n = self.grid.shape
        inv = np.empty((m, n), dtype=np.int64)
        rows = np.repeat(np.arange(m), n)
        inv[rows, self.grid.ravel()] = np.tile(np.arange(n), m)
        return inv

    def to_text(self) -> str:
        return "\n".join(" ".join(str(int(v)) for v in row) for row in self.grid) + "\n"

    def to_json(self) -> dict:
        return {
            "n": self.shape.n,
            "m": self.shape.m,
            "grid": self.grid.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LatinRectangle":
        return cls(Shape(n=int(obj["n"]), m=int(obj["m"])), np.array(obj["grid"]))


@dataclass(frozen=True)
class PartialTransversal:
    """Cells with pairwise distinct rows, columns and J-symbols."""

    cells: tuple

    def check_against(self, ref: LatinRectangle) -> bool:
        rows = [r for r, _ in self.cells]
        cols = [c for _, c in self.cells]
        syms = [int(ref.grid[r, c]) for r, c in self.cells]
        return (
            len(set(rows)) == len(rows)
            and len(set(cols)) == len(cols)
            and len(set(syms)) == len(syms)
        )


@dataclass(frozen=True)
class VerifyReport:
    """Outcome of a verifier; lists every violation rather than only the first."""

    ok: bool
    violations: tuple = ()


def parse_rectangle(text: str) -> LatinRectangle:
    """Parse a whitespace/comma separated integer grid and validate it.

    Args:
        text: m lines of n entries each.

    Raises:
        ParseError: malformed grid (ragged rows, non-integers, empty input).
        NotLatin: the grid is rectangular but violates a Latin invariant.
    """
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        try:
            rows.append([int(p) for p in parts])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: non-integer entry ({exc})") from None
    if not rows:
        raise ParseError("empty grid")
    n = len(rows[0])
    for idx, row in enumerate(rows):
        if len(row) != n:
            raise ParseError(f"row {idx} has {len(row)} entries, expected {n}")
    grid = np.array(rows, dtype=np.int64)
    m = grid.shape[0]
    if m > n:
        raise NotLatin(f"more rows ({m}) than columns ({n})")
    if grid.min() < 0 or grid.max() >= n:
        bad = np.argwhere((grid < 0) | (grid >= n))[0]
        raise NotLatin(f"symbol out of range at cell ({bad[0]}, {bad[1]})")
    return LatinRectangle(Shape(n=n, m=m), grid)


def verify_latin_grid(grid: np.ndarray, n: int) -> VerifyReport:
    """Check the two Latin invariants on a raw grid (internal helper)."""
    violations = []
    m = grid.shape[0]
    if grid.min(initial=0) < 0 or grid.max(initial=0) >= n:
        violations.append("symbol index outside [0, n)")
        return VerifyReport(False, tuple(violations))
    for i in range(m):
        counts = np.bincount(grid[i], minlength=n)
        for s in np.nonzero(counts != 1)[0]:
            violations.append(
                f"row {i}: symbol {int(s)} occurs {int(counts[s])} times, expected 1"
            )
    for k in range(grid.shape[1]):
        counts = np.bincount(grid[:, k], minlength=n)
        for s in np.nonzero(counts > 1)[0]:
            violations.append(
                f"column {k}: symbol {int(s)} occurs {int(counts[s])} times, expected <= 1"
            )
    return VerifyReport(not violations, tuple(violations))


def verify_latin(rect: LatinRectangle) -> VerifyReport:
    """Verify the row-exactness and column-injectivity invariants."""
    return verify_latin_grid(rect.grid, rect.shape.n)


def verify_orthogonal(L: LatinRectangle, J: LatinRectangle) -> VerifyReport:
    """Check that all mn ordered pairs (J(i,k), L(i,k)) are distinct.

    Raises:
        ShapeMismatch: the rectangles differ in (m, n).
    """
    if L.shape != J.shape:
        raise ShapeMismatch(
            f"L is {L.shape.m}x{L.shape.n}, J is {J.shape.m}x{J.shape.n}"
        )
    n = L.shape.n
    codes = J.grid.astype(np.int64) * n + L.grid.astype(np.int64)
    counts = np.bincount(codes.ravel(), minlength=n * n)
    violations = []
    for code in np.nonzero(counts > 1)[0]:
        violations.append(
            f"pair (J={code // n}, L={code % n}) occurs {int(counts[code])} times"
        )
    return VerifyReport(not violations, tuple(violations))


def line_members(line: LineId, shape: Shape, J: Optional[LatinRectangle] = None):
    """All points on a line, in index order.

    RC and RS lines have n points, CS and DS lines have m points.  The
    reference rectangle J is required only for DS lines, whose diagonal is
    the J-colour class of the given symbol value.

    Raises:
        IndexOutOfRange: indices invalid for the class.
        ValueError: DS line requested without J.
    """
    n, m = shape.n, shape.m
    a, b = line.first, line.second
    if line.cls == "RC":
        if not (0 <= a < m and 0 <= b < n):
            raise IndexOutOfRange(f"RC line ({a}, {b}) outside {m}x{n}")
        return [Point(a, b, s) for s in range(n)]
    if line.cls == "RS":
        if not (0 <= a < m and 0 <= b < n):
            raise IndexOutOfRange(f"RS line ({a}, {b}) outside {m}x{n}")
        return [Point(a, k, b) for k in range(n)]
    if line.cls == "CS":
        if not (0 <= a < n and 0 <= b < n):
            raise IndexOutOfRange(f"CS line ({a}, {b}) outside n={n}")
        return [Point(i, a, b) for i in range(m)]
    # DS: one cell of the diagonal per row
    if J is None:
        raise ValueError("DS line membership requires the reference rectangle J")
    if not (0 <= a < n and 0 <= b < n):
        raise IndexOutOfRange(f"DS line ({a}, {b}) outside n={n}")
    inv = J.row_inverse()
    return [Point(i, int(inv[i, a]), b) for i in range(m)]


def extract_transversals(L: LatinRectangle, J: LatinRectangle):
    """Split J's grid into the n partial transversals cut out by L's colours.

    Returns one PartialTransversal per L-symbol, each of size m, pairwise
    disjoint, together covering all m*n cells.

    Raises:
        NotOrthogonal: the pair fails verify_orthogonal.
    """
    rep = verify_orthogonal(L, J)
    if not rep.ok:
        raise NotOrthogonal("; ".join(rep.violations))
    n = L.shape.n
    out = []
    for s in range(n):
        rows, cols = np.nonzero(L.grid == s)
        cells = tuple((int(r), int(c)) for r, c in zip(rows, cols))
        out.append(PartialTransversal(cells))
    return out
