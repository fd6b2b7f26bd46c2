"""The guided greedy row process: state vector, kills, goodness region, loop.

The constructor maintains a vector p over all (row, column, symbol) points,
initially 1/n everywhere.  At step t it places row t of the output rectangle:

  1. check the state is good (region Gamma below); stop otherwise,
  2. normalize row t of p per symbol and build a fractional matching q
     with q <= (1 + eta) * d via max flow,
  3. draw a permutation row with expectation q (Birkhoff sampling),
  4. kill every future point whose column/symbol or diagonal/symbol line
     passes through a newly placed cell, and rescale the survivors by the
     conditional survival probability, which makes p a martingale.

Goodness is three families of inequalities with explicit finite-n constants:

  A (pointwise):    p(x) <= 1.1 * eps^-2 / n
  B (local lines):  |sum over an RC or RS line of p - 1| <= log n / sqrt n
  C (quasi-random): sum_g p(i,k,g) * p(i,l,g) <= (1 + log n / sqrt n) / n

B and C are enforced on uncoloured rows, including the row about to be
placed; coloured rows are frozen and no longer constrain the extension.
Logarithms are natural.  The epsilon in A is a free parameter so stress
configurations can decouple it from the actual row count.

A state that survives all m steps yields a rectangle orthogonal to J by
construction: killed points have p = 0, get weight 0 in every later q, and
thus never appear in a sampled row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import (
    LatinRectangle,
    OrthomateError,
    Point,
    Shape,
    verify_latin,
    verify_orthogonal,
)
from .matching import (
    DeadSymbol,
    FractionalMatching,
    Infeasible,
    birkhoff_decompose,
    build_fractional_matching,
    normalize_row,
    sample_matching,
    sample_matching_lazy,
)

EXACT_MAX_N = 12


class RowAlreadyColoured(OrthomateError):
    """Projection requested for a point whose row is already placed."""


class DegenerateDenominator(OrthomateError):
    """Survival probability <= 0 for a surviving point; process failure."""


@dataclass
class ProcessConfig:
    """Knobs of the guided process; serializable as JSON."""

    eta_policy: str = "doubling"
    eta_initial: Optional[float] = None
    eta_max: float = 64.0
    arithmetic: str = "float64"  # or "exact" (Fractions, n <= 12)
    gamma_a_coeff: float = 1.1
    gamma_b_slack: float = 1.0
    gamma_c_slack: float = 1.0
    record_trajectory: bool = True
    flow_backend: str = "auto"
    sampler: str = "auto"  # "lazy" | "eager"; auto = lazy floats, eager exact
    zero_tol: float = 1e-12
    tracked_lines: int = 64

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ProcessConfig":
        return cls(**obj)


@dataclass
class GuidanceState:
    """The vector p at time t, plus stopping bookkeeping.

    p has shape (m, n, n) indexed [row, col, sym].  Rows below t are frozen;
    entries killed at earlier times are exactly zero.  A point's colouring
    time is simply its row index: row i is placed at step t = i.
    """

    shape: Shape
    t: int
    p: np.ndarray
    stopped_at: Optional[int] = None

    @property
    def exact(self) -> bool:
        return self.p.dtype == object


@dataclass(frozen=True)
class KillMask:
    """Kill indicators for points in rows beyond the active one."""

    t: int
    killed: np.ndarray  # (m, n, n) bool; rows <= t all False


@dataclass(frozen=True)
class GammaViolation:
    ineq: str  # "A_x" | "B_line" | "C_ikl"
    location: tuple
    lhs: float
    bound: tuple  # (lo, hi); lo is None for one-sided bounds
    margin: float  # amount by which the bound is exceeded (> 0)


@dataclass(frozen=True)
class GammaReport:
    good: bool
    violations: tuple = ()


def init_state(shape: Shape, exact: bool = False) -> GuidanceState:
    """Uniform initial state p = 1/n everywhere."""
    m, n = shape.m, shape.n
    if exact:
        p = np.full((m, n, n), Fraction(1, n), dtype=object)
    else:
        p = np.full((m, n, n), 1.0 / n)
    return GuidanceState(shape=shape, t=0, p=p)


def gamma_bounds(n: int, epsilon: float, a_coeff: float = 1.1,
                 b_slack: float = 1.0, c_slack: float = 1.0):
    """(A upper bound, B low, B high, C upper bound) for the goodness region."""
    log_term = math.log(n) / math.sqrt(n) if n > 1 else 0.0
    a_bound = math.inf if epsilon == 0 else a_coeff / (epsilon ** 2 * n)
    return (
        a_bound,
        1.0 - b_slack * log_term,
        1.0 + b_slack * log_term,
        (1.0 + c_slack * log_term) / n,
    )


def check_gamma(state: GuidanceState, epsilon: float,
                a_coeff: float = 1.1, b_slack: float = 1.0,
                c_slack: float = 1.0,
                max_violations: Optional[int] = None) -> GammaReport:
    """Evaluate the three goodness families and report every violation.

    A is checked at all points; B and C only on uncoloured rows (>= t).
    max_violations optionally truncates the list per family.
    """
    n, m, t = state.shape.n, state.shape.m, state.t
    a_bound, b_lo, b_hi, c_bound = gamma_bounds(n, epsilon, a_coeff,
                                                b_slack, c_slack)
    p = state.p if not state.exact else state.p.astype(np.float64)
    cap = slice(None, max_violations)
    violations = []

    if a_bound != math.inf:
        bad = np.argwhere(p > a_bound)
        for i, k, g in bad[cap]:
            lhs = float(p[i, k, g])
            violations.append(GammaViolation(
                "A_x", (int(i), int(k), int(g)), lhs, (None, a_bound),
                lhs - a_bound))

    if t < m:
        sub = p[t:]
        rc = sub.sum(axis=2)  # (m - t, n): line (row, col)
        rs = sub.sum(axis=1)  # (m - t, n): line (row, sym)
        for cls, sums in (("RC", rc), ("RS", rs)):
            bad = np.argwhere((sums < b_lo) | (sums > b_hi))
            for i_off, j in bad[cap]:
                lhs = float(sums[i_off, j])
                margin = max(b_lo - lhs, lhs - b_hi)
                violations.append(GammaViolation(
                    "B_line", (cls, int(i_off) + t, int(j)), lhs,
                    (b_lo, b_hi), margin))
        # pair products within each uncoloured row: G[r, k, l]
        gram = sub @ sub.transpose(0, 2, 1)
        idx = np.arange(n)
        gram[:, idx, idx] = 0.0
        bad = np.argwhere(gram > c_bound)
        for r, k, l in bad[cap]:
            lhs = float(gram[r, k, l])
            violations.append(GammaViolation(
                "C_ikl", (int(r) + t, int(k), int(l)), lhs,
                (None, c_bound), lhs - c_bound))

    return GammaReport(not violations, tuple(violations))


def diag_column_map(J: LatinRectangle, t: int, rows_from: int) -> np.ndarray:
    """k2[i - rows_from, k] = column where the diagonal of (i, k) meets row t."""
    inv_t = J.row_inverse()[t]
    return inv_t[J.grid[rows_from:, :]]


def central_projections(x: Point, t: int, J: LatinRectangle):
    """The two points of the active row t on x's central (CS and DS) lines.

    Both share the RS line (t, sym(x)) and are always distinct, because J's
    column injectivity forces x's diagonal to cross row t away from col(x).

    Raises:
        RowAlreadyColoured: x lies in row t or an earlier row.
    """
    if x.row <= t:
        raise RowAlreadyColoured(f"point {x} has colouring time {x.row} <= {t}")
    rho_cs = Point(t, x.col, x.sym)
    k2 = int(J.row_inverse()[t, J.grid[x.row, x.col]])
    rho_ds = Point(t, k2, x.sym)
    return rho_cs, rho_ds


def kill_mask(L_row: np.ndarray, t: int, J: LatinRectangle,
              shape: Shape) -> KillMask:
    """Kill indicators induced by placing L_row at the active row t.

    A point x in a later row dies iff the placed row occupies the point of
    x's column/symbol line or of x's diagonal/symbol line on row t.  Per
    local line of a later row this kills at most 2 points.
    """
    m, n = shape.m, shape.n
    killed = np.zeros((m, n, n), dtype=bool)
    if t + 1 < m:
        L_row = np.asarray(L_row, dtype=np.int64)
        syms = np.arange(n)
        cs_hit = L_row[:, None] == syms[None, :]  # (col, sym)
        k2 = diag_column_map(J, t, t + 1)  # (m - t - 1, n)
        ds_hit = L_row[k2][:, :, None] == syms[None, None, :]
        killed[t + 1:] = cs_hit[None, :, :] | ds_hit
    return KillMask(t=t, killed=killed)


def advance_state(state: GuidanceState, q_row, L_row: np.ndarray,
                  J: LatinRectangle, den_tol: float = 1e-12) -> GuidanceState:
    """One transition of the state under the placed row.

    Surviving points in uncoloured rows are divided by their survival
    probability 1 - q(rho_cs) - q(rho_ds); killed points drop to zero;
    coloured rows stay frozen.  Survivors can only grow, since the divisor
    never exceeds 1.

    Raises:
        DegenerateDenominator: a surviving point has survival probability
            <= 0 under q, i.e. q places mass >= 1 on its two projections.
    """
    if state.stopped_at is not None:
        raise ValueError("cannot advance a stopped state")
    t = state.t
    m, n = state.shape.m, state.shape.n
    if t >= m:
        raise ValueError(f"no row left to place at t={t}")
    q = q_row.q if isinstance(q_row, FractionalMatching) else q_row
    new_p = state.p.copy()
    if t + 1 < m:
        mask = kill_mask(L_row, t, J, state.shape).killed[t + 1:]
        k2 = diag_column_map(J, t, t + 1)
        one = Fraction(1) if state.exact else 1.0
        den = one - q[None, :, :] - q[k2, :]
        p_sub = state.p[t + 1:]
        alive = ~mask & _positive(p_sub)
        if state.exact:
            degenerate = alive & np.vectorize(lambda v: v <= 0)(den)
        else:
            degenerate = alive & (den <= den_tol)
        if degenerate.any():
            i, k, g = np.argwhere(degenerate)[0]
            raise DegenerateDenominator(
                f"surviving point ({int(i) + t + 1}, {int(k)}, {int(g)}) "
                f"has survival probability {float(den[i, k, g]):.3e}"
            )
        safe_den = np.where(mask | ~_positive(den), one, den)
        updated = np.where(mask, 0 * one, p_sub / safe_den)
        new_p[t + 1:] = updated
    return GuidanceState(shape=state.shape, t=t + 1, p=new_p,
                         stopped_at=state.stopped_at)


def _positive(arr: np.ndarray) -> np.ndarray:
    if arr.dtype == object:
        return np.vectorize(lambda v: v > 0)(arr)
    return arr > 0


@dataclass
class ProcessOutcome:
    """Result of one guided run.

    kind is "success", "gamma_exit" or "infeasible_row"; the trajectory
    carries the per-step statistics when recording was enabled.
    """

    kind: str
    rectangle: Optional[LatinRectangle] = None
    time: Optional[int] = None
    gamma_report: Optional[GammaReport] = None
    detail: str = ""
    trajectory: Optional[object] = None
    eta_used: tuple = ()
    final_state: Optional[GuidanceState] = None

    @property
    def success(self) -> bool:
        return self.kind == "success"


def run_process(J: LatinRectangle, epsilon: Optional[float] = None,
                seed: int = 0, config: Optional[ProcessConfig] = None,
                rng: Optional[np.random.Generator] = None) -> ProcessOutcome:
    """Run the full guided construction of an orthogonal mate for J.

    All randomness is drawn from a single generator in a fixed order: one
    uniform per row for the Birkhoff coefficient sampling.  Identical
    (J, epsilon, seed, config) reproduce the outcome exactly.

    Args:
        J: the reference rectangle.
        epsilon: the epsilon used in the A bound; defaults to 1 - m/n.
        seed: seeds a fresh generator when rng is not given.
        config: process knobs; defaults to ProcessConfig().

    Returns:
        ProcessOutcome; kind "success" carries a verified mate, "gamma_exit"
        the violated inequalities, "infeasible_row" the failing step and a
        reason (flow infeasible at eta_max, dead symbol, or degenerate
        survival probability).
    """
    config = config or ProcessConfig()
    shape = J.shape
    m, n = shape.m, shape.n
    if epsilon is None:
        epsilon = shape.epsilon
    exact = config.arithmetic == "exact"
    if exact and n > EXACT_MAX_N:
        raise ValueError(f"exact arithmetic supported for n <= {EXACT_MAX_N}")
    if rng is None:
        rng = np.random.default_rng(seed)

    recorder = None
    if config.record_trajectory:
        from .diagnostics import TrajectoryRecorder

        recorder = TrajectoryRecorder(J, tracked_lines=config.tracked_lines)

    state = init_state(shape, exact=exact)
    grid = np.zeros((m, n), dtype=np.int64)
    etas = []
    outcome = None

    for t in range(m):
        report = check_gamma(state, epsilon, config.gamma_a_coeff,
                             config.gamma_b_slack, config.gamma_c_slack)
        if not report.good:
            state.stopped_at = t
            outcome = ProcessOutcome(kind="gamma_exit", time=t,
                                     gamma_report=report)
            break
        try:
            d = normalize_row(state, t)
        except DeadSymbol as exc:
            state.stopped_at = t
            outcome = ProcessOutcome(kind="infeasible_row", time=t,
                                     detail=f"dead_symbol: {exc}")
            break
        try:
            q, eta_used = build_fractional_matching(
                d, eta_policy=config.eta_policy,
                eta_initial=config.eta_initial, eta_max=config.eta_max,
                backend=config.flow_backend)
        except Infeasible as exc:
            state.stopped_at = t
            outcome = ProcessOutcome(kind="infeasible_row", time=t,
                                     detail=f"flow_infeasible: {exc}")
            break
        etas.append(eta_used)
        eager = exact or config.sampler == "eager"
        if eager:
            dec = birkhoff_decompose(q, zero_tol=0 if exact else config.zero_tol)
            L_row = sample_matching(dec, rng)
        else:
            L_row = sample_matching_lazy(q, rng, zero_tol=config.zero_tol)
        grid[t] = L_row
        try:
            after = advance_state(state, q, L_row, J)
        except DegenerateDenominator as exc:
            state.stopped_at = t
            outcome = ProcessOutcome(kind="infeasible_row", time=t,
                                     detail=f"degenerate_denominator: {exc}")
            break
        if recorder is not None:
            recorder.record_step(state, q, L_row, after, eta_used=eta_used)
        state = after

    if outcome is None:
        L = LatinRectangle(shape, grid)
        if not (verify_latin(L).ok and verify_orthogonal(L, J).ok):
            raise OrthomateError(
                "internal error: constructed rectangle failed verification")
        outcome = ProcessOutcome(kind="success", rectangle=L)

    outcome.eta_used = tuple(etas)
    outcome.final_state = state
    if recorder is not None:
        outcome.trajectory = recorder.stats
    return outcome
