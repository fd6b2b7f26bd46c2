"""Fractional matchings on a row: normalization, flow construction, Birkhoff.

Given the guidance state restricted to one row, the pipeline is:

  normalize_row   -> per-symbol normalized weights d with sum_k d(k, g) = 1
  build_fractional_matching
                  -> doubly stochastic q with q <= (1 + eta) * d, found as a
                     max flow with middle capacities (1 + eta) * d(k, g);
                     eta starts at 4 * sqrt(log n / sqrt n) and doubles until
                     the flow saturates or eta_max is reached
  birkhoff_decompose / sample_matching
                  -> express q as a convex combination of permutations and
                     draw one with the convex coefficients as probabilities

cut_check_bruteforce is the independent oracle for the flow step: it tests
the cut inequality  2n - |A| - |B| + (1 + eta) * sum_{g in A, k in B} d(k, g)
>= n  by direct enumeration.  Subsets are enumerated including the full sets
A = S and B = K: the proper-subset restriction in the usual statement is
only harmless for near doubly stochastic inputs, and the oracle must match
the flow verdict on arbitrary ones.  For each column subset B the worst A of
every size is found by sorting the per-symbol masses, which prunes the
enumeration from 4^n to 2^n * n log n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from .core import OrthomateError
from . import maxflow
from .bipartite import perfect_matching_on_mask, perfect_matching_scipy

try:
    import scipy.sparse  # noqa: F401

    HAVE_SCIPY = True
except ImportError:  # pragma: no cover
    HAVE_SCIPY = False

#: instance size above which the float flow path uses the scipy solver
SCIPY_FLOW_MIN_N = 24

#: brute-force cut enumeration cap
CUT_BRUTEFORCE_MAX_N = 14

#: entries below this are truncated to zero before decompositions
ZERO_TOL = 1e-12

#: |row sum - 1| and |column sum - 1| tolerance for stochastic matrices
DS_TOL = 1e-9

#: flow/cut feasibility tolerance (aligned between solver and oracle)
FEAS_TOL = 1e-9


class DeadSymbol(OrthomateError):
    """A symbol with zero total mass on the row; a fatal B-line breakdown."""


class TooLarge(OrthomateError):
    """Instance exceeds a documented brute-force cap."""


class Infeasible(OrthomateError):
    """No fractional matching under the capacity bound at eta_max."""


class NoSupportMatching(OrthomateError):
    """Support of a nominally doubly stochastic matrix violates Hall."""


@dataclass(frozen=True)
class RowDistribution:
    """Nonnegative (column, symbol) weights, each symbol summing to 1."""

    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class FractionalMatching:
    """Nonnegative (column, symbol) matrix with all row/column sums 1."""

    q: np.ndarray

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def to_json(self) -> dict:
        return {"n": self.n, "q": np.asarray(self.q, dtype=float).tolist()}


@dataclass(frozen=True)
class BirkhoffDecomposition:
    """Convex combination of permutations: sum of coeff * perm-matrix."""

    terms: tuple  # ((coefficient, perm array col -> sym), ...)
    n: int

    def coefficient_sum(self):
        return sum(c for c, _ in self.terms)

    def reconstruct(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        cols = np.arange(self.n)
        for c, perm in self.terms:
            out[cols, perm] += float(c)
        return out

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "terms": [
                {"coefficient": float(c), "permutation": [int(v) for v in perm]}
                for c, perm in self.terms
            ],
        }


def normalize_row(state, row: int) -> RowDistribution:
    """Per-symbol normalization of the state restricted to one row.

    Raises:
        DeadSymbol: some symbol has zero total mass on the row.
    """
    if row < state.t:
        raise ValueError(f"row {row} already coloured at time {state.t}")
    p_row = state.p[row]
    totals = p_row.sum(axis=0)
    dead = [g for g in range(p_row.shape[1]) if not totals[g] > 0]
    if dead:
        raise DeadSymbol(f"row {row}: symbols {dead} have zero mass")
    return RowDistribution(p_row / totals[None, :])


def cut_check_bruteforce(d, eta, feas_tol: float = FEAS_TOL
                         ) -> Tuple[bool, Optional[tuple]]:
    """Exhaustive cut-condition check; the flow solver's independent oracle.

    Args:
        d: RowDistribution or raw (n, n) weights array [column, symbol].
        eta: capacity inflation.
        feas_tol: violations smaller than this are ignored (0 => exact).

    Returns:
        (feasible, witness); witness is (symbols A, columns B) for the first
        violating pair found, None when feasible.

    Raises:
        TooLarge: n > 14.
    """
    w = d.weights if isinstance(d, RowDistribution) else d
    w = np.asarray(w)
    n = len(w)
    if n > CUT_BRUTEFORCE_MAX_N:
        raise TooLarge(f"cut enumeration capped at n={CUT_BRUTEFORCE_MAX_N}, got {n}")
    if w.dtype == object:
        return _cut_check_exact(w, eta, n)
    w = w.astype(np.float64)
    # membership matrix of all nonempty column subsets (full set included)
    masks = np.arange(1, 1 << n, dtype=np.uint32)
    member = (masks[:, None] >> np.arange(n)[None, :]) & 1  # (2^n - 1, n)
    sizes = member.sum(axis=1)
    sym_mass = member.astype(np.float64) @ w  # (subsets, symbols)
    order = np.argsort(sym_mass, axis=1)
    prefix = np.cumsum(np.take_along_axis(sym_mass, order, axis=1), axis=1)
    a_sizes = np.arange(1, n + 1)
    # slack of the cut inequality for the worst A of each size
    slack = (
        (n - a_sizes)[None, :]
        - sizes[:, None]
        + (1.0 + eta) * prefix
    )
    viol = slack < -feas_tol
    if not viol.any():
        return True, None
    b_idx, s_idx = np.argwhere(viol)[0]
    a_syms = tuple(int(g) for g in order[b_idx, : s_idx + 1])
    b_cols = tuple(int(k) for k in np.nonzero(member[b_idx])[0])
    return False, (a_syms, b_cols)


def _cut_check_exact(w, eta, n):
    """Fraction-arithmetic cut check (small n, exact mode)."""
    eta_f = eta if isinstance(eta, Fraction) else Fraction(eta)
    cols = list(range(n))
    for mask in range(1, 1 << n):
        b_cols = [k for k in cols if mask >> k & 1]
        mass = [sum(w[k][g] for k in b_cols) for g in range(n)]
        order = sorted(range(n), key=lambda g: mass[g])
        acc = 0
        for s, g in enumerate(order, start=1):
            acc += mass[g]
            if (n - s) - len(b_cols) + (1 + eta_f) * acc < 0:
                return False, (tuple(order[:s]), tuple(b_cols))
    return True, None


def default_eta_initial(n: int) -> float:
    """4 * sqrt(log n / sqrt n); zero at n = 1."""
    if n <= 1:
        return 0.0
    return 4.0 * math.sqrt(math.log(n) / math.sqrt(n))


def eta_schedule(n: int, policy: str = "doubling",
                 eta_initial: Optional[float] = None,
                 eta_max: float = 64.0):
    """The sequence of eta values tried by build_fractional_matching."""
    eta0 = default_eta_initial(n) if eta_initial is None else float(eta_initial)
    if policy == "fixed":
        return [eta0]
    if policy != "doubling":
        raise ValueError(f"unknown eta policy {policy!r}")
    etas = [min(eta0, eta_max)]
    while etas[-1] < eta_max:
        nxt = etas[-1] * 2 if etas[-1] > 0 else 0.25
        etas.append(min(nxt, eta_max))
    return etas


def _solve_caps(caps, backend: str = "auto",
                feas_tol: float = FEAS_TOL) -> Optional[np.ndarray]:
    """Max flow under explicit middle capacities; q (n, n) or None.

    backend "auto" picks scipy for float instances with n >= 24 and the pure
    solver otherwise; "python" and "scipy" force a choice.  Ambiguous scipy
    verdicts (within the integer rounding band) re-solve exactly.
    """
    caps_arr = np.asarray(caps)
    n = caps_arr.shape[0]
    if caps_arr.dtype == object:
        one = Fraction(1)
        value, flow = maxflow.solve_transport(caps_arr.tolist(), one=one, tol=0)
        if value == n:
            q = np.empty((n, n), dtype=object)
            for k in range(n):
                for g in range(n):
                    q[k, g] = flow[k][g]
            return q
        return None
    caps_arr = caps_arr.astype(np.float64)
    use_scipy = backend == "scipy" or (
        backend == "auto" and HAVE_SCIPY and n >= SCIPY_FLOW_MIN_N
    )
    if use_scipy:
        status, q = maxflow.scipy_transport(caps_arr)
        if status == "feasible":
            return q
        if status == "infeasible":
            return None
        # ambiguous: fall through to the exact float solver
    value, flow = maxflow.solve_transport(caps_arr.tolist(), one=1.0,
                                          tol=maxflow.AUGMENT_TOL)
    if n - value <= feas_tol:
        return np.array(flow, dtype=np.float64)
    return None


def _scale_caps(w, factor):
    if np.asarray(w).dtype == object:
        f = factor if isinstance(factor, Fraction) else Fraction(factor)
        return np.asarray(w) * f
    return np.asarray(w, dtype=np.float64) * float(factor)


def solve_fixed_eta(d, eta, backend: str = "auto",
                    feas_tol: float = FEAS_TOL) -> Optional[np.ndarray]:
    """One feasibility solve: q <= (1 + eta) * d doubly stochastic, or None."""
    w = d.weights if isinstance(d, RowDistribution) else d
    return _solve_caps(_scale_caps(w, 1 + eta), backend=backend,
                       feas_tol=feas_tol)


def build_fractional_matching(d, eta_policy: str = "doubling",
                              eta_initial: Optional[float] = None,
                              eta_max: float = 64.0,
                              backend: str = "auto",
                              balance: bool = True
                              ) -> Tuple[FractionalMatching, float]:
    """Construct q <= (1 + eta) * d doubly stochastic, escalating eta.

    The eta schedule certifies feasibility; among the max flows at the
    feasible level, the returned q is additionally balanced: a short binary
    search finds (nearly) the smallest ratio beta with a flow q <= beta * d
    and returns that flow.  An unbalanced max flow may pile mass at the
    capacity ceiling on a few entries, which needlessly inflates the growth
    of the guided state at finite n; balancing also makes q = d whenever d
    is itself doubly stochastic.

    Returns:
        (matching, eta_used) where 1 + eta_used is the certified entrywise
        cap ratio of the returned q (eta_used is at most the schedule value
        that proved feasibility).

    Raises:
        Infeasible: max flow below n even at eta_max.
    """
    d_obj = d if isinstance(d, RowDistribution) else RowDistribution(np.asarray(d))
    w = d_obj.weights
    n = d_obj.n
    etas = eta_schedule(n, eta_policy, eta_initial, eta_max)
    q = None
    for eta in etas:
        q = solve_fixed_eta(w, eta, backend=backend)
        if q is not None:
            break
    if q is None:
        raise Infeasible(
            f"no fractional matching within (1+eta)*d for eta up to {etas[-1]:g}"
        )
    if not balance or eta <= 0:
        return FractionalMatching(q), eta

    # balance: smallest feasible cap ratio, tried tight-first
    q_ds = _solve_caps(_scale_caps(w, 1), backend=backend)
    if q_ds is not None:
        return FractionalMatching(q_ds), 0.0
    log_term = math.log(n) / math.sqrt(n) if n > 1 else 0.0
    lo, hi = 0.0, float(eta)  # lo infeasible, hi feasible
    natural = min(log_term, hi)
    if natural > lo:
        q_nat = _solve_caps(_scale_caps(w, 1 + natural), backend=backend)
        if q_nat is not None:
            hi, q = natural, q_nat
        else:
            lo = natural
    for _ in range(4):
        if hi - lo <= 0.05 * max(hi, 1e-9):
            break
        mid = (lo + hi) / 2
        q_mid = _solve_caps(_scale_caps(w, 1 + mid), backend=backend)
        if q_mid is not None:
            hi, q = mid, q_mid
        else:
            lo = mid
    return FractionalMatching(q), hi


def _as_support(Q, zero_tol):
    if Q.dtype == object:
        return np.vectorize(lambda v: v > 0)(Q)
    return Q > zero_tol


def birkhoff_decompose(q, zero_tol: float = ZERO_TOL,
                       ds_tol: float = 1e-6) -> BirkhoffDecomposition:
    """Greedy Birkhoff decomposition by repeated min-entry matching removal.

    Support matchings are found by augmenting paths with deterministic
    vertex order, so the decomposition is reproducible.  Entries below
    zero_tol are truncated first; with float input the loop stops once the
    residual mass per row drops below 1e-10 and folds the dust into the last
    coefficient, keeping the coefficient sum at 1 exactly.

    Raises:
        NoSupportMatching: the positive support has no perfect matching.
    """
    q_arr = q.q if isinstance(q, FractionalMatching) else q
    Q = np.array(q_arr, copy=True)
    n = Q.shape[0]
    exact = Q.dtype == object
    if not exact:
        Q = Q.astype(np.float64)
        row_err = np.abs(Q.sum(axis=1) - 1.0).max()
        col_err = np.abs(Q.sum(axis=0) - 1.0).max()
        if max(row_err, col_err) > ds_tol:
            raise ValueError(
                f"input not doubly stochastic within {ds_tol:g} "
                f"(row err {row_err:.2e}, col err {col_err:.2e})"
            )
        Q[Q < zero_tol] = 0.0
    cols = np.arange(n)
    terms = []
    remaining = Fraction(1) if exact else 1.0
    stop_tol = 0 if exact else 1e-10
    max_terms = n * n + 2  # loop guard; the greedy bound is n^2 - 2n + 2
    while remaining > stop_tol:
        if len(terms) > max_terms:
            raise NoSupportMatching(
                "decomposition failed to terminate; residual mass "
                f"{float(remaining):.3e}"
            )
        support = _as_support(Q, zero_tol)
        match = perfect_matching_on_mask(support)
        if match is None:
            raise NoSupportMatching(
                f"support violates Hall with residual mass {float(remaining):.3e}"
            )
        c = Q[cols, match].min()
        c = min(c, remaining)
        terms.append((c, match))
        Q[cols, match] -= c
        if not exact:
            Q[Q < zero_tol] = 0.0
        remaining = remaining - c
    if not exact and remaining > 0 and terms:
        c_last, m_last = terms[-1]
        terms[-1] = (c_last + remaining, m_last)
    return BirkhoffDecomposition(tuple(terms), n)


def sample_matching(dec: BirkhoffDecomposition, rng) -> np.ndarray:
    """Draw a permutation with the convex coefficients as probabilities."""
    u = rng.random()
    acc = 0.0
    for c, perm in dec.terms:
        acc += float(c)
        if u < acc:
            return np.asarray(perm)
    return np.asarray(dec.terms[-1][1])


def sample_matching_lazy(q, rng, zero_tol: float = ZERO_TOL) -> np.ndarray:
    """Draw from the Birkhoff distribution without materializing all terms.

    Walks a threshold-greedy elimination (matchings restricted to entries
    above a halving threshold, so early terms carry large coefficients) and
    stops at the cumulative coefficient the uniform draw selects.  This
    samples some valid Birkhoff decomposition of q exactly; only the
    elimination order differs from birkhoff_decompose.
    """
    q_arr = q.q if isinstance(q, FractionalMatching) else q
    Q = np.array(q_arr, dtype=np.float64, copy=True)
    n = Q.shape[0]
    Q[Q < zero_tol] = 0.0
    cols = np.arange(n)
    find = perfect_matching_scipy if HAVE_SCIPY and n >= 16 else \
        perfect_matching_on_mask
    u = rng.random()
    acc = 0.0
    theta = Q.max() / 2.0
    last = None
    for _ in range(n * n + 2 * n + 80):
        support = Q > 0.0
        mask = support if theta <= zero_tol else (Q >= theta)
        match = find(mask)
        if match is None:
            if theta <= zero_tol:
                if last is not None and 1.0 - acc <= 1e-9:
                    return last  # float dust at the tail of the walk
                raise NoSupportMatching(
                    f"support violates Hall at residual mass {1.0 - acc:.3e}"
                )
            pos = Q[support]
            theta = theta / 2.0
            if pos.size == 0 or theta < pos.min():
                theta = 0.0  # next mask is the full support
            continue
        c = Q[cols, match].min()
        acc += c
        last = match
        if u < acc or 1.0 - acc <= 1e-12:
            return match
        Q[cols, match] -= c
        Q[Q < zero_tol] = 0.0
    raise NoSupportMatching("sampling walk failed to terminate")
