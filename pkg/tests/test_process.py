"""Guidance state, kills, Gamma region, transitions, and the main loop."""

import math
from fractions import Fraction

import numpy as np
import pytest

from orthomate import (
    DegenerateDenominator,
    LatinRectangle,
    Point,
    ProcessConfig,
    RowAlreadyColoured,
    Shape,
    advance_state,
    birkhoff_decompose,
    build_fractional_matching,
    central_projections,
    check_gamma,
    init_state,
    kill_mask,
    line_members,
    normalize_row,
    run_process,
    sample_matching_lazy,
    verify_latin,
    verify_orthogonal,
)
from orthomate.core import LineId
from orthomate.matching import FractionalMatching
from orthomate.process import gamma_bounds

from conftest import random_rect


class TestInitState:
    def test_uniform_quarter(self):
        state = init_state(Shape(n=4, m=2))
        assert state.p.shape == (2, 4, 4)
        assert (state.p == 0.25).all()
        assert state.t == 0 and state.stopped_at is None

    def test_single_point(self):
        state = init_state(Shape(n=1, m=1))
        assert state.p.shape == (1, 1, 1)
        assert state.p[0, 0, 0] == 1.0

    @pytest.mark.parametrize("n,m", [(1, 1), (2, 2), (4, 2), (9, 5), (16, 4)])
    def test_initial_state_is_good(self, n, m):
        state = init_state(Shape(n=n, m=m))
        eps = Shape(n=n, m=m).epsilon
        assert check_gamma(state, eps).good

    def test_exact_initial(self):
        state = init_state(Shape(n=4, m=2), exact=True)
        assert state.p[0, 0, 0] == Fraction(1, 4)


class TestCheckGamma:
    def test_forced_a_violation(self):
        state = init_state(Shape(n=100, m=50))
        state.p[10, 3, 7] = 1.0
        rep = check_gamma(state, 0.5)
        assert not rep.good
        viol = [v for v in rep.violations if v.ineq == "A_x"]
        assert viol and viol[0].location == (10, 3, 7)
        assert viol[0].lhs == pytest.approx(1.0)
        assert viol[0].margin == pytest.approx(1.0 - 1.1 * 4.0 / 100)

    def test_zeroed_rs_line_b_violation(self):
        state = init_state(Shape(n=16, m=8))
        state.p[3, :, 5] = 0.0  # kill the whole line (row 3, symbol 5)
        rep = check_gamma(state, 0.5)
        bad = [v for v in rep.violations if v.ineq == "B_line"]
        assert any(v.location == ("RS", 3, 5) for v in bad)

    def test_c_violation(self):
        n = 16
        state = init_state(Shape(n=n, m=4))
        state.p[2, 1, :] = 0.9  # two heavy columns in row 2
        state.p[2, 3, :] = 0.9
        rep = check_gamma(state, 0.9)
        assert any(v.ineq == "C_ikl" and v.location[0] == 2
                   for v in rep.violations)

    def test_coloured_rows_ignored_for_b(self):
        state = init_state(Shape(n=16, m=4))
        state.p[0, :, 2] = 0.0
        state.t = 1  # row 0 already coloured
        rep = check_gamma(state, 0.5)
        assert not any(v.ineq == "B_line" for v in rep.violations)

    def test_epsilon_zero_disables_a(self):
        state = init_state(Shape(n=4, m=4))
        state.p[1, 0, 0] = 1.0
        a_bound, *_ = gamma_bounds(4, 0.0)
        assert a_bound == math.inf
        rep = check_gamma(state, 0.0)
        assert not any(v.ineq == "A_x" for v in rep.violations)

    def test_constant_overrides(self):
        # n = 4: the uniform sums 4 * 0.25 are exactly 1.0 in binary
        state = init_state(Shape(n=4, m=2))
        assert check_gamma(state, 0.5).good
        rep = check_gamma(state, 0.5, b_slack=0.0)
        assert rep.good
        state.p[1, 0, 0] *= 1.001
        assert not check_gamma(state, 0.5, b_slack=0.0).good


class TestProjections:
    def test_derived_example_z3(self, z3):
        # x = (2, 0, 1), active row 0: diagonal J(2,0)=2 meets row 0 where
        # J(0, k') = 2, i.e. k' = 2
        rho_cs, rho_ds = central_projections(Point(2, 0, 1), 0, z3)
        assert rho_cs == Point(0, 0, 1)
        assert rho_ds == Point(0, 2, 1)
        assert z3.grid[0, rho_ds.col] == z3.grid[2, 0]

    def test_always_distinct(self):
        J = random_rect(5, 4, seed=2)
        for t in range(3):
            for i in range(t + 1, 4):
                for k in range(5):
                    for s in range(5):
                        a, b = central_projections(Point(i, k, s), t, J)
                        assert a != b
                        assert a.row == b.row == t
                        assert a.sym == b.sym == s

    def test_projections_lie_on_the_lines(self, z3):
        # oracle: membership in the point's CS and DS lines
        x = Point(2, 1, 0)
        rho_cs, rho_ds = central_projections(x, 0, z3)
        cs_line = line_members(LineId("CS", x.col, x.sym), z3.shape)
        ds_line = line_members(
            LineId("DS", int(z3.grid[x.row, x.col]), x.sym), z3.shape, z3)
        assert rho_cs in cs_line
        assert rho_ds in ds_line

    def test_active_row_rejected(self, z3):
        with pytest.raises(RowAlreadyColoured):
            central_projections(Point(0, 1, 2), 0, z3)
        with pytest.raises(RowAlreadyColoured):
            central_projections(Point(1, 1, 2), 2, z3)


def brute_force_kills(L_row, t, J):
    """Oracle: a point dies iff a placed cell lies on one of its central lines."""
    m, n = J.shape.m, J.shape.n
    placed = {(t, k, int(L_row[k])) for k in range(n)}
    killed = set()
    for i in range(t + 1, m):
        for k in range(n):
            for s in range(n):
                cs = set(line_members(LineId("CS", k, s), J.shape))
                ds = set(line_members(
                    LineId("DS", int(J.grid[i, k]), s), J.shape, J))
                if (cs | ds) & {Point(*p) for p in placed}:
                    killed.add((i, k, s))
    return killed


class TestKillMask:
    def test_against_line_membership_oracle(self, z3):
        L_row = np.array([0, 1, 2])
        mask = kill_mask(L_row, 0, z3, z3.shape)
        expected = brute_force_kills(L_row, 0, z3)
        got = {tuple(idx) for idx in np.argwhere(mask.killed)}
        assert got == expected

    def test_per_line_bound(self):
        for seed in range(10):
            J = random_rect(6, 4, seed)
            rng = np.random.default_rng(seed)
            L_row = rng.permutation(6)
            mask = kill_mask(L_row, 0, J, J.shape).killed
            assert mask[0].sum() == 0
            assert int(mask.sum(axis=2).max()) <= 2  # RC lines
            assert int(mask.sum(axis=1).max()) <= 2  # RS lines

    def test_last_row_empty(self, z3):
        rect = LatinRectangle.cyclic(3, 1)
        mask = kill_mask(np.array([0, 1, 2]), 0, rect, rect.shape)
        assert not mask.killed.any()


class TestAdvanceState:
    def _setup(self, n=4, m=3, seed=0):
        J = random_rect(n, m, seed)
        state = init_state(J.shape)
        d = normalize_row(state, 0)
        q, eta = build_fractional_matching(d)
        rng = np.random.default_rng(seed)
        L_row = sample_matching_lazy(q, rng)
        return J, state, q, L_row

    def test_killed_points_zeroed(self):
        J, state, q, L_row = self._setup()
        after = advance_state(state, q, L_row, J)
        mask = kill_mask(L_row, 0, J, J.shape).killed
        assert (after.p[mask] == 0).all()
        assert after.t == 1

    def test_zero_projection_mass_leaves_p_unchanged(self, z3):
        state = init_state(z3.shape)
        q = np.zeros((3, 3))
        q[np.arange(3), [0, 1, 2]] = 1.0  # all mass on the identity row
        after = advance_state(state, FractionalMatching(q), np.array([0, 1, 2]), z3)
        # (1, 0, 2): projections (0, 0, 2) and (0, 1, 2) both carry no q mass
        x = Point(1, 0, 2)
        rho_cs, rho_ds = central_projections(x, 0, z3)
        assert q[rho_cs.col, rho_cs.sym] == 0 and q[rho_ds.col, rho_ds.sym] == 0
        assert after.p[x.row, x.col, x.sym] == state.p[x.row, x.col, x.sym]

    def test_survivors_monotone(self):
        for seed in range(5):
            J, state, q, L_row = self._setup(n=6, m=4, seed=seed)
            after = advance_state(state, q, L_row, J)
            mask = kill_mask(L_row, 0, J, J.shape).killed
            alive = ~mask & (state.p > 0)
            alive[0] = False
            assert (after.p[alive] >= state.p[alive]).all()

    def test_frozen_rows_unchanged(self):
        J, state, q, L_row = self._setup(n=5, m=3)
        after = advance_state(state, q, L_row, J)
        assert (after.p[0] == state.p[0]).all()

    def test_degenerate_denominator(self, z3):
        state = init_state(z3.shape)
        q = np.zeros((3, 3))
        q[np.arange(3), [0, 1, 2]] = 1.0  # claims the identity a.s.
        # a row that contradicts q: survivors see probability-zero survival
        with pytest.raises(DegenerateDenominator):
            advance_state(state, FractionalMatching(q), np.array([1, 2, 0]), z3)

    def test_stopped_state_rejected(self, z3):
        state = init_state(z3.shape)
        state.stopped_at = 0
        with pytest.raises(ValueError):
            advance_state(state, FractionalMatching(np.eye(3)),
                          np.array([0, 1, 2]), z3)


class TestMartingale:
    """Exhaustive expectation over the Birkhoff support equals the state."""

    @pytest.mark.parametrize("n,m", [(3, 2), (4, 3), (5, 3)])
    def test_uniform_state(self, n, m):
        J = random_rect(n, m, seed=n + m)
        state = init_state(J.shape)
        d = normalize_row(state, 0)
        q, _ = build_fractional_matching(d)
        dec = birkhoff_decompose(q)
        expected = np.zeros_like(state.p)
        for c, perm in dec.terms:
            after = advance_state(state, q, np.asarray(perm), J)
            expected += float(c) * after.p
        assert np.abs(expected[1:] - state.p[1:]).max() <= 1e-9

    def test_evolved_state(self):
        # run two steps, then check the identity from the reached state
        J = random_rect(6, 4, seed=9)
        state = init_state(J.shape)
        rng = np.random.default_rng(1)
        for t in range(2):
            d = normalize_row(state, t)
            q, _ = build_fractional_matching(d)
            L_row = sample_matching_lazy(q, rng)
            state = advance_state(state, q, L_row, J)
        d = normalize_row(state, 2)
        q, _ = build_fractional_matching(d)
        dec = birkhoff_decompose(q)
        expected = np.zeros_like(state.p)
        for c, perm in dec.terms:
            after = advance_state(state, q, np.asarray(perm), J)
            expected += float(c) * after.p
        # the identity holds where survival probability is positive; a point
        # whose projections carry all of q's mass is certainly killed and
        # must average to exactly zero instead
        from orthomate.process import diag_column_map
        den = 1.0 - q.q[None, :, :] - q.q[diag_column_map(J, 2, 3), :]
        pos = den > 1e-12
        assert np.abs((expected[3:] - state.p[3:])[pos]).max() <= 1e-9
        assert np.abs(expected[3:][~pos]).max() <= 1e-9

    def test_exact_arithmetic_is_exactly_zero(self):
        J = random_rect(4, 3, seed=4)
        state = init_state(J.shape, exact=True)
        d = normalize_row(state, 0)
        q, _ = build_fractional_matching(d)
        dec = birkhoff_decompose(q, zero_tol=0)
        assert dec.coefficient_sum() == 1
        m, n = J.shape.m, J.shape.n
        expected = np.full((m, n, n), Fraction(0), dtype=object)
        for c, perm in dec.terms:
            after = advance_state(state, q, np.asarray(perm), J)
            expected = expected + np.vectorize(lambda v: c * v)(after.p)
        diff = expected[1:] - state.p[1:]
        assert all(v == 0 for v in diff.ravel())


class TestRunProcess:
    def test_m1_always_success(self):
        for n in (1, 2, 4, 7):
            J = LatinRectangle(Shape(n=n, m=1), np.arange(n)[None, :])
            for seed in range(3):
                out = run_process(J, seed=seed)
                assert out.success
                assert verify_orthogonal(out.rectangle, J).ok

    def test_hall_regime_n16(self):
        J = random_rect(16, 4, seed=7)
        for seed in range(5):
            out = run_process(J, epsilon=0.75, seed=seed)
            assert out.success
            assert verify_latin(out.rectangle).ok
            assert verify_orthogonal(out.rectangle, J).ok

    def test_determinism(self):
        J = random_rect(12, 5, seed=3)
        a = run_process(J, seed=42)
        b = run_process(J, seed=42)
        assert a.kind == b.kind and a.time == b.time
        if a.success:
            assert (a.rectangle.grid == b.rectangle.grid).all()
        assert a.eta_used == b.eta_used

    def test_n2_never_succeeds(self, z2):
        for seed in range(20):
            out = run_process(z2, seed=seed)
            assert not out.success
            assert out.kind == "gamma_exit" and out.time == 1

    def test_gamma_exit_freezes_state(self):
        J = random_rect(32, 16, seed=0)
        out = run_process(J, seed=0)
        assert out.kind == "gamma_exit"
        assert out.final_state.stopped_at == out.time
        assert out.final_state.t == out.time
        with pytest.raises(ValueError):
            advance_state(out.final_state, FractionalMatching(np.eye(32)),
                          np.arange(32), J)

    def test_zero_absorption_prefix_legality(self):
        # compose the pipeline manually; placed rows never use killed points
        # (an Infeasible row legitimately ends the run at this size)
        from orthomate import Infeasible

        J = random_rect(8, 5, seed=11)
        state = init_state(J.shape)
        rng = np.random.default_rng(5)
        zero_since = {}
        placed = 0
        for t in range(5):
            d = normalize_row(state, t)
            try:
                q, _ = build_fractional_matching(d)
            except Infeasible:
                break
            L_row = sample_matching_lazy(q, rng)
            for k in range(8):
                assert (t, k, int(L_row[k])) not in zero_since
            state = advance_state(state, q, L_row, J)
            placed += 1
            for idx in np.argwhere(state.p[t + 1:] == 0):
                i, k, g = idx
                zero_since.setdefault((int(i) + t + 1, int(k), int(g)), t)
            # once zero, stays zero
            for (i, k, g), _ in zero_since.items():
                if i > t:
                    assert state.p[i, k, g] == 0
        assert placed >= 3  # the run exercised several transitions

    def test_trajectory_recorded(self):
        J = random_rect(8, 4, seed=2)
        out = run_process(J, seed=1)
        assert out.trajectory is not None
        assert out.trajectory.steps_executed == (
            4 if out.success else out.time)

    def test_record_disabled(self):
        J = random_rect(8, 4, seed=2)
        cfg = ProcessConfig(record_trajectory=False)
        out = run_process(J, seed=1, config=cfg)
        assert out.trajectory is None

    def test_exact_matches_float_with_eager_sampler(self):
        J = LatinRectangle.cyclic(5, 3)
        for seed in range(4):
            o_ex = run_process(J, seed=seed,
                               config=ProcessConfig(arithmetic="exact"))
            o_fl = run_process(J, seed=seed,
                               config=ProcessConfig(sampler="eager"))
            assert o_ex.kind == o_fl.kind and o_ex.time == o_fl.time
            diff = np.abs(o_fl.final_state.p
                          - o_ex.final_state.p.astype(np.float64)).max()
            assert diff <= 1e-12

    def test_exact_size_guard(self):
        J = random_rect(16, 4, seed=0)
        with pytest.raises(ValueError):
            run_process(J, config=ProcessConfig(arithmetic="exact"))

    def test_epsilon_defaults_to_shape(self):
        J = random_rect(6, 3, seed=1)
        out = run_process(J, seed=0)
        assert out.kind in ("success", "gamma_exit", "infeasible_row")

    def test_infeasible_row_outcome(self):
        # a symbol's surviving support thins past Hall at this seed
        J = random_rect(5, 4, seed=442733243)
        out = run_process(J, seed=442733243)
        assert out.kind == "infeasible_row"
        assert out.time == 2
        assert "flow_infeasible" in out.detail
        assert out.final_state.stopped_at == 2

    def test_determinism_scipy_flow_path(self):
        # n = 32 exercises the scipy flow backend and the lazy sampler
        J = random_rect(32, 16, seed=21)
        a = run_process(J, seed=8)
        b = run_process(J, seed=8)
        assert a.kind == b.kind and a.time == b.time
        assert a.eta_used == b.eta_used
        pa = a.final_state.p
        pb = b.final_state.p
        assert (pa == pb).all()

    def test_exact_gamma_check_on_object_state(self):
        state = init_state(Shape(n=4, m=2), exact=True)
        assert check_gamma(state, 0.5).good
        state.p[1, 0, 0] = Fraction(99, 100)
        rep = check_gamma(state, 0.5)
        assert not rep.good
        assert any(v.ineq == "B_line" and v.location == ("RC", 1, 0)
                   for v in rep.violations)
        # a tighter epsilon makes the pointwise bound fire too
        rep2 = check_gamma(state, 0.9)
        assert any(v.ineq == "A_x" and v.location == (1, 0, 0)
                   for v in rep2.violations)


class TestConfig:
    def test_json_roundtrip(self):
        cfg = ProcessConfig(eta_initial=0.5, eta_max=8.0, arithmetic="exact")
        again = ProcessConfig.from_json(cfg.to_json())
        assert again == cfg
