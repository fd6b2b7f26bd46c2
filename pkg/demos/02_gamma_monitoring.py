"""
Watching the goodness region during a run
=========================================

The guided process stays alive while the state satisfies three families of
inequalities: a pointwise cap (A), local line sums within 1 +- log n/sqrt n
(B), and the quasi-random pair bound (C).  This script runs one demanding
construction (epsilon = 0.5) and prints the per-step margins next to the
log n / sqrt n scale, showing which inequality gives out first at finite n.
"""

import math

import numpy as np

from orthomate import run_process, summarize
from orthomate.baselines import random_latin_rectangle

n, eps = 64, 0.5
m = round((1 - eps) * n)
J = random_latin_rectangle(n, m, np.random.default_rng(3))

outcome = run_process(J, epsilon=eps, seed=3)
scale = math.log(n) / math.sqrt(n)
print(f"n={n} m={m}: outcome = {outcome.kind} at t = {outcome.time}")
print(f"log n / sqrt n = {scale:.3f}\n")

print("  t   |B-1| max   n*C - 1    p max    kills/line")
for r in outcome.trajectory.records:
    b_dev = max(abs(r.b_min - 1), abs(r.b_max - 1))
    print(f"{r.t:>3}   {b_dev:>8.3f}   {r.c_max * n - 1:>8.3f}"
          f"   {r.p_max:>7.4f}   {r.kills_line_max:>5}")

if outcome.gamma_report is not None:
    v = outcome.gamma_report.violations[0]
    print(f"\nfirst violated inequality: {v.ineq} at {v.location}, "
          f"lhs {v.lhs:.5f} vs bound {v.bound[1]:.5f}")

report = summarize(outcome.trajectory, exit_time=outcome.time)
print("\nrun summary:")
print(report.to_json())
