"""
Quickstart: construct an orthogonal mate for a random Latin rectangle
=====================================================================

Generate a random 16 x 4 Latin rectangle J, run the guided greedy process
to build an orthogonal mate L, verify the pair exactly, and split J into
the partial transversals cut out by L's colour classes.
"""

import numpy as np

from orthomate import (
    extract_transversals,
    run_process,
    verify_latin,
    verify_orthogonal,
)
from orthomate.baselines import random_latin_rectangle

n, m = 16, 4
J = random_latin_rectangle(n, m, np.random.default_rng(7))
print("reference rectangle J:")
print(J.grid)

outcome = run_process(J, epsilon=0.75, seed=1)
print("\noutcome:", outcome.kind)

L = outcome.rectangle
print("\nconstructed mate L:")
print(L.grid)

print("\nrow/column invariants hold:", verify_latin(L).ok)
print("pair is orthogonal:        ", verify_orthogonal(L, J).ok)

# each L-colour class is a partial transversal of J: distinct rows,
# columns and J-symbols
transversals = extract_transversals(L, J)
print(f"\n{len(transversals)} transversals of size {m} partition the cells;")
print("first three:")
for t in transversals[:3]:
    print("  ", t.cells)
