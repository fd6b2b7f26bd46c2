"""
Reference algorithms: Hall-regime greedy and exhaustive search
==============================================================

Below a quarter of the columns, a mate always exists by a degree argument:
each placed row excludes at most two symbols per column, so the legality
graph keeps minimum degree >= n/2 and always has a perfect matching.  At
desk scale, exhaustive search settles existence outright: the order-2 and
order-4 cyclic squares have no orthogonal mate, the order-3 one does.
"""

import numpy as np

from orthomate import (
    LatinRectangle,
    backtrack_mate,
    hall_greedy,
    verify_orthogonal,
)
from orthomate.baselines import random_latin_rectangle

# Hall regime: m = n/4 never fails, any seed
n, m = 32, 8
wins = 0
for seed in range(20):
    J = random_latin_rectangle(n, m, np.random.default_rng(seed))
    mate = hall_greedy(J, rng=np.random.default_rng(seed))
    wins += verify_orthogonal(mate, J).ok
print(f"hall_greedy at n={n}, m={m}: {wins} / 20 seeds succeeded")

# ground truth for small orders by exhaustion
for order in (2, 3, 4):
    J = LatinRectangle.cyclic(order)
    mate = backtrack_mate(J)
    if mate is None:
        print(f"order {order} cyclic square: no orthogonal mate exists")
    else:
        print(f"order {order} cyclic square: mate found, "
              f"verified = {verify_orthogonal(mate, J).ok}")
        print(mate.grid)
