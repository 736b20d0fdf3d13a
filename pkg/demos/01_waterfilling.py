"""
Splitting one link among commodities
====================================

Backpressure hands a whole link to the commodity with the largest queue
differential.  The soft variant splits the capacity by reverse
waterfilling instead: every commodity gets ``diff + beta - mu`` clipped at
zero, and the level ``mu`` rises until the rates fit.
"""

import numpy as np

from abpnet.rates import active_set, allocate_bp, allocate_soft, link_objective

# Two commodities pushing 8 and 6 across a link of capacity 10.
diff = np.array([8.0, 6.0])
print("max-pressure:", allocate_bp(diff, 10.0))

rates, mu = allocate_soft(diff, 10.0)
print("waterfilling:", rates, "level", mu)

# Raise the capacity and the level drops to zero: the link is no longer
# saturated and each commodity gets its unconstrained rate.
print("roomy link:  ", *allocate_soft(diff, 100.0))

# A reward on links into the destination keeps traffic moving even
# without a queue differential.
print("reward 10:   ", *allocate_soft([0.0, -4.0], 100.0, beta=10.0))

# The waterfilling split beats any other split of the capacity.
rng = np.random.default_rng(0)
best = link_objective(rates, diff)
others = [link_objective(10.0 * w / w.sum(), diff) for w in rng.exponential(size=(1000, 2))]
print(f"objective {best:.3f}, best random split {max(others):.3f}")
print("active set:", active_set(rates))
