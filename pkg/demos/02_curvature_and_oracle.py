"""
Dual curvature and the one-hop Newton direction
===============================================

The dual Hessian couples only neighboring nodes.  The ADD-N direction
approximates the Newton step with a truncated Neumann series that needs N
exchanges with neighbors.  Here we check both against brute force on a
small random network: finite differences for the Hessian, a dense matrix
series for the direction, and the centralized solver for feasibility.
"""

import io

import numpy as np

from abpnet.curvature import add_direction, gradient, hessian, newton_direction_dense, split, write_triplets
from abpnet.oracle import (
    dense_neumann,
    fd_hessian,
    node_of_coordinates,
    random_instance,
    sample_smooth_duals,
    solve_centralized,
)
from abpnet.rates import soft_rates

rng = np.random.default_rng(7)
net = random_instance(rng, n_max=5, k_max=2)
lam = sample_smooth_duals(net, rng)
print(f"{net.n} nodes, {net.L} links, {net.K} commodities")

rates, mu = soft_rates(net, lam)
H = hessian(net, rates, mu)
err = np.abs(H.to_dense() - fd_hessian(net, lam)).max()
print(f"analytic vs finite-difference Hessian: max error {err:.1e}")

g = gradient(net, rates, np.zeros((net.n, net.K)))
sp = split(H)
nodes = node_of_coordinates(net)
newton = newton_direction_dense(H, g, ridge=1e-9)[net.valid]
for order in range(4):
    d = add_direction(sp, g, order)[net.valid]
    ref = -dense_neumann(H.to_dense(), nodes, order) @ g[net.valid]
    cos = d @ newton / (np.linalg.norm(d) * np.linalg.norm(newton))
    print(f"ADD-{order}: |block - dense| = {np.abs(d - ref).max():.1e}, cosine to Newton {cos:.3f}")

# The sparse blocks as "i j k s value" lines.
buf = io.StringIO()
write_triplets(buf, H)
print(buf.getvalue().splitlines()[:5])

# Is a uniform load of 1 per node and commodity carriable?
arrivals = np.where(net.valid, 1.0, 0.0)
rep = solve_centralized(net, arrivals)
print(f"oracle: {rep.status}, slack {rep.slack:.3g}, {rep.iterations} iterations")
