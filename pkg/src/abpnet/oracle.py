"""Centralized ground truth: feasibility, optimal duals, finite differences.

Nothing here calls the block-sparse curvature code; these routines are the
independent side of the checks on it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Commodity, CommoditySet, Network, random_topology
from .rates import soft_rates


@dataclass
class FeasibilityReport:
    status: str  # "feasible", "infeasible" or "inconclusive"
    slack: float
    optimal_duals: np.ndarray
    rates: np.ndarray
    iterations: int
    residual: float

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def mean_gradient(net, duals, arrivals):
    """Deterministic dual gradient and the rates that produce it."""
    rates, _ = soft_rates(net, duals)
    g = net.incidence @ rates - arrivals
    return np.where(net.valid, g, 0.0), rates


def projected_residual(net, duals, g) -> float:
    """Norm of ``lam - [lam - g]^+``; zero exactly at a dual optimum."""
    return float(np.linalg.norm(np.where(net.valid, duals - np.maximum(duals - g, 0.0), 0.0)))


def solve_centralized(net, arrivals, tol=1e-6, max_iter=200_000, check_every=500) -> FeasibilityReport:
    """Minimize the deterministic dual by accelerated projected gradient.

    The gradient is Lipschitz with constant ``2 * max link degree``, which
    fixes the step.  Feasibility is read off the flow-conservation slack at
    the final rates.  If the gradient stops changing while the projected
    residual stays above ``tol``, the dual decreases linearly without bound
    and the problem is reported infeasible.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    arrivals = np.where(net.valid, arrivals, 0.0)
    degree = np.bincount(np.concatenate([net.src, net.dst]), minlength=net.n)
    step = 1.0 / max(2.0 * degree.max(), 1.0)
    lam = np.zeros((net.n, net.K))
    y, theta = lam.copy(), 1.0
    g_prev = None
    scale = max(1.0, float(np.abs(arrivals).max()), float(net.cap.max()) if net.L else 1.0)
    it = 0
    g, rates = mean_gradient(net, lam, arrivals)
    res = projected_residual(net, lam, g)
    status = "inconclusive"
    while it < max_iter:
        gy, _ = mean_gradient(net, y, arrivals)
        new = np.where(net.valid, np.maximum(y - step * gy, 0.0), 0.0)
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta**2))
        # gradient-based restart keeps the momentum from overshooting
        if np.sum((y - new) * (new - lam)) > 0:
            theta_new, y = 1.0, new.copy()
        else:
            y = new + ((theta - 1.0) / theta_new) * (new - lam)
        lam, theta = new, theta_new
        it += 1
        if it % 10 == 0 or it == max_iter:
            g, rates = mean_gradient(net, lam, arrivals)
            res = projected_residual(net, lam, g)
            if res <= tol:
                status = "feasible"
                break
            if it % check_every == 0:
                if g_prev is not None and np.max(np.abs(g - g_prev)) <= 1e-9 * scale:
                    status = "infeasible"
                    break
                g_prev = g
    g, rates = mean_gradient(net, lam, arrivals)
    res = projected_residual(net, lam, g)
    slack = float(np.min(g[net.valid])) if net.dim else 0.0
    if status == "feasible" and slack < -tol:
        status = "infeasible"
    if status == "inconclusive" and res <= tol:
        status = "feasible" if slack >= -tol else "infeasible"
    return FeasibilityReport(status, slack, lam, rates, it, res)


def fd_hessian(net, duals, h=1e-6, arrivals=None) -> np.ndarray:
    """Central-difference Jacobian of the deterministic gradient (valid coords)."""
    if arrivals is None:
        arrivals = np.zeros((net.n, net.K))
    coords = np.argwhere(net.valid)
    m = len(coords)
    J = np.zeros((m, m))
    for col, (i, k) in enumerate(coords):
        up, dn = duals.copy(), duals.copy()
        up[i, k] += h
        dn[i, k] -= h
        g_up, _ = mean_gradient(net, up, arrivals)
        g_dn, _ = mean_gradient(net, dn, arrivals)
        J[:, col] = (g_up - g_dn)[net.valid] / (2.0 * h)
    return J


def node_of_coordinates(net) -> np.ndarray:
    """Owner node of each valid coordinate, in dense ordering."""
    return np.argwhere(net.valid)[:, 0]


def dense_neumann(H, nodes, order) -> np.ndarray:
    """Explicit ``sum_{t<=N} (Dbar^-1 Bbar)^t Dbar^-1`` from a dense Hessian.

    ``nodes[c]`` names the node owning coordinate ``c``; ``Dbar`` is the
    node-block diagonal of ``H`` plus identity and ``Bbar = Dbar - H``.
    """
    H = np.asarray(H, dtype=float)
    nodes = np.asarray(nodes)
    same = nodes[:, None] == nodes[None, :]
    dbar = np.where(same, H, 0.0) + np.eye(len(H))
    bbar = dbar - H
    dinv = np.linalg.inv(dbar)
    M = dinv @ bbar
    term = dinv.copy()
    total = dinv.copy()
    for _ in range(order):
        term = M @ term
        total += term
    return total


def random_instance(rng, n_max=6, k_max=3, cap_range=(2.0, 20.0), beta_choices=(0.0, 10.0)) -> Network:
    """Small random connected network with random destinations and rewards."""
    n = int(rng.integers(2, n_max + 1))
    K = int(rng.integers(1, min(k_max, n) + 1))
    topo = random_topology(n, float(rng.uniform(1.5, 3.5)), cap_range, rng)
    dests = rng.choice(n, size=K, replace=False)
    commodities = []
    for d in dests:
        b = float(rng.choice(beta_choices))
        beta = {(l.src, l.dst): b for l in topo.links if l.dst == d and b}
        commodities.append(Commodity(dest=int(d), beta=beta))
    return Network(topo, CommoditySet(tuple(commodities)))


def away_from_kinks(net, duals, margin=1e-3) -> bool:
    """True if every link is at least ``margin`` away from an activation or saturation kink."""
    c = net.differentials(duals) + net.beta
    rates, mu = soft_rates(net, duals)
    for l in range(net.L):
        ck = c[l, net.sendable[l]]
        if ck.size == 0:
            continue
        if np.any(np.abs(ck - mu[l]) < margin):
            return False
        supply0 = np.maximum(ck, 0.0).sum()
        if abs(supply0 - net.cap[l]) < margin:
            return False
        if 0 < mu[l] < margin:
            return False
    return True


def sample_smooth_duals(net, rng, lo=0.5, hi=10.0, margin=1e-3, max_tries=10_000) -> np.ndarray:
    """Duals drawn from ``U[lo, hi]`` and resampled until away from kinks."""
    for _ in range(max_tries):
        lam = np.where(net.valid, rng.uniform(lo, hi, size=(net.n, net.K)), 0.0)
        if away_from_kinks(net, lam, margin):
            return lam
    raise RuntimeError("could not sample duals away from kinks")
