import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from abpnet.model import Commodity, CommoditySet, Link, Network, NetworkTopology
from abpnet.oracle import (
    mean_gradient,
    projected_residual,
    random_instance,
    solve_centralized,
)


def lp_feasible(net, arrivals):
    """Independent multicommodity flow LP: exists r >= 0 meeting demand within capacity."""
    L, K, n = net.L, net.K, net.n
    nv = L * K
    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    for i in range(n):
        for k in range(K):
            if not net.valid[i, k]:
                continue
            row = np.zeros(nv)
            for l in range(L):
                if net.src[l] == i:
                    row[l * K + k] -= 1.0
                if net.dst[l] == i:
                    row[l * K + k] += 1.0
            # outflow - inflow >= a  ->  inflow - outflow <= -a
            A_ub.append(row)
            b_ub.append(-arrivals[i, k])
    for l in range(L):
        row = np.zeros(nv)
        row[l * K:(l + 1) * K] = 1.0
        A_ub.append(row)
        b_ub.append(net.cap[l])
    bounds = [(0, 0) if not net.sendable[l, k] else (0, None) for l in range(L) for k in range(K)]
    res = linprog(np.zeros(nv), A_ub=np.array(A_ub), b_ub=np.array(b_ub), bounds=bounds, method="highs")
    return res.status == 0


def test_line_feasible(line):
    rep = solve_centralized(line, np.array([[5.0], [0.0], [0.0]]))
    assert rep.feasible
    assert rep.slack >= -1e-6
    assert rep.residual <= 1e-6


def test_line_infeasible(line):
    rep = solve_centralized(line, np.array([[150.0], [0.0], [0.0]]), max_iter=20_000)
    assert rep.status == "infeasible"
    assert rep.slack < 0


def test_inconclusive_at_cap(line):
    rep = solve_centralized(line, np.array([[150.0], [0.0], [0.0]]), max_iter=5, check_every=500)
    assert rep.status == "inconclusive"


def test_bad_tol(line):
    with pytest.raises(ValueError):
        solve_centralized(line, np.zeros((3, 1)), tol=0.0)


def test_projected_residual_zero_at_optimum(line):
    rep = solve_centralized(line, np.array([[5.0], [0.0], [0.0]]), tol=1e-9)
    g, _ = mean_gradient(line, rep.optimal_duals, np.array([[5.0], [0.0], [0.0]]))
    assert projected_residual(line, rep.optimal_duals, g) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), load=st.floats(0.2, 3.0))
def test_agrees_with_lp(seed, load):
    rng = np.random.default_rng(seed)
    net = random_instance(rng, n_max=5, k_max=2, beta_choices=(0.0,))
    arrivals = np.where(net.valid, load * rng.uniform(0, 4, (net.n, net.K)), 0.0)
    lp = lp_feasible(net, arrivals)
    # stay clear of the boundary where both solvers are tolerance-limited
    lo = lp_feasible(net, arrivals * 1.02)
    hi = lp_feasible(net, arrivals * 0.98)
    if lo != hi:
        return
    rep = solve_centralized(net, arrivals, tol=1e-6)
    assert rep.status != "inconclusive"
    assert rep.feasible == lp


def test_unreachable_destination_infeasible():
    topo = NetworkTopology(3, (Link(0, 1, 5.0), Link(1, 0, 5.0), Link(1, 2, 5.0)))
    net = Network(topo, CommoditySet((Commodity(dest=0),)))
    arr = np.array([[0.0], [0.0], [1.0]])
    assert solve_centralized(net, arr, max_iter=20_000).status == "infeasible"
