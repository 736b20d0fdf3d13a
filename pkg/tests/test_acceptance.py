"""Acceptance criteria, each run at its stated tolerance.

Every test records one pass/fail line that is repeated in the terminal
summary.  Scenario runs are shared through module-scoped fixtures; their
wall time counts toward the runtime budgets.
"""

import io
import time

import numpy as np
import pytest

from abpnet.config import scenario_from_dict
from abpnet.curvature import add_direction, gradient, hessian, split
from abpnet.oracle import (
    dense_neumann,
    fd_hessian,
    node_of_coordinates,
    random_instance,
    sample_smooth_duals,
)
from abpnet.rates import allocate_soft, link_objective, soft_rates
from abpnet.scenarios import feasible_seeds, benchmark_config
from abpnet.simulator import (
    DivergenceError,
    run,
    series,
    stabilization_slot,
    tail_mean,
    write_csv,
)

N_INSTANCES = 50
N_SEEDS = 10
TRIO = ("abp", "sbp", "bp")


def _instances():
    rng = np.random.default_rng(2024)
    out = []
    for _ in range(N_INSTANCES):
        net = random_instance(rng, n_max=6, k_max=3)
        lam = sample_smooth_duals(net, rng)
        out.append((net, lam))
    return out


@pytest.fixture(scope="module")
def instances():
    return _instances()


# 1 -----------------------------------------------------------------------

def test_hessian_matches_finite_differences(instances, report):
    t0 = time.perf_counter()
    worst_rel = worst_sym = 0.0
    sparse_ok = True
    for net, lam in instances:
        rates, mu = soft_rates(net, lam)
        H = hessian(net, rates, mu)
        dense = H.to_dense()
        fd = fd_hessian(net, lam)
        rel = np.abs(dense - fd) / np.maximum(np.abs(fd), 1.0)
        worst_rel = max(worst_rel, float(rel.max()))
        worst_sym = max(worst_sym, float(np.abs(dense - dense.T).max()))
        adj = np.eye(net.n, dtype=bool)
        adj[net.src, net.dst] = adj[net.dst, net.src] = True
        sparse_ok &= not H.full_blocks()[~adj].any()
    elapsed = time.perf_counter() - t0
    ok = worst_rel <= 1e-5 and worst_sym <= 1e-12 and sparse_ok and elapsed < 10
    report(
        "1 Hessian vs finite differences", ok,
        f"max rel err {worst_rel:.2e} (<=1e-5), asym {worst_sym:.1e} (<=1e-12), "
        f"sparsity {'exact' if sparse_ok else 'BROKEN'}, {elapsed:.1f}s (<10s)",
    )
    assert ok


# 2 -----------------------------------------------------------------------

def test_add_matches_dense_neumann(instances, report):
    t0 = time.perf_counter()
    worst = 0.0
    for net, lam in instances:
        rates, mu = soft_rates(net, lam)
        H = hessian(net, rates, mu)
        sp = split(H)
        g = gradient(net, rates, np.zeros((net.n, net.K)))
        dense = H.to_dense()
        nodes = node_of_coordinates(net)
        for order in range(4):
            d = add_direction(sp, g, order)
            ref = dense_neumann(dense, nodes, order) @ (-g[net.valid])
            worst = max(worst, float(np.abs(d[net.valid] - ref).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 5
    report("2 ADD-N vs dense Neumann", ok, f"max abs err {worst:.2e} (<=1e-10), {elapsed:.2f}s (<5s)")
    assert ok


# 3 -----------------------------------------------------------------------

def test_bp_duals_are_queues(report):
    sc = scenario_from_dict(benchmark_config(seed=0, policy="bp", horizon=500))
    trace = run(sc, detail=True)
    mismatched = sum(not np.array_equal(r.duals, r.queues) for r in trace)
    ok = len(trace) == 500 and mismatched == 0
    report("3 BP duals equal queues", ok, f"{500 - mismatched}/500 slots bitwise equal")
    assert ok


# 4 -----------------------------------------------------------------------

def test_waterfilling_optimal_and_kkt(report):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    beaten = kkt_bad = 0
    worst_gap = -np.inf
    for _ in range(10_000):
        K = int(rng.integers(1, 6))
        diff = rng.uniform(-30, 30, K)
        cap = float(rng.uniform(0.01, 100))
        beta = rng.choice([0.0, 10.0], K)
        rates, mu = allocate_soft(diff, cap, beta)
        best = link_objective(rates, diff, beta)
        # random feasible competitor: a point in the capacity simplex
        w = rng.exponential(size=K + 1)
        cand = cap * w[:K] / w.sum()
        gap = link_objective(cand, diff, beta) - best
        worst_gap = max(worst_gap, gap)
        beaten += gap > 1e-8
        tol = 1e-9 * max(1.0, cap)
        kkt_bad += not (
            np.all(rates >= 0)
            and rates.sum() <= cap + tol
            and mu >= 0
            and mu * (cap - rates.sum()) <= 1e-7 * max(1.0, cap)
        )
    elapsed = time.perf_counter() - t0
    ok = beaten == 0 and kkt_bad == 0 and elapsed < 10
    report(
        "4 waterfilling optimality", ok,
        f"{beaten} of 10^4 competitors better (max gain {worst_gap:.1e}), "
        f"{kkt_bad} KKT violations, {elapsed:.1f}s (<10s)",
    )
    assert ok


# 5 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def stationary():
    t0 = time.perf_counter()
    seeds = feasible_seeds(N_SEEDS)
    traces = {p: [] for p in TRIO}
    for seed in seeds:
        for pol in TRIO:
            sc = scenario_from_dict(benchmark_config(seed=seed, policy=pol, horizon=500))
            traces[pol].append(series(run(sc)))
    return seeds, traces, time.perf_counter() - t0


def test_stationary_queue_ordering(stationary, report):
    seeds, traces, elapsed = stationary
    m = {p: tail_mean(np.mean(traces[p], axis=0)) for p in TRIO}
    ok = (
        len(seeds) == N_SEEDS
        and m["abp"] < m["sbp"] < m["bp"]
        and m["abp"] <= 0.5 * m["sbp"]
        and m["sbp"] <= 0.9 * m["bp"]
        and elapsed < 60
    )
    report(
        "5a stationary final-quarter queues", ok,
        f"ABP {m['abp']:.0f} < SBP {m['sbp']:.0f} < BP {m['bp']:.0f}; "
        f"ABP/SBP {m['abp'] / m['sbp']:.2f} (<=0.5), SBP/BP {m['sbp'] / m['bp']:.2f} (<=0.9); "
        f"seeds {seeds}; {elapsed:.1f}s (<60s)",
    )
    assert ok


def test_stationary_stabilization_ordering(stationary, report):
    seeds, traces, _ = stationary
    hits, slots = 0, []
    for i in range(len(seeds)):
        s = {p: stabilization_slot(traces[p][i]) for p in TRIO}
        slots.append(tuple(s[p] for p in TRIO))
        if None not in s.values() and s["abp"] < s["sbp"] < s["bp"]:
            hits += 1
    ok = hits >= 8
    report(
        "5b stabilization ABP < SBP < BP", ok,
        f"{hits}/10 seeds (need >=8); (abp, sbp, bp) slots per seed: {slots}",
    )
    assert ok


# 6 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def switching():
    t0 = time.perf_counter()
    seeds = feasible_seeds(N_SEEDS, kind="switching")
    out = {p: {"queue": [], "dual": [], "diverged": 0} for p in TRIO}
    for seed in seeds:
        for pol in TRIO:
            sc = scenario_from_dict(benchmark_config(seed=seed, policy=pol, kind="switching", horizon=1000))
            try:
                trace = run(sc)
            except DivergenceError as exc:
                out[pol]["diverged"] += 1
                trace = exc.trace
            out[pol]["queue"].append(series(trace, "total_queue"))
            out[pol]["dual"].append(series(trace, "total_dual"))
    return seeds, out, time.perf_counter() - t0


def test_switching_abp_bounded(switching, report):
    seeds, out, elapsed = switching
    abp = out["abp"]
    q = np.mean(abp["queue"], axis=0)
    T = len(q)
    # cumulative mean M(t) over the final quarter, compared with M(T)
    cum = np.cumsum(q) / np.arange(1, T + 1)
    tail = cum[3 * T // 4 - 1:]
    drift = float(np.max(np.abs(tail - cum[-1])) / cum[-1])
    ok = abp["diverged"] == 0 and drift <= 0.10 and elapsed < 120
    report(
        "6a switching ABP queue bounded", ok,
        f"guard trips {abp['diverged']}; final-quarter running mean varies {100 * drift:.1f}% (<=10%); "
        f"mean queue at t=T/2 {q[T // 2]:.0f}, t=T {q[-1]:.0f}; {elapsed:.1f}s (<120s)",
    )
    assert ok


def test_switching_abp_dual_variance(switching, report):
    seeds, out, _ = switching
    hits = 0
    ratios = []
    for i in range(len(seeds)):
        var = {p: float(np.var(out[p]["dual"][i][500:])) for p in TRIO}
        ratios.append(round(var["abp"] / min(var["sbp"], var["bp"]), 4))
        hits += var["abp"] < var["sbp"] and var["abp"] < var["bp"]
    ok = hits >= 8
    report(
        "6b switching ABP dual variance smallest", ok,
        f"{hits}/10 seeds (need >=8); var(ABP)/min(var SBP, var BP): {ratios}",
    )
    assert ok


# 7 -----------------------------------------------------------------------

def test_dual_running_mean_settles(report):
    t0 = time.perf_counter()
    seeds = feasible_seeds(5)
    worst, where = 0.0, None
    for seed in seeds:
        for pol in ("bp", "sbp", "newton", "abp"):
            d = series(run(scenario_from_dict(benchmark_config(seed=seed, policy=pol, horizon=2000))), "total_dual")
            m1, m2 = d[500:1000].mean(), d[1000:2000].mean()
            change = abs(m2 - m1) / m1
            if change > worst:
                worst, where = change, (pol, seed)
    elapsed = time.perf_counter() - t0
    ok = worst < 0.05
    report(
        "7 dual running mean T=1000 vs 2000", ok,
        f"max change {100 * worst:.2f}% (<5%) at {where}; seeds {seeds}; {elapsed:.1f}s",
    )
    assert ok


# 8 -----------------------------------------------------------------------

def test_determinism(report):
    cases = [
        dict(seed=0, policy="abp", horizon=300),
        dict(seed=3, policy="newton", horizon=200),
        dict(seed=1, policy="bp", kind="switching", horizon=300),
        dict(seed=2, policy="sbp", kind="switching", horizon=300),
    ]
    same = 0
    for case in cases:
        texts = []
        for _ in range(2):
            buf = io.StringIO()
            write_csv(run(scenario_from_dict(benchmark_config(**case))), buf)
            texts.append(buf.getvalue().encode())
        same += texts[0] == texts[1]
    ok = same == len(cases)
    report("8 determinism", ok, f"{same}/{len(cases)} repeated runs produced identical CSV bytes")
    assert ok
