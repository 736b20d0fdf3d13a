"""Ready-made configs for the 10-node, 5-commodity experiments."""

from __future__ import annotations

from .cli import validate_scenario
from .config import scenario_from_dict

BENCHMARK_AVG_DEGREE = 4.0


def benchmark_config(seed=0, policy="abp", kind="poisson", horizon=500, period=10,
                 avg_degree=BENCHMARK_AVG_DEGREE) -> dict:
    """Config tree: 10 nodes, 5 commodities with distinct random destinations,
    capacities U[0, 100], reward 10 on links into the destination, mean 5
    arrivals per node and commodity."""
    arrivals = {"kind": kind, "mean": 5.0}
    if kind == "switching":
        arrivals["period"] = period
    return {
        "topology": {"random": {"n": 10, "avg_degree": avg_degree, "cap_lo": 0.0, "cap_hi": 100.0}},
        "commodities": {"random": {"count": 5, "beta_to_dest": 10.0}},
        "arrivals": arrivals,
        "policy": {"name": policy, "epsilon": 1.0, "add_order": 1},
        "run": {"horizon": horizon, "seed": seed},
    }


def feasible_seeds(count, start=0, max_seed=1000, **kwargs) -> list:
    """First ``count`` seeds whose stationary scenario the oracle accepts."""
    seeds = []
    seed = start
    while len(seeds) < count and seed < max_seed:
        scenario = scenario_from_dict(benchmark_config(seed=seed, **kwargs))
        if validate_scenario(scenario)[0] == "feasible":
            seeds.append(seed)
        seed += 1
    return seeds
