"""
Four policies on a random 10-node network
=========================================

Queues under max-pressure (bp), soft backpressure (sbp), the centralized
dual Newton step (newton) and accelerated backpressure (abp), each driven
by the same Poisson arrival stream.  The total queue of every policy is
written to ``policies.svg``.
"""

import os

import numpy as np

from abpnet.cli import validate_scenario
from abpnet.config import scenario_from_dict
from abpnet.plotting import line_chart_svg
from abpnet.scenarios import benchmark_config
from abpnet.simulator import run, series, stabilization_slot, tail_mean

SEED = 0
outdir = os.environ.get("ABPNET_OUTPUT_DIR", ".")

print("oracle says:", validate_scenario(scenario_from_dict(benchmark_config(seed=SEED))))

curves = {}
for policy in ("bp", "sbp", "newton", "abp"):
    scenario = scenario_from_dict(benchmark_config(seed=SEED, policy=policy, horizon=500))
    q = series(run(scenario))
    curves[policy] = (np.arange(q.size), q)
    print(f"{policy:>6}: final-quarter queue {tail_mean(q):8.0f}, flat from slot {stabilization_slot(q)}")

path = os.path.join(outdir, "policies.svg")
with open(path, "w") as fh:
    fh.write(line_chart_svg(curves, title="total queue", xlabel="slot", ylabel="packets"))
print("wrote", path)
