"""
The abpnet command
==================

Everything above is also reachable from the shell.  This script writes a
config, checks it with the oracle, sweeps three policies over two seeds
and plots the traces.  The same calls as shell commands::

    abpnet validate --config net.yaml
    abpnet sweep --config net.yaml --policies bp,sbp,abp --seeds 0,1 --outdir runs
    abpnet plot runs/net_*_s0.csv -o queues.svg
"""

import glob
import os
import tempfile

import yaml

from abpnet.cli import main
from abpnet.scenarios import benchmark_config

work = tempfile.mkdtemp(prefix="abpnet-")
config = os.path.join(work, "net.yaml")
with open(config, "w") as fh:
    yaml.safe_dump(benchmark_config(seed=0, horizon=300), fh)

main(["validate", "--config", config])
main(["sweep", "--config", config, "--policies", "bp,sbp,abp", "--seeds", "0,1",
      "--outdir", os.path.join(work, "runs")])
main(["plot", *sorted(glob.glob(os.path.join(work, "runs", "net_*_s0.csv"))),
      "-o", os.path.join(work, "queues.svg")])
