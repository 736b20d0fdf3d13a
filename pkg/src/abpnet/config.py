"""Scenario configuration files.

A config is a YAML/JSON key-value tree::

    topology:
      nodes: 3                       # or a list of ids 0..n-1
      links: [{from: 0, to: 1, capacity: 10}, ...]
      # or  random: {n: 10, avg_degree: 3, cap_lo: 0, cap_hi: 100}
    commodities:
      - {dest: 2, beta_default: 0, beta_to_dest: 10,
         beta_overrides: [{from: 0, to: 1, value: 3}]}
      # or  {random: {count: 5, beta_to_dest: 10}}  (distinct random destinations)
    arrivals: {kind: poisson, mean: 5}             # period/groups for switching
    policy: {name: abp, epsilon: 1, add_order: 1}
    run: {horizon: 500, seed: 0, warmup: 0}
    output: {csv_path: out.csv, svg_path: out.svg}

Randomized parts of the model are drawn from a generator seeded by
``run.seed`` (or ``topology.random.seed`` when given), independent of the
arrival stream.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .model import (
    ArrivalProcess,
    Commodity,
    CommoditySet,
    Link,
    ModelError,
    Network,
    NetworkTopology,
    random_topology,
)
from .policies import Policy


class ConfigError(ValueError):
    """Malformed or invalid scenario configuration."""


@dataclass(frozen=True)
class RunSettings:
    horizon: int = 500
    seed: int = 0
    warmup: int = 0
    initial_queue: float = 0.0


@dataclass(frozen=True)
class OutputSettings:
    csv_path: str | None = None
    svg_path: str | None = None


@dataclass(frozen=True)
class Scenario:
    topology: NetworkTopology
    commodities: CommoditySet
    arrivals: ArrivalProcess
    policy: Policy
    run: RunSettings
    output: OutputSettings
    raw: dict

    @property
    def network(self) -> Network:
        return Network(self.topology, self.commodities)

    def arrival_rng(self) -> np.random.Generator:
        return np.random.default_rng([self.run.seed, 1])


def model_rng(seed) -> np.random.Generator:
    return np.random.default_rng([int(seed), 0])


def _require(tree, key, where):
    if not isinstance(tree, dict) or key not in tree:
        raise ConfigError(f"missing key '{key}' in {where}")
    return tree[key]


def _build_topology(spec, rng) -> NetworkTopology:
    if not isinstance(spec, dict):
        raise ConfigError("'topology' must be a mapping")
    if "random" in spec:
        r = spec["random"]
        try:
            if "seed" in r:
                rng = model_rng(r["seed"])
            return random_topology(
                int(_require(r, "n", "topology.random")),
                float(r.get("avg_degree", 3.0)),
                (float(r.get("cap_lo", 0.0)), float(r.get("cap_hi", 100.0))),
                rng,
            )
        except ModelError as exc:
            raise ConfigError(str(exc)) from exc
    nodes = _require(spec, "nodes", "topology")
    if isinstance(nodes, int):
        n = nodes
    else:
        ids = [int(v) for v in nodes]
        if sorted(ids) != list(range(len(ids))):
            raise ConfigError("topology.nodes must be the dense ids 0..n-1")
        n = len(ids)
    links = []
    for entry in _require(spec, "links", "topology"):
        try:
            links.append(Link(int(entry["from"]), int(entry["to"]), float(entry["capacity"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad link entry {entry!r}") from exc
    return NetworkTopology(n, tuple(links))


def _commodity(entry, topology) -> Commodity:
    dest = int(_require(entry, "dest", "commodity"))
    default = float(entry.get("beta_default", 0.0))
    to_dest = float(entry.get("beta_to_dest", default))
    beta = {}
    for link in topology.links:
        value = to_dest if link.dst == dest else default
        if value:
            beta[(link.src, link.dst)] = value
    for ov in entry.get("beta_overrides", []) or []:
        beta[(int(ov["from"]), int(ov["to"]))] = float(ov["value"])
    return Commodity(dest=dest, beta=beta)


def _build_commodities(spec, topology, rng) -> CommoditySet:
    if isinstance(spec, dict) and "random" in spec:
        r = spec["random"]
        count = int(_require(r, "count", "commodities.random"))
        if count > topology.n_nodes:
            raise ConfigError("more commodities than nodes for distinct destinations")
        dests = rng.choice(topology.n_nodes, size=count, replace=False)
        entries = [
            {
                "dest": int(d),
                "beta_default": r.get("beta_default", 0.0),
                "beta_to_dest": r.get("beta_to_dest", r.get("beta_default", 0.0)),
            }
            for d in dests
        ]
    elif isinstance(spec, list):
        entries = spec
    else:
        raise ConfigError("'commodities' must be a list or a {random: ...} mapping")
    return CommoditySet(tuple(_commodity(e, topology) for e in entries))


def _build_arrivals(spec, topology, commodities) -> ArrivalProcess:
    kind = str(spec.get("kind", "poisson"))
    n, K = topology.n_nodes, len(commodities)
    mean_spec = spec.get("mean", 0.0)
    if isinstance(mean_spec, str):
        # YAML 1.1 reads exponents without a sign (1.0e8) as strings
        try:
            mean_spec = float(mean_spec)
        except ValueError as exc:
            raise ConfigError(f"arrivals.mean must be a number or a list, got {mean_spec!r}") from exc
    if isinstance(mean_spec, (int, float)):
        mean = np.full((n, K), float(mean_spec))
        mean[commodities.dests, np.arange(K)] = 0.0
    else:
        mean = np.zeros((n, K))
        for entry in mean_spec:
            mean[int(entry["node"]), int(entry["commodity"])] = float(entry["value"])
    groups = spec.get("groups")
    if kind == "switching" and groups is None:
        half = n // 2
        groups = [list(range(half)), list(range(half, n))]
    if groups is not None:
        groups = tuple(tuple(int(v) for v in g) for g in groups)
    return ArrivalProcess(kind=kind, mean=mean, period=int(spec.get("period", 0)), groups=groups)


def scenario_from_dict(tree: dict, **overrides) -> Scenario:
    """Validate a config tree; keyword overrides take precedence over the file.

    Recognized overrides: ``policy``, ``seed``, ``epsilon``, ``add_order``,
    ``horizon`` (``None`` values are ignored).
    """
    tree = copy.deepcopy(tree)
    if not isinstance(tree, dict):
        raise ConfigError("config root must be a mapping")
    pol = dict(tree.get("policy") or {})
    run = dict(tree.get("run") or {})
    mapping = {"policy": (pol, "name"), "epsilon": (pol, "epsilon"), "add_order": (pol, "add_order"),
               "seed": (run, "seed"), "horizon": (run, "horizon")}
    for key, value in overrides.items():
        if key not in mapping:
            raise ConfigError(f"unknown override '{key}'")
        if value is not None:
            target, name = mapping[key]
            target[name] = value
    tree["policy"], tree["run"] = pol, run

    try:
        run_settings = RunSettings(
            horizon=int(run.get("horizon", 500)),
            seed=int(run.get("seed", 0)),
            warmup=int(run.get("warmup", 0)),
            initial_queue=float(run.get("initial_queue", 0.0)),
        )
        if run_settings.horizon < 0 or run_settings.warmup < 0 or run_settings.initial_queue < 0:
            raise ConfigError("run.horizon, run.warmup and run.initial_queue must be >= 0")
        rng = model_rng(run_settings.seed)
        topology = _build_topology(_require(tree, "topology", "config"), rng)
        commodities = _build_commodities(_require(tree, "commodities", "config"), topology, rng)
        commodities.validate(topology)
        arrivals = _build_arrivals(tree.get("arrivals") or {}, topology, commodities)
        arrivals.validate(topology, commodities)
        policy = Policy(
            name=str(pol.get("name", "abp")),
            epsilon=float(pol.get("epsilon", 1.0)),
            add_order=int(pol.get("add_order", 1)),
            ridge=float(pol.get("ridge", 1.0)),
            project=bool(pol.get("project", True)),
        )
    except ConfigError:
        raise
    except (ModelError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc

    out = tree.get("output") or {}
    output = OutputSettings(csv_path=out.get("csv_path"), svg_path=out.get("svg_path"))
    return Scenario(topology, commodities, arrivals, policy, run_settings, output, tree)


def read_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(tree, dict):
        raise ConfigError(f"config {path} does not contain a mapping")
    return tree


def load_config(path, **overrides) -> Scenario:
    """Read, parse and validate a scenario file."""
    return scenario_from_dict(read_config(path), **overrides)
