"""Network, commodity and arrival-process model.

Nodes are dense integers ``0..n-1``.  Per-(node, commodity) quantities such as
queues, duals and arrivals are stored as ``(n, K)`` float arrays; the entry
``(dest[k], k)`` of every commodity is structurally zero.  Per-link quantities
are ``(L, K)`` arrays indexed by the position of the directed link in
``NetworkTopology.links``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


class ModelError(ValueError):
    """Raised when a topology, commodity set or arrival process is invalid."""


@dataclass(frozen=True)
class Link:
    src: int
    dst: int
    capacity: float


@dataclass(frozen=True)
class NetworkTopology:
    """Directed graph with per-link capacities (packets/slot)."""

    n_nodes: int
    links: tuple[Link, ...]

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ModelError("topology needs at least one node")
        seen = set()
        for link in self.links:
            for v in (link.src, link.dst):
                if not 0 <= v < self.n_nodes:
                    raise ModelError(f"link {link.src}->{link.dst} references unknown node {v}")
            if link.src == link.dst:
                raise ModelError(f"self-loop at node {link.src}")
            if (link.src, link.dst) in seen:
                raise ModelError(f"duplicate link {link.src}->{link.dst}")
            if not np.isfinite(link.capacity) or link.capacity <= 0:
                raise ModelError(
                    f"link {link.src}->{link.dst} has non-positive capacity {link.capacity}"
                )
            seen.add((link.src, link.dst))

    @property
    def nodes(self) -> list[int]:
        return list(range(self.n_nodes))

    @property
    def n_links(self) -> int:
        return len(self.links)

    def neighbors(self, i: int) -> list[int]:
        """Nodes sharing a link with ``i`` in either direction."""
        out = set()
        for link in self.links:
            if link.src == i:
                out.add(link.dst)
            elif link.dst == i:
                out.add(link.src)
        return sorted(out)

    def is_connected(self) -> bool:
        """Connectivity of the undirected skeleton."""
        adj: list[set[int]] = [set() for _ in range(self.n_nodes)]
        for link in self.links:
            adj[link.src].add(link.dst)
            adj[link.dst].add(link.src)
        seen = {0}
        todo = deque([0])
        while todo:
            u = todo.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return len(seen) == self.n_nodes


@dataclass(frozen=True)
class Commodity:
    dest: int
    beta: dict[tuple[int, int], float] = field(default_factory=dict)

    def beta_on(self, i: int, j: int) -> float:
        return self.beta.get((i, j), 0.0)


@dataclass(frozen=True)
class CommoditySet:
    """Flows indexed ``0..K-1``, each with a destination and link rewards."""

    commodities: tuple[Commodity, ...]

    def __len__(self):
        return len(self.commodities)

    def __iter__(self):
        return iter(self.commodities)

    def __getitem__(self, k):
        return self.commodities[k]

    @property
    def dests(self) -> np.ndarray:
        return np.array([c.dest for c in self.commodities], dtype=int)

    def validate(self, topology: NetworkTopology):
        if not self.commodities:
            raise ModelError("at least one commodity is required")
        for k, c in enumerate(self.commodities):
            if not 0 <= c.dest < topology.n_nodes:
                raise ModelError(f"commodity {k} has unknown destination {c.dest}")
            for (i, j), b in c.beta.items():
                if b < 0 or not np.isfinite(b):
                    raise ModelError(f"commodity {k}: beta on {i}->{j} must be finite and >= 0")


ARRIVAL_KINDS = ("constant", "poisson", "switching")


@dataclass(frozen=True)
class ArrivalProcess:
    """Exogenous packet arrivals.

    ``mean`` is an ``(n, K)`` array of per-slot means.  For ``switching`` the
    two node groups take turns being active for ``period`` slots each, group
    0 first; active nodes draw Poisson(mean), inactive ones receive nothing.
    """

    kind: str
    mean: np.ndarray
    period: int = 0
    groups: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    def validate(self, topology: NetworkTopology, commodities: CommoditySet):
        if self.kind not in ARRIVAL_KINDS:
            raise ModelError(f"unknown arrival kind {self.kind!r}")
        shape = (topology.n_nodes, len(commodities))
        if self.mean.shape != shape:
            raise ModelError(f"arrival mean has shape {self.mean.shape}, expected {shape}")
        if np.any(self.mean < 0) or not np.all(np.isfinite(self.mean)):
            raise ModelError("arrival means must be finite and >= 0")
        for k, dest in enumerate(commodities.dests):
            if self.mean[dest, k] > 0:
                raise ModelError(f"destination {dest} has positive arrivals for its own commodity {k}")
        if self.kind == "switching":
            if self.period < 1:
                raise ModelError("switching arrivals need period >= 1")
            if self.groups is None or len(self.groups) != 2:
                raise ModelError("switching arrivals need exactly two node groups")
            a, b = set(self.groups[0]), set(self.groups[1])
            if a & b:
                raise ModelError("switching groups must be disjoint")
            sources = set(np.flatnonzero(self.mean.sum(axis=1) > 0).tolist())
            if not sources <= a | b:
                raise ModelError(f"switching groups miss source nodes {sorted(sources - a - b)}")
            if not (a | b) <= set(range(topology.n_nodes)):
                raise ModelError("switching groups reference unknown nodes")

    def active_mask(self, t: int) -> np.ndarray:
        """Boolean ``(n,)`` mask of nodes allowed to generate traffic at slot ``t``."""
        n = self.mean.shape[0]
        if self.kind != "switching":
            return np.ones(n, dtype=bool)
        mask = np.zeros(n, dtype=bool)
        mask[list(self.groups[(t // self.period) % 2])] = True
        return mask

    def mean_at(self, t: int) -> np.ndarray:
        """Instantaneous expected arrivals at slot ``t`` (the current regime)."""
        return self.mean * self.active_mask(t)[:, None]


def sample_arrivals(proc: ArrivalProcess, t: int, rng: np.random.Generator) -> np.ndarray:
    """Draw the ``(n, K)`` arrivals of slot ``t``.

    Poisson-type kinds always consume one full ``(n, K)`` draw from ``rng`` so
    that runs sharing a seed see identical streams regardless of policy.
    """
    if t < 0:
        raise ValueError("slot index must be >= 0")
    if proc.kind == "constant":
        return proc.mean.astype(float, copy=True)
    draws = rng.poisson(proc.mean).astype(float)
    if proc.kind == "switching":
        draws *= proc.active_mask(t)[:, None]
    return draws


def random_topology(n, avg_degree, cap_range, rng, max_tries=100) -> NetworkTopology:
    """Seeded random connected topology.

    An undirected skeleton with ``round(n * avg_degree / 2)`` edges is drawn by
    first building a random spanning tree and then adding uniformly chosen
    extra edges; each edge becomes two directed links whose capacities are
    drawn independently from ``U[lo, hi]``.
    """
    lo, hi = cap_range
    if n < 2:
        raise ModelError("random topology needs n >= 2")
    if lo < 0 or hi <= lo:
        raise ModelError(f"invalid capacity range [{lo}, {hi}]")
    max_edges = n * (n - 1) // 2
    n_edges = int(round(n * avg_degree / 2))
    n_edges = min(max(n_edges, n - 1), max_edges)

    for _ in range(max_tries):
        order = rng.permutation(n)
        edges = set()
        for pos in range(1, n):
            u = int(order[pos])
            v = int(order[rng.integers(pos)])
            edges.add((min(u, v), max(u, v)))
        candidates = [(u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in edges]
        extra = n_edges - len(edges)
        if extra > 0:
            pick = rng.choice(len(candidates), size=extra, replace=False)
            edges.update(candidates[p] for p in sorted(pick))
        links = []
        for u, v in sorted(edges):
            c_uv, c_vu = rng.uniform(lo, hi, size=2)
            # U[lo, hi] with lo == 0 can in principle return exactly 0
            if c_uv <= 0 or c_vu <= 0:
                break
            links.append(Link(u, v, float(c_uv)))
            links.append(Link(v, u, float(c_vu)))
        else:
            topo = NetworkTopology(n, tuple(links))
            if topo.is_connected():
                return topo
    raise ModelError(f"could not build a connected topology with n={n}, avg_degree={avg_degree}")


class Network:
    """Topology and commodities compiled into the arrays the solvers use.

    Attributes
    ----------
    src, dst, cap : ndarray, shape (L,)
        Directed link endpoints and capacities.
    beta : ndarray, shape (L, K)
        Linear reward of the quadratic link objective.
    dests : ndarray, shape (K,)
    valid : ndarray of bool, shape (n, K)
        False exactly at ``(dests[k], k)``; those duals and queues do not exist.
    sendable : ndarray of bool, shape (L, K)
        False where the link leaves the commodity's destination.
    incidence : ndarray, shape (n, L)
        +1 at the link source, -1 at the link destination.
    """

    def __init__(self, topology: NetworkTopology, commodities: CommoditySet):
        commodities.validate(topology)
        self.topology = topology
        self.commodities = commodities
        self.n = topology.n_nodes
        self.K = len(commodities)
        self.L = topology.n_links
        self.src = np.array([l.src for l in topology.links], dtype=int)
        self.dst = np.array([l.dst for l in topology.links], dtype=int)
        self.cap = np.array([l.capacity for l in topology.links], dtype=float)
        self.dests = commodities.dests
        self.beta = np.array(
            [[c.beta_on(l.src, l.dst) for c in commodities] for l in topology.links], dtype=float
        ).reshape(self.L, self.K)
        self.valid = np.ones((self.n, self.K), dtype=bool)
        self.valid[self.dests, np.arange(self.K)] = False
        self.sendable = self.src[:, None] != self.dests[None, :]
        self.incidence = np.zeros((self.n, self.L))
        self.incidence[self.src, np.arange(self.L)] = 1.0
        self.incidence[self.dst, np.arange(self.L)] = -1.0
        self._link_index = {(int(s), int(d)): l for l, (s, d) in enumerate(zip(self.src, self.dst))}
        self.pairs = self._neighbor_pairs()

    def _neighbor_pairs(self) -> np.ndarray:
        pairs = set()
        for s, d in zip(self.src, self.dst):
            pairs.add((int(s), int(d)))
            pairs.add((int(d), int(s)))
        return np.array(sorted(pairs), dtype=int).reshape(-1, 2)

    def link_index(self, i: int, j: int) -> int | None:
        return self._link_index.get((i, j))

    @property
    def dim(self) -> int:
        """Number of dual variables (destination entries excluded)."""
        return int(self.valid.sum())

    def flatten(self, x: np.ndarray) -> np.ndarray:
        """``(n, K)`` array to the vector of valid entries, row-major."""
        return x[self.valid]

    def unflatten(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n, self.K))
        out[self.valid] = v
        return out

    def differentials(self, duals: np.ndarray) -> np.ndarray:
        """Per-link pressures ``duals[i] - duals[j]`` of shape ``(L, K)``."""
        lam = np.where(self.valid, duals, 0.0)
        return lam[self.src] - lam[self.dst]


def quadratic_objective(rates: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Elementwise link objective ``-r^2/2 + beta*r``."""
    return -0.5 * rates**2 + beta * rates
