"""Synchronous slotted simulation and trace metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .curvature import gradient
from .model import sample_arrivals

CSV_FIELDS = ("t", "total_queue", "total_dual", "grad_norm", "max_link_util")
DIVERGENCE_LIMIT = 1e9


class DivergenceError(RuntimeError):
    """The total dual exceeded the divergence guard; ``trace`` holds the slots so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class TraceRecord:
    t: int
    total_queue: float
    total_dual: float
    grad_norm: float
    max_link_util: float
    link_util: np.ndarray | None = field(default=None, repr=False)
    queues: np.ndarray | None = field(default=None, repr=False)
    duals: np.ndarray | None = field(default=None, repr=False)

    def row(self):
        return (self.t, self.total_queue, self.total_dual, self.grad_norm, self.max_link_util)


def evolve_queues(net, q, rates, arrivals) -> np.ndarray:
    """``q' = [q + a + inflow - outflow]^+`` on every non-destination entry.

    Evaluated as ``q - g`` with ``g`` the dual gradient, so that a unit-step
    subgradient update of the same state reproduces it bit for bit.
    """
    return np.where(net.valid, np.maximum(q - gradient(net, rates, arrivals), 0.0), 0.0)


def simulate(net, arrivals, policy, horizon, rng, q0=None, detail=False, guard=DIVERGENCE_LIMIT):
    """Run ``horizon`` slots; the duals start at the initial queues.

    Each record describes the end of its slot: queues and duals after the
    update, the gradient and link utilization of the rates used in the slot.
    """
    q = np.zeros((net.n, net.K)) if q0 is None else np.where(net.valid, q0, 0.0).astype(float)
    lam = q.copy()
    trace = []
    for t in range(horizon):
        a = sample_arrivals(arrivals, t, rng)
        step = policy.step(net, lam, a)
        q = evolve_queues(net, q, step.rates, a)
        lam = step.next_duals
        util = step.rates.sum(axis=1) / net.cap
        rec = TraceRecord(
            t=t,
            total_queue=float(q.sum()),
            total_dual=float(lam.sum()),
            grad_norm=step.grad_norm,
            max_link_util=float(util.max()) if util.size else 0.0,
        )
        if detail:
            rec.link_util, rec.queues, rec.duals = util, q.copy(), lam.copy()
        trace.append(rec)
        if not np.isfinite(rec.total_dual) or rec.total_dual > guard:
            raise DivergenceError(
                f"total dual {rec.total_dual:.3g} exceeded {guard:.3g} at slot {t}", trace
            )
    return trace


def run(scenario, detail=False):
    """Simulate a validated :class:`~abpnet.config.Scenario`."""
    net = scenario.network
    q0 = np.full((net.n, net.K), scenario.run.initial_queue)
    return simulate(
        net, scenario.arrivals, scenario.policy, scenario.run.horizon,
        scenario.arrival_rng(), q0=q0, detail=detail,
    )


def series(trace, name="total_queue") -> np.ndarray:
    return np.array([getattr(r, name) for r in trace], dtype=float)


def stabilization_slot(values, window=20, slope_tol=0.005):
    """First slot starting a window with a flat least-squares fit.

    Returns the first ``t`` such that the slope of ``values[t:t+window]`` has
    magnitude at most ``slope_tol`` times the window mean, or ``None``.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    y = np.asarray(values, dtype=float)
    if y.size < window:
        return None
    x = np.arange(window) - (window - 1) / 2.0
    wins = np.lib.stride_tricks.sliding_window_view(y, window)
    slopes = wins @ x / (x @ x)
    level = np.abs(wins.mean(axis=1))
    hit = np.flatnonzero(np.abs(slopes) <= slope_tol * level + 1e-12)
    return int(hit[0]) if hit.size else None


def tail_mean(values, fraction=0.25) -> float:
    """Mean over the final ``fraction`` of a series."""
    y = np.asarray(values, dtype=float)
    if y.size == 0:
        return float("nan")
    start = int(np.floor(y.size * (1.0 - fraction)))
    return float(y[min(start, y.size - 1):].mean())


def running_mean(values, start, stop) -> float:
    y = np.asarray(values, dtype=float)
    return float(y[start:stop].mean())


def write_csv(trace, path_or_stream):
    """Write the trace with 9 significant digits per float."""

    def _emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for rec in trace:
            w.writerow([rec.t] + [f"{v:.9g}" for v in rec.row()[1:]])

    if hasattr(path_or_stream, "write"):
        _emit(path_or_stream)
    else:
        with open(path_or_stream, "w", newline="", encoding="utf-8") as fh:
            _emit(fh)


def read_csv(path) -> dict:
    """Load a trace CSV into ``{column: ndarray}``; raises ``ValueError`` on schema errors."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_FIELDS:
            raise ValueError(f"{path}: expected header {','.join(CSV_FIELDS)}")
        rows = [r for r in reader if r]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric data") from exc
    if data.shape[1] != len(CSV_FIELDS):
        raise ValueError(f"{path}: wrong column count")
    return {name: data[:, i] for i, name in enumerate(CSV_FIELDS)}


def summarize(trace, warmup=0, window=20, slope_tol=0.005) -> dict:
    """Headline numbers of a run; time averages skip the first ``warmup`` slots."""
    q = series(trace, "total_queue")
    d = series(trace, "total_dual")
    return {
        "slots": len(trace),
        "stabilization_slot": stabilization_slot(q, window, slope_tol) if len(q) else None,
        "tail_mean_queue": tail_mean(q),
        "mean_total_dual": float(d[warmup:].mean()) if len(d) > warmup else float("nan"),
    }
