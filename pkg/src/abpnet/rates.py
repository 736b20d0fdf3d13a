"""Per-link rate allocation: max-pressure and reverse waterfilling.

For the quadratic link objective ``f(r) = -r^2/2 + beta*r`` the per-link
Lagrangian maximizer with capacity multiplier ``mu`` is

    r_k = F(mu - diff_k) = max(0, diff_k + beta_k - mu),

where ``F`` is the clamped inverse of ``f'``.  ``mu`` is zero when the
unconstrained rates fit in the capacity and otherwise the root of
``sum_k r_k(mu) = C``.
"""

from __future__ import annotations

import numpy as np

ACTIVATION_EPS = 1e-12
MAX_BISECTIONS = 200


def f_inverse_derivative(x, beta=0.0):
    """Inverse of ``f'(r) = beta - r`` clamped to nonnegative rates."""
    return np.maximum(0.0, np.asarray(beta, dtype=float) - np.asarray(x, dtype=float))


def mu_tolerance(capacity):
    return 1e-9 * np.maximum(1.0, capacity)


def allocate_bp(diff, capacity, sendable=None):
    """Give the whole capacity to the commodity with the largest positive pressure.

    Ties go to the lowest commodity index.  Returns zero rates when no
    pressure is strictly positive.
    """
    diff = np.asarray(diff, dtype=float)
    if sendable is not None:
        diff = np.where(sendable, diff, -np.inf)
    rates = np.zeros(diff.shape)
    k = int(np.argmax(diff))
    if diff[k] > 0:
        rates[k] = capacity
    return rates


def _supply(c, mu):
    return np.maximum(0.0, c - mu[..., None]).sum(axis=-1)


def _waterfill_levels(c, cap):
    """Vectorized ``mu`` for rows of ``c = diff + beta`` (``-inf`` = excluded)."""
    c = np.asarray(c, dtype=float)
    cap = np.asarray(cap, dtype=float)
    tol = mu_tolerance(cap)
    mu = np.zeros(cap.shape)
    excess = _supply(c, mu) > cap
    if not np.any(excess):
        return mu
    cx, capx, tolx = c[excess], cap[excess], tol[excess]
    lo = np.zeros(capx.shape)
    hi = np.max(np.where(np.isfinite(cx), cx, 0.0), axis=-1)
    mid = 0.5 * (lo + hi)
    for _ in range(MAX_BISECTIONS):
        s = _supply(cx, mid)
        if np.all(np.abs(s - capx) <= tolx):
            break
        over = s > capx
        lo = np.where(over, mid, lo)
        hi = np.where(over, hi, mid)
        mid = 0.5 * (lo + hi)
    # The supply is piecewise linear in mu; once bisection has located the
    # active set, one linear solve on that set lands on the exact root.
    for _ in range(2):
        active = cx > mid[:, None]
        n_act = active.sum(axis=-1)
        exact = (np.where(active, cx, 0.0).sum(axis=-1) - capx) / np.maximum(n_act, 1)
        mid = np.where(n_act > 0, np.maximum(exact, 0.0), mid)
    mu[excess] = mid
    return mu


def solve_mu(diff, capacity, beta=0.0, tol=None):
    """Waterfilling level of a single link.

    Bisection on ``[0, max_k(diff_k + beta_k)]`` followed by an exact
    piecewise-linear correction, so the capacity equation holds to rounding.
    """
    diff = np.atleast_1d(np.asarray(diff, dtype=float))
    c = diff + np.broadcast_to(np.asarray(beta, dtype=float), diff.shape)
    if tol is not None and tol <= 0:
        raise ValueError("tol must be > 0")
    return float(_waterfill_levels(c[None, :], np.array([capacity]))[0])


def allocate_soft(diff, capacity, beta=0.0, sendable=None):
    """Reverse-waterfilling rates of a single link; returns ``(rates, mu)``."""
    diff = np.atleast_1d(np.asarray(diff, dtype=float))
    beta = np.broadcast_to(np.asarray(beta, dtype=float), diff.shape)
    c = diff + beta
    if sendable is not None:
        c = np.where(sendable, c, -np.inf)
    mu = float(_waterfill_levels(c[None, :], np.array([capacity]))[0])
    return np.maximum(0.0, c - mu), mu


def active_set(rates, eps=ACTIVATION_EPS) -> set[int]:
    """Commodities with strictly positive rate; empty for a missing link."""
    if rates is None:
        return set()
    return {int(k) for k in np.flatnonzero(np.asarray(rates) > eps)}


def link_objective(rates, diff, beta=0.0):
    """Per-link Lagrangian ``sum_k f(r_k) + r_k * diff_k``."""
    rates = np.asarray(rates, dtype=float)
    return float(np.sum(-0.5 * rates**2 + beta * rates + rates * diff))


def bp_rates(net, duals) -> np.ndarray:
    """Max-pressure rates on every link, shape ``(L, K)``."""
    diff = np.where(net.sendable, net.differentials(duals), -np.inf)
    rates = np.zeros((net.L, net.K))
    best = np.argmax(diff, axis=1)
    rows = np.arange(net.L)
    on = diff[rows, best] > 0
    rates[rows[on], best[on]] = net.cap[on]
    return rates


def soft_rates(net, duals):
    """Reverse-waterfilling rates ``(L, K)`` and levels ``(L,)`` on every link."""
    c = np.where(net.sendable, net.differentials(duals) + net.beta, -np.inf)
    mu = _waterfill_levels(c, net.cap)
    rates = np.maximum(0.0, c - mu[:, None])
    return rates, mu
