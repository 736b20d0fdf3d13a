"""Routing policies as pure transitions ``(duals, arrivals) -> PolicyStep``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import add_direction, gradient, hessian, newton_direction_dense, split
from .rates import bp_rates, soft_rates

POLICY_NAMES = ("bp", "sbp", "newton", "abp")


@dataclass
class PolicyStep:
    rates: np.ndarray
    next_duals: np.ndarray
    gradient: np.ndarray
    mu: np.ndarray | None = None
    direction: np.ndarray | None = None

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.gradient))


def _project(net, x, clamp=True):
    if clamp:
        x = np.maximum(x, 0.0)
    return np.where(net.valid, x, 0.0)


def step_bp(net, duals, arrivals, epsilon=1.0) -> PolicyStep:
    """Backpressure as dual stochastic subgradient descent."""
    rates = bp_rates(net, duals)
    g = gradient(net, rates, arrivals)
    return PolicyStep(rates=rates, next_duals=_project(net, duals - epsilon * g), gradient=g)


def step_sbp(net, duals, arrivals, epsilon=1.0) -> PolicyStep:
    """Soft backpressure: waterfilling rates, stochastic gradient step."""
    rates, mu = soft_rates(net, duals)
    g = gradient(net, rates, arrivals)
    return PolicyStep(rates=rates, next_duals=_project(net, duals - epsilon * g), gradient=g, mu=mu)


def step_newton(net, duals, arrivals, epsilon=1.0, ridge=1.0) -> PolicyStep:
    """Centralized dual Newton step with a dense (regularized) Hessian solve."""
    rates, mu = soft_rates(net, duals)
    g = gradient(net, rates, arrivals)
    d = newton_direction_dense(hessian(net, rates, mu), g, ridge=ridge)
    return PolicyStep(
        rates=rates, next_duals=_project(net, duals + epsilon * d), gradient=g, mu=mu, direction=d
    )


def step_abp(net, duals, arrivals, epsilon=1.0, order=1, project=True) -> PolicyStep:
    """Accelerated backpressure: ADD-``order`` direction from one-hop data per sweep.

    ``project=False`` drops the clamp at zero and lets the queue priorities go
    negative (experimental; the default keeps the duals feasible).
    """
    rates, mu = soft_rates(net, duals)
    g = gradient(net, rates, arrivals)
    d = add_direction(split(hessian(net, rates, mu)), g, order)
    return PolicyStep(
        rates=rates, next_duals=_project(net, duals + epsilon * d, project),
        gradient=g, mu=mu, direction=d,
    )


@dataclass(frozen=True)
class Policy:
    """A named policy with its parameters bound."""

    name: str
    epsilon: float = 1.0
    add_order: int = 1
    ridge: float = 1.0
    project: bool = True

    def __post_init__(self):
        if self.name not in POLICY_NAMES:
            raise ValueError(f"unknown policy: {self.name}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.add_order < 0:
            raise ValueError("add_order must be >= 0")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")

    def step(self, net, duals, arrivals) -> PolicyStep:
        if self.name == "bp":
            return step_bp(net, duals, arrivals, self.epsilon)
        if self.name == "sbp":
            return step_sbp(net, duals, arrivals, self.epsilon)
        if self.name == "newton":
            return step_newton(net, duals, arrivals, self.epsilon, self.ridge)
        return step_abp(net, duals, arrivals, self.epsilon, self.add_order, self.project)
