"""Log-domain multi-marginal Sinkhorn for the Schroedinger system."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .measures import Coupling, PotentialSet, ProductSpace, product_tensor

log = logging.getLogger(__name__)

EXP_GUARD = 700.0


class SinkhornError(RuntimeError):
    pass


@dataclass(frozen=True)
class SinkhornConfig:
    epsilon: float
    max_sweeps: int = 10_000
    marginal_tol: float = 1e-9
    potential_tol: float | None = None  # defaults to 1e-10 * epsilon
    warm_start: PotentialSet | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.marginal_tol <= 0 or (self.potential_tol is not None and self.potential_tol <= 0):
            raise ValueError("tolerances must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")

    @property
    def ptol(self) -> float:
        return 1e-10 * self.epsilon if self.potential_tol is None else self.potential_tol


@dataclass(frozen=True)
class EntropicSolution:
    epsilon: float
    potentials: PotentialSet
    dual_value: float
    primal_value: float
    cost_term: float
    entropy: float
    sweeps: int
    marginal_errors: tuple[float, ...]
    converged: bool
    partitions: int = 1

    @property
    def value(self) -> float:
        return self.dual_value

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "dual_value": self.dual_value,
            "primal_value": self.primal_value,
            "cost_term": self.cost_term,
            "entropy": self.entropy,
            "sweeps": self.sweeps,
            "marginal_errors": list(self.marginal_errors),
            "converged": self.converged,
            "partitions": self.partitions,
        }


def _log_weights(space: ProductSpace) -> list[np.ndarray]:
    out = []
    for mu in space.marginals:
        if np.any(mu.weights <= 0):
            raise SinkhornError("zero-weight atoms must be stripped before solving")
        out.append(np.log(mu.weights))
    return out


def _softmin_update(phis, logw, C, eps, i, space: ProductSpace) -> np.ndarray:
    m = space.m
    s = -C / eps
    for j in range(m):
        if j != i:
            s = s + space.axis_view(j, phis[j] / eps + logw[j])
    others = tuple(j for j in range(m) if j != i)
    mx = s.max(axis=others, keepdims=True)
    with np.errstate(invalid="ignore"):  # all -inf slices are reported below
        lse = np.log(np.exp(s - mx).sum(axis=others)) + mx.reshape(-1)
    new = -eps * lse
    if not np.all(np.isfinite(new)):
        raise SinkhornError(
            f"non-finite potential in update of marginal {i} at epsilon={eps:g}"
        )
    return new


def sinkhorn_sweep(potentials: PotentialSet, cost: np.ndarray, space: ProductSpace,
                   epsilon: float) -> PotentialSet:
    """One cyclic pass i = 1..m of the softmin (Schroedinger) updates."""
    C = np.asarray(cost, dtype=float)
    if C.shape != space.shape or potentials.m != space.m:
        raise ValueError("cost, potentials and space are inconsistent")
    logw = _log_weights(space)
    phis = [np.array(p) for p in potentials.phis]
    for i in range(space.m):
        phis[i] = _softmin_update(phis, logw, C, epsilon, i, space)
    return PotentialSet(tuple(phis))


def _plan(potentials: PotentialSet, C: np.ndarray, eps: float, space: ProductSpace):
    expo = (potentials.oplus(space) - C) / eps
    if expo.max() > EXP_GUARD:
        raise SinkhornError(
            f"plan exponent {expo.max():.1f} exceeds {EXP_GUARD}; potentials are not converged"
        )
    return expo, np.exp(expo) * product_tensor(space)


def plan_from_potentials(potentials: PotentialSet, cost: np.ndarray, epsilon: float,
                         space: ProductSpace) -> Coupling:
    """exp((phi_1 + ... + phi_m - c) / eps) times the product of the marginals."""
    _, plan = _plan(potentials, np.asarray(cost, dtype=float), epsilon, space)
    return Coupling(space, plan)


def _marginal_errors(plan: np.ndarray, space: ProductSpace) -> tuple[float, ...]:
    m = space.m
    errs = []
    for i, mu in enumerate(space.marginals):
        proj = plan.sum(axis=tuple(j for j in range(m) if j != i))
        errs.append(float(np.abs(proj - mu.weights).sum()))
    return tuple(errs)


def _evaluate(potentials, C, eps, space, sweeps, converged) -> EntropicSolution:
    expo, plan = _plan(potentials, C, eps, space)
    cost_term = float(np.sum(C * plan))
    # log(plan / product) = expo wherever the plan is positive
    entropy = float(np.sum(plan * expo))
    return EntropicSolution(
        epsilon=eps,
        potentials=potentials,
        dual_value=potentials.dual_value(space),
        primal_value=cost_term + eps * entropy,
        cost_term=cost_term,
        entropy=entropy,
        sweeps=sweeps,
        marginal_errors=_marginal_errors(plan, space),
        converged=converged,
    )


def sinkhorn_solve(space: ProductSpace, cost: np.ndarray,
                   config: SinkhornConfig) -> EntropicSolution:
    """Iterate sweeps until both marginal and potential criteria hold.

    Returns gauge-fixed potentials (zero mu-mean for all but the last).
    When ``max_sweeps`` is exhausted the solution is returned with
    ``converged=False``.
    """
    C = np.asarray(cost, dtype=float)
    if C.shape != space.shape:
        raise ValueError(f"cost shape {C.shape} does not match space {space.shape}")
    eps = float(config.epsilon)
    logw = _log_weights(space)
    if config.warm_start is not None:
        phis = [np.array(p, dtype=float) for p in config.warm_start.phis]
    else:
        phis = [np.zeros(n) for n in space.shape]
    ptol = config.ptol
    prev = PotentialSet(tuple(phis)).gauge_fixed(space)
    converged = False
    sweeps = 0
    while sweeps < config.max_sweeps:
        for i in range(space.m):
            phis[i] = _softmin_update(phis, logw, C, eps, i, space)
        sweeps += 1
        cur = PotentialSet(tuple(phis)).gauge_fixed(space)
        change = max(float(np.abs(a - b).max()) for a, b in zip(cur.phis, prev.phis))
        prev = cur
        phis = [np.array(p) for p in cur.phis]
        if change <= ptol:
            _, plan = _plan(cur, C, eps, space)
            if max(_marginal_errors(plan, space)) <= config.marginal_tol:
                converged = True
                break
    if not converged:
        log.warning("sinkhorn did not converge in %d sweeps at epsilon=%g", sweeps, eps)
    return _evaluate(prev, C, eps, space, sweeps, converged)


def eps_scaling_solve(space: ProductSpace, cost: np.ndarray, eps_list: Sequence[float],
                      config: SinkhornConfig | None = None) -> list[EntropicSolution]:
    """Solve for a strictly decreasing list of epsilons, warm-starting each."""
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(e <= 0 for e in eps_list):
        raise ValueError("epsilons must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("epsilon list must be strictly decreasing")
    base = config or SinkhornConfig(epsilon=eps_list[0])
    out = []
    warm = base.warm_start
    for eps in eps_list:
        cfg = replace(base, epsilon=eps, warm_start=warm,
                      potential_tol=base.potential_tol)
        try:
            sol = sinkhorn_solve(space, cost, cfg)
        except SinkhornError as exc:
            raise SinkhornError(f"epsilon={eps:g}: {exc}") from exc
        out.append(sol)
        warm = sol.potentials
    return out


def schroedinger_residual(potentials: PotentialSet, cost: np.ndarray, space: ProductSpace,
                          epsilon: float) -> float:
    """Largest sup-norm change from replacing a single phi_i by its update."""
    C = np.asarray(cost, dtype=float)
    logw = _log_weights(space)
    phis = list(potentials.phis)
    res = 0.0
    for i in range(space.m):
        new = _softmin_update(phis, logw, C, epsilon, i, space)
        res = max(res, float(np.abs(new - phis[i]).max()))
    return res
