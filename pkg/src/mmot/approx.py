"""Block approximation of a transport plan and box-partition entropies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvariantViolation
from .measures import Coupling, DiscreteMarginal, cost_integral, relative_entropy


@dataclass(frozen=True)
class BoxPartition:
    """Axis-aligned cubes of edge delta / sqrt(d) covering a marginal's atoms.

    ``cell_of[k]`` is the cell id of atom ``k``; ids are contiguous and
    empty cells are never created.
    """

    marginal: DiscreteMarginal
    delta: float
    cell_of: np.ndarray
    cells: tuple
    anchor: np.ndarray

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_masses(self) -> np.ndarray:
        return np.bincount(self.cell_of, weights=self.marginal.weights, minlength=self.n_cells)

    def indicator(self) -> np.ndarray:
        """(n_cells, n_atoms) 0/1 membership matrix."""
        M = np.zeros((self.n_cells, self.marginal.n))
        M[self.cell_of, np.arange(self.marginal.n)] = 1.0
        return M


def box_partition(marginal: DiscreteMarginal, delta: float) -> BoxPartition:
    if not delta > 0:
        raise ValueError("delta must be positive")
    pts = marginal.points
    d = pts.shape[1]
    edge = delta / math.sqrt(d)
    anchor = pts.min(axis=0)
    keys = np.floor((pts - anchor) / edge).astype(np.int64)
    _, cell_of = np.unique(keys, axis=0, return_inverse=True)
    cell_of = cell_of.reshape(-1)
    cells = tuple(np.flatnonzero(cell_of == c) for c in range(cell_of.max() + 1))
    return BoxPartition(marginal, float(delta), cell_of, cells, anchor)


def partition_entropy(part: BoxPartition) -> float:
    q = part.cell_masses()
    q = q[q > 0]
    return float(-np.sum(q * np.log(q)))


def entropy_H_delta(marginal: DiscreteMarginal, delta: float) -> float:
    """Entropy of the box partition at scale delta.

    This is an upper estimate of the infimum over all partitions into sets
    of diameter at most delta.
    """
    return partition_entropy(box_partition(marginal, delta))


def _contract(T: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Apply ``mats[i]`` along axis i of ``T``."""
    for i, M in enumerate(mats):
        T = np.moveaxis(np.tensordot(M, T, axes=([1], [i])), 0, i)
    return T


@dataclass(frozen=True)
class BlockPlan:
    coupling: Coupling
    source: Coupling
    partitions: tuple
    block_masses: np.ndarray  # dense over cell-id tuples

    def block_mass_dict(self) -> dict:
        idx = np.argwhere(self.block_masses > 0)
        return {tuple(int(k) for k in t): float(self.block_masses[tuple(t)]) for t in idx}


def block_approximation(gamma0: Coupling, partitions: Sequence[BoxPartition]) -> BlockPlan:
    """Spread each block's mass as the product of normalized restricted marginals."""
    space = gamma0.space
    if len(partitions) != space.m:
        raise ValueError("need one partition per marginal")
    for part, mu in zip(partitions, space.marginals):
        if part.marginal is not mu and not (
            part.marginal.n == mu.n and np.array_equal(part.marginal.weights, mu.weights)
        ):
            raise ValueError("partition does not belong to the plan's marginal")
    inds = [p.indicator() for p in partitions]
    blocks = _contract(gamma0.density, inds)
    spread = []
    for p, M in zip(partitions, inds):
        w = p.marginal.weights
        cm = p.cell_masses()
        # atom k gets share w_k / mu(cell(k)) of its cell
        spread.append((M * (w / cm[p.cell_of])[None, :]).T)
    g = _contract(blocks, spread)
    return BlockPlan(Coupling(space, g), gamma0, tuple(partitions), blocks)


def block_masses(plan: Coupling, partitions: Sequence[BoxPartition]) -> np.ndarray:
    return _contract(plan.density, [p.indicator() for p in partitions])


def estimate_block_lipschitz(cost: np.ndarray, partitions: Sequence[BoxPartition],
                             plan: Coupling, n_pairs: int = 2000, rng=None) -> float:
    """Largest sampled |c(x) - c(x')| / |x - x'| over pairs sharing a charged block."""
    rng = np.random.default_rng(rng)
    space = plan.space
    supp = np.argwhere(plan.density > 0)
    if len(supp) == 0:
        return 0.0
    best = 0.0
    for _ in range(n_pairs):
        a = supp[rng.integers(len(supp))]
        b = []
        for i, p in enumerate(partitions):
            members = p.cells[p.cell_of[a[i]]]
            b.append(int(members[rng.integers(len(members))]))
        dist = math.sqrt(sum(
            float(np.sum((space.marginals[i].points[a[i]] - space.marginals[i].points[b[i]]) ** 2))
            for i in range(space.m)
        ))
        if dist > 0:
            best = max(best, abs(float(cost[tuple(a)] - cost[tuple(b)])) / dist)
    return best


def verify_block_bounds(blockplan: BlockPlan, gamma0: Coupling, cost: np.ndarray,
                        epsilon: float, delta: float, mot_eps: float | None = None,
                        rng=None) -> dict:
    """Check the inequalities of the block-approximation competitor argument.

    (a) Ent(gamma_delta) <= sum of partition entropies of all marginals but
        the one of largest dimension;
    (b) cost increase of gamma_delta against the sampled Lipschitz bound;
    (c) MOT_eps <= cost(gamma_delta) + eps * Ent(gamma_delta).

    ``mot_eps`` is computed with :func:`~mmot.entropic.sinkhorn_solve` when
    not supplied.
    """
    space = gamma0.space
    parts = blockplan.partitions
    dims = space.dims
    excluded = max(range(space.m), key=lambda i: (dims[i], i))
    ent = relative_entropy(blockplan.coupling)
    ent_bound = sum(partition_entropy(parts[j]) for j in range(space.m) if j != excluded)
    cost_d = cost_integral(blockplan.coupling, cost)
    cost_0 = cost_integral(gamma0, cost)
    lip = estimate_block_lipschitz(cost, parts, gamma0, rng=rng)
    if mot_eps is None:
        from .entropic import SinkhornConfig, sinkhorn_solve

        mot_eps = sinkhorn_solve(space, cost, SinkhornConfig(epsilon=epsilon)).dual_value
    competitor = cost_d + epsilon * ent
    report = {
        "epsilon": float(epsilon),
        "delta": float(delta),
        "excluded_marginal": int(excluded),
        "entropy": ent,
        "entropy_bound": ent_bound,
        "entropy_ok": bool(ent <= ent_bound + 1e-9),
        "cost_gamma0": cost_0,
        "cost_gamma_delta": cost_d,
        "cost_increase": cost_d - cost_0,
        "lipschitz_estimate": lip,
        "lipschitz_bound": lip * delta * math.sqrt(space.m),
        "mot_eps": float(mot_eps),
        "competitor": competitor,
        "competitor_ok": bool(mot_eps <= competitor + 1e-7),
        "partition_note": "axis-aligned box partitions; entropies are upper estimates of H_delta",
    }
    report["lipschitz_ok"] = bool(report["cost_increase"] <= report["lipschitz_bound"] + 1e-12)
    if not report["entropy_ok"]:
        raise InvariantViolation(f"entropy {ent} exceeds partition bound {ent_bound}")
    if not report["competitor_ok"]:
        raise InvariantViolation(f"MOT_eps {mot_eps} exceeds competitor value {competitor}")
    return report

