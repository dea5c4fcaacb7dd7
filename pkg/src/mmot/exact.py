"""Unregularized multi-marginal transport as a dense revised-simplex LP.

The constraint matrix of the transportation polytope has one row per atom
of every marginal. Its rank is ``sum(n_i) - (m - 1)``: the row of atom 0 of
every marginal after the first is dropped, so the corresponding dual
variables are pinned to zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .measures import Coupling, DiscreteMarginal, PotentialSet, ProductSpace

log = logging.getLogger(__name__)

LP_MAX_VARIABLES = 300_000
REFACTOR_EVERY = 128


class LPError(RuntimeError):
    pass


@dataclass(frozen=True)
class LPSolution:
    coupling: Coupling
    value: float
    potentials: PotentialSet
    iterations: int
    status: str  # "optimal" | "iteration-limit" | "infeasible-guard"
    basis: np.ndarray

    def support(self, tol: float = 0.0) -> np.ndarray:
        return self.coupling.support(tol)


def northwest_corner(weights: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Staircase (north-west corner) coupling of several weight vectors.

    Returns ``(cells, masses)`` with exactly ``sum(n_i) - m + 1`` cells:
    each step advances a single index, so ties produce zero-mass cells.
    That makes the cells a basis of the transportation polytope.
    """
    m = len(weights)
    ns = [len(w) for w in weights]
    k = [0] * m
    res = [float(w[0]) for w in weights]
    steps = sum(n - 1 for n in ns)
    cells = np.empty((steps + 1, m), dtype=np.int64)
    masses = np.empty(steps + 1)
    for s in range(steps + 1):
        q = max(min(res), 0.0)
        cells[s] = k
        masses[s] = q
        for a in range(m):
            res[a] -= q
        if s == steps:
            break
        movable = [a for a in range(m) if k[a] < ns[a] - 1]
        a = min(movable, key=lambda b: (res[b], b))
        k[a] += 1
        res[a] = float(weights[a][k[a]]) + res[a]
    return cells, masses


def monotone_oracle_1d(mu: DiscreteMarginal, nu: DiscreteMarginal) -> Coupling:
    """Comonotone coupling of two sorted one-dimensional marginals."""
    for x in (mu, nu):
        if x.points.shape[1] != 1:
            raise ValueError("monotone oracle needs one-dimensional marginals")
        if np.any(np.diff(x.points[:, 0]) <= 0):
            raise ValueError("points must be sorted in ascending order")
    space = ProductSpace((mu, nu))
    cells, masses = northwest_corner([mu.weights, nu.weights])
    g = np.zeros(space.shape)
    np.add.at(g, (cells[:, 0], cells[:, 1]), np.maximum(masses, 0.0))
    return Coupling(space, g)


class _Rows:
    """Map (axis, atom) pairs to rows of the reduced constraint matrix."""

    def __init__(self, shape):
        self.shape = shape
        self.offset = np.zeros(len(shape), dtype=np.int64)
        off = shape[0]
        for a in range(1, len(shape)):
            self.offset[a] = off - 1  # atom 0 has no row
            off += shape[a] - 1
        self.count = off

    def of_cell(self, cell) -> list[int]:
        rows = [int(cell[0])]
        for a in range(1, len(self.shape)):
            if cell[a] > 0:
                rows.append(int(self.offset[a] + cell[a]))
        return rows

    def rhs(self, space: ProductSpace) -> np.ndarray:
        parts = [space.marginals[0].weights]
        parts += [mu.weights[1:] for mu in space.marginals[1:]]
        return np.concatenate(parts)

    def potentials(self, y: np.ndarray) -> list[np.ndarray]:
        phis = [y[: self.shape[0]].copy()]
        for a in range(1, len(self.shape)):
            o = self.offset[a]
            phis.append(np.concatenate([[0.0], y[o + 1: o + self.shape[a]]]))
        return phis


def _basis_matrix(rows: _Rows, cells: np.ndarray) -> np.ndarray:
    B = np.zeros((rows.count, rows.count))
    for col, cell in enumerate(cells):
        B[rows.of_cell(cell), col] = 1.0
    return B


def lp_solve(space: ProductSpace, cost: np.ndarray, *, pivot: str = "bland",
             max_iterations: int | None = None, tol: float = 1e-11) -> LPSolution:
    """Solve the unregularized problem exactly by revised simplex.

    Parameters
    ----------
    space : ProductSpace
        Marginals, all with strictly positive weights.
    cost : ndarray
        Dense cost tensor of shape ``space.shape``.
    pivot : {"bland", "dantzig"}
        Entering-variable rule. ``"bland"`` (smallest improving index, with
        smallest-index tie breaking in the ratio test) cannot cycle.
        ``"dantzig"`` prices by the most negative reduced cost and falls back
        to Bland's rule while a run of degenerate pivots lasts.
    max_iterations : int, optional
        Defaults to 50 times the number of variables.
    tol : float
        Reduced-cost tolerance relative to the cost scale.
    """
    C = np.asarray(cost, dtype=float)
    if C.shape != space.shape:
        raise ValueError(f"cost shape {C.shape} does not match space {space.shape}")
    nvar = space.size
    if nvar > LP_MAX_VARIABLES:
        raise LPError(f"{nvar} LP variables exceed the guard of {LP_MAX_VARIABLES}")
    for mu in space.marginals:
        if np.any(mu.weights <= 0):
            raise LPError("zero-weight atoms must be stripped before lp_solve")
    if pivot not in ("bland", "dantzig"):
        raise ValueError(f"unknown pivot rule {pivot!r}")
    if max_iterations is None:
        max_iterations = 50 * nvar

    shape = space.shape
    m = space.m
    rows = _Rows(shape)
    b = rows.rhs(space)
    cflat = C.ravel()
    scale = max(1.0, float(np.abs(C).max()))
    rc_tol = tol * scale

    cells, _ = northwest_corner([mu.weights for mu in space.marginals])
    basis = np.ravel_multi_index(tuple(cells.T), shape)
    Binv = np.linalg.inv(_basis_matrix(rows, cells))
    x = Binv @ b

    # cached per-axis row index of every atom (-1 for the dropped rows)
    atom_rows = []
    for a in range(m):
        r = np.arange(shape[a]) + (rows.offset[a] if a else 0)
        if a:
            r[0] = -1
        atom_rows.append(r)

    status = "optimal"
    it = 0
    degenerate_run = 0
    while True:
        y = cflat[basis] @ Binv
        phis = rows.potentials(y)
        rc = cflat.copy().reshape(shape)
        for a in range(m):
            rc -= space.axis_view(a, phis[a])
        rc = rc.ravel()
        use_bland = pivot == "bland" or degenerate_run > 10
        if use_bland:
            neg = np.flatnonzero(rc < -rc_tol)
            if neg.size == 0:
                break
            q = int(neg[0])
        else:
            q = int(np.argmin(rc))
            if rc[q] >= -rc_tol:
                break
        if it >= max_iterations:
            status = "iteration-limit"
            log.warning("simplex hit the iteration limit (%d pivots)", it)
            break
        cell = np.unravel_index(q, shape)
        qrows = [atom_rows[a][cell[a]] for a in range(m)]
        qrows = [r for r in qrows if r >= 0]
        d = Binv[:, qrows].sum(axis=1)
        cand = np.flatnonzero(d > 1e-9)
        if cand.size == 0:
            raise LPError("unbounded direction in a bounded transportation LP")
        ratios = x[cand] / d[cand]
        theta = ratios.min()
        ties = cand[ratios <= theta + 1e-14]
        leave = int(ties[np.argmin(basis[ties])])
        theta = max(float(x[leave] / d[leave]), 0.0)
        degenerate_run = degenerate_run + 1 if theta <= 1e-15 else 0

        x -= theta * d
        x[leave] = theta
        basis[leave] = q
        piv = Binv[leave] / d[leave]
        Binv -= np.outer(d, piv)
        Binv[leave] = piv
        it += 1
        if it % REFACTOR_EVERY == 0:
            bcells = np.stack(np.unravel_index(basis, shape), axis=1)
            Binv = np.linalg.inv(_basis_matrix(rows, bcells))
            x = Binv @ b
            x[np.abs(x) < 1e-15] = 0.0

    bcells = np.stack(np.unravel_index(basis, shape), axis=1)
    Binv = np.linalg.inv(_basis_matrix(rows, bcells))
    x = Binv @ b
    if x.min() < -1e-9:
        status = "infeasible-guard"
        log.warning("basic solution has negative entry %.3g", x.min())
    g = np.zeros(nvar)
    g[basis] = np.maximum(x, 0.0)
    g = g.reshape(shape)
    y = cflat[basis] @ Binv
    pots = conjugate_refine(PotentialSet(tuple(rows.potentials(y))), C).gauge_fixed(space)
    coupling = Coupling(space, g)
    value = float(np.sum(C * g))
    return LPSolution(coupling, value, pots, it, status, basis.copy())


def c_conjugate_update(potentials: PotentialSet, cost: np.ndarray, i: int) -> PotentialSet:
    """Replace phi_i by the c-transform of the other potentials."""
    m = potentials.m
    if not 0 <= i < m:
        raise IndexError(f"potential index {i} out of range")
    rest = np.array(cost, dtype=float)
    shape = rest.shape
    for j, p in enumerate(potentials.phis):
        if j != i:
            s = [1] * m
            s[j] = shape[j]
            rest = rest - p.reshape(s)
    others = tuple(j for j in range(m) if j != i)
    new = rest.min(axis=others) if others else rest
    phis = list(potentials.phis)
    phis[i] = new
    return PotentialSet(tuple(phis))


def conjugate_refine(potentials: PotentialSet, cost: np.ndarray, cycles: int = 1) -> PotentialSet:
    """Cycle :func:`c_conjugate_update` over all indices."""
    for _ in range(cycles):
        for i in range(potentials.m):
            potentials = c_conjugate_update(potentials, cost, i)
    return potentials


def duality_gap_field(potentials: PotentialSet, cost: np.ndarray) -> np.ndarray:
    """E = c - (phi_1 + ... + phi_m) on the full grid."""
    C = np.asarray(cost, dtype=float)
    E = C.copy()
    m = C.ndim
    for j, p in enumerate(potentials.phis):
        s = [1] * m
        s[j] = C.shape[j]
        E -= p.reshape(s)
    return E


def solution_to_dict(sol: LPSolution) -> dict:
    supp = sol.support()
    return {
        "value": sol.value,
        "status": sol.status,
        "iterations": sol.iterations,
        "support": [
            {"index": [int(k) for k in idx], "mass": float(sol.coupling.density[tuple(idx)])}
            for idx in supp
        ],
        "potentials": sol.potentials.to_dict()["phis"],
    }
