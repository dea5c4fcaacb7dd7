"""Discrete marginals, product spaces, couplings and entropy functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAX_TENSOR_ENTRIES = 50_000_000

#: Value returned by :func:`relative_entropy` when the coupling is not
#: absolutely continuous with respect to the product of its marginals.
INFINITE_ENTROPY = math.inf


class TensorTooLarge(ValueError):
    """Raised when a dense product-space tensor would exceed the memory guard."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def check_tensor_size(shape: Sequence[int]) -> int:
    size = int(np.prod([int(s) for s in shape], dtype=object))
    if size > MAX_TENSOR_ENTRIES:
        raise TensorTooLarge(
            f"dense tensor of shape {tuple(shape)} has {size} entries, "
            f"above the guard of {MAX_TENSOR_ENTRIES}"
        )
    return size


@dataclass(frozen=True)
class DiscreteMarginal:
    """Weighted point cloud in R^dim.

    ``dim`` is the intrinsic dimension of the measure and is carried as
    metadata; it is never inferred from the coordinates.
    """

    points: np.ndarray
    weights: np.ndarray
    dim: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.ndim != 2 or pts.shape[0] != w.shape[0]:
            raise ValueError(
                f"points of shape {pts.shape} do not match {w.shape[0]} weights"
            )
        if int(self.dim) < 1:
            raise ValueError("dim must be a positive integer")
        if pts.shape[1] != int(self.dim):
            raise ValueError(
                f"points have {pts.shape[1]} coordinates but dim={self.dim}"
            )
        if w.size == 0:
            raise ValueError("a marginal needs at least one atom")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("points must be pairwise distinct")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def strip_zero(self) -> "DiscreteMarginal":
        """Drop atoms carrying zero mass."""
        keep = self.weights > 0
        if keep.all():
            return self
        w = self.weights[keep]
        return DiscreteMarginal(self.points[keep], w / w.sum(), self.dim)

    @classmethod
    def dirac(cls, point) -> "DiscreteMarginal":
        p = np.atleast_1d(np.asarray(point, dtype=float))
        return cls(p[None, :], np.ones(1), p.shape[0])

    @classmethod
    def uniform(cls, points, dim: int | None = None) -> "DiscreteMarginal":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        return cls(pts, np.full(len(pts), 1.0 / len(pts)), dim or pts.shape[1])


def _normalize(w: np.ndarray) -> np.ndarray:
    # two passes so that |sum - 1| stays at the rounding floor for large n
    w = w / w.sum()
    return w / math.fsum(w)


def grid_marginal(
    low: Sequence[float],
    high: Sequence[float],
    n_per_axis: int,
    density: str = "uniform",
    center: Sequence[float] | None = None,
) -> DiscreteMarginal:
    """Midpoint-quadrature discretization of a density on an axis-aligned box.

    ``density`` is ``"uniform"`` or ``"cos2"``; the latter is the product
    over axes of ``cos(pi * (t - c))**2`` in normalized coordinates
    ``t in [0, 1]``, with bump center ``c`` (default 0.5, i.e. a bump
    vanishing at the box faces). Atoms whose weight is zero are dropped.
    """
    low = np.atleast_1d(np.asarray(low, dtype=float))
    high = np.atleast_1d(np.asarray(high, dtype=float))
    if low.shape != high.shape or np.any(high <= low):
        raise ValueError("grid needs low < high with matching lengths")
    d = low.shape[0]
    k = int(n_per_axis)
    if k < 1:
        raise ValueError("n_per_axis must be >= 1")
    t = (np.arange(k) + 0.5) / k
    axes = [low[a] + (high[a] - low[a]) * t for a in range(d)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    tt = np.stack(np.meshgrid(*([t] * d), indexing="ij"), axis=-1).reshape(-1, d)
    if density == "uniform":
        w = np.ones(len(pts))
    elif density == "cos2":
        c = np.full(d, 0.5) if center is None else np.atleast_1d(np.asarray(center, float))
        w = np.prod(np.cos(np.pi * (tt - c)) ** 2, axis=1)
    else:
        raise ValueError(f"unknown density {density!r}")
    w = np.where(w < 1e-300, 0.0, w)
    keep = w > 0
    return DiscreteMarginal(pts[keep], _normalize(w[keep]), d)


def marginal_from_dict(spec: dict) -> DiscreteMarginal:
    """Build a marginal from its JSON form (explicit atoms or a grid description)."""
    if "grid" in spec:
        g = spec["grid"]
        return grid_marginal(
            g["low"], g["high"], g["n_per_axis"], g.get("density", "uniform"),
            g.get("center"),
        )
    pts = np.asarray(spec["points"], dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    w = np.asarray(spec["weights"], dtype=float)
    return DiscreteMarginal(pts, w, int(spec.get("dim", pts.shape[1]))).strip_zero()


def marginal_to_dict(mu: DiscreteMarginal) -> dict:
    return {"points": mu.points.tolist(), "weights": mu.weights.tolist(), "dim": mu.dim}


@dataclass(frozen=True)
class ProductSpace:
    marginals: tuple[DiscreteMarginal, ...]
    shape: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        ms = tuple(self.marginals)
        if len(ms) < 2:
            raise ValueError("a product space needs at least two marginals")
        object.__setattr__(self, "marginals", ms)
        object.__setattr__(self, "shape", tuple(mu.n for mu in ms))

    @property
    def m(self) -> int:
        return len(self.marginals)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(mu.dim for mu in self.marginals)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=object))

    def axis_view(self, i: int, values: np.ndarray) -> np.ndarray:
        """Reshape a per-atom vector of marginal ``i`` to broadcast along axis ``i``."""
        shape = [1] * self.m
        shape[i] = self.shape[i]
        return np.asarray(values).reshape(shape + list(np.shape(values)[1:]))

    def log_product_weights(self) -> np.ndarray:
        out = np.zeros(self.shape)
        with np.errstate(divide="ignore"):
            for i, mu in enumerate(self.marginals):
                out = out + self.axis_view(i, np.log(mu.weights))
        return out


@dataclass(frozen=True)
class Coupling:
    """Dense m-way transport plan over the product grid of ``space``."""

    space: ProductSpace
    density: np.ndarray

    def __post_init__(self):
        check_tensor_size(self.space.shape)
        g = np.asarray(self.density, dtype=float)
        if g.shape != self.space.shape:
            raise ValueError(f"density shape {g.shape} != space shape {self.space.shape}")
        if np.any(g < 0):
            raise ValueError("coupling entries must be nonnegative")
        object.__setattr__(self, "density", _frozen(g))

    @property
    def mass(self) -> float:
        return float(self.density.sum())

    def support(self, tol: float = 0.0) -> np.ndarray:
        """Index tuples (rows) of entries strictly above ``tol``."""
        return np.argwhere(self.density > tol)


def marginal_projection(coupling: Coupling, i: int) -> np.ndarray:
    """Push-forward of the coupling onto its ``i``-th factor."""
    m = coupling.space.m
    if not 0 <= i < m:
        raise IndexError(f"marginal index {i} out of range for m={m}")
    others = tuple(j for j in range(m) if j != i)
    return coupling.density.sum(axis=others)


def product_tensor(space: ProductSpace) -> np.ndarray:
    check_tensor_size(space.shape)
    out = np.ones(space.shape)
    for i, mu in enumerate(space.marginals):
        out = out * space.axis_view(i, mu.weights)
    return out


def product_coupling(space: ProductSpace) -> Coupling:
    return Coupling(space, product_tensor(space))


def relative_entropy(coupling: Coupling) -> float:
    """Kullback-Leibler divergence of the plan from the product of its marginals.

    Returns :data:`INFINITE_ENTROPY` when the plan charges a cell where the
    product measure vanishes.
    """
    g = coupling.density
    ref = product_tensor(coupling.space)
    if g.shape != ref.shape:
        raise ValueError("coupling and product measure shapes differ")
    pos = g > 0
    if np.any(pos & (ref <= 0)):
        return INFINITE_ENTROPY
    gp = g[pos]
    ent = float(np.sum(gp * (np.log(gp) - np.log(ref[pos]))))
    # a plan equal to the product up to rounding can sum to a few -1e-16
    return 0.0 if -1e-12 < ent < 0.0 else ent


def cost_integral(coupling: Coupling, cost) -> float:
    """Integral of the cost against the plan.

    ``cost`` is either a precomputed cost tensor or a
    :class:`~mmot.costs.CostModel` evaluated on the coupling's grid.
    """
    if isinstance(cost, np.ndarray):
        c = cost
    else:
        from .costs import evaluate_on_grid

        c = evaluate_on_grid(cost, coupling.space)
    if c.shape != coupling.density.shape:
        raise ValueError("cost tensor shape does not match coupling")
    return float(np.sum(c * coupling.density))


@dataclass(frozen=True)
class PotentialSet:
    """Dual potentials, one vector per marginal."""

    phis: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "phis", tuple(_frozen(p) for p in self.phis))

    @property
    def m(self) -> int:
        return len(self.phis)

    def oplus(self, space: ProductSpace) -> np.ndarray:
        """Direct sum (x_1,...,x_m) -> sum_i phi_i(x_i) as a dense tensor."""
        out = np.zeros(space.shape)
        for i, p in enumerate(self.phis):
            out = out + space.axis_view(i, p)
        return out

    def dual_value(self, space: ProductSpace) -> float:
        return float(sum(p @ mu.weights for p, mu in zip(self.phis, space.marginals)))

    def gauge_fixed(self, space: ProductSpace) -> "PotentialSet":
        """Shift phi_1..phi_{m-1} to zero mu-mean, absorbing constants into phi_m."""
        phis = [np.array(p) for p in self.phis]
        total = 0.0
        for i in range(len(phis) - 1):
            mean = float(phis[i] @ space.marginals[i].weights)
            phis[i] -= mean
            total += mean
        phis[-1] += total
        return PotentialSet(tuple(phis))

    def shifted(self, constants: Sequence[float]) -> "PotentialSet":
        return PotentialSet(tuple(p + float(c) for p, c in zip(self.phis, constants)))

    def to_dict(self) -> dict:
        return {"phis": [p.tolist() for p in self.phis]}

    @classmethod
    def zeros(cls, space: ProductSpace) -> "PotentialSet":
        return cls(tuple(np.zeros(n) for n in space.shape))
