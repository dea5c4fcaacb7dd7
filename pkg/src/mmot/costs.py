"""Cost models with analytic or finite-difference mixed second derivatives."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .measures import ProductSpace, check_tensor_size

# eps**(1/4) balances truncation and roundoff for second differences
FD_EPS = np.finfo(float).eps ** 0.25


@dataclass(frozen=True)
class CostModel:
    """A cost on X_1 x ... x X_m.

    ``evaluate`` receives one array per marginal, each of shape
    ``(..., d_i)`` with mutually broadcastable leading dimensions, and
    returns the cost with the broadcast leading shape. A single point is
    just the case of empty leading dimensions.

    ``analytic_mixed_hessian(i, j, xs)`` returns the d_i x d_j block
    d^2 c / dx_i dx_j at a point, or is ``None`` when only finite
    differences are available.
    """

    name: str
    dims: tuple[int, ...]
    evaluate: Callable[..., np.ndarray]
    analytic_mixed_hessian: Callable[[int, int, Sequence[np.ndarray]], np.ndarray] | None = None
    nonneg_shift: float = 0.0
    params: dict | None = None

    @property
    def arity(self) -> int:
        return len(self.dims)

    def __call__(self, *xs) -> float:
        pts = [np.atleast_1d(np.asarray(x, dtype=float)) for x in xs]
        return float(self.evaluate(*pts)) + self.nonneg_shift


def _point(cost: CostModel, point) -> list[np.ndarray]:
    if len(point) != cost.arity:
        raise ValueError(f"expected {cost.arity} components, got {len(point)}")
    pts = [np.atleast_1d(np.asarray(x, dtype=float)) for x in point]
    for x, d in zip(pts, cost.dims):
        if x.shape != (d,):
            raise ValueError(f"component of shape {x.shape}, expected ({d},)")
    return pts


def fd_mixed_hessian(cost: CostModel, i: int, j: int, point) -> np.ndarray:
    """Central cross-stencil estimate of the (i, j) mixed Hessian block."""
    pts = _point(cost, point)
    di, dj = cost.dims[i], cost.dims[j]
    hi = np.maximum(1.0, np.abs(pts[i])) * FD_EPS
    hj = np.maximum(1.0, np.abs(pts[j])) * FD_EPS
    out = np.empty((di, dj))
    f = cost.evaluate
    for a in range(di):
        for b in range(dj):
            acc = 0.0
            for sa, sb, sign in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
                q = [p.copy() for p in pts]
                q[i][a] += sa * hi[a]
                q[j][b] += sb * hj[b]
                acc += sign * float(f(*q))
            out[a, b] = acc / (4.0 * hi[a] * hj[b])
    return out


def mixed_hessian(cost: CostModel, i: int, j: int, point) -> np.ndarray:
    """Block d^2 c / dx_i dx_j at ``point`` (analytic when available)."""
    if i == j:
        raise ValueError("only mixed blocks (i != j) are defined")
    m = cost.arity
    if not (0 <= i < m and 0 <= j < m):
        raise IndexError(f"block ({i}, {j}) out of range for arity {m}")
    if cost.analytic_mixed_hessian is not None:
        pts = _point(cost, point)
        return np.asarray(cost.analytic_mixed_hessian(i, j, pts), dtype=float)
    return fd_mixed_hessian(cost, i, j, point)


def grid_arrays(space: ProductSpace) -> list[np.ndarray]:
    """Point arrays shaped to broadcast over the product grid."""
    out = []
    for i, mu in enumerate(space.marginals):
        shape = [1] * space.m + [mu.dim]
        shape[i] = mu.n
        out.append(mu.points.reshape(shape))
    return out


def evaluate_on_grid(cost: CostModel, space: ProductSpace, check: bool = True) -> np.ndarray:
    """Dense cost tensor (with the nonnegativity shift applied)."""
    if space.dims != cost.dims:
        raise ValueError(f"cost dims {cost.dims} do not match space dims {space.dims}")
    check_tensor_size(space.shape)
    c = np.broadcast_to(cost.evaluate(*grid_arrays(space)), space.shape)
    c = np.array(c, dtype=float) + cost.nonneg_shift
    if check and c.min() < -1e-12 * max(1.0, np.abs(c).max()):
        raise ValueError(
            f"cost {cost.name!r} takes negative value {c.min():.3g} on the grid; "
            "a larger nonneg_shift is needed"
        )
    return c


def _sqnorm(v: np.ndarray) -> np.ndarray:
    return np.sum(v * v, axis=-1)


def _pairwise_sq(*xs) -> np.ndarray:
    return sum(_sqnorm(a - b) for a, b in combinations(xs, 2))


def quadratic2(d: int = 1) -> CostModel:
    return CostModel(
        "quadratic2",
        (d, d),
        lambda x, y: _sqnorm(x - y),
        lambda i, j, xs: -2.0 * np.eye(d),
    )


def gangbo_swiech(m: int = 3, d: int = 1) -> CostModel:
    return CostModel(
        "gangbo_swiech",
        (d,) * m,
        _pairwise_sq,
        lambda i, j, xs: -2.0 * np.eye(d),
    )


def negative_harmonic(m: int = 3, d: int = 1, shift: float | None = None,
                      space: ProductSpace | None = None) -> CostModel:
    """K - sum_{i<j} |x_i - x_j|^2.

    K defaults to the maximum of the pairwise sum over the grid of
    ``space``; one of ``shift`` or ``space`` is required.
    """
    if shift is None:
        if space is None:
            raise ValueError("negative_harmonic needs either shift or a space")
        gs = gangbo_swiech(m, d)
        shift = float(evaluate_on_grid(gs, space).max())
    return CostModel(
        "negative_harmonic",
        (d,) * m,
        lambda *xs: -_pairwise_sq(*xs),
        lambda i, j, xs: 2.0 * np.eye(d),
        nonneg_shift=float(shift),
    )


def degenerate_projection() -> CostModel:
    """(x_1 - y_1)^2 on R^2 x R^2; mixed Hessian of rank one."""
    def hess(i, j, xs):
        h = np.zeros((2, 2))
        h[0, 0] = -2.0
        return h

    return CostModel("degenerate_projection", (2, 2),
                     lambda x, y: (x[..., 0] - y[..., 0]) ** 2, hess)


def barycenter(lam: Sequence[float] | None = None, m: int = 3, d: int = 1) -> CostModel:
    """sum_i lam_i |x_i - T(x)|^2 with T(x) = sum_j lam_j x_j."""
    if lam is None:
        lam = np.full(m, 1.0 / m)
    lam = np.asarray(lam, dtype=float)
    m = lam.shape[0]
    if np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-12:
        raise ValueError("barycenter weights must be nonnegative and sum to 1")

    def f(*xs):
        t = sum(l * x for l, x in zip(lam, xs))
        return sum(l * _sqnorm(x - t) for l, x in zip(lam, xs))

    return CostModel(
        "barycenter",
        (d,) * m,
        f,
        lambda i, j, xs: -2.0 * lam[i] * lam[j] * np.eye(d),
        params={"lambda": lam.tolist()},
    )


def zero_cost(dims: Sequence[int]) -> CostModel:
    dims = tuple(int(d) for d in dims)
    return CostModel(
        "zero",
        dims,
        lambda *xs: np.zeros(np.broadcast_shapes(*(x.shape[:-1] for x in xs))),
        lambda i, j, xs: np.zeros((dims[i], dims[j])),
    )


def cost_from_dict(spec: dict, space: ProductSpace) -> CostModel:
    """Instantiate a built-in cost from its JSON form for the given space."""
    name = spec["name"]
    m, dims = space.m, space.dims
    d = dims[0]
    if name in ("gangbo_swiech", "negative_harmonic", "barycenter", "quadratic2"):
        if len(set(dims)) != 1:
            raise ValueError(f"{name} needs equal marginal dimensions, got {dims}")
    if name == "quadratic2":
        if m != 2:
            raise ValueError("quadratic2 is a two-marginal cost")
        return quadratic2(d)
    if name == "gangbo_swiech":
        return gangbo_swiech(m, d)
    if name == "negative_harmonic":
        return negative_harmonic(m, d, shift=spec.get("shift"), space=space)
    if name == "degenerate_projection":
        if dims != (2, 2):
            raise ValueError("degenerate_projection needs two 2-dimensional marginals")
        return degenerate_projection()
    if name == "barycenter":
        lam = spec.get("lambda")
        if lam is not None and len(lam) != m:
            raise ValueError("barycenter lambda must have one weight per marginal")
        return barycenter(lam, m, d)
    if name == "zero":
        return zero_cost(dims)
    raise ValueError(f"unknown cost {name!r}")
