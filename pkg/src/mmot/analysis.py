"""Signatures of the mixed-Hessian bilinear forms and related estimates.

For a bipartition p = {left, right} of the marginal indices, the form g_p
has (i, j) block equal to the mixed Hessian d^2 c / dx_i dx_j whenever i
and j sit on opposite sides of p, and zero otherwise. Convex combinations
of these forms make up the set whose largest positive index bounds the
dimension of optimal supports from below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .costs import CostModel, mixed_hessian
from .errors import InvariantViolation
from .measures import DiscreteMarginal, ProductSpace

MAX_KAPPA_ARITY = 6


@dataclass(frozen=True)
class Bipartition:
    left: frozenset
    right: frozenset

    def __post_init__(self):
        if not self.left or not self.right or self.left & self.right:
            raise ValueError("a bipartition needs two disjoint nonempty sides")
        if 0 not in self.left:
            raise ValueError("canonical form keeps index 0 on the left")

    def straddles(self, i: int, j: int) -> bool:
        return (i in self.left) != (j in self.left)


def bipartitions(m: int) -> list[Bipartition]:
    """All 2^(m-1) - 1 bipartitions of {0, ..., m-1}, index 0 kept on the left."""
    out = []
    rest = range(1, m)
    for k in range(0, m - 1):
        for extra in combinations(rest, k):
            left = frozenset((0,) + extra)
            out.append(Bipartition(left, frozenset(range(m)) - left))
    return out


@dataclass(frozen=True)
class SignatureReport:
    point: tuple
    weights: np.ndarray
    signature: tuple[int, int, int]
    eigenvalues: np.ndarray
    zero_threshold: float

    def to_dict(self) -> dict:
        return {
            "point": [np.asarray(x).tolist() for x in self.point],
            "weights": np.asarray(self.weights).tolist(),
            "signature": list(self.signature),
            "eigenvalues": np.asarray(self.eigenvalues).tolist(),
            "zero_threshold": self.zero_threshold,
        }


@dataclass(frozen=True)
class KappaEstimate:
    kappa: int
    per_point: list = field(repr=False)
    strategy: str = ""
    upper_bound: int = 0

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "lower_estimate": True,
            "strategy": self.strategy,
            "upper_bound": self.upper_bound,
            "points": [r.to_dict() for r in self.per_point],
        }


def assemble_g(cost: CostModel, point, weights: Sequence[float]) -> np.ndarray:
    """Symmetric form sum_p t_p g_p at ``point``.

    ``weights`` are indexed like :func:`bipartitions` for the cost's arity.
    """
    m = cost.arity
    parts = bipartitions(m)
    t = np.asarray(weights, dtype=float)
    if t.shape != (len(parts),):
        raise ValueError(f"expected {len(parts)} weights, got shape {t.shape}")
    if np.any(t < 0) or abs(t.sum() - 1.0) > 1e-12:
        raise ValueError("weights must lie on the simplex")
    dims = cost.dims
    off = np.concatenate([[0], np.cumsum(dims)])
    G = np.zeros((off[-1], off[-1]))
    for i in range(m):
        for j in range(i + 1, m):
            coef = sum(tp for tp, p in zip(t, parts) if p.straddles(i, j))
            if coef == 0.0:
                continue
            H = coef * mixed_hessian(cost, i, j, point)
            G[off[i]:off[i + 1], off[j]:off[j + 1]] = H
            G[off[j]:off[j + 1], off[i]:off[i + 1]] = H.T
    return G


def jacobi_eigenvalues(A: np.ndarray, rtol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps continue until the off-diagonal Frobenius norm drops below
    ``rtol * ||A||_F``.
    """
    a = np.array(A, dtype=float)
    n = a.shape[0]
    norm = np.linalg.norm(a)
    if n == 0:
        return np.zeros(0)
    target = rtol * norm
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < abs(diff) * 1e-36:
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    if abs(theta) > 1e150:
                        t = 0.5 / theta
                    else:
                        t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp = a[p].copy()
                rq = a[q].copy()
                a[p] = c * rp - s * rq
                a[q] = s * rp + c * rq
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = a[q, p] = 0.0
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    return np.sort(np.diag(a))


def default_threshold(A: np.ndarray) -> float:
    return A.shape[0] * float(np.linalg.norm(A)) * 1e-10


def signature(A: np.ndarray, threshold: float | None = None,
              return_eigenvalues: bool = False):
    """(positive, negative, zero) eigenvalue counts of a symmetric matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("signature needs a square matrix")
    if np.linalg.norm(A - A.T) > 1e-8 * max(1.0, np.linalg.norm(A)):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    thr = default_threshold(A) if threshold is None else float(threshold)
    ev = jacobi_eigenvalues(A)
    sig = (int(np.sum(ev > thr)), int(np.sum(ev < -thr)), 0)
    sig = (sig[0], sig[1], A.shape[0] - sig[0] - sig[1])
    if return_eigenvalues:
        return sig, ev, thr
    return sig


def signature_report(cost: CostModel, point, weights) -> SignatureReport:
    G = assemble_g(cost, point, weights)
    sig, ev, thr = signature(G, return_eigenvalues=True)
    return SignatureReport(tuple(np.asarray(x, float) for x in point),
                           np.asarray(weights, float), sig, ev, thr)


def uniform_weights(m: int) -> np.ndarray:
    k = 2 ** (m - 1) - 1
    return np.full(k, 1.0 / k)


def candidate_weights(m: int, extra_samples: int = 32, rng=None) -> list[np.ndarray]:
    """Simplex vertices, the uniform point and random Dirichlet draws."""
    k = 2 ** (m - 1) - 1
    rng = np.random.default_rng(rng)
    cands = [np.eye(k)[i] for i in range(k)]
    cands.append(uniform_weights(m))
    for _ in range(extra_samples):
        cands.append(rng.dirichlet(np.ones(k)))
    if k == 1:
        return cands[:1]
    return cands


def sample_points(space: ProductSpace, n_random: int = 16, support=None, rng=None) -> list[tuple]:
    """Grid tuples for kappa estimation: given support tuples plus random ones."""
    rng = np.random.default_rng(rng)
    idx = [] if support is None else [tuple(int(k) for k in s) for s in support]
    for _ in range(n_random):
        idx.append(tuple(int(rng.integers(n)) for n in space.shape))
    seen = list(dict.fromkeys(idx))
    return [tuple(mu.points[k] for mu, k in zip(space.marginals, t)) for t in seen]


def kappa_estimate(cost: CostModel, points: Sequence, extra_samples: int = 32,
                   rng=None) -> KappaEstimate:
    """Lower estimate of the positive-signature constant over sampled points.

    At every point the positive index is maximized over a finite set of
    weights; the result is the minimum over points.
    """
    m = cost.arity
    if m > MAX_KAPPA_ARITY:
        raise ValueError(f"arity {m} exceeds the bipartition enumeration guard")
    if len(points) == 0:
        raise ValueError("at least one sample point is required")
    cands = candidate_weights(m, extra_samples, rng)
    bound = sum(cost.dims) - max(cost.dims)
    per_point = []
    for pt in points:
        best = None
        for t in cands:
            rep = signature_report(cost, pt, t)
            if best is None or rep.signature[0] > best.signature[0]:
                best = rep
        if best.signature[0] > bound:
            raise InvariantViolation(
                f"positive index {best.signature[0]} exceeds sum(d) - max(d) = {bound}"
            )
        per_point.append(best)
    kappa = min(r.signature[0] for r in per_point)
    strategy = (
        f"max over {len(cands)} weights ({2 ** (m - 1) - 1} vertices, uniform, "
        f"{extra_samples} Dirichlet draws) at {len(points)} sampled points; "
        "kappa is a lower estimate of the true maximum"
    )
    return KappaEstimate(kappa, per_point, strategy, bound)


@dataclass(frozen=True)
class LaplaceFit:
    exponent: float
    constant: float
    epsilons: np.ndarray
    integrals: np.ndarray
    residuals: np.ndarray


def laplace_exponent_fit(E: np.ndarray, marginals: Sequence[DiscreteMarginal],
                         eps_list: Sequence[float]) -> LaplaceFit:
    """Fit log I(eps) = s log eps + log C for I(eps) = sum exp(-E/eps) d(product)."""
    E = np.asarray(E, dtype=float)
    if E.min() < -1e-10:
        raise ValueError(f"gap field has negative entry {E.min():.3g}")
    E = np.maximum(E, 0.0)
    eps = np.asarray(eps_list, dtype=float)
    if eps.size < 4:
        raise ValueError("need at least four epsilons")
    w = np.ones(E.shape)
    for i, mu in enumerate(marginals):
        s = [1] * E.ndim
        s[i] = mu.n
        w = w * mu.weights.reshape(s)
    I = np.array([np.sum(np.exp(-E / e) * w) for e in eps])
    if np.all(I == 0):
        raise ValueError("Laplace integral underflows for every epsilon; E has no zero set")
    keep = I > 0
    X = np.stack([np.log(eps[keep]), np.ones(keep.sum())], axis=1)
    coef, *_ = np.linalg.lstsq(X, np.log(I[keep]), rcond=None)
    res = np.log(I[keep]) - X @ coef
    return LaplaceFit(float(coef[0]), float(math.exp(coef[1])), eps, I, res)
