"""Gauss-Legendre quadrature and the nodal Lagrange basis at Gauss points.

The whole discretization is nodal: a degree-k element on a cell is stored as
its values at the k+1 Gauss points of that cell, and the dual basis is the
set of Lagrange polynomials through those points.  A rule with n points
integrates polynomials up to degree 2n-1 exactly, which makes the nodal mass
matrix diagonal (``int phi_a phi_b = w_a delta_ab``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_POINTS = 16


@dataclass(frozen=True)
class GaussRule:
    """Gauss-Legendre nodes and weights on the reference interval (-1, 1).

    Attributes:
        n: number of quadrature points.
        nodes: abscissae in ascending order, shape (n,).
        weights: positive weights, shape (n,); they sum to 2.
    """

    n: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        # barycentric weights for robust Lagrange evaluation
        lam = np.ones(self.n)
        for a in range(self.n):
            diff = self.nodes[a] - np.delete(self.nodes, a)
            lam[a] = 1.0 / np.prod(diff)
        object.__setattr__(self, "_bary", lam)


def _legendre(n: int, x: np.ndarray):
    """Evaluate P_n and P_n' by the three-term recurrence."""
    p0 = np.ones_like(x)
    p1 = x.copy()
    if n == 0:
        return p0, np.zeros_like(x)
    for m in range(2, n + 1):
        p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
    # derivative from P_n and P_{n-1}
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


@lru_cache(maxsize=None)
def gauss_rule(n: int) -> GaussRule:
    """Return the n-point Gauss-Legendre rule on (-1, 1), 1 <= n <= 16.

    Nodes are Legendre roots found by Newton iteration from Chebyshev
    estimates, refined below 1e-15 residual, then symmetrized so that
    nodes and weights are exactly symmetric about 0.
    """
    if not isinstance(n, (int, np.integer)) or not (1 <= n <= MAX_POINTS):
        raise ValueError(f"gauss_rule: point count must be an integer in [1, {MAX_POINTS}], got {n!r}")
    if n == 1:
        return GaussRule(1, np.array([0.0]), np.array([2.0]))

    i = np.arange(n)
    x = np.cos(np.pi * (i + 0.75) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    # one polishing step, then symmetrize
    p, dp = _legendre(n, x)
    x = x - p / dp
    x = 0.5 * (x - x[::-1])
    _, dp = _legendre(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    w = 0.5 * (w + w[::-1])
    order = np.argsort(x)
    return GaussRule(n, x[order], w[order])


def lagrange_basis_matrix(rule: GaussRule, t) -> np.ndarray:
    """Evaluate all Lagrange basis polynomials of ``rule`` at points ``t``.

    Returns an array of shape ``t.shape + (n,)`` with ``[..., a] = phi_a(t)``.
    Uses the barycentric form; points that coincide with a node reproduce the
    Kronecker property exactly.
    """
    t = np.asarray(t, dtype=float)
    d = t[..., None] - rule.nodes  # (..., n)
    # snap points within 1e-13 of a node so aligned maps stay exact
    exact = np.abs(d) <= 1e-13
    hit = exact.any(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = rule._bary / d
        out = q / q.sum(axis=-1, keepdims=True)
    if np.any(hit):
        out[hit] = exact[hit].astype(float)
    return out


def lagrange_basis_at(rule: GaussRule, alpha: int, t):
    """phi_alpha(t): the alpha-th Lagrange polynomial of the rule's nodes.

    Extrapolation (t outside (-1,1)) is allowed.
    """
    if not 0 <= alpha < rule.n:
        raise IndexError(f"basis index {alpha} out of range for {rule.n}-point rule")
    out = lagrange_basis_matrix(rule, t)[..., alpha]
    if np.ndim(t) == 0:
        return float(out)
    return out


def lagrange_eval(rule: GaussRule, values, t):
    """Evaluate the interpolating polynomial with nodal ``values`` at ``t``."""
    values = np.asarray(values, dtype=float)
    out = lagrange_basis_matrix(rule, t) @ values
    if np.ndim(t) == 0:
        return float(out)
    return out
