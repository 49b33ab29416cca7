"""Meshes, nodal DG fields, projection, point evaluation and norms (1D).

A field of degree k on M cells is the array of its values at the k+1 Gauss
points of every cell.  The discrete L2 norm is exact for such fields because
the (k+1)-point rule integrates the degree-2k square exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .quadbasis import gauss_rule, lagrange_basis_matrix

PERIODIC = "periodic"
EXTENDED = "extended"

# equispaced samples per cell used for the L-infinity norm, per basis function
LINF_SAMPLES_PER_DOF = 4
# oversampling factor for projections and non-polynomial quadrature
OVERSAMPLE = 2


@dataclass(frozen=True)
class Mesh1D:
    """Uniform 1D mesh of M cells on (x_min, x_max)."""

    x_min: float
    x_max: float
    M: int
    boundary: str = PERIODIC

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("Mesh1D: x_min must be < x_max")
        if self.M < 1:
            raise ValueError("Mesh1D: M must be >= 1")
        if self.boundary not in (PERIODIC, EXTENDED):
            raise ValueError(f"Mesh1D: unknown boundary {self.boundary!r}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.M

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    def interfaces(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.M + 1)

    def cell_centers(self) -> np.ndarray:
        return self.x_min + self.dx * (np.arange(self.M) + 0.5)

    def gauss_points(self, k: int) -> np.ndarray:
        """Physical Gauss nodes, shape (M, k+1)."""
        rule = gauss_rule(k + 1)
        left = self.x_min + self.dx * np.arange(self.M)
        return left[:, None] + 0.5 * (1.0 + rule.nodes) * self.dx

    def wrap(self, x: np.ndarray) -> np.ndarray:
        period = self.length
        return x - period * np.floor((x - self.x_min) / period)

    def cell_of(self, x: np.ndarray) -> np.ndarray:
        """Owning cell index; the left cell owns its right endpoint except x_min."""
        idx = np.ceil((np.asarray(x, dtype=float) - self.x_min) / self.dx).astype(np.int64) - 1
        return np.clip(idx, 0, self.M - 1)


@dataclass(frozen=True)
class BoundaryExtension:
    """Out-of-domain values for EXTENDED meshes.

    ``left(t, x)`` is consulted for x <= x_min, ``right(t, x)`` for
    x >= x_max; both must accept numpy arrays for x.
    """

    left: Callable[[float, np.ndarray], np.ndarray]
    right: Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DgField1D:
    """Nodal DG field: coeffs[i, a] is the value at Gauss node a of cell i."""

    mesh: Mesh1D
    k: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.mesh.M, self.k + 1):
            raise ValueError(
                f"coeffs shape {self.coeffs.shape} != (M, k+1) = {(self.mesh.M, self.k + 1)}"
            )

    @property
    def rule(self):
        return gauss_rule(self.k + 1)

    def node_weights(self) -> np.ndarray:
        """Quadrature weights at the field's own nodes, shape (k+1,)."""
        return 0.5 * self.mesh.dx * self.rule.weights


def project(f: Callable, mesh: Mesh1D, k: int) -> DgField1D:
    """L2-project the function ``f`` onto degree-k elements of ``mesh``.

    Per-cell quadrature uses 2(k+1) Gauss points, so the projection is exact
    (to roundoff) for piecewise polynomials of degree <= k aligned with the
    mesh, and has the optimal O(dx^{k+1}) error for smooth data.
    """
    K = k + 1
    rule = gauss_rule(K)
    orule = gauss_rule(OVERSAMPLE * K)
    left = mesh.x_min + mesh.dx * np.arange(mesh.M)
    xo = left[:, None] + 0.5 * (1.0 + orule.nodes) * mesh.dx  # (M, 2K)
    F = np.asarray(f(xo), dtype=float)
    if F.shape != xo.shape:
        F = np.broadcast_to(F, xo.shape).astype(float)
    bad = ~np.isfinite(F)
    if bad.any():
        cell = int(np.argwhere(bad.any(axis=1))[0][0])
        raise ValueError(f"project: non-finite value of f in cell {cell}")
    # P[b, a] = wo_a phi_b(xo_a) / w_b   (the dx/2 factors cancel)
    basis = lagrange_basis_matrix(rule, orule.nodes)  # (2K, K)
    P = (orule.weights[:, None] * basis).T / rule.weights[:, None]
    return DgField1D(mesh, k, F @ P.T)


def eval_field(u: DgField1D, x, t: float = 0.0, ext: Optional[BoundaryExtension] = None):
    """Evaluate the piecewise polynomial at points ``x``.

    Periodic meshes wrap; EXTENDED meshes require ``ext`` for out-of-domain
    points and return its values there.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    mesh = u.mesh
    out = np.empty(x.shape, dtype=float)
    if mesh.boundary == PERIODIC:
        xin = mesh.wrap(x)
        inside = np.ones(x.shape, dtype=bool)
    else:
        inside = (x >= mesh.x_min) & (x <= mesh.x_max)
        if not inside.all():
            if ext is None:
                raise ValueError("eval_field: point outside EXTENDED mesh and no boundary extension given")
            lo = x < mesh.x_min
            hi = x > mesh.x_max
            if lo.any():
                out[lo] = ext.left(t, x[lo])
            if hi.any():
                out[hi] = ext.right(t, x[hi])
        xin = x
    if inside.any():
        xi = xin[inside]
        cells = mesh.cell_of(xi)
        tref = 2.0 * (xi - (mesh.x_min + cells * mesh.dx)) / mesh.dx - 1.0
        B = lagrange_basis_matrix(u.rule, tref)  # (n, K)
        out[inside] = np.einsum("na,na->n", u.coeffs[cells], B)
    return float(out[0]) if scalar else out


def _oversample_values(u: DgField1D):
    """Field values at 2(k+1) Gauss points per cell, plus those weights."""
    orule = gauss_rule(OVERSAMPLE * (u.k + 1))
    B = lagrange_basis_matrix(u.rule, orule.nodes)  # (2K, K)
    vals = u.coeffs @ B.T  # (M, 2K)
    w = 0.5 * u.mesh.dx * orule.weights
    return vals, w, orule


def _linf_points(mesh: Mesh1D, k: int):
    n = LINF_SAMPLES_PER_DOF * (k + 1)
    tref = np.linspace(-1.0, 1.0, n)
    left = mesh.x_min + mesh.dx * np.arange(mesh.M)
    return left[:, None] + 0.5 * (1.0 + tref) * mesh.dx, tref


def norms(u: DgField1D):
    """(L1, L2, Linf) of the field.

    L2 uses the exact nodal identity; L1 integrates |u| on the oversampled
    rule; Linf is the max over 4(k+1) equispaced samples per cell.
    """
    w = u.node_weights()
    l2 = float(np.sqrt(np.sum(u.coeffs * u.coeffs * w)))
    vals, wo, _ = _oversample_values(u)
    l1 = float(np.sum(np.abs(vals) * wo))
    _, tref = _linf_points(u.mesh, u.k)
    B = lagrange_basis_matrix(u.rule, tref)
    linf = float(np.max(np.abs(u.coeffs @ B.T)))
    return l1, l2, linf


def error_vs(u: DgField1D, exact: Callable, t: float = 0.0):
    """(L1, L2, Linf) of u - exact(t, .), sampled like ``norms``.

    L2 uses the oversampled quadrature (the nodal identity is only exact for
    members of the DG space, which a difference with a smooth function is not).
    """
    vals, wo, orule = _oversample_values(u)
    left = u.mesh.x_min + u.mesh.dx * np.arange(u.mesh.M)
    xo = left[:, None] + 0.5 * (1.0 + orule.nodes) * u.mesh.dx
    diff = vals - np.asarray(exact(t, xo), dtype=float)
    l1 = float(np.sum(np.abs(diff) * wo))
    l2 = float(np.sqrt(np.sum(diff * diff * wo)))
    xs, tref = _linf_points(u.mesh, u.k)
    B = lagrange_basis_matrix(u.rule, tref)
    dinf = u.coeffs @ B.T - np.asarray(exact(t, xs), dtype=float)
    linf = float(np.max(np.abs(dinf)))
    return l1, l2, linf


def lincomb(terms) -> DgField1D:
    """Pointwise weighted sum of fields sharing one mesh and degree."""
    terms = list(terms)
    if not terms:
        raise ValueError("lincomb: empty term list")
    _, first = terms[0]
    acc = np.zeros_like(first.coeffs)
    for c, f in terms:
        if f.mesh != first.mesh or f.k != first.k:
            raise ValueError("lincomb: mesh/degree mismatch")
        acc += c * f.coeffs
    return DgField1D(first.mesh, first.k, acc)


def export_csv(u: DgField1D, path) -> None:
    """Write the field snapshot as CSV rows (cell, alpha, x, value)."""
    xs = u.mesh.gauss_points(u.k)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "alpha", "x", "value"])
        for i in range(u.mesh.M):
            for a in range(u.k + 1):
                writer.writerow([i, a, repr(xs[i, a]), repr(u.coeffs[i, a])])
