"""The 1D semi-Lagrangian DG advection step, plus the unstable direct scheme.

One step is the L2 projection of x -> u(foot(x)) computed with per-piece
Gauss quadrature: each cell is split at the forward images of the mesh
interfaces so the integrand is a polynomial on every piece and the
(k+1)-point rule is exact there.  Because the nodal mass matrix is diagonal,
the projection is an explicit division by the node weights.

The step compiles to an ``AdvectPlan``: per piece, a target cell, a source
cell and a (k+1)x(k+1) matrix mapping source nodal values to the target
contribution.  Plans are reusable whenever the map does not change, which is
what makes long constant-step runs cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .field import EXTENDED, PERIODIC, BoundaryExtension, DgField1D, Mesh1D, eval_field
from .flow import BackwardMap, MonotonicityError, forward_solve_many
from .quadbasis import gauss_rule, lagrange_basis_matrix

EXT_LEFT = -1
EXT_RIGHT = -2
_MERGE = 1e-13


@dataclass
class AdvectPlan:
    """Compiled one-step operator for a fixed (mesh, degree, map) triple."""

    mesh: Mesh1D
    k: int
    tgt: np.ndarray        # (P,) target cell of each interior piece
    src: np.ndarray        # (P,) source cell
    W: np.ndarray          # (P, K, K) nodal source -> target contribution
    ext_tgt: np.ndarray    # (Pe,) target cells of out-of-domain pieces
    ext_side: np.ndarray   # (Pe,) EXT_LEFT / EXT_RIGHT
    ext_feet: np.ndarray   # (Pe, K) physical feet outside the domain
    ext_G: np.ndarray      # (Pe, K, K) quadrature x basis / mass for those


def _piece_table(bmap: BackwardMap, mesh: Mesh1D):
    """Split every cell at forward images of interfaces; return piece arrays."""
    M, dx = mesh.M, mesh.dx
    g = mesh.interfaces()
    F = bmap.foot(g)
    if np.any(np.diff(F) <= 0):
        raise MonotonicityError("advect plan: interface feet out of order")
    tol = _MERGE * dx

    # candidate crossing lines per cell, solved in one batch
    l0 = np.floor((F[:-1] - mesh.x_min) / dx).astype(np.int64) + 1
    l1 = np.ceil((F[1:] - mesh.x_min) / dx).astype(np.int64) - 1
    if mesh.boundary == EXTENDED:
        l0 = np.maximum(l0, 0)
        l1 = np.minimum(l1, M)
    counts = np.maximum(l1 - l0 + 1, 0)
    cells = np.repeat(np.arange(M), counts)
    lines = np.concatenate([np.arange(a, b + 1) for a, b in zip(l0, l1) if b >= a]) if counts.sum() else np.array([], np.int64)
    if lines.size:
        xs = forward_solve_many(bmap, mesh.x_min + lines * dx)
    else:
        xs = np.array([])

    piece_cell, piece_a, piece_b = [], [], []
    left_edges = mesh.x_min + dx * np.arange(M)
    start = 0
    for i in range(M):
        n = counts[i]
        a, b = left_edges[i], left_edges[i] + dx
        inner = xs[start:start + n]
        start += n
        inner = inner[(inner > a + tol) & (inner < b - tol)]
        inner = np.sort(inner)
        if inner.size:
            keep = np.concatenate(([True], np.diff(inner) > tol))
            inner = inner[keep]
        pts = np.concatenate(([a], inner, [b]))
        for q in range(pts.size - 1):
            if pts[q + 1] - pts[q] <= tol:
                continue  # degenerate tangency
            piece_cell.append(i)
            piece_a.append(pts[q])
            piece_b.append(pts[q + 1])
    return (
        np.asarray(piece_cell, dtype=np.int64),
        np.asarray(piece_a, dtype=float),
        np.asarray(piece_b, dtype=float),
    )


def build_advect_plan(mesh: Mesh1D, k: int, bmap: BackwardMap) -> AdvectPlan:
    """Compile the semi-Lagrangian step for ``bmap`` on (mesh, degree k)."""
    K = k + 1
    rule = gauss_rule(K)
    dx = mesh.dx
    cell, a, b = _piece_table(bmap, mesh)

    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    tx = mid[:, None] + half[:, None] * rule.nodes        # (P, K) quadrature points
    feet = bmap.foot(tx.reshape(-1)).reshape(tx.shape)
    fmid = bmap.foot(mid)

    # classify source of each piece by the foot of its midpoint
    if mesh.boundary == PERIODIC:
        src = mesh.cell_of(mesh.wrap(fmid))
        out_l = np.zeros(cell.shape, dtype=bool)
        out_r = out_l
    else:
        out_l = fmid < mesh.x_min
        out_r = fmid > mesh.x_max
        src = np.where(out_l | out_r, 0, mesh.cell_of(np.clip(fmid, mesh.x_min, mesh.x_max)))

    # target-side basis scaled by quadrature weights and the inverse mass
    t_tgt = 2.0 * (tx - (mesh.x_min + cell[:, None] * dx)) / dx - 1.0
    Btgt = lagrange_basis_matrix(rule, t_tgt)             # (P, K, K): [p, a, beta]
    G = (rule.weights[None, :, None] * (b - a)[:, None, None] / dx) * Btgt / rule.weights[None, None, :]

    interior = ~(out_l | out_r)
    if mesh.boundary == PERIODIC:
        feet_in = mesh.wrap(feet)
    else:
        feet_in = feet
    t_src = 2.0 * (feet_in - (mesh.x_min + src[:, None] * dx)) / dx - 1.0
    Bsrc = lagrange_basis_matrix(rule, t_src)             # (P, K, K): [p, a, b]
    W = np.einsum("pab,pag->pbg", Bsrc[interior], G[interior])

    return AdvectPlan(
        mesh=mesh,
        k=k,
        tgt=np.ascontiguousarray(cell[interior]),
        src=np.ascontiguousarray(src[interior]),
        W=np.ascontiguousarray(W),
        ext_tgt=np.ascontiguousarray(cell[~interior]),
        ext_side=np.where(out_l[~interior], EXT_LEFT, EXT_RIGHT).astype(np.int64),
        ext_feet=np.ascontiguousarray(feet[~interior]),
        ext_G=np.ascontiguousarray(G[~interior]),
    )


def apply_plan(plan: AdvectPlan, coeffs: np.ndarray, ext: Optional[BoundaryExtension] = None,
               t: float = 0.0) -> np.ndarray:
    """Apply a compiled plan to a coefficient array (M, K)."""
    out = np.zeros_like(coeffs)
    kernels.apply_plan(coeffs, plan.tgt, plan.src, plan.W, out)
    if plan.ext_tgt.size:
        if ext is None:
            raise ValueError("advect step: feet leave the domain and no boundary extension given")
        vals = np.empty_like(plan.ext_feet)
        left = plan.ext_side == EXT_LEFT
        if left.any():
            vals[left] = ext.left(t, plan.ext_feet[left])
        if (~left).any():
            vals[~left] = ext.right(t, plan.ext_feet[~left])
        contrib = np.einsum("pa,pag->pg", vals, plan.ext_G)
        np.add.at(out, plan.ext_tgt, contrib)
    return out


def advect_step(u: DgField1D, bmap: BackwardMap, ext: Optional[BoundaryExtension] = None,
                t: float = 0.0, plan: Optional[AdvectPlan] = None) -> DgField1D:
    """One semi-Lagrangian DG step: the projection of u(foot(.)).

    ``plan`` may be passed to reuse the compiled operator across steps with
    the same map (the extension contribution is still re-evaluated at ``t``).
    """
    if plan is None:
        plan = build_advect_plan(u.mesh, u.k, bmap)
    return DgField1D(u.mesh, u.k, apply_plan(plan, u.coeffs, ext=ext, t=t))


def direct_step(u: DgField1D, bmap: BackwardMap) -> DgField1D:
    """Nodal collocation u'(x_a^i) = u(foot(x_a^i)) - no projection.

    This is the scheme whose long-run iteration is unstable; it exists for
    the contrast experiment.
    """
    feet = bmap.foot(u.mesh.gauss_points(u.k).reshape(-1))
    vals = eval_field(u, feet)
    return DgField1D(u.mesh, u.k, vals.reshape(u.mesh.M, u.k + 1))
