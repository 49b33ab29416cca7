"""Tensor-product Q_k fields, directional 1D sweeps and splitting schedules.

2D steps never touch genuinely two-dimensional integrals: every operator is a
composition of one-dimensional sweeps applied line by line at frozen
transverse Gauss ordinates.  Schedules encode the stage list of a splitting
composition (Trotter, Strang, Ruth 3rd, Forest 4th, Yoshida 6th order);
diffusion directions reduce a 2x2 diffusion matrix to two one-directional
weak-Taylor substeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels
from .field import PERIODIC, DgField1D, Mesh1D
from .flow import euler_branches, ode_map, platen_branches
from .quadbasis import gauss_rule, lagrange_basis_matrix
from .transport import build_advect_plan

Coefficient = Union[float, Callable]


# --------------------------------------------------------------- 2D fields

@dataclass(frozen=True)
class Mesh2D:
    mx: Mesh1D
    my: Mesh1D


@dataclass(frozen=True)
class DgField2D:
    """Nodal Q_k field: coeffs[i, j, a, b] at the tensor Gauss node (a, b)."""

    mesh: Mesh2D
    k: int
    coeffs: np.ndarray

    def __post_init__(self):
        K = self.k + 1
        expect = (self.mesh.mx.M, self.mesh.my.M, K, K)
        if self.coeffs.shape != expect:
            raise ValueError(f"coeffs shape {self.coeffs.shape} != {expect}")


def _axis_oversample(mesh: Mesh1D, k: int):
    K = k + 1
    orule = gauss_rule(2 * K)
    left = mesh.x_min + mesh.dx * np.arange(mesh.M)
    pts = left[:, None] + 0.5 * (1.0 + orule.nodes) * mesh.dx
    rule = gauss_rule(K)
    B = lagrange_basis_matrix(rule, orule.nodes)  # (2K, K)
    P = (orule.weights[:, None] * B).T / rule.weights[:, None]  # (K, 2K)
    w = 0.5 * mesh.dx * orule.weights
    return pts, B, P, w


def project2(f: Callable, mesh: Mesh2D, k: int) -> DgField2D:
    """Tensor-product L2 projection of f(x, y) with per-axis oversampling."""
    xo, _, Px, _ = _axis_oversample(mesh.mx, k)
    yo, _, Py, _ = _axis_oversample(mesh.my, k)
    F = np.asarray(f(xo[:, None, :, None], yo[None, :, None, :]), dtype=float)
    if not np.all(np.isfinite(F)):
        raise ValueError("project2: non-finite values of f")
    C = np.einsum("ijpq,ap,bq->ijab", F, Px, Py, optimize=True)
    return DgField2D(mesh, k, C)


def norms2(u: DgField2D):
    """(L1, L2, Linf) with the same sampling rules as the 1D norms."""
    K = u.k + 1
    rule = gauss_rule(K)
    wx = 0.5 * u.mesh.mx.dx * rule.weights
    wy = 0.5 * u.mesh.my.dx * rule.weights
    l2 = math.sqrt(float(np.einsum("ijab,a,b->", u.coeffs ** 2, wx, wy)))
    _, Bx, _, wox = _axis_oversample(u.mesh.mx, u.k)
    _, By, _, woy = _axis_oversample(u.mesh.my, u.k)
    vals = np.einsum("ijab,pa,qb->ijpq", u.coeffs, Bx, By, optimize=True)
    l1 = float(np.einsum("ijpq,p,q->", np.abs(vals), wox, woy))
    tref = np.linspace(-1.0, 1.0, 4 * K)
    Bs = lagrange_basis_matrix(rule, tref)
    sval = np.einsum("ijab,pa,qb->ijpq", u.coeffs, Bs, Bs, optimize=True)
    return l1, l2, float(np.max(np.abs(sval)))


def error_vs2(u: DgField2D, exact: Callable, t: float = 0.0):
    """(L1, L2, Linf) of u - exact(t, x, y), oversampled quadrature."""
    K = u.k + 1
    rule = gauss_rule(K)
    xo, Bx, _, wox = _axis_oversample(u.mesh.mx, u.k)
    yo, By, _, woy = _axis_oversample(u.mesh.my, u.k)
    vals = np.einsum("ijab,pa,qb->ijpq", u.coeffs, Bx, By, optimize=True)
    diff = vals - np.asarray(exact(t, xo[:, None, :, None], yo[None, :, None, :]), dtype=float)
    l1 = float(np.einsum("ijpq,p,q->", np.abs(diff), wox, woy))
    l2 = math.sqrt(float(np.einsum("ijpq,ijpq,p,q->", diff, diff, wox, woy)))
    tref = np.linspace(-1.0, 1.0, 4 * K)
    Bs = lagrange_basis_matrix(rule, tref)
    xs = (u.mesh.mx.x_min + u.mesh.mx.dx * np.arange(u.mesh.mx.M))[:, None] \
        + 0.5 * (1.0 + tref) * u.mesh.mx.dx
    ys = (u.mesh.my.x_min + u.mesh.my.dx * np.arange(u.mesh.my.M))[:, None] \
        + 0.5 * (1.0 + tref) * u.mesh.my.dx
    sval = np.einsum("ijab,pa,qb->ijpq", u.coeffs, Bs, Bs, optimize=True)
    sdiff = sval - np.asarray(exact(t, xs[:, None, :, None], ys[None, :, None, :]), dtype=float)
    return l1, l2, float(np.max(np.abs(sdiff)))


def lincomb2(terms) -> DgField2D:
    terms = list(terms)
    _, first = terms[0]
    acc = np.zeros_like(first.coeffs)
    for c, f in terms:
        if f.mesh != first.mesh or f.k != first.k:
            raise ValueError("lincomb2: mesh/degree mismatch")
        acc += c * f.coeffs
    return DgField2D(first.mesh, first.k, acc)


# ------------------------------------------------------------- line layout

def _extract_lines(u: DgField2D, axis: int):
    """Return (lines, perp): lines[l] is the 1D coefficient row along ``axis``
    at the l-th transverse Gauss ordinate, lines shaped (L, M_axis, K)."""
    K = u.k + 1
    if axis == 1:
        C = np.ascontiguousarray(u.coeffs.transpose(1, 3, 0, 2).reshape(-1, u.mesh.mx.M, K))
        perp = u.mesh.my.gauss_points(u.k).reshape(-1)
    elif axis == 2:
        C = np.ascontiguousarray(u.coeffs.transpose(0, 2, 1, 3).reshape(-1, u.mesh.my.M, K))
        perp = u.mesh.mx.gauss_points(u.k).reshape(-1)
    else:
        raise ValueError("axis must be 1 or 2")
    return C, perp


def _insert_lines(u: DgField2D, axis: int, C: np.ndarray) -> DgField2D:
    K = u.k + 1
    M1, M2 = u.mesh.mx.M, u.mesh.my.M
    if axis == 1:
        new = C.reshape(M2, K, M1, K).transpose(2, 0, 3, 1)
    else:
        new = C.reshape(M1, K, M2, K).transpose(0, 2, 1, 3)
    return DgField2D(u.mesh, u.k, np.ascontiguousarray(new))


# ------------------------------------------------------------ line steppers

class ConstShiftLines:
    """Per-line constant displacement: line l moves by -delta[l] (periodic).

    For a constant shift every cell has the same two-piece structure, so the
    sweep is two gathers and two small matrix products, vectorized over lines.
    """

    def __init__(self, mesh: Mesh1D, k: int, deltas: np.ndarray):
        if mesh.boundary != PERIODIC:
            raise ValueError("ConstShiftLines requires a periodic mesh")
        K = k + 1
        rule = gauss_rule(K)
        deltas = np.asarray(deltas, dtype=float)
        ratio = deltas / mesh.dx
        c = np.floor(ratio).astype(np.int64)
        f = ratio - c  # in [0, 1)
        xi = rule.nodes
        # piece A: target ref f*(1+xi)-1, source ref 1+f*(xi-1), source cell i-c-1
        tA = f[:, None] * (1.0 + xi) - 1.0
        sA = 1.0 + f[:, None] * (xi - 1.0)
        # piece B: target ref 2f+(1-f)(1+xi)-1, source ref shifted down by 2f, cell i-c
        tB = 2.0 * f[:, None] + (1.0 - f[:, None]) * (1.0 + xi) - 1.0
        sB = tB - 2.0 * f[:, None]
        self.W1 = self._mat(rule, sA, tA, f)
        self.W2 = self._mat(rule, sB, tB, 1.0 - f)
        self.cells = np.arange(mesh.M)
        self.idxA = (self.cells[None, :] - (c + 1)[:, None]) % mesh.M  # (L, M)
        self.idxB = (self.cells[None, :] - c[:, None]) % mesh.M

    @staticmethod
    def _mat(rule, s_ref, t_ref, frac):
        Bs = lagrange_basis_matrix(rule, s_ref)  # (L, K, K)
        Bt = lagrange_basis_matrix(rule, t_ref)
        G = (rule.weights[None, :, None] * np.asarray(frac)[:, None, None]) * Bt / rule.weights[None, None, :]
        return np.einsum("lab,lag->lbg", Bs, G)

    def apply_lines(self, C: np.ndarray, perp=None, t: float = 0.0) -> np.ndarray:
        gA = np.take_along_axis(C, self.idxA[:, :, None], axis=1)
        gB = np.take_along_axis(C, self.idxB[:, :, None], axis=1)
        return np.einsum("lik,lkb->lib", gA, self.W1) + np.einsum("lik,lkb->lib", gB, self.W2)


class SharedPlanLines:
    """One compiled 1D plan applied to every line (map independent of the
    transverse coordinate)."""

    def __init__(self, plan, parallel: bool = False):
        if plan.ext_tgt.size:
            raise ValueError("SharedPlanLines supports periodic plans only")
        self.plan = plan
        self.parallel = parallel

    def apply_lines(self, C: np.ndarray, perp=None, t: float = 0.0) -> np.ndarray:
        out = np.zeros_like(C)
        kernels.apply_plan_shared(C, self.plan.tgt, self.plan.src, self.plan.W, out,
                                  parallel=self.parallel)
        return out


class PerLinePlans:
    """Ragged stack of per-line 1D plans (variable coefficient sweeps)."""

    def __init__(self, plans: Sequence, parallel: bool = False):
        counts = [p.tgt.size for p in plans]
        self.ptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        self.line = np.repeat(np.arange(len(plans), dtype=np.int64), counts)
        self.tgt = np.concatenate([p.tgt for p in plans]) if plans else np.zeros(0, np.int64)
        self.src = np.concatenate([p.src for p in plans])
        self.W = np.ascontiguousarray(np.concatenate([p.W for p in plans]))
        self.parallel = parallel
        if any(p.ext_tgt.size for p in plans):
            raise ValueError("PerLinePlans supports periodic plans only")

    def apply_lines(self, C: np.ndarray, perp=None, t: float = 0.0) -> np.ndarray:
        out = np.zeros_like(C)
        kernels.apply_plan_lines(C, self.ptr, self.line, self.tgt, self.src, self.W, out,
                                 parallel=self.parallel)
        return out


def apply_dir(u: DgField2D, axis: int, step) -> DgField2D:
    """Apply a 1D transform along ``axis`` at every frozen transverse node.

    ``step`` is either a line stepper (object with ``apply_lines``) or a
    callable ``(field_1d, x_perp) -> field_1d`` applied line by line.
    """
    C, perp = _extract_lines(u, axis)
    if hasattr(step, "apply_lines"):
        C2 = step.apply_lines(C, perp)
    else:
        mesh1 = u.mesh.mx if axis == 1 else u.mesh.my
        C2 = np.empty_like(C)
        for l in range(C.shape[0]):
            C2[l] = step(DgField1D(mesh1, u.k, C[l]), perp[l]).coeffs
    return _insert_lines(u, axis, C2)


# ---------------------------------------------------------------- schedules

@dataclass(frozen=True)
class SplitSchedule:
    """Ordered (axis, coefficient) stages; stage 0 is applied first."""

    stages: tuple

    def axis_sum(self, axis: int) -> float:
        return sum(th for ax, th in self.stages if ax == axis)


_GAMMA1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_GAMMA2 = -(2.0 ** (1.0 / 3.0)) / (2.0 - 2.0 ** (1.0 / 3.0))
_Y1 = 1.0 / (2.0 - 2.0 ** (1.0 / 5.0))
_Y2 = -(2.0 ** (1.0 / 5.0)) / (2.0 - 2.0 ** (1.0 / 5.0))
RUTH_C = (7.0 / 24.0, 3.0 / 4.0, -1.0 / 24.0)
RUTH_D = (2.0 / 3.0, -2.0 / 3.0, 1.0)


def _merge_adjacent(stages):
    out = [list(stages[0])]
    for ax, th in stages[1:]:
        if ax == out[-1][0]:
            out[-1][1] += th
        else:
            out.append([ax, th])
    return tuple((ax, th) for ax, th in out)


def _forest_stages():
    g1, g2 = _GAMMA1, _GAMMA2
    return (
        (1, g1 / 2), (2, g1), (1, (g1 + g2) / 2), (2, g2),
        (1, (g1 + g2) / 2), (2, g1), (1, g1 / 2),
    )


def schedule(kind: str) -> SplitSchedule:
    """Return the named splitting schedule (orders 1, 2, 3, 4 and 6)."""
    kind = kind.upper()
    if kind == "TROTTER":
        stages = ((1, 1.0), (2, 1.0))
    elif kind == "STRANG":
        stages = ((1, 0.5), (2, 1.0), (1, 0.5))
    elif kind == "RUTH3":
        stages = tuple(s for c, d in zip(RUTH_C, RUTH_D) for s in ((1, c), (2, d)))
    elif kind == "FOREST4":
        stages = _forest_stages()
    elif kind == "YOSHIDA6":
        base = _forest_stages()
        stages = _merge_adjacent(
            tuple((ax, th * y) for y in (_Y1, _Y2, _Y1) for ax, th in base)
        )
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return SplitSchedule(stages)


# --------------------------------------------------------- split advection

def advect_stage_stepper(mesh2: Mesh2D, k: int, axis: int, b: Callable,
                         stage_dt: float, lipschitz: Optional[float] = None,
                         const_along_axis: bool = False, parallel: bool = False):
    """Build the line stepper of one splitting stage.

    ``b(x_along, x_perp)`` is the velocity of the swept axis.  When
    ``const_along_axis`` the speed on each line is constant and the stage is
    a per-line exact shift; otherwise a per-line characteristic ODE is traced
    and a plan is compiled per line.
    """
    mesh1 = mesh2.mx if axis == 1 else mesh2.my
    perp_mesh = mesh2.my if axis == 1 else mesh2.mx
    perp = perp_mesh.gauss_points(k).reshape(-1)
    if const_along_axis:
        mid = 0.5 * (mesh1.x_min + mesh1.x_max)
        speeds = np.asarray(b(np.full_like(perp, mid), perp), dtype=float)
        return ConstShiftLines(mesh1, k, speeds * stage_dt)
    plans = []
    for xp in perp:
        bmap = ode_map(lambda x, _xp=xp: b(x, np.full_like(np.asarray(x, float), _xp)),
                       stage_dt, lipschitz=lipschitz, domain=(mesh1.x_min, mesh1.x_max))
        plans.append(build_advect_plan(mesh1, k, bmap))
    return PerLinePlans(plans, parallel=parallel)


def split_advect(u: DgField2D, b1: Callable, b2: Callable, dt: float,
                 sched: SplitSchedule, stage_steppers: Optional[Sequence] = None,
                 const_along_axis=(False, False), lipschitz=(None, None)) -> DgField2D:
    """Advance the 2D advection by one step of the splitting composition.

    ``b1(x1, x2)`` and ``b2(x1, x2)`` are the axis velocities.  Negative
    stage coefficients trace the characteristics with negated time.  A list
    of prebuilt ``stage_steppers`` (one per stage) may be supplied to avoid
    recompiling per step.
    """
    if stage_steppers is None:
        stage_steppers = []
        for ax, th in sched.stages:
            if ax == 1:
                swap = lambda xa, xp, _b=b1: _b(xa, xp)
            else:
                swap = lambda xa, xp, _b=b2: _b(xp, xa)
            stage_steppers.append(
                advect_stage_stepper(u.mesh, u.k, ax, swap, th * dt,
                                     lipschitz=lipschitz[ax - 1],
                                     const_along_axis=const_along_axis[ax - 1])
            )
    v = u
    for (ax, _), stepper in zip(sched.stages, stage_steppers):
        v = apply_dir(v, ax, stepper)
    return v


# ------------------------------------------------------ diffusion directions

@dataclass(frozen=True)
class DiffusionDirection:
    """One column of the diffusion matrix with a factorizing dependence.

    comp1 depends on x only (or is constant), comp2 on y only; either may be
    identically zero.  ``vector(x, y)`` returns the full column for checks.
    """

    comp1: Coefficient
    comp2: Coefficient
    deps: tuple


_AX_DEPS = {0: ("x", "const", "zero"), 1: ("y", "const", "zero")}


def decompose_diffusion(sigma, deps) -> list:
    """Split sigma*sigma^T into its two column directions.

    ``sigma`` is a callable (x, y) -> 2x2 array (or a constant 2x2 array);
    ``deps[i][q]`` declares the dependence of entry (i, q): "x", "y",
    "const" or "zero".  Columns whose dependence does not factorize per axis
    are rejected (the general case needs the auxiliary-PDE reformulation).
    """
    const = not callable(sigma)
    mat = None if callable(sigma) else np.asarray(sigma, dtype=float)
    dirs = []
    for q in (0, 1):
        comps = []
        for i in (0, 1):
            d = "const" if const else deps[i][q]
            if d not in _AX_DEPS[i]:
                raise ValueError(
                    f"decompose_diffusion: entry ({i + 1},{q + 1}) depends on {d!r}; "
                    "non-factorizing directions are unsupported"
                )
            if const:
                comps.append(float(mat[i, q]))
            elif d == "zero":
                comps.append(0.0)
            elif d == "const":
                probe = np.asarray(sigma(0.0, 0.0), dtype=float)
                comps.append(float(probe[i, q]))
            else:
                def comp(s, _i=i, _q=q, _axis=d):
                    s = np.asarray(s, dtype=float)
                    x = s if _axis == "x" else np.zeros_like(s)
                    y = s if _axis == "y" else np.zeros_like(s)
                    out = np.empty_like(s)
                    flat_x, flat_y = np.ravel(x), np.ravel(y)
                    vals = [np.asarray(sigma(xx, yy), dtype=float)[_i, _q]
                            for xx, yy in zip(flat_x, flat_y)]
                    return np.asarray(vals, dtype=float).reshape(s.shape)
                comps.append(comp)
        dirs.append(DiffusionDirection(comps[0], comps[1],
                                       ("const" if const else deps[0][q],
                                        "const" if const else deps[1][q])))
    return dirs


def direction_vector(d: DiffusionDirection, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c1 = d.comp1(x) if callable(d.comp1) else np.full_like(x, float(d.comp1))
    c2 = d.comp2(y) if callable(d.comp2) else np.full_like(y, float(d.comp2))
    return c1, c2


class WeakDirectionStepper:
    """Prebuilt one-directional weak-Taylor 2D step (branch plans compiled)."""

    def __init__(self, mesh2: Mesh2D, k: int, direction: DiffusionDirection,
                 dt: float, order: int, bpart=(0.0, 0.0), parallel: bool = False):
        if order not in (1, 2):
            raise ValueError("weak 2D step: order must be 1 or 2")
        maker = euler_branches if order == 1 else platen_branches
        self.weights = (0.5, 0.5) if order == 1 else (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0)
        axes = ((mesh2.mx, direction.comp1, bpart[0]), (mesh2.my, direction.comp2, bpart[1]))
        fams = []
        for mesh1, comp, bp in axes:
            trivial = (not callable(comp)) and float(comp) == 0.0 \
                and (not callable(bp)) and float(bp) == 0.0
            if trivial:
                fams.append(None)
                continue
            fam = maker(bp, comp, dt, domain=(mesh1.x_min, mesh1.x_max))
            assert np.allclose([br.weight for br in fam], self.weights)
            fams.append(fam)
        self.plans1 = [None if fams[0] is None else build_advect_plan(mesh2.mx, k, br.map)
                       for br in (fams[0] or [None] * len(self.weights))]
        self.plans2 = [None if fams[1] is None else build_advect_plan(mesh2.my, k, br.map)
                       for br in (fams[1] or [None] * len(self.weights))]
        self.parallel = parallel

    def __call__(self, u: DgField2D) -> DgField2D:
        acc = np.zeros_like(u.coeffs)
        for w, p1, p2 in zip(self.weights, self.plans1, self.plans2):
            v = u
            if p1 is not None:
                v = apply_dir(v, 1, SharedPlanLines(p1, parallel=self.parallel))
            if p2 is not None:
                v = apply_dir(v, 2, SharedPlanLines(p2, parallel=self.parallel))
            acc += w * v.coeffs
        return DgField2D(u.mesh, u.k, acc)


def weak_step_2d(u: DgField2D, direction: DiffusionDirection, dt: float, order: int,
                 bpart=(0.0, 0.0), stepper: Optional[WeakDirectionStepper] = None) -> DgField2D:
    """One weak-Taylor step for a single diffusion direction.

    Each branch applies its axis-1 displacement then its axis-2 displacement
    with the same branch sign; branch results are combined with the weak
    weights.  Factorizing dependence (enforced by decompose_diffusion) makes
    the per-axis sweeps exact 1D problems.
    """
    if stepper is None:
        stepper = WeakDirectionStepper(u.mesh, u.k, direction, dt, order, bpart=bpart)
    return stepper(u)
