"""1D second-order steps: constant-sigma shift averages, their convex
combinations, weak Euler/Platen steps for variable coefficients, source
correction and discounting.

The constant-coefficient diffusion half-step is S0 u = (u(x - s) + u(x + s))/2
with s = sigma*sqrt(dt); S = proj S0 is realized by two exact constant-shift
advection plans.  Higher order in time comes from convex combinations of
powers of S (second order: (u + Su + SSu)/3; third order:
(13u + 21Su + 9SSu + 2SSSu)/45).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .field import EXTENDED, BoundaryExtension, DgField1D, eval_field, lincomb
from .flow import Branch, euler_branches, platen_branches, shift_map
from .transport import AdvectPlan, advect_step, build_advect_plan

Coefficient = Union[float, Callable]

SLDG_WEIGHTS = {
    1: (0.0, 1.0),
    2: (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
    3: (13.0 / 45.0, 21.0 / 45.0, 9.0 / 45.0, 2.0 / 45.0),
}


@dataclass(frozen=True)
class SourceSpec:
    """Source term f(t, x) and the derivatives the order-2 correction needs."""

    f: Callable
    f_t: Optional[Callable] = None
    f_x: Optional[Callable] = None
    f_xx: Optional[Callable] = None


@dataclass(frozen=True)
class CoeffSet1D:
    """Drift b(x), diffusion sigma(x) (either may be a constant) and rate r."""

    b: Coefficient
    sigma: Coefficient
    r: float = 0.0


def _eval_coeff(c: Coefficient, x: np.ndarray) -> np.ndarray:
    if callable(c):
        return np.asarray(c(x), dtype=float)
    return np.full_like(x, float(c))


def shift_plans(mesh, k, sigma: float, dt: float):
    """The two constant-shift plans behind one application of S."""
    s = float(sigma) * math.sqrt(float(dt))
    return build_advect_plan(mesh, k, shift_map(s)), build_advect_plan(mesh, k, shift_map(-s))


def shifted_ext(u: DgField1D, delta: float, ext: Optional[BoundaryExtension]) -> BoundaryExtension:
    """Extension of the shifted field x -> u(x - delta) outside the domain."""
    fn = lambda t, x: eval_field(u, np.asarray(x, dtype=float) - delta, t, ext)
    return BoundaryExtension(left=fn, right=fn)


def averaged_ext(u: DgField1D, s: float, ext: Optional[BoundaryExtension]) -> BoundaryExtension:
    """Extension of S0 u = (u(x-s) + u(x+s))/2 outside the domain."""

    def fn(t, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * (eval_field(u, x - s, t, ext) + eval_field(u, x + s, t, ext))

    return BoundaryExtension(left=fn, right=fn)


def shift_average(u: DgField1D, sigma: float, dt: float, ext: Optional[BoundaryExtension] = None,
                  t: float = 0.0, plans=None) -> DgField1D:
    """One constant-coefficient diffusion step S u = proj S0 u (exact quadrature)."""
    if sigma == 0.0 or dt == 0.0:
        return u
    if plans is None:
        plans = shift_plans(u.mesh, u.k, sigma, dt)
    plus, minus = plans
    a = advect_step(u, None, ext=ext, t=t, plan=plus)
    b = advect_step(u, None, ext=ext, t=t, plan=minus)
    return lincomb([(0.5, a), (0.5, b)])


def sldg_const(u: DgField1D, sigma: float, dt: float, p: int,
               ext: Optional[BoundaryExtension] = None, t: float = 0.0,
               plans=None, single_projection: bool = False) -> DgField1D:
    """Convex combination of S-powers giving order p in time (p = 1, 2, 3).

    ``single_projection`` switches to the variant that projects only once at
    the end; it differs from the composed form by O(dx^{k+1}) and is off by
    default.
    """
    if p not in SLDG_WEIGHTS:
        raise ValueError(f"sldg_const: p must be 1, 2 or 3, got {p}")
    if sigma == 0.0 or dt == 0.0:
        return u
    s = float(sigma) * math.sqrt(float(dt))
    weights = SLDG_WEIGHTS[p]

    if single_projection:
        # sum_j a_j (S0)^j u is a binomial combination of plain shifts of u,
        # projected once
        shift_w: dict[int, float] = {}
        for j, a in enumerate(weights):
            if a == 0.0:
                continue
            for m in range(j + 1):
                c = j - 2 * m
                shift_w[c] = shift_w.get(c, 0.0) + a * math.comb(j, m) * 0.5 ** j
        parts = []
        for c in sorted(shift_w):
            if c == 0:
                parts.append((shift_w[c], u))
            else:
                pl = build_advect_plan(u.mesh, u.k, shift_map(c * s))
                parts.append((shift_w[c], advect_step(u, None, ext=ext, t=t, plan=pl)))
        return lincomb(parts)

    if plans is None:
        plans = shift_plans(u.mesh, u.k, sigma, dt)
    powers = [u]
    exts = [ext]
    v, e = u, ext
    for _ in range(len(weights) - 1):
        v = shift_average(v, sigma, dt, ext=e, t=t, plans=plans)
        e = averaged_ext(powers[-1], s, exts[-1]) if u.mesh.boundary == EXTENDED else None
        powers.append(v)
        exts.append(e)
    return lincomb([(w, f) for w, f in zip(weights, powers) if w != 0.0])


def weak_step(u: DgField1D, coeffs: CoeffSet1D, dt: float, order: int,
              ext: Optional[BoundaryExtension] = None, t: float = 0.0,
              branches: Optional[Sequence[Branch]] = None,
              plans: Optional[Sequence[AdvectPlan]] = None) -> DgField1D:
    """One weak-Taylor diffusion step with variable coefficients.

    order 1 builds the two Euler branches, order 2 the three Platen branches;
    each branch gets its own breakpoints and quadrature, and the results are
    combined with the branch weights.
    """
    if order not in (1, 2):
        raise ValueError("weak_step: order must be 1 or 2")
    if branches is None:
        domain = (u.mesh.x_min, u.mesh.x_max)
        maker = euler_branches if order == 1 else platen_branches
        branches = maker(coeffs.b, coeffs.sigma, dt, domain=domain)
    if plans is None:
        plans = [build_advect_plan(u.mesh, u.k, br.map) for br in branches]
    parts = [
        (br.weight, advect_step(u, None, ext=ext, t=t, plan=plan))
        for br, plan in zip(branches, plans)
    ]
    return lincomb(parts)


def source_correct(u: DgField1D, src: SourceSpec, coeffs: CoeffSet1D,
                   t_n: float, dt: float, order: int) -> DgField1D:
    """Add the Feynman-Kac source correction at the Gauss nodes.

    order 1 adds dt*f(t_n, x); order 2 additionally adds
    (dt^2/2) * (sigma^2/2 f_xx + b f_x - r f + f_t)(t_n, x) and therefore
    requires f_t, f_x and f_xx.
    """
    if order not in (1, 2):
        raise ValueError("source_correct: order must be 1 or 2")
    x = u.mesh.gauss_points(u.k)
    add = dt * np.asarray(src.f(t_n, x), dtype=float)
    if order == 2:
        if src.f_t is None or src.f_x is None or src.f_xx is None:
            raise ValueError("source_correct: order 2 requires f_t, f_x and f_xx")
        sig = _eval_coeff(coeffs.sigma, x)
        b = _eval_coeff(coeffs.b, x)
        af = (
            0.5 * sig * sig * np.asarray(src.f_xx(t_n, x), dtype=float)
            + b * np.asarray(src.f_x(t_n, x), dtype=float)
            - coeffs.r * np.asarray(src.f(t_n, x), dtype=float)
        )
        add = add + 0.5 * dt * dt * (af + np.asarray(src.f_t(t_n, x), dtype=float))
    return DgField1D(u.mesh, u.k, u.coeffs + add)


def discount(u: DgField1D, r: float, dt: float) -> DgField1D:
    """Multiply the field by exp(-r*dt)."""
    if r == 0.0 or dt == 0.0:
        return u
    return DgField1D(u.mesh, u.k, math.exp(-r * dt) * u.coeffs)
