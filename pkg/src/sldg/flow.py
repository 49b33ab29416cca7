"""One-step characteristic maps x -> y_x(-dt) and their inverses.

Covers analytic flows, generic RK4 back-tracing, the two-branch weak Euler
and three-branch Platen families used by the diffusion steps, monotone
forward solves (Newton with bisection fallback) and breakpoint location.
All map callables are vectorized over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .field import Mesh1D

_DERIV_SAMPLES = 10_000
_SAFETY = 0.95
MERGE_REL_TOL = 1e-13


class MonotonicityError(RuntimeError):
    pass


class InvertibilityError(ValueError):
    pass


@dataclass(frozen=True)
class BackwardMap:
    """One-step backward characteristic map.

    Attributes:
        foot: vectorized x -> y_x(-dt) (or a weak-Taylor branch position).
        dt: the step the map represents (>= 0; informational).
        displacement_bound: bound on |foot(x) - x|, used to bracket inverses.
        monotone: the map is strictly increasing.
        foot_prime: optional derivative of foot (Newton uses it when given).
    """

    foot: Callable[[np.ndarray], np.ndarray]
    dt: float
    displacement_bound: float
    monotone: bool = True
    foot_prime: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass(frozen=True)
class Branch:
    weight: float
    map: BackwardMap


def _as_fn(c):
    """Wrap scalars as constant vectorized functions."""
    if callable(c):
        return c, False
    val = float(c)
    return (lambda x: np.full_like(np.asarray(x, dtype=float), val)), True


def _sampled_max(fn, domain, n=_DERIV_SAMPLES):
    x = np.linspace(domain[0], domain[1], n)
    return float(np.max(np.abs(fn(x))))


def _sampled_deriv_max(fn, domain, n=_DERIV_SAMPLES):
    x = np.linspace(domain[0], domain[1], n)
    h = (domain[1] - domain[0]) * 1e-6
    return float(np.max(np.abs((fn(x + h) - fn(x - h)) / (2 * h))))


def _sampled_displacement(foot, domain, n=2048):
    x = np.linspace(domain[0], domain[1], n)
    return float(np.max(np.abs(foot(x) - x)))


def constant_map(b: float, dt: float) -> BackwardMap:
    """Exact map for constant drift: foot(x) = x - b*dt."""
    delta = float(b) * float(dt)
    return shift_map(delta, dt=abs(float(dt)))


def shift_map(delta: float, dt: float = 0.0) -> BackwardMap:
    """Map displacing every point by -delta (foot(x) = x - delta)."""
    delta = float(delta)
    return BackwardMap(
        foot=lambda x: np.asarray(x, dtype=float) - delta,
        dt=dt,
        displacement_bound=abs(delta),
        monotone=True,
        foot_prime=lambda x: np.ones_like(np.asarray(x, dtype=float)),
    )


def ode_map(
    b: Callable,
    dt: float,
    analytic: Optional[Callable] = None,
    lipschitz: Optional[float] = None,
    domain=(0.0, 1.0),
) -> BackwardMap:
    """Backward flow of dy/dt = b(y) over one step.

    With ``analytic`` given (a callable (x, t) -> y_x(-t)) the map uses it
    directly; otherwise classical RK4 with max(4, ceil(20*L*|dt|)) substeps,
    where L is the supplied (or sampled) Lipschitz bound of b.  Negative dt
    traces the characteristics forward, as needed by splitting stages with
    negative coefficients.
    """
    bfn, _ = _as_fn(b)
    if analytic is not None:
        foot = lambda x: np.asarray(analytic(np.asarray(x, dtype=float), dt), dtype=float)
    else:
        L = lipschitz if lipschitz is not None else _sampled_deriv_max(bfn, domain)
        steps = max(4, int(math.ceil(20.0 * L * abs(dt))))
        h = -float(dt) / steps

        def foot(x, _h=h, _n=steps):
            y = np.asarray(x, dtype=float).copy()
            for _ in range(_n):
                k1 = bfn(y)
                k2 = bfn(y + 0.5 * _h * k1)
                k3 = bfn(y + 0.5 * _h * k2)
                k4 = bfn(y + _h * k3)
                y = y + (_h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                if not np.all(np.isfinite(y)):
                    raise FloatingPointError("ode_map: non-finite drift evaluation")
            return y

    bound = _sampled_displacement(foot, domain) * 1.05 + 1e-15
    return BackwardMap(foot=foot, dt=abs(float(dt)), displacement_bound=bound, monotone=True)


def euler_branches(b, sigma, dt: float, domain=(0.0, 1.0)) -> Sequence[Branch]:
    """Weak Euler pair: feet x + b*dt + q*sigma*sqrt(dt), q = +-1, weights 1/2.

    Requires the invertibility margin ||dt*b' + sqrt(dt)*sigma'|| < 1, checked
    by sampled derivatives with a 0.95 safety factor.
    """
    bfn, b_const = _as_fn(b)
    sfn, s_const = _as_fn(sigma)
    dt = float(dt)
    rt = math.sqrt(dt)
    if dt > 0.0 and not (b_const and s_const):
        x = np.linspace(domain[0], domain[1], _DERIV_SAMPLES)
        h = (domain[1] - domain[0]) * 1e-6
        bp = (bfn(x + h) - bfn(x - h)) / (2 * h)
        sp = (sfn(x + h) - sfn(x - h)) / (2 * h)
        for q in (-1.0, 1.0):
            m = float(np.max(np.abs(dt * bp + q * rt * sp)))
            if m >= _SAFETY:
                raise InvertibilityError(
                    f"euler_branches: ||dt*b' + q*sqrt(dt)*sigma'|| = {m:.3f} >= {_SAFETY}"
                    f" for q={int(q)}; reduce dt"
                )

    def make(q):
        def foot(x, _q=q):
            x = np.asarray(x, dtype=float)
            return x + bfn(x) * dt + _q * sfn(x) * rt

        bound = _sampled_displacement(foot, domain) * 1.05 + 1e-15
        return BackwardMap(foot=foot, dt=dt, displacement_bound=bound, monotone=True)

    return [Branch(0.5, make(-1.0)), Branch(0.5, make(1.0))]


def platen_branches(b, sigma, dt: float, domain=(0.0, 1.0)) -> Sequence[Branch]:
    """Derivative-free second-order (Platen) triple, weights 1/6, 2/3, 1/6.

    Branch q in {-1, 0, 1} moves x by
        (b(gam(sqrt3 q)) + b)/2 * h
        + [ (s(gam1) + s(gam-1) + 2 s) sqrt(3) q + (s(gam1) - s(gam-1)) (3q^2-1) ] sqrt(h)/4
    with supporting points gam(c) = x + b h + c s sqrt(h).  Sufficient
    invertibility condition h ||b'|| + 3 sqrt(h) ||sigma'|| < 1 (sampled).
    """
    bfn, b_const = _as_fn(b)
    sfn, s_const = _as_fn(sigma)
    h = float(dt)
    rt = math.sqrt(h)
    rt3 = math.sqrt(3.0)
    if h > 0.0 and not (b_const and s_const):
        bp = _sampled_deriv_max(bfn, domain)
        sp = _sampled_deriv_max(sfn, domain)
        m = h * bp + 3.0 * rt * sp
        if m >= _SAFETY:
            raise InvertibilityError(
                f"platen_branches: dt*||b'|| + 3*sqrt(dt)*||sigma'|| = {m:.3f} >= {_SAFETY}; reduce dt"
            )

    def make(q, weight):
        def foot(x, _q=q):
            x = np.asarray(x, dtype=float)
            bx = bfn(x)
            sx = sfn(x)
            gp = x + bx * h + sx * rt       # gam(+1)
            gm = x + bx * h - sx * rt       # gam(-1)
            gq = x + bx * h + rt3 * _q * sx * rt  # gam(sqrt(3) q)
            s_p = sfn(gp)
            s_m = sfn(gm)
            drift = 0.5 * (bfn(gq) + bx) * h
            diff = 0.25 * ((s_p + s_m + 2.0 * sx) * rt3 * _q + (s_p - s_m) * (3.0 * _q * _q - 1.0)) * rt
            return x + drift + diff

        bound = _sampled_displacement(foot, domain) * 1.05 + 1e-15
        return Branch(weight, BackwardMap(foot=foot, dt=h, displacement_bound=bound, monotone=True))

    return [make(-1.0, 1.0 / 6.0), make(0.0, 2.0 / 3.0), make(1.0, 1.0 / 6.0)]


def perturbed_map(bmap: BackwardMap, eps: float, eta: Callable, eta_bound: float = 1.0) -> BackwardMap:
    """Wrap a map with a perturbation foot(x) + eps*eta(x) (analysis hook).

    ``eta_bound`` must bound |eta| so the displacement bound stays valid.
    """
    efn, _ = _as_fn(eta)

    def foot(x):
        return bmap.foot(x) + eps * efn(np.asarray(x, dtype=float))

    return BackwardMap(
        foot=foot,
        dt=bmap.dt,
        displacement_bound=bmap.displacement_bound + abs(eps) * eta_bound,
        monotone=bmap.monotone,
    )


def forward_solve_many(bmap: BackwardMap, z: np.ndarray) -> np.ndarray:
    """Solve foot(x) = z for each entry of z (vectorized Newton + bisection)."""
    if not bmap.monotone:
        raise MonotonicityError("forward_solve requires a monotone map")
    z = np.asarray(z, dtype=float)
    tol = 1e-13 * np.maximum(1.0, np.abs(z))
    x = z.copy()
    D = bmap.displacement_bound
    fp = bmap.foot_prime
    scale = max(1.0, D)
    for _ in range(60):
        r = bmap.foot(x) - z
        if np.all(np.abs(r) <= tol):
            return x
        if fp is not None:
            d = fp(x)
        else:
            hh = 1e-7 * scale
            d = (bmap.foot(x + hh) - bmap.foot(x - hh)) / (2 * hh)
        d = np.where(np.abs(d) < 1e-14, 1.0, d)
        step = r / d
        # keep Newton inside the bracket; runaway entries are clipped
        step = np.clip(step, -(D + 1.0), D + 1.0)
        x = x - step
    # bisection fallback for whatever has not converged
    r = bmap.foot(x) - z
    bad = np.abs(r) > tol
    if np.any(bad):
        lo = z[bad] - (D + 1e-12)
        hi = z[bad] + (D + 1e-12)
        flo = bmap.foot(lo) - z[bad]
        fhi = bmap.foot(hi) - z[bad]
        if np.any(flo > 0) or np.any(fhi < 0):
            raise MonotonicityError("forward_solve: no sign change in displacement bracket")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = bmap.foot(mid) - z[bad]
            take_lo = fm < 0
            lo = np.where(take_lo, mid, lo)
            hi = np.where(take_lo, hi, mid)
            if np.all(hi - lo < 1e-15 * np.maximum(1.0, np.abs(mid))):
                break
        x[bad] = 0.5 * (lo + hi)
        r = bmap.foot(x) - z
        if np.any(np.abs(r) > 10 * tol):
            raise MonotonicityError("forward_solve failed to reach tolerance")
    return x


def forward_solve(bmap: BackwardMap, z: float) -> float:
    return float(forward_solve_many(bmap, np.array([float(z)]))[0])


def breakpoints(bmap: BackwardMap, mesh: Mesh1D, i: int) -> np.ndarray:
    """Sorted partition points of cell i across which u(foot(.)) may jump.

    Interior points are the forward images of the mesh interfaces lying
    strictly between foot(x_{i-1/2}) and foot(x_{i+1/2}); points within
    1e-13*dx of each other (or of the cell endpoints) are merged.
    """
    a = mesh.x_min + i * mesh.dx
    bnd = a + mesh.dx
    pts, _ = _cell_partition(bmap, mesh, a, bnd)
    return pts


def _crossed_lines(mesh: Mesh1D, flo: float, fhi: float):
    """Indices l with flo < x_min + l*dx < fhi (unbounded for periodic)."""
    dx = mesh.dx
    l0 = int(math.floor((flo - mesh.x_min) / dx)) + 1
    l1 = int(math.ceil((fhi - mesh.x_min) / dx)) - 1
    if mesh.boundary == EXTENDED:
        l0 = max(l0, 0)
        l1 = min(l1, mesh.M)
    return range(l0, l1 + 1)


def _cell_partition(bmap: BackwardMap, mesh: Mesh1D, a: float, b: float):
    F = bmap.foot(np.array([a, b]))
    if not F[0] < F[1]:
        raise MonotonicityError("cell endpoints map out of order")
    lines = [mesh.x_min + l * mesh.dx for l in _crossed_lines(mesh, F[0], F[1])]
    tol = MERGE_REL_TOL * mesh.dx
    if lines:
        xs = forward_solve_many(bmap, np.array(lines))
        xs = xs[(xs > a + tol) & (xs < b - tol)]
        xs.sort()
        keep = np.concatenate(([True], np.diff(xs) > tol)) if xs.size else np.array([], bool)
        pts = np.concatenate(([a], xs[keep], [b]))
    else:
        pts = np.array([a, b])
    mids = 0.5 * (pts[:-1] + pts[1:])
    return pts, mids
