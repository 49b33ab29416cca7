"""Registry of the benchmark experiments and their exact solutions.

Each entry builds a ``RunSetup``: projected initial data, a one-step
callable with every reusable plan compiled up front, the exact solution for
error measurement, and the time-step bookkeeping.  Manufactured sources and
their derivatives are generated symbolically (sympy) and lambdified to numpy
once per build.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from .diffusion import (CoeffSet1D, SourceSpec, discount, shift_plans, shifted_ext,
                        sldg_const, source_correct, weak_step)
from .field import (EXTENDED, PERIODIC, BoundaryExtension, DgField1D, Mesh1D, error_vs,
                    project)
from .flow import constant_map, euler_branches, ode_map, platen_branches
from .split2d import (ConstShiftLines, DgField2D, Mesh2D, WeakDirectionStepper, apply_dir,
                      advect_stage_stepper, decompose_diffusion, error_vs2, lincomb2,
                      project2, schedule)
from .transport import advect_step, build_advect_plan, direct_step


class ConfigError(ValueError):
    """Invalid experiment configuration (unknown example, bad sizes, ...)."""


@dataclass
class ExperimentConfig:
    example: str
    k: int
    M: int
    N: int = 0
    M2: Optional[int] = None
    scheme: Optional[str] = None
    cfl: Optional[float] = None
    dt: Optional[float] = None
    T: Optional[float] = None
    parallel: bool = False

    def resolved_scheme(self, ex) -> str:
        s = self.scheme or ex.default_scheme
        if s not in ex.schemes:
            raise ConfigError(
                f"scheme {s!r} is not valid for example {ex.id!r} (choose from {sorted(ex.schemes)})"
            )
        return s


@dataclass
class RunSetup:
    u0: object
    step: Callable            # (u, n, t_n) -> u
    n_steps: int
    dt: float
    T: float
    error_of: Callable        # u -> (L1, L2, Linf) at final time
    cfl: Optional[float] = None
    M: int = 0
    N_label: int = 0


@dataclass(frozen=True)
class Example:
    id: str
    title: str
    dim: int
    schemes: tuple
    default_scheme: str
    default_k: int
    T: float
    build: Callable


def _steps_from_config(cfg: ExperimentConfig, T: float, dx: float, bmax: float):
    """Resolve (n_steps, dt, cfl).  Precedence: dt > cfl > N."""
    if cfg.dt:
        dt = float(cfg.dt)
        n = max(1, round(T / dt))
        dt = T / n
    elif cfg.cfl:
        dt = cfg.cfl * dx / bmax
        n = max(1, round(T / dt))
        dt = T / n
    else:
        if cfg.N <= 0:
            raise ConfigError("N must be positive (or give --cfl / --dt)")
        n = cfg.N
        dt = T / n
    return n, dt, (bmax * dt / dx if bmax else None)


def _positive(cfg: ExperimentConfig, need_k=True):
    if cfg.M < 1:
        raise ConfigError("M must be >= 1")
    if need_k and cfg.k < 0:
        raise ConfigError("k must be >= 0")
    if cfg.M2 is not None and cfg.M2 < 1:
        raise ConfigError("M2 must be >= 1")


# ----------------------------------------------------------------- ex2

_EX2_C0, _EX2_C1 = 1.0, 0.8


def _ex2_theta(x):
    m = np.round(x)
    r = _EX2_C1 / _EX2_C0
    a = math.sqrt(1.0 - r * r)
    return np.arctan((np.tan(np.pi * (x - m)) + r) / a) + np.pi * m


def _ex2_flow(x, t):
    """Backward characteristic y_x(-t) of b(x) = C0 + C1 sin(2 pi x)."""
    x = np.asarray(x, dtype=float)
    r = _EX2_C1 / _EX2_C0
    a = math.sqrt(1.0 - r * r)
    phi = _ex2_theta(x) - _EX2_C0 * math.pi * a * t
    m = np.round(phi / np.pi)
    return m + np.arctan(a * np.tan(phi - np.pi * m) - r) / np.pi


def ex2_drift(x):
    return _EX2_C0 + _EX2_C1 * np.sin(2 * np.pi * x)


def _build_ex2(cfg: ExperimentConfig, ex: Example):
    _positive(cfg)
    T = cfg.T if cfg.T is not None else ex.T
    mesh = Mesh1D(0.0, 1.0, cfg.M)
    bmax = _EX2_C0 + _EX2_C1
    n, dt, cfl = _steps_from_config(cfg, T, mesh.dx, bmax)
    bmap = ode_map(ex2_drift, dt, analytic=_ex2_flow, domain=(0.0, 1.0))
    plan = build_advect_plan(mesh, cfg.k, bmap)
    u0 = project(lambda x: np.sin(2 * np.pi * x), mesh, cfg.k)
    exact = lambda t, x: np.sin(2 * np.pi * _ex2_flow(x, t))

    def step(u, nn, tn):
        return advect_step(u, bmap, plan=plan)

    return RunSetup(u0, step, n, dt, T, lambda u: error_vs(u, exact, T),
                    cfl=cfl, M=cfg.M, N_label=n)


# ----------------------------------------------------------------- appA

def _build_appA(cfg: ExperimentConfig, ex: Example):
    _positive(cfg)
    T = cfg.T if cfg.T is not None else ex.T
    mesh = Mesh1D(0.0, 1.0, cfg.M)
    n, dt, cfl = _steps_from_config(cfg, T, mesh.dx, 1.0)
    bmap = constant_map(1.0, dt)
    scheme = cfg.resolved_scheme(ex)
    u0 = project(lambda x: np.sin(2 * np.pi * x), mesh, cfg.k)
    exact = lambda t, x: np.sin(2 * np.pi * (x - t))
    if scheme == "direct":
        step = lambda u, nn, tn: direct_step(u, bmap)
    else:
        plan = build_advect_plan(mesh, cfg.k, bmap)
        step = lambda u, nn, tn: advect_step(u, bmap, plan=plan)
    return RunSetup(u0, step, n, dt, T, lambda u: error_vs(u, exact, T),
                    cfl=cfl, M=cfg.M, N_label=n)


# ----------------------------------------------------------------- ex4 / ex5

def _bump(x, y):
    return 1.0 - np.exp(-20.0 * ((x - 1.0) ** 2 + y ** 2 - 0.25 ** 2))


def _build_ex4(cfg: ExperimentConfig, ex: Example):
    _positive(cfg)
    T = cfg.T if cfg.T is not None else ex.T
    M2 = cfg.M2 or cfg.M
    mesh2 = Mesh2D(Mesh1D(-2.0, 2.0, cfg.M), Mesh1D(-2.0, 2.0, M2))
    if cfg.N <= 0:
        raise ConfigError("N must be positive")
    n = cfg.N
    dt = T / n
    sched = schedule(cfg.resolved_scheme(ex))
    # axis speeds are constant along the swept direction: exact per-line shifts
    steppers = []
    for ax, th in sched.stages:
        mesh1 = mesh2.mx if ax == 1 else mesh2.my
        perp_mesh = mesh2.my if ax == 1 else mesh2.mx
        perp = perp_mesh.gauss_points(cfg.k).reshape(-1)
        speeds = -2.0 * np.pi * perp if ax == 1 else 2.0 * np.pi * perp
        steppers.append((ax, ConstShiftLines(mesh1, cfg.k, speeds * th * dt)))

    u0 = project2(_bump, mesh2, cfg.k)

    def exact(t, x, y):
        th = 2.0 * np.pi * t
        return _bump(x * np.cos(th) + y * np.sin(th), -x * np.sin(th) + y * np.cos(th))

    def step(u, nn, tn):
        for ax, st in steppers:
            u = apply_dir(u, ax, st)
        return u

    cflv = 2.0 * np.pi * 2.0 * dt / mesh2.mx.dx
    return RunSetup(u0, step, n, dt, T, lambda u: error_vs2(u, exact, T),
                    cfl=cflv, M=cfg.M, N_label=n)


def _build_ex5(cfg: ExperimentConfig, ex: Example):
    _positive(cfg)
    T = cfg.T if cfg.T is not None else ex.T
    M2 = cfg.M2 or cfg.M
    if cfg.N <= 0 or cfg.N % 2:
        raise ConfigError("ex5 requires a positive even N (the drift sign flips at T/2)")
    mesh2 = Mesh2D(Mesh1D(-2.0, 2.0, cfg.M), Mesh1D(-2.0, 2.0, M2))
    n = cfg.N
    dt = T / n
    sched = schedule(cfg.resolved_scheme(ex))

    def make_steppers(g):
        b1 = lambda xa, xp: -g * np.cos(0.5 * xa * xa) * np.sin(xp)
        b2 = lambda xa, xp: g * np.cos(0.5 * xa * xa) * np.sin(xp)
        out = []
        cache = {}
        for ax, th in sched.stages:
            key = (ax, round(th, 15))
            if key not in cache:
                cache[key] = advect_stage_stepper(
                    mesh2, cfg.k, ax, b1 if ax == 1 else b2, th * dt,
                    lipschitz=8.0, const_along_axis=False)
            out.append((ax, cache[key]))
        return out

    plus = make_steppers(1.0)
    minus = make_steppers(-1.0)
    u0 = project2(_bump, mesh2, cfg.k)
    exact = lambda t, x, y: _bump(x, y)

    def step(u, nn, tn):
        for ax, st in (plus if nn < n // 2 else minus):
            u = apply_dir(u, ax, st)
        return u

    return RunSetup(u0, step, n, dt, T, lambda u: error_vs2(u, exact, T),
                    M=cfg.M, N_label=n)


# ----------------------------------------------------------------- ex6

_EX6_SIGMA, _EX6_B = 0.1, 0.3


def _ex6_exact(t, x):
    out = 0.0
    for kk, ck in ((1, 1.0), (2, 0.5)):
        out = out + ck * math.exp(-2.0 * _EX6_SIGMA ** 2 * kk ** 2 * math.pi ** 2 * t) \
            * np.cos(2 * kk * np.pi * (x - _EX6_B * t))
    return out


def _build_ex6(cfg: ExperimentConfig, ex: Example):
    _positive(cfg)
    T = cfg.T if cfg.T is not None else ex.T
    mesh = Mesh1D(0.0, 1.0, cfg.M)
    n, dt, _ = _steps_from_config(cfg, T, mesh.dx, 0.0)
    p = {"sldg1": 1, "sldg2": 2, "sldg3": 3}[cfg.resolved_scheme(ex)]
    bmap = constant_map(_EX6_B, dt)
    aplan = build_advect_plan(mesh, cfg.k, bmap)
    splans = shift_plans(mesh, cfg.k, _EX6_SIGMA, dt)
    u0 = project(lambda x: _ex6_exact(0.0, x), mesh, cfg.k)

    def step(u, nn, tn):
        u = advect_step(u, bmap, plan=aplan)
        return sldg_const(u, _EX6_SIGMA, dt, p, plans=splans)

    return RunSetup(u0, step, n, dt, T, lambda u: error_vs(u, _ex6_exact, T),
                    M=cfg.M, N_label=n)


# ----------------------------------------------------------------- ex7bs

_BS_K, _BS_R, _BS_SIG = 100.0, 0.10, 0.2

_SQRT2 = math.sqrt(2.0)
_erf = np.vectorize(math.erf)


def _norm_cdf(z):
    return 0.5 * (1.0 + _erf(np.asarray(z, dtype=float) / _SQRT2))


def bs_put_log(t, x):
    """European put value in log-moneyness coordinates, time-to-maturity t."""
    x = np.asarray(x, dtype=float)
    if t <= 0.0:
        return _BS_K * np.maximum(1.0 - np.exp(x), 0.0)
    st = _BS_SIG * math.sqrt(t)
    d1 = (x + (_BS_R + 0.5 * _BS_SIG ** 2) * t) / st
    d2 = d1 - st
    return _BS_K * math.exp(-_BS_R * t) * _norm_cdf(-d2) - _BS_K * np.exp(x) * _norm_cdf(-d1)


def _build_ex7bs(cfg: ExperimentConfig, ex: Example):
    _positive(cfg)
    T = cfg.T if cfg.T is not None else ex.T
    mesh = Mesh1D(-2.0, 2.0, cfg.M, boundary=EXTENDED)
    n, dt, _ = _steps_from_config(cfg, T, mesh.dx, 0.0)
    p = {"sldg1": 1, "sldg2": 2, "sldg3": 3}[cfg.resolved_scheme(ex)]
    b = -(_BS_R - 0.5 * _BS_SIG ** 2)   # drift coefficient of u_x in the PDE
    bmap = constant_map(b, dt)
    aplan = build_advect_plan(mesh, cfg.k, bmap)
    splans = shift_plans(mesh, cfg.k, _BS_SIG, dt)
    ext = BoundaryExtension(
        left=lambda t, x: _BS_K * math.exp(-_BS_R * t) - _BS_K * np.exp(np.asarray(x, float)),
        right=lambda t, x: np.zeros_like(np.asarray(x, dtype=float)),
    )
    u0 = project(lambda x: _BS_K * np.maximum(1.0 - np.exp(x), 0.0), mesh, cfg.k)

    def step(u, nn, tn):
        v = advect_step(u, bmap, ext=ext, t=tn, plan=aplan)
        vext = shifted_ext(u, b * dt, ext)
        w = sldg_const(v, _BS_SIG, dt, p, ext=vext, t=tn, plans=splans)
        return discount(w, _BS_R, dt)

    return RunSetup(u0, step, n, dt, T, lambda u: error_vs(u, bs_put_log, T),
                    M=cfg.M, N_label=n)


# ----------------------------------------------------------------- exsev

def _exsev_symbols():
    import sympy as sp

    t, x = sp.symbols("t x")
    vbar = sp.sin(2 * sp.pi * t) * sp.cos(2 * sp.pi * (x - t))
    sig = sp.sin(2 * sp.pi * x)
    f = sp.diff(vbar, t) - sig ** 2 / 2 * sp.diff(vbar, x, 2)
    lam = lambda e: sp.lambdify((t, x), e, "numpy")
    return SourceSpec(
        f=lam(f), f_t=lam(sp.diff(f, t)), f_x=lam(sp.diff(f, x)), f_xx=lam(sp.diff(f, x, 2))
    )


def exsev_sigma(x):
    return np.sin(2 * np.pi * x)


def _exsev_exact(t, x):
    return math.sin(2 * math.pi * t) * np.cos(2 * np.pi * (x - t))


def _build_exsev(cfg: ExperimentConfig, ex: Example):
    _positive(cfg)
    T = cfg.T if cfg.T is not None else ex.T
    mesh = Mesh1D(0.0, 1.0, cfg.M)
    n, dt, _ = _steps_from_config(cfg, T, mesh.dx, 0.0)
    order = {"weak1": 1, "weak2": 2}[cfg.resolved_scheme(ex)]
    coeffs = CoeffSet1D(b=0.0, sigma=exsev_sigma, r=0.0)
    maker = euler_branches if order == 1 else platen_branches
    branches = maker(coeffs.b, coeffs.sigma, dt, domain=(0.0, 1.0))
    plans = [build_advect_plan(mesh, cfg.k, br.map) for br in branches]
    src = _exsev_symbols()
    u0 = project(lambda x: np.zeros_like(x), mesh, cfg.k)

    def step(u, nn, tn):
        u = weak_step(u, coeffs, dt, order, branches=branches, plans=plans)
        return source_correct(u, src, coeffs, tn, dt, order)

    return RunSetup(u0, step, n, dt, T, lambda u: error_vs(u, _exsev_exact, T),
                    M=cfg.M, N_label=n)


# ----------------------------------------------------------------- ex9

_EX9_DIRS = (np.array([1.0, 0.0]), np.array([2.0, -1.0]))


def _ex9_exact(t, x, y):
    out = 0.0
    for i, xi in ((1, x + 2.0 * y), (2, -y)):
        for q in (1, 2):
            cq = 1.0 / (i + q)
            out = out + cq * math.exp(-((2 * math.pi * q) ** 2) * t / 2.0) \
                * np.cos(2 * np.pi * q * xi)
    return out


class _VectorShiftAverage:
    """S u = (u(. - v sqrt(dt)) + u(. + v sqrt(dt)))/2 via exact axis shifts."""

    def __init__(self, mesh2: Mesh2D, k: int, v: np.ndarray, dt: float):
        s = math.sqrt(dt)
        self.moves = []
        for sign in (1.0, -1.0):
            axes = []
            for ax, comp, mesh1 in ((1, v[0], mesh2.mx), (2, v[1], mesh2.my)):
                if comp == 0.0:
                    continue
                L = (mesh2.my.M if ax == 1 else mesh2.mx.M) * (k + 1)
                axes.append((ax, ConstShiftLines(mesh1, k, np.full(L, sign * comp * s))))
            self.moves.append(axes)

    def __call__(self, u: DgField2D) -> DgField2D:
        halves = []
        for axes in self.moves:
            v = u
            for ax, st in axes:
                v = apply_dir(v, ax, st)
            halves.append((0.5, v))
        return lincomb2(halves)


_SLDG2D_WEIGHTS = {1: (0.0, 1.0), 2: (1 / 3, 1 / 3, 1 / 3), 3: (13 / 45, 21 / 45, 9 / 45, 2 / 45)}


def _build_ex9(cfg: ExperimentConfig, ex: Example):
    _positive(cfg)
    T = cfg.T if cfg.T is not None else ex.T
    M2 = cfg.M2 or cfg.M
    mesh2 = Mesh2D(Mesh1D(0.0, 1.0, cfg.M), Mesh1D(0.0, 1.0, M2))
    if cfg.N <= 0:
        raise ConfigError("N must be positive")
    n = cfg.N
    dt = T / n
    p = {"sldg1": 1, "sldg2": 2, "sldg3": 3}[cfg.resolved_scheme(ex)]
    weights = _SLDG2D_WEIGHTS[p]
    ops = [_VectorShiftAverage(mesh2, cfg.k, v, dt) for v in _EX9_DIRS]
    u0 = project2(lambda x, y: _ex9_exact(0.0, x, y), mesh2, cfg.k)

    def combo(u, S):
        powers = [u]
        for _ in range(len(weights) - 1):
            powers.append(S(powers[-1]))
        return lincomb2([(w, f) for w, f in zip(weights, powers) if w != 0.0])

    def step(u, nn, tn):
        for S in ops:
            u = combo(u, S)
        return u

    return RunSetup(u0, step, n, dt, T, lambda u: error_vs2(u, _ex9_exact, T),
                    M=cfg.M, N_label=n)


# ----------------------------------------------------------------- ex10

def _ex10_symbols():
    import sympy as sp

    t, x, y = sp.symbols("t x y")
    u = sp.cos(t) * sp.sin(2 * x) * sp.sin(x + y)
    sig = sp.Matrix([[sp.cos(x), sp.cos(2 * x)], [0, sp.sin(y)]])
    A = sig * sig.T

    def gen(expr):
        return (A[0, 0] * sp.diff(expr, x, 2) + 2 * A[0, 1] * sp.diff(sp.diff(expr, x), y)
                + A[1, 1] * sp.diff(expr, y, 2)) / 2

    f = sp.diff(u, t) - gen(u)
    corr2 = sp.diff(f, t) + gen(f)
    lam = lambda e: sp.lambdify((t, x, y), e, "numpy")
    return lam(u), lam(f), lam(corr2)


def _build_ex10(cfg: ExperimentConfig, ex: Example):
    _positive(cfg)
    T = cfg.T if cfg.T is not None else ex.T
    M2 = cfg.M2 or cfg.M
    mesh2 = Mesh2D(Mesh1D(-math.pi, math.pi, cfg.M), Mesh1D(-math.pi, math.pi, M2))
    if cfg.N <= 0:
        raise ConfigError("N must be positive")
    n = cfg.N
    dt = T / n
    scheme = cfg.resolved_scheme(ex)
    exact_u, f_fn, corr2_fn = _ex10_symbols()
    sig = lambda x, y: np.array([[np.cos(x), np.cos(2 * x)], [0.0, np.sin(y)]])
    dirs = decompose_diffusion(sig, [["x", "x"], ["zero", "y"]])

    xg = mesh2.mx.gauss_points(cfg.k)[:, None, :, None]
    yg = mesh2.my.gauss_points(cfg.k)[None, :, None, :]

    if scheme == "euler_trotter":
        order = 1
        d1 = WeakDirectionStepper(mesh2, cfg.k, dirs[0], dt, order)
        d2 = WeakDirectionStepper(mesh2, cfg.k, dirs[1], dt, order)

        def diffuse(u):
            return d2(d1(u))
    else:
        order = 2
        d1h = WeakDirectionStepper(mesh2, cfg.k, dirs[0], 0.5 * dt, order)
        d2f = WeakDirectionStepper(mesh2, cfg.k, dirs[1], dt, order)

        def diffuse(u):
            return d1h(d2f(d1h(u)))

    def step(u, nn, tn):
        u = diffuse(u)
        add = dt * np.asarray(f_fn(tn, xg, yg), dtype=float)
        if order == 2:
            add = add + 0.5 * dt * dt * np.asarray(corr2_fn(tn, xg, yg), dtype=float)
        return DgField2D(u.mesh, u.k, u.coeffs + np.broadcast_to(add, u.coeffs.shape))

    u0 = project2(lambda x, y: exact_u(0.0, x, y), mesh2, cfg.k)
    exact = lambda t, x, y: exact_u(t, x, y)
    return RunSetup(u0, step, n, dt, T, lambda u: error_vs2(u, exact, T),
                    M=cfg.M, N_label=n)


# ----------------------------------------------------------------- registry

EXAMPLES = {}


def _register(*args, **kw):
    ex = Example(*args, **kw)
    EXAMPLES[ex.id] = ex
    return ex


_register("ex2", "1D advection with non-constant drift (atan characteristics)",
          1, ("sldg",), "sldg", 2, 1.3, _build_ex2)
_register("appA", "direct-vs-weak scheme instability contrast (constant advection)",
          1, ("direct", "sldg"), "direct", 1, 1.0, _build_appA)
_register("ex4", "2D rigid rotation of a bump, splitting orders 2/4/6",
          2, ("trotter", "strang", "ruth3", "forest4", "yoshida6"), "strang", 2, 0.9, _build_ex4)
_register("ex5", "2D swirl deformation with time-reversed drift",
          2, ("trotter", "strang", "ruth3", "forest4", "yoshida6"), "yoshida6", 6, 1.0, _build_ex5)
_register("ex6", "1D convection-diffusion, constant coefficients",
          1, ("sldg1", "sldg2", "sldg3"), "sldg3", 3, 0.2, _build_ex6)
_register("ex7bs", "1D Black-Scholes European put in log coordinates",
          1, ("sldg1", "sldg2", "sldg3"), "sldg3", 4, 0.25, _build_ex7bs)
_register("exsev", "1D diffusion with sigma(x) = sin(2 pi x), manufactured source",
          1, ("weak1", "weak2"), "weak2", 2, 0.2, _build_exsev)
_register("ex9", "2D constant-coefficient diffusion via direction decomposition",
          2, ("sldg1", "sldg2", "sldg3"), "sldg3", 3, 0.2, _build_ex9)
_register("ex10", "2D diffusion with variable coefficients, manufactured source",
          2, ("euler_trotter", "platen_strang"), "platen_strang", 2, 1.0, _build_ex10)


def get_example(name: str) -> Example:
    try:
        return EXAMPLES[name]
    except KeyError:
        raise ConfigError(f"unknown example {name!r}; see `sldg list`") from None


def build_setup(cfg: ExperimentConfig) -> RunSetup:
    ex = get_example(cfg.example)
    cfg.resolved_scheme(ex)
    return ex.build(cfg, ex)
