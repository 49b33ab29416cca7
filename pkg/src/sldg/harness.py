"""Convergence drivers, order estimation and table emission."""

from __future__ import annotations

import dataclasses
import json
import sys
import time
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .problems import ConfigError, ExperimentConfig, build_setup, get_example


class NumericalFailure(RuntimeError):
    """A run produced non-finite values."""


@dataclass
class ConvergenceRow:
    M: int
    N: int
    errL1: float
    errL2: float
    errLinf: float
    orderL2: Optional[float] = None
    seconds: float = 0.0
    cfl: Optional[float] = None
    parallel: bool = False


def run(cfg: ExperimentConfig) -> ConvergenceRow:
    """Execute one configuration and measure errors against the exact solution.

    The wall clock covers the time loop only (projection and error
    measurement excluded).
    """
    setup = build_setup(cfg)
    u = setup.u0
    t0 = time.perf_counter()
    for n in range(setup.n_steps):
        u = setup.step(u, n, n * setup.dt)
        if not np.all(np.isfinite(u.coeffs)):
            # divergence is a legitimate outcome for the direct scheme; keep
            # the field and report inf errors rather than NaN-poisoned ones
            if np.isnan(u.coeffs).any():
                raise NumericalFailure(f"NaN detected at step {n} of {cfg.example}")
            break
    seconds = time.perf_counter() - t0
    l1, l2, linf = setup.error_of(u)
    return ConvergenceRow(M=setup.M, N=setup.N_label, errL1=l1, errL2=l2, errLinf=linf,
                          seconds=seconds, cfl=setup.cfl, parallel=cfg.parallel)


def convergence(cfg: ExperimentConfig, levels: int) -> List[ConvergenceRow]:
    """Run ``levels`` configurations, doubling M and N, and attach L2 orders."""
    if levels < 2:
        raise ConfigError("convergence needs at least 2 levels")
    rows = []
    for lev in range(levels):
        c = dataclasses.replace(
            cfg,
            M=cfg.M * 2 ** lev,
            N=cfg.N * 2 ** lev if cfg.N else 0,
            M2=(cfg.M2 * 2 ** lev) if cfg.M2 else None,
        )
        rows.append(run(c))
    attach_orders(rows)
    return rows


def attach_orders(rows: List[ConvergenceRow]) -> None:
    for prev, cur in zip(rows, rows[1:]):
        if prev.errL2 > 0 and cur.errL2 > 0:
            cur.orderL2 = float(np.log2(prev.errL2 / cur.errL2))


def _fmt(x, spec):
    if x is None:
        return "-"
    return format(x, spec)


_COLS = ("M", "N", "errL1", "errL2", "errLinf", "orderL2", "seconds")
_SPECS = ("d", "d", ".2E", ".2E", ".2E", ".2f", ".3f")


def _row_cells(r: ConvergenceRow):
    return [_fmt(getattr(r, c), s) for c, s in zip(_COLS, _SPECS)]


def emit(rows: List[ConvergenceRow], format: str = "csv", destination=None) -> str:
    """Serialize rows as csv, md (markdown) or json; write to ``destination``
    (a path, a file object, or None for a returned string).

    Errors are printed with three significant digits like the reference
    tables; json keeps full precision.
    """
    format = format.lower()
    if format == "csv":
        lines = [",".join(_COLS)]
        lines += [",".join(_row_cells(r)) for r in rows]
        text = "\n".join(lines) + "\n"
    elif format in ("md", "markdown"):
        head = "| " + " | ".join(_COLS) + " |"
        sep = "|" + "|".join("---" for _ in _COLS) + "|"
        body = ["| " + " | ".join(_row_cells(r)) + " |" for r in rows]
        text = "\n".join([head, sep] + body) + "\n"
    elif format == "json":
        text = json.dumps([dataclasses.asdict(r) for r in rows], indent=2) + "\n"
    else:
        raise ConfigError(f"unknown output format {format!r}")
    if destination is None:
        return text
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w") as fh:
            fh.write(text)
    return text


def rows_from_json(text: str) -> List[ConvergenceRow]:
    return [ConvergenceRow(**d) for d in json.loads(text)]
