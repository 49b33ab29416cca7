"""Hot inner kernels with a numba fast path and a pure-numpy fallback.

Every semi-Lagrangian step reduces to a block-sparse apply: piece p reads the
nodal vector of source cell ``src[p]``, multiplies by a (k+1)x(k+1) matrix
``W[p]`` and accumulates into target cell ``tgt[p]``.  Three layouts cover the
1D step, a stack of lines sharing one plan, and a stack of lines with
per-line plans.

Backend selection: environment variable ``SLDG_BACKEND`` set to ``numba``,
``numpy`` or ``auto`` (default; numba when importable).  ``SLDG_THREADS``
caps the numba thread pool.
"""

from __future__ import annotations

import os

import numpy as np

_CHOICE = os.environ.get("SLDG_BACKEND", "auto").lower()
if _CHOICE not in ("auto", "numba", "numpy"):
    raise ValueError(f"SLDG_BACKEND must be auto|numba|numpy, got {_CHOICE!r}")

_HAVE_NUMBA = False
if _CHOICE in ("auto", "numba"):
    try:
        import numba
        from numba import njit, prange

        _HAVE_NUMBA = True
        threads = os.environ.get("SLDG_THREADS")
        if threads:
            numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    except ImportError:
        if _CHOICE == "numba":
            raise

USE_NUMBA = _HAVE_NUMBA and _CHOICE in ("auto", "numba")


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------- numpy path

def _apply_plan_np(C, tgt, src, W, out):
    if tgt.size == 0:
        return
    vals = np.einsum("pa,pab->pb", C[src], W)
    np.add.at(out, tgt, vals)


def _apply_plan_shared_np(C, tgt, src, W, out):
    if tgt.size == 0:
        return
    vals = np.einsum("lpa,pab->lpb", C[:, src], W)
    out_t = out.transpose(1, 0, 2)  # view; add.at writes through
    np.add.at(out_t, tgt, vals.transpose(1, 0, 2))


def _apply_plan_lines_np(C, line, tgt, src, W, out):
    if tgt.size == 0:
        return
    L, M, K = C.shape
    vals = np.einsum("pa,pab->pb", C[line, src], W)
    flat = out.reshape(L * M, K)
    np.add.at(flat, line * M + tgt, vals)


# ---------------------------------------------------------------- numba path

if USE_NUMBA:

    @njit(cache=True)
    def _apply_plan_nb(C, tgt, src, W, out):
        P = tgt.shape[0]
        K = C.shape[1]
        for p in range(P):
            s = src[p]
            g = tgt[p]
            for b in range(K):
                acc = 0.0
                for a in range(K):
                    acc += C[s, a] * W[p, a, b]
                out[g, b] += acc

    @njit(cache=True)
    def _apply_plan_shared_nb(C, tgt, src, W, out):
        L = C.shape[0]
        P = tgt.shape[0]
        K = C.shape[2]
        for l in range(L):
            for p in range(P):
                s = src[p]
                g = tgt[p]
                for b in range(K):
                    acc = 0.0
                    for a in range(K):
                        acc += C[l, s, a] * W[p, a, b]
                    out[l, g, b] += acc

    @njit(cache=True, parallel=True)
    def _apply_plan_shared_nb_par(C, tgt, src, W, out):
        L = C.shape[0]
        P = tgt.shape[0]
        K = C.shape[2]
        for l in prange(L):
            for p in range(P):
                s = src[p]
                g = tgt[p]
                for b in range(K):
                    acc = 0.0
                    for a in range(K):
                        acc += C[l, s, a] * W[p, a, b]
                    out[l, g, b] += acc

    @njit(cache=True)
    def _apply_plan_lines_nb(C, ptr, tgt, src, W, out):
        L = C.shape[0]
        K = C.shape[2]
        for l in range(L):
            for p in range(ptr[l], ptr[l + 1]):
                s = src[p]
                g = tgt[p]
                for b in range(K):
                    acc = 0.0
                    for a in range(K):
                        acc += C[l, s, a] * W[p, a, b]
                    out[l, g, b] += acc

    @njit(cache=True, parallel=True)
    def _apply_plan_lines_nb_par(C, ptr, tgt, src, W, out):
        L = C.shape[0]
        K = C.shape[2]
        for l in prange(L):
            for p in range(ptr[l], ptr[l + 1]):
                s = src[p]
                g = tgt[p]
                for b in range(K):
                    acc = 0.0
                    for a in range(K):
                        acc += C[l, s, a] * W[p, a, b]
                    out[l, g, b] += acc


# ---------------------------------------------------------------- dispatch

def apply_plan(C, tgt, src, W, out):
    """out[tgt[p]] += C[src[p]] @ W[p] for every piece p.  C is (M, K)."""
    if USE_NUMBA:
        _apply_plan_nb(C, tgt, src, W, out)
    else:
        _apply_plan_np(C, tgt, src, W, out)


def apply_plan_shared(C, tgt, src, W, out, parallel=False):
    """Same plan applied to every line of C with shape (L, M, K)."""
    if USE_NUMBA:
        if parallel:
            _apply_plan_shared_nb_par(C, tgt, src, W, out)
        else:
            _apply_plan_shared_nb(C, tgt, src, W, out)
    else:
        _apply_plan_shared_np(C, tgt, src, W, out)


def apply_plan_lines(C, line_ptr, line_idx, tgt, src, W, out, parallel=False):
    """Per-line plans: pieces sorted by line, boundaries in ``line_ptr``."""
    if USE_NUMBA:
        if parallel:
            _apply_plan_lines_nb_par(C, line_ptr, tgt, src, W, out)
        else:
            _apply_plan_lines_nb(C, line_ptr, tgt, src, W, out)
    else:
        _apply_plan_lines_np(C, line_idx, tgt, src, W, out)
