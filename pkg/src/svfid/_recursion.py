"""Discrete state recursion shared by the simulator and the filter bank.

The loop is jitted with numba because fine-grid records run to millions of
steps. fastmath stays off so floating-point evaluation order is fixed and
results are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, fastmath=False)
def _recurse(Ad, Bd, Cd, Dd, u, out):  # pragma: no cover - exercised via wrapper
    n = Ad.shape[0]
    m = u.shape[1]
    p = Cd.shape[0]
    x = np.zeros(n)
    xn = np.zeros(n)
    for k in range(u.shape[0]):
        for i in range(p):
            acc = 0.0
            for j in range(n):
                acc += Cd[i, j] * x[j]
            for j in range(m):
                acc += Dd[i, j] * u[k, j]
            out[k, i] = acc
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += Ad[i, j] * x[j]
            for j in range(m):
                acc += Bd[i, j] * u[k, j]
            xn[i] = acc
        for i in range(n):
            x[i] = xn[i]


def propagate(Ad, Bd, Cd, Dd, u: np.ndarray) -> np.ndarray:
    """Run y[k] = Cd x[k] + Dd u[k], x[k+1] = Ad x[k] + Bd u[k] from x[0] = 0.

    ``u`` is time-major with shape (N, n_inputs); the result has shape
    (N, n_outputs). The input at step k is held over [t_k, t_{k+1}), so the
    emitted sample at k depends on inputs strictly before k plus the direct
    feedthrough of u[k].
    """
    u = np.ascontiguousarray(u, dtype=float)
    Ad = np.ascontiguousarray(Ad, dtype=float)
    Bd = np.ascontiguousarray(Bd, dtype=float)
    Cd = np.ascontiguousarray(Cd, dtype=float)
    Dd = np.ascontiguousarray(Dd, dtype=float)
    if Ad.shape[0] == 0:
        return u @ Dd.T
    out = np.empty((u.shape[0], Cd.shape[0]))
    _recurse(Ad, Bd, Cd, Dd, u, out)
    return out
