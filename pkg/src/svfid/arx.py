"""Discrete-time ARX baseline fitted by least squares.

Per output row i the model is

    y_i(k) + sum_s a_is y_i(k-s) = sum_j sum_r b_ijr u_j(k - nk - r) + e_i(k)

with s = 1..na and r = 0..nb-1. Multi-output data is handled as independent
MISO rows sharing nothing but the data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .simulate import SampledRecord
from .svf import MAX_CONDITION, InsufficientExcitationError

__all__ = ["ArxModel", "fit_arx", "arx_frequency_response"]


@dataclass(eq=False)
class ArxModel:
    """ARX coefficients: a is (l, na+1) monic rows, b is (l, m, nb)."""

    a: np.ndarray
    b: np.ndarray
    nk: int
    h: float
    residual_norm: float = 0.0
    condition_number: float = 1.0

    def __post_init__(self) -> None:
        self.a = np.atleast_2d(np.asarray(self.a, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        if self.b.ndim == 2:
            self.b = self.b[:, None, :]
        if self.b.ndim != 3 or self.b.shape[0] != self.a.shape[0]:
            raise ValueError("b must have shape (l, m, nb) matching a's rows")
        if not np.allclose(self.a[:, 0], 1.0):
            raise ValueError("a rows must be monic (leading coefficient 1)")
        self.nk = int(self.nk)
        if self.nk < 0:
            raise ValueError("nk must be non-negative")
        self.h = float(self.h)
        if not self.h > 0:
            raise ValueError("sampling interval h must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.a.shape[0], self.b.shape[1])

    @property
    def orders(self) -> tuple[int, int, int]:
        return (self.a.shape[1] - 1, self.b.shape[2], self.nk)

    def poles(self) -> np.ndarray:
        """Union over rows of the roots of z^na A_i(z^-1)."""
        out = []
        for row in self.a:
            if len(row) > 1:
                out.append(np.roots(row))
        return np.concatenate(out) if out else np.zeros(0, dtype=complex)

    def to_json_dict(self) -> dict:
        na, nb, nk = self.orders
        l, m = self.shape
        theta = np.concatenate(
            [self.a[:, 1:].ravel(), self.b.ravel()]
        )
        labels = [f"a{i + 1}_{s}" for i in range(l) for s in range(1, na + 1)]
        labels += [
            f"b{i + 1}{j + 1}_{r}"
            for i in range(l)
            for j in range(m)
            for r in range(nb)
        ]
        return {
            "theta": [float(v) for v in theta],
            "labels": labels,
            "structure": {"na": na, "nb": nb, "nk": nk, "m": m, "l": l},
            "h": self.h,
            "residual_norm": float(self.residual_norm),
            "condition_number": float(self.condition_number),
        }


def fit_arx(record: SampledRecord, na: int, nb: int, nk: int = 1) -> ArxModel:
    """Least-squares ARX fit on the full record, one solve per output row."""
    if na < 1 or nb < 1 or nk < 0:
        raise ValueError("orders must satisfy na >= 1, nb >= 1, nk >= 0")
    m, l, N = record.n_inputs, record.n_outputs, record.n_samples
    k0 = max(na, nb + nk - 1)
    rows = N - k0
    if rows < na + m * nb:
        raise InsufficientExcitationError(
            f"{rows} usable samples cannot determine {na + m * nb} ARX coefficients"
        )
    design = np.empty((rows, na + m * nb))
    a = np.zeros((l, na + 1))
    b = np.zeros((l, m, nb))
    worst_cond = 1.0
    sse = 0.0
    for j in range(m):
        for r in range(nb):
            design[:, na + j * nb + r] = record.u[j, k0 - nk - r : N - nk - r]
    for i in range(l):
        if not np.any(record.y[i]):
            a[i, 0] = 1.0  # silent output carries no dynamics to estimate
            continue
        for s in range(1, na + 1):
            design[:, s - 1] = -record.y[i, k0 - s : N - s]
        target = record.y[i, k0:]
        theta, _, rank, svals = scipy.linalg.lstsq(design, target, lapack_driver="gelsd")
        cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else np.inf
        if rank < design.shape[1] or cond > MAX_CONDITION:
            raise InsufficientExcitationError(
                f"ARX regressor condition {cond:.3g} for output {i + 1} exceeds "
                f"{MAX_CONDITION:g}"
            )
        worst_cond = max(worst_cond, cond)
        sse += float(np.sum((target - design @ theta) ** 2))
        a[i, 0] = 1.0
        a[i, 1:] = theta[:na]
        b[i] = theta[na:].reshape(m, nb)
    return ArxModel(a, b, nk, record.h, residual_norm=float(np.sqrt(sse)),
                    condition_number=worst_cond)


def arx_frequency_response(model: ArxModel, omega) -> np.ndarray:
    """Gain matrix at z = exp(j*omega*h); frequencies at or above Nyquist
    (omega * h >= pi) are rejected."""
    w = np.asarray(omega, dtype=float)
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    if np.any(w * model.h >= np.pi):
        raise ValueError("frequency at or above the Nyquist rate pi/h")
    zinv = np.exp(-1j * w * model.h)
    l, m = model.shape
    na, nb, nk = model.orders
    resp = np.empty((len(w), l, m), dtype=complex)
    for i in range(l):
        A = np.polynomial.polynomial.polyval(zinv, model.a[i])
        if np.any(np.abs(A) < 1e-12):
            raise ValueError("denominator vanishes on the evaluation circle")
        for j in range(m):
            B = np.polynomial.polynomial.polyval(zinv, model.b[i, j]) * zinv**nk
            resp[:, i, j] = B / A
    return resp[0] if scalar else resp
