"""State-variable-filter least squares for continuous-time models.

A stable low-pass filter F with relative degree at least n is applied to the
sampled input and output; the bank of operators p^k F (k = 0..n) shares one
filter state, so the k-th filtered derivative is read out through C A^k. With
d(p) the monic denominator and N(p) the numerator(s), the model equation
filtered through F becomes linear in the coefficients and a single least
squares solve recovers them. Between samples the signals are held constant,
which is the only approximation; its effect vanishes as h -> 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import lti
from ._recursion import propagate
from .simulate import SampledRecord

__all__ = [
    "SvfFilter",
    "FilterBank",
    "RegressionData",
    "Estimate",
    "InsufficientExcitationError",
    "build_filter_bank",
    "filtered_derivatives",
    "assemble_regression_siso",
    "assemble_regression_mimo",
    "solve_ls",
    "identify_svf",
    "pack_theta",
    "model_from_theta",
]

#: Regressor matrices with 2-norm condition beyond this are rejected; the
#: data does not excite the model structure well enough to invert.
MAX_CONDITION = 1e12


class InsufficientExcitationError(ValueError):
    """The regression matrix is numerically rank deficient."""


@dataclass(eq=False)
class SvfFilter:
    """Filter transfer F plus the highest derivative order it must carry.

    F must be Hurwitz stable with relative degree >= max_derivative so that
    every operator p^k F in the bank is proper.
    """

    tf: lti.RationalTransfer
    max_derivative: int

    def __post_init__(self) -> None:
        self.max_derivative = int(self.max_derivative)
        if self.max_derivative < 1:
            raise ValueError("max_derivative must be at least 1")
        if self.tf.relative_degree < self.max_derivative:
            raise ValueError(
                f"filter relative degree {self.tf.relative_degree} cannot supply "
                f"{self.max_derivative} derivatives"
            )
        poles = self.tf.poles()
        if poles.size == 0 or np.max(poles.real) >= 0:
            raise ValueError(f"filter must be Hurwitz stable; poles {poles}")


@dataclass(eq=False)
class FilterBank:
    """Shared-state realization of {p^k F : k = 0..max_derivative}.

    output_map row k is C A^k; feedthrough row k is zero except possibly at
    k = relative_degree where the first Markov parameter C A^{k-1} B appears.
    """

    ss: lti.StateSpace
    output_map: np.ndarray   # (max_derivative + 1, n_F)
    feedthrough: np.ndarray  # (max_derivative + 1, 1)
    max_derivative: int


def build_filter_bank(filt: SvfFilter) -> FilterBank:
    """Realize the derivative bank and self-check it in the frequency domain.

    Differentiation in state coordinates: for k below the relative degree r,
    the output of p^k F is C A^k x because the first k - 1 Markov parameters
    vanish; at k = r the feedthrough C A^{r-1} B appears.
    """
    ss = lti.realize(filt.tf)
    r = filt.tf.relative_degree
    n_out = filt.max_derivative + 1
    output_map = np.zeros((n_out, ss.n_states))
    feedthrough = np.zeros((n_out, 1))
    Ak = np.eye(ss.n_states)
    for k in range(n_out):
        output_map[k] = ss.C @ Ak
        if k == r:
            if r == 0:
                feedthrough[k, 0] = ss.D[0, 0]
            else:
                feedthrough[k, 0] = (ss.C @ np.linalg.matrix_power(ss.A, r - 1) @ ss.B)[0, 0]
        Ak = Ak @ ss.A
    bank = FilterBank(ss, output_map, feedthrough, filt.max_derivative)

    # Self-check: each tap must match (jw)^k F(jw) across the working band.
    w = np.logspace(-2, 2, 20)
    F = filt.tf.response(1j * w)
    for k in range(n_out):
        tap = lti.StateSpace(ss.A, ss.B, output_map[k : k + 1], feedthrough[k : k + 1])
        got = lti.frequency_response(tap, w)[:, 0, 0]
        want = (1j * w) ** k * F
        err = np.max(np.abs(got - want) / np.maximum(np.abs(want), 1e-30))
        if err > 1e-9:
            raise AssertionError(f"filter bank tap {k} mismatches (jw)^k F by {err:.2e}")
    return bank


def filtered_derivatives(bank: FilterBank, signal: np.ndarray, h: float) -> np.ndarray:
    """Filtered derivatives of one held channel, shape (N, max_derivative + 1).

    Column k holds samples of p^k F applied to the zero-order-hold
    interpolation of ``signal``, starting from zero filter state at the first
    sample.
    """
    dss = lti.c2d_zoh(bank.ss, h)
    u = np.asarray(signal, dtype=float).reshape(-1, 1)
    return propagate(dss.Ad, dss.Bd, bank.output_map, bank.feedthrough, u)


@dataclass(eq=False)
class RegressionData:
    """Stacked linear system: target ~ regressors @ theta."""

    target: np.ndarray      # (rows,)
    regressors: np.ndarray  # (rows, n_params)
    labels: tuple           # one label per column
    structure: tuple        # (n, m, l)


def assemble_regression_siso(yd: np.ndarray, ud: np.ndarray, n: int) -> RegressionData:
    """Regression for a scalar model of order n.

    theta = [d_{n-1} .. d_0, n_{n-1} .. n_0]: the target column is the n-th
    filtered output derivative, regressors are the lower output derivatives
    (negated) followed by the input derivatives.
    """
    if yd.shape[1] < n + 1 or ud.shape[1] < n + 1:
        raise ValueError("derivative matrices must carry n + 1 columns")
    target = yd[:, n].copy()
    regressors = np.hstack([-yd[:, n - 1 :: -1], ud[:, n - 1 :: -1]])
    labels = tuple(f"d{k}" for k in range(n - 1, -1, -1)) + tuple(
        f"n{k}" for k in range(n - 1, -1, -1)
    )
    return RegressionData(target, regressors, labels, (n, 1, 1))


def assemble_regression_mimo(
    yds: list, uds: list, structure: tuple
) -> RegressionData:
    """Stacked regression for an l x m matrix fraction of order n.

    Output blocks are stacked row-wise; the shared denominator column block
    comes first, then one numerator block of n*m columns per output, active
    only on that output's rows.
    """
    n, m, l = structure
    if len(yds) != l or len(uds) != m:
        raise ValueError(f"expected {l} output and {m} input derivative matrices")
    rows = yds[0].shape[0]
    U = np.hstack([ud[:, n - 1 :: -1] for ud in uds])  # (rows, n*m)
    target = np.concatenate([yd[:, n] for yd in yds])
    regressors = np.zeros((l * rows, n + n * m * l))
    labels = [f"d{k}" for k in range(n - 1, -1, -1)]
    for i, yd in enumerate(yds):
        sl = slice(i * rows, (i + 1) * rows)
        regressors[sl, :n] = -yd[:, n - 1 :: -1]
        regressors[sl, n + i * n * m : n + (i + 1) * n * m] = U
    for i in range(l):
        for j in range(m):
            labels += [f"N{i + 1}{j + 1}_{k}" for k in range(n - 1, -1, -1)]
    return RegressionData(target, regressors, tuple(labels), (n, m, l))


@dataclass(eq=False)
class Estimate:
    """Least-squares result with the rebuilt continuous model."""

    theta: np.ndarray
    labels: tuple
    structure: tuple
    model: object  # RationalTransfer or MatrixFraction
    residual_norm: float
    condition_number: float

    def to_json_dict(self) -> dict:
        n, m, l = self.structure
        return {
            "theta": [float(v) for v in self.theta],
            "labels": list(self.labels),
            "structure": {"n": n, "m": m, "l": l},
            "residual_norm": float(self.residual_norm),
            "condition_number": float(self.condition_number),
        }


def solve_ls(reg: RegressionData) -> Estimate:
    """Solve the stacked system by orthogonal factorization (LAPACK gelsd).

    Never forms normal equations; the singular values give the reported
    condition number and trigger rejection above MAX_CONDITION.
    """
    rows, cols = reg.regressors.shape
    if rows < cols:
        raise InsufficientExcitationError(
            f"{rows} rows cannot determine {cols} parameters"
        )
    theta, _, rank, svals = scipy.linalg.lstsq(
        reg.regressors, reg.target, lapack_driver="gelsd"
    )
    cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else np.inf
    if rank < cols or cond > MAX_CONDITION:
        raise InsufficientExcitationError(
            f"regressor condition {cond:.3g} exceeds {MAX_CONDITION:g}; "
            "the data does not excite the requested structure"
        )
    residual = float(np.linalg.norm(reg.target - reg.regressors @ theta))
    model = model_from_theta(theta, reg.structure)
    return Estimate(theta, reg.labels, reg.structure, model, residual, cond)


def model_from_theta(theta: np.ndarray, structure: tuple):
    """Rebuild the continuous model from a packed coefficient vector."""
    n, m, l = structure
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n + n * m * l,):
        raise ValueError(f"theta length {theta.size} does not fit structure {structure}")
    den = lti.Polynomial(np.concatenate([theta[:n][::-1], [1.0]]))
    if (m, l) == (1, 1):
        num = lti.Polynomial(theta[n:][::-1]) if np.any(theta[n:]) else lti.Polynomial([0.0])
        return lti.RationalTransfer(num, den)
    rows = []
    for i in range(l):
        row = []
        for j in range(m):
            start = n + (i * m + j) * n
            row.append(lti.Polynomial(theta[start : start + n][::-1]))
        rows.append(tuple(row))
    return lti.MatrixFraction(den, tuple(rows))


def pack_theta(model) -> np.ndarray:
    """Inverse of model_from_theta; used to score against a known truth."""
    if isinstance(model, lti.RationalTransfer):
        n = model.den.degree
        d = model.den.coeffs[:n][::-1]
        num = np.zeros(n)
        num[: len(model.num.coeffs)] = model.num.coeffs
        return np.concatenate([d, num[::-1]])
    if isinstance(model, lti.MatrixFraction):
        n = model.den.degree
        parts = [model.den.coeffs[:n][::-1]]
        for row in model.nums:
            for p in row:
                c = np.zeros(n)
                c[: len(p.coeffs)] = p.coeffs
                parts.append(c[::-1])
        return np.concatenate(parts)
    raise TypeError(f"cannot pack model of type {type(model).__name__}")


def identify_svf(
    record: SampledRecord,
    structure: tuple,
    filt: SvfFilter,
    discard: float = 0.0,
) -> Estimate:
    """Identify a continuous model of the given structure from sampled I/O.

    ``discard`` seconds measured from the start of the record are dropped
    from the regression (the filters still run from the record start, so
    their transients and any offset response decay inside the dropped
    window).
    """
    n, m, l = structure
    if record.n_inputs != m or record.n_outputs != l:
        raise ValueError(
            f"record carries {record.n_inputs} inputs / {record.n_outputs} outputs, "
            f"structure wants {m} / {l}"
        )
    if filt.max_derivative != n:
        raise ValueError(
            f"filter bank carries {filt.max_derivative} derivatives, model order is {n}"
        )
    if discard < 0:
        raise ValueError("discard must be non-negative")
    bank = build_filter_bank(filt)
    i0 = int(np.ceil(discard / record.h - 1e-9))
    if i0 >= record.n_samples:
        raise ValueError("discard removes the entire record")
    yds = [filtered_derivatives(bank, record.y[i], record.h)[i0:] for i in range(l)]
    uds = [filtered_derivatives(bank, record.u[j], record.h)[i0:] for j in range(m)]
    if (m, l) == (1, 1):
        reg = assemble_regression_siso(yds[0], uds[0], n)
    else:
        reg = assemble_regression_mimo(yds, uds, structure)
    return solve_ls(reg)
