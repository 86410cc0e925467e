"""LTI model primitives: polynomials, transfer functions, state space.

Models are plain value containers; treat instances as immutable after
construction. All operations are pure functions, so sharing models across
worker processes is safe.

Conventions
-----------
* Polynomial coefficients are stored ascending: ``coeffs[i]`` multiplies
  ``x**i``.
* Denominators are normalized monic on construction; the scale factor moves
  into the numerator.
* Continuous models live in ``s``, discrete ones in ``z`` with an attached
  sampling interval ``h``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import numpy.polynomial.polynomial as npoly
import scipy.linalg

__all__ = [
    "Polynomial",
    "RationalTransfer",
    "MatrixFraction",
    "StateSpace",
    "DiscreteStateSpace",
    "tf",
    "realize",
    "frequency_response",
    "c2d_zoh",
    "h2_norm_ct",
    "h2_norm_dt",
    "rhp_pole_count",
    "closed_loop_assemble",
]

#: Poles closer than this to the evaluation contour (imaginary axis or unit
#: circle) make frequency-domain quantities ill-defined and are rejected.
IMAG_AXIS_TOL = 1e-9


@dataclass(eq=False)
class Polynomial:
    """Real polynomial with ascending coefficients.

    Trailing zero coefficients are trimmed on construction; the zero
    polynomial is represented as ``[0.0]`` with degree 0.
    """

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("polynomial coefficients must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        nz = np.flatnonzero(c)
        self.coeffs = c[: nz[-1] + 1].copy() if nz.size else np.zeros(1)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0.0

    def __call__(self, x):
        return npoly.polyval(x, self.coeffs)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(npoly.polyadd(self.coeffs, other.coeffs))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(npoly.polysub(self.coeffs, other.coeffs))

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return Polynomial(npoly.polymul(self.coeffs, other.coeffs))
        return Polynomial(self.coeffs * float(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Polynomial":
        return Polynomial(-self.coeffs)

    def roots(self) -> np.ndarray:
        """Roots via the companion matrix; empty for constants."""
        if self.degree == 0:
            return np.zeros(0, dtype=complex)
        return npoly.polyroots(self.coeffs)


def _as_poly(p) -> Polynomial:
    return p if isinstance(p, Polynomial) else Polynomial(np.asarray(p, dtype=float))


@dataclass(eq=False)
class RationalTransfer:
    """Proper scalar transfer function num(s)/den(s), denominator monic."""

    num: Polynomial
    den: Polynomial

    def __post_init__(self) -> None:
        self.num = _as_poly(self.num)
        self.den = _as_poly(self.den)
        if self.den.is_zero:
            raise ValueError("denominator must not be the zero polynomial")
        lead = self.den.coeffs[-1]
        if lead != 1.0:
            self.den = Polynomial(self.den.coeffs / lead)
            self.num = Polynomial(self.num.coeffs / lead)
        if not self.num.is_zero and self.num.degree > self.den.degree:
            raise ValueError(
                f"improper transfer: numerator degree {self.num.degree} exceeds "
                f"denominator degree {self.den.degree}"
            )

    @property
    def order(self) -> int:
        return self.den.degree

    @property
    def relative_degree(self) -> int:
        if self.num.is_zero:
            return self.den.degree
        return self.den.degree - self.num.degree

    @property
    def shape(self) -> tuple[int, int]:
        return (1, 1)

    def poles(self) -> np.ndarray:
        return self.den.roots()

    def response(self, s):
        """Pointwise num(s)/den(s); no pole-proximity guard."""
        return self.num(s) / self.den(s)


def tf(num, den) -> RationalTransfer:
    """Build a RationalTransfer from ascending coefficient sequences."""
    return RationalTransfer(_as_poly(num), _as_poly(den))


@dataclass(eq=False)
class MatrixFraction:
    """Strictly proper l x m transfer matrix N(s) / d(s) with d monic.

    Each numerator entry has degree at most ``d.degree - 1``.
    """

    den: Polynomial
    nums: tuple

    def __post_init__(self) -> None:
        self.den = _as_poly(self.den)
        if self.den.degree < 1:
            raise ValueError("matrix-fraction denominator must have degree >= 1")
        lead = self.den.coeffs[-1]
        rows = []
        for row in self.nums:
            rows.append(tuple(_as_poly(p) * (1.0 / lead) for p in row))
        self.nums = tuple(rows)
        if lead != 1.0:
            self.den = Polynomial(self.den.coeffs / lead)
        l = len(self.nums)
        if l == 0 or any(len(row) != len(self.nums[0]) for row in self.nums):
            raise ValueError("numerator entries must form a rectangular grid")
        n = self.den.degree
        for row in self.nums:
            for p in row:
                if not p.is_zero and p.degree > n - 1:
                    raise ValueError(
                        f"numerator degree {p.degree} violates strict properness "
                        f"(denominator degree {n})"
                    )

    @property
    def order(self) -> int:
        return self.den.degree

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.nums), len(self.nums[0]))

    def poles(self) -> np.ndarray:
        return self.den.roots()

    def response(self, s):
        s = np.asarray(s)
        l, m = self.shape
        out = np.empty(s.shape + (l, m), dtype=complex)
        d = self.den(s)
        for i in range(l):
            for j in range(m):
                out[..., i, j] = self.nums[i][j](s) / d
        return out


def _as_matrix(M, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    A = np.asarray(M, dtype=float)
    if A.ndim != 2:
        raise ValueError("state-space matrices must be 2-D")
    if not np.all(np.isfinite(A)):
        raise ValueError("state-space matrices must be finite")
    if rows is not None and A.shape[0] != rows:
        raise ValueError(f"expected {rows} rows, got {A.shape[0]}")
    if cols is not None and A.shape[1] != cols:
        raise ValueError(f"expected {cols} columns, got {A.shape[1]}")
    return A


@dataclass(eq=False)
class StateSpace:
    """Continuous-time realization (A, B, C, D). Zero-state systems allowed."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self) -> None:
        self.A = _as_matrix(self.A)
        n = self.A.shape[0]
        if self.A.shape[1] != n:
            raise ValueError("A must be square")
        self.B = _as_matrix(self.B, rows=n)
        self.C = _as_matrix(self.C, cols=n)
        self.D = _as_matrix(self.D, rows=self.C.shape[0], cols=self.B.shape[1])

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_outputs, self.n_inputs)

    def poles(self) -> np.ndarray:
        if self.n_states == 0:
            return np.zeros(0, dtype=complex)
        return np.linalg.eigvals(self.A)


@dataclass(eq=False)
class DiscreteStateSpace:
    """Discrete-time realization (Ad, Bd, Cd, Dd) at sampling interval h."""

    Ad: np.ndarray
    Bd: np.ndarray
    Cd: np.ndarray
    Dd: np.ndarray
    h: float

    def __post_init__(self) -> None:
        self.Ad = _as_matrix(self.Ad)
        n = self.Ad.shape[0]
        if self.Ad.shape[1] != n:
            raise ValueError("Ad must be square")
        self.Bd = _as_matrix(self.Bd, rows=n)
        self.Cd = _as_matrix(self.Cd, cols=n)
        self.Dd = _as_matrix(self.Dd, rows=self.Cd.shape[0], cols=self.Bd.shape[1])
        self.h = float(self.h)
        if not self.h > 0:
            raise ValueError("sampling interval h must be positive")

    @property
    def n_states(self) -> int:
        return self.Ad.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.Bd.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.Cd.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_outputs, self.n_inputs)

    def poles(self) -> np.ndarray:
        if self.n_states == 0:
            return np.zeros(0, dtype=complex)
        return np.linalg.eigvals(self.Ad)


Model = Union[RationalTransfer, MatrixFraction, StateSpace, DiscreteStateSpace]


def realize(model) -> StateSpace:
    """State-space realization of a transfer model.

    Scalar transfers use the controllable canonical form (bottom-row
    companion); biproper ones split off the feedthrough by long division
    first. Matrix fractions realize one left-companion block per output row
    sharing the common denominator, giving ``l * n`` states; the result is
    generally non-minimal.
    """
    if isinstance(model, StateSpace):
        return model
    if isinstance(model, RationalTransfer):
        n = model.den.degree
        if n == 0:
            gain = model.num.coeffs[0] if model.num.degree == 0 else 0.0
            return StateSpace(
                np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[gain]]
            )
        d = model.den.coeffs  # monic, length n + 1
        num = model.num.coeffs
        if model.num.degree == n and not model.num.is_zero:
            feed = num[n]
            rem = npoly.polysub(num, feed * d)
        else:
            feed = 0.0
            rem = num
        rem = _pad(rem, n)
        A = np.zeros((n, n))
        A[:-1, 1:] = np.eye(n - 1)
        A[-1, :] = -d[:n]
        B = np.zeros((n, 1))
        B[-1, 0] = 1.0
        C = rem.reshape(1, n)
        return StateSpace(A, B, C, [[feed]])
    if isinstance(model, MatrixFraction):
        n = model.den.degree
        l, m = model.shape
        d = model.den.coeffs
        A = np.zeros((l * n, l * n))
        B = np.zeros((l * n, m))
        C = np.zeros((l, l * n))
        for i in range(l):
            sl = slice(i * n, (i + 1) * n)
            blk = np.zeros((n, n))
            blk[1:, :-1] = np.eye(n - 1)
            blk[:, -1] = -d[:n]
            A[sl, sl] = blk
            for j in range(m):
                B[sl, j] = _pad(model.nums[i][j].coeffs, n)
            C[i, i * n + n - 1] = 1.0
        return StateSpace(A, B, C, np.zeros((l, m)))
    raise TypeError(f"cannot realize object of type {type(model).__name__}")


def _pad(coeffs, n: int) -> np.ndarray:
    """Zero-pad an ascending coefficient vector to length n."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    nz = np.flatnonzero(c)
    c = c[: nz[-1] + 1] if nz.size else c[:1]
    if len(c) > n:
        raise ValueError("coefficient vector longer than target length")
    out = np.zeros(n)
    out[: len(c)] = c
    return out


def _guard_contour(model, points: np.ndarray) -> None:
    """Reject evaluation points within IMAG_AXIS_TOL of a pole."""
    poles = model.poles()
    if poles.size == 0:
        return
    dist = np.abs(points[..., None] - poles[None, :])
    bad = np.min(dist) if dist.size else np.inf
    if bad < IMAG_AXIS_TOL:
        idx = np.unravel_index(np.argmin(dist), dist.shape)
        raise ValueError(
            f"evaluation point {points[idx[0]]:.6g} lies within {IMAG_AXIS_TOL:g} "
            f"of pole {poles[idx[1]]:.6g}"
        )


def frequency_response(model, omega) -> np.ndarray:
    """Complex gain matrix of ``model`` at real frequencies ``omega`` [rad/s].

    Returns shape ``(l, m)`` for scalar omega and ``(len(omega), l, m)`` for a
    1-D array. Continuous models are evaluated at ``s = j*omega``, discrete
    ones at ``z = exp(j*omega*h)``. Frequencies within ``IMAG_AXIS_TOL`` of a
    pole are rejected.
    """
    w = np.asarray(omega, dtype=float)
    scalar = w.ndim == 0
    w = np.atleast_1d(w)
    if isinstance(model, (RationalTransfer, MatrixFraction)):
        s = 1j * w
        _guard_contour(model, s)
        resp = model.response(s)
        if isinstance(model, RationalTransfer):
            resp = resp.reshape(len(w), 1, 1)
    elif isinstance(model, StateSpace):
        s = 1j * w
        _guard_contour(model, s)
        resp = np.empty((len(w), model.n_outputs, model.n_inputs), dtype=complex)
        if model.n_states == 0:
            resp[:] = model.D
        else:
            eye = np.eye(model.n_states)
            for k, sk in enumerate(s):
                resp[k] = model.C @ np.linalg.solve(sk * eye - model.A, model.B) + model.D
    elif isinstance(model, DiscreteStateSpace):
        z = np.exp(1j * w * model.h)
        _guard_contour(model, z)
        resp = np.empty((len(w), model.n_outputs, model.n_inputs), dtype=complex)
        if model.n_states == 0:
            resp[:] = model.Dd
        else:
            eye = np.eye(model.n_states)
            for k, zk in enumerate(z):
                resp[k] = model.Cd @ np.linalg.solve(zk * eye - model.Ad, model.Bd) + model.Dd
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return resp[0] if scalar else resp


def c2d_zoh(ss: StateSpace, h: float) -> DiscreteStateSpace:
    """Zero-order-hold discretization at interval h.

    Ad = exp(A h) and Bd = (integral_0^h exp(A tau) dtau) B, both read off a
    single matrix exponential of the augmented block [[A, B], [0, 0]] * h.
    """
    if not h > 0:
        raise ValueError("sampling interval h must be positive")
    n, m = ss.n_states, ss.n_inputs
    if n == 0:
        return DiscreteStateSpace(
            np.zeros((0, 0)), np.zeros((0, m)), ss.C.copy(), ss.D.copy(), h
        )
    blk = np.zeros((n + m, n + m))
    blk[:n, :n] = ss.A
    blk[:n, n:] = ss.B
    E = scipy.linalg.expm(blk * h)
    Ad, Bd = E[:n, :n], E[:n, n:]
    if not (np.all(np.isfinite(Ad)) and np.all(np.isfinite(Bd))):
        raise ValueError("matrix exponential overflowed; h too large for this system")
    return DiscreteStateSpace(Ad, Bd, ss.C.copy(), ss.D.copy(), h)


def h2_norm_ct(ss: StateSpace) -> float:
    """H2 norm of a Hurwitz-stable, strictly proper continuous system.

    sqrt(trace(C X C^T)) with X solving A X + X A^T + B B^T = 0.
    """
    if ss.n_states == 0:
        raise ValueError("H2 norm of a static system requires zero gain; use norm 0 directly")
    eigs = ss.poles()
    if np.max(eigs.real) >= 0:
        raise ValueError(f"system is not Hurwitz stable; eigenvalues {np.sort_complex(eigs)}")
    if np.any(ss.D != 0):
        raise ValueError("feedthrough must be zero for a finite continuous H2 norm")
    X = scipy.linalg.solve_continuous_lyapunov(ss.A, -ss.B @ ss.B.T)
    val = float(np.trace(ss.C @ X @ ss.C.T))
    return float(np.sqrt(max(val, 0.0)))


def h2_norm_dt(dss: DiscreteStateSpace) -> float:
    """H2 norm of a Schur-stable discrete system (feedthrough allowed).

    sqrt(trace(Cd X Cd^T) + trace(Dd Dd^T)) with
    Ad X Ad^T - X + Bd Bd^T = 0.
    """
    feed = float(np.trace(dss.Dd @ dss.Dd.T))
    if dss.n_states == 0:
        return float(np.sqrt(feed))
    eigs = dss.poles()
    if np.max(np.abs(eigs)) >= 1:
        raise ValueError(f"system is not Schur stable; eigenvalues {np.sort_complex(eigs)}")
    X = scipy.linalg.solve_discrete_lyapunov(dss.Ad, dss.Bd @ dss.Bd.T)
    val = float(np.trace(dss.Cd @ X @ dss.Cd.T)) + feed
    return float(np.sqrt(max(val, 0.0)))


def rhp_pole_count(model) -> int:
    """Number of open right-half-plane poles (or outside-unit-circle for
    discrete models), rejecting poles on the stability boundary.

    Counts eigenvalues of the model's realization; for rational and
    matrix-fraction models these are the denominator roots.
    """
    poles = model.poles()
    if isinstance(model, DiscreteStateSpace):
        radii = np.abs(poles)
        if np.any(np.abs(radii - 1.0) <= IMAG_AXIS_TOL):
            raise ValueError("pole on the unit circle; count ill-defined")
        return int(np.sum(radii > 1.0))
    if np.any(np.abs(poles.real) <= IMAG_AXIS_TOL):
        offending = poles[np.abs(poles.real) <= IMAG_AXIS_TOL]
        raise ValueError(f"pole on the imaginary axis within tolerance: {offending}")
    return int(np.sum(poles.real > 0))


def closed_loop_assemble(P: StateSpace, K: StateSpace) -> StateSpace:
    """Standard feedback interconnection u = K * (r_y - y) + r_u.

    The plant sees u + w at its input; the measured output is y = P(u+w) + eta.
    Inputs of the combined system are stacked [r_u, r_y, w, eta] and outputs
    are [u, y]. P must be strictly proper (D_P = 0) so the loop has no
    algebraic feedthrough; K may be biproper.
    """
    m, l = P.n_inputs, P.n_outputs
    if K.n_inputs != l or K.n_outputs != m:
        raise ValueError(
            f"controller shape {K.shape} incompatible with plant shape {P.shape}"
        )
    if np.any(P.D != 0):
        raise ValueError("plant must be strictly proper (D = 0) to close the loop")
    nP, nK = P.n_states, K.n_states
    A = np.zeros((nP + nK, nP + nK))
    A[:nP, :nP] = P.A - P.B @ K.D @ P.C
    A[:nP, nP:] = P.B @ K.C
    A[nP:, :nP] = -K.B @ P.C
    A[nP:, nP:] = K.A

    B = np.zeros((nP + nK, 2 * m + 2 * l))
    B[:nP, :m] = P.B
    B[:nP, m : m + l] = P.B @ K.D
    B[:nP, m + l : 2 * m + l] = P.B
    B[:nP, 2 * m + l :] = -P.B @ K.D
    B[nP:, m : m + l] = K.B
    B[nP:, 2 * m + l :] = -K.B

    C = np.zeros((m + l, nP + nK))
    C[:m, :nP] = -K.D @ P.C
    C[:m, nP:] = K.C
    C[m:, :nP] = P.C

    D = np.zeros((m + l, 2 * m + 2 * l))
    D[:m, :m] = np.eye(m)
    D[:m, m : m + l] = K.D
    D[:m, 2 * m + l :] = -K.D
    D[m:, 2 * m + l :] = np.eye(l)
    return StateSpace(A, B, C, D)
