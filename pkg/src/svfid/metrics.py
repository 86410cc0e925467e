"""Model-accuracy metrics: chordal distance, nu-gap, parameter error, slopes.

The nu-gap between two plants is the supremum over frequency of the pointwise
chordal distance, valid only when the winding condition holds:

    wno det(I + P2* P1) + (open-RHP poles of P1) - (open-RHP poles of P2) = 0

with the winding number accumulated along the (symmetric) frequency axis.
When the condition fails the metric is exactly 1, the weakest statement the
metric can make.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lti
from .arx import ArxModel, arx_frequency_response

__all__ = [
    "FrequencyGrid",
    "GapResult",
    "chordal_distance",
    "nu_gap",
    "normalized_param_error",
    "loglog_slope",
]

#: A nearly vanishing det(I + P2* P1) means the plants are close to antipodal
#: at some frequency and the gap is ill-defined there.
DET_TOL = 1e-12

#: Fraction of the Nyquist rate used as evaluation ceiling for discrete models.
NYQUIST_MARGIN = 0.9

_ENDPOINT_FLAT_TOL = 1e-4
_MAX_EXTENSIONS = 6
_MAX_REFINEMENTS = 4


@dataclass(eq=False)
class FrequencyGrid:
    """Ascending positive frequencies, log-spaced unless custom."""

    omegas: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.omegas, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("frequency grid needs at least two points")
        if np.any(w <= 0) or np.any(np.diff(w) <= 0):
            raise ValueError("frequencies must be positive and strictly increasing")
        self.omegas = w

    @classmethod
    def log_spaced(
        cls, w_min: float = 1e-3, w_max: float = 1e3, points_per_decade: int = 60
    ) -> "FrequencyGrid":
        if points_per_decade < 50:
            raise ValueError("use at least 50 points per decade")
        decades = np.log10(w_max / w_min)
        if decades <= 0:
            raise ValueError("w_max must exceed w_min")
        n = max(2, int(np.ceil(decades * points_per_decade)) + 1)
        return cls(np.logspace(np.log10(w_min), np.log10(w_max), n))


@dataclass(eq=False)
class GapResult:
    """nu-gap value with its validity flag and the frequency of the sup."""

    value: float
    winding_ok: bool
    argmax_omega: float

    def to_json_dict(self) -> dict:
        return {
            "value": float(self.value),
            "winding_ok": bool(self.winding_ok),
            "argmax_omega": float(self.argmax_omega),
        }


def _inv_sqrt_hermitian(M: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(M)
    return (vecs * (1.0 / np.sqrt(vals))) @ vecs.conj().T


def chordal_distance(G1, G2) -> float:
    """Pointwise gap between two complex gain matrices, in [0, 1].

    sigma_max((I + G2 G2*)^{-1/2} (G2 - G1) (I + G1* G1)^{-1/2}).
    """
    G1 = np.atleast_2d(np.asarray(G1, dtype=complex))
    G2 = np.atleast_2d(np.asarray(G2, dtype=complex))
    if G1.shape != G2.shape:
        raise ValueError(f"shape mismatch {G1.shape} vs {G2.shape}")
    if G1.shape == (1, 1):
        a, b = G1[0, 0], G2[0, 0]
        val = abs(b - a) / np.sqrt((1 + abs(a) ** 2) * (1 + abs(b) ** 2))
        return float(min(val, 1.0))
    l, m = G1.shape
    left = _inv_sqrt_hermitian(np.eye(l) + G2 @ G2.conj().T)
    right = _inv_sqrt_hermitian(np.eye(m) + G1.conj().T @ G1)
    val = float(np.linalg.svd(left @ (G2 - G1) @ right, compute_uv=False)[0])
    return float(min(val, 1.0))


def _chordal_profile(R1: np.ndarray, R2: np.ndarray) -> np.ndarray:
    """Vectorized chordal distance along axis 0 of (N, l, m) response stacks."""
    if R1.shape[1:] == (1, 1):
        a, b = R1[:, 0, 0], R2[:, 0, 0]
        return np.minimum(
            np.abs(b - a) / np.sqrt((1 + np.abs(a) ** 2) * (1 + np.abs(b) ** 2)), 1.0
        )
    return np.array([chordal_distance(R1[k], R2[k]) for k in range(R1.shape[0])])


def _model_response(model, omegas: np.ndarray) -> np.ndarray:
    if isinstance(model, ArxModel):
        return arx_frequency_response(model, omegas)
    return lti.frequency_response(model, omegas)


def _unstable_pole_count(model) -> int:
    if isinstance(model, ArxModel):
        radii = np.abs(model.poles())
        if np.any(np.abs(radii - 1.0) <= lti.IMAG_AXIS_TOL):
            raise ValueError("pole on the unit circle; winding condition ill-defined")
        return int(np.sum(radii > 1.0))
    return lti.rhp_pole_count(model)


def _nyquist_cap(model) -> float | None:
    if isinstance(model, (ArxModel, lti.DiscreteStateSpace)):
        return NYQUIST_MARGIN * np.pi / model.h
    return None


def _single_chordal(P1, P2, w: float) -> float:
    R1 = _model_response(P1, np.array([w]))
    R2 = _model_response(P2, np.array([w]))
    return float(_chordal_profile(R1, R2)[0])


def _wrapped_phase_steps(g: np.ndarray) -> np.ndarray:
    d = np.diff(np.angle(g))
    return (d + np.pi) % (2 * np.pi) - np.pi


def nu_gap(P1, P2, grid: FrequencyGrid | None = None) -> GapResult:
    """nu-gap metric between two models (continuous, discrete, or mixed).

    The working grid starts from ``grid`` (default log-spaced 1e-3..1e3 rad/s
    at 60 points/decade), is capped below NYQUIST_MARGIN * pi / h when a
    discrete model participates, and is extended a decade at a time until the
    endpoint chordal distance stops moving. The winding number is accumulated
    over the symmetric extension of the grid through zero; if adjacent phase
    steps exceed pi/2 the grid is refined before giving up.
    """
    eta1 = _unstable_pole_count(P1)
    eta2 = _unstable_pole_count(P2)
    caps = [c for c in (_nyquist_cap(P1), _nyquist_cap(P2)) if c is not None]
    cap = min(caps) if caps else None

    base = grid if grid is not None else FrequencyGrid.log_spaced()
    w_lo, w_hi = float(base.omegas[0]), float(base.omegas[-1])
    ppd = max(
        50,
        int(round((len(base.omegas) - 1) / max(np.log10(w_hi / w_lo), 1e-12))),
    )
    if cap is not None and w_hi > cap:
        w_hi = cap
        if w_lo >= w_hi:
            raise ValueError("Nyquist cap leaves no usable frequency band")

    # Extend outward until the endpoint chordal distance flattens.
    for _ in range(_MAX_EXTENSIONS):
        ref = _single_chordal(P1, P2, w_lo)
        if abs(_single_chordal(P1, P2, w_lo / 10.0) - ref) < _ENDPOINT_FLAT_TOL:
            break
        w_lo /= 10.0
    for _ in range(_MAX_EXTENSIONS):
        if cap is not None and w_hi >= cap:
            break
        ref = _single_chordal(P1, P2, w_hi)
        nxt = w_hi * 10.0 if cap is None else min(w_hi * 10.0, cap)
        if abs(_single_chordal(P1, P2, nxt) - ref) < _ENDPOINT_FLAT_TOL:
            break
        w_hi = nxt

    last_err: Exception | None = None
    for refinement in range(_MAX_REFINEMENTS + 1):
        n = max(2, int(np.ceil(np.log10(w_hi / w_lo) * ppd * 2**refinement)) + 1)
        w = np.logspace(np.log10(w_lo), np.log10(w_hi), n)
        R1 = _model_response(P1, w)
        R2 = _model_response(P2, w)
        R1_0 = _model_response(P1, np.array([0.0]))
        R2_0 = _model_response(P2, np.array([0.0]))

        g_pos = np.linalg.det(
            np.eye(R1.shape[2]) + np.swapaxes(R2, 1, 2).conj() @ R1
        )
        g_zero = np.linalg.det(np.eye(R1.shape[2]) + R2_0[0].conj().T @ R1_0[0])
        g_full = np.concatenate([np.conj(g_pos[::-1]), [g_zero], g_pos])
        if np.min(np.abs(g_full)) < DET_TOL:
            raise ValueError(
                "nu-gap ill-defined: det(I + P2* P1) vanishes on the grid"
            )
        steps = _wrapped_phase_steps(g_full)
        if np.max(np.abs(steps)) > np.pi / 2:
            last_err = ValueError(
                "grid too coarse: phase of det(I + P2* P1) jumps more than pi/2 "
                "between adjacent frequencies"
            )
            continue
        winding = int(round(steps.sum() / (2 * np.pi)))
        winding_ok = (winding + eta1 - eta2) == 0
        if not winding_ok:
            return GapResult(1.0, False, float("nan"))
        kappa = _chordal_profile(R1, R2)
        kappa0 = float(_chordal_profile(R1_0, R2_0)[0])
        k_arg = int(np.argmax(kappa))
        if kappa0 >= kappa[k_arg]:
            return GapResult(kappa0, True, 0.0)
        return GapResult(float(kappa[k_arg]), True, float(w[k_arg]))
    raise last_err if last_err is not None else RuntimeError("nu-gap failed")


def normalized_param_error(theta_hat, theta_star) -> float:
    """Squared-norm ratio ||theta_hat - theta*||^2 / ||theta*||^2."""
    a = np.asarray(theta_hat, dtype=float)
    b = np.asarray(theta_star, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"parameter vectors differ in length: {a.shape} vs {b.shape}")
    denom = float(np.dot(b, b))
    if denom == 0.0:
        raise ValueError("reference parameter vector must be nonzero")
    diff = a - b
    return float(np.dot(diff, diff) / denom)


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2:
        raise ValueError("need at least two paired points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log slope needs strictly positive data")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
