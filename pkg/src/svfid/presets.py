"""Benchmark closed-loop presets and the built-in identification filters.

Catalog (plant, stabilizing or destabilizing-but-stabilized controller):

    P1   1/(s-1)            with K1 = (3s+7)/(0.2s-2), noisy
    P1o  P1 plus constant disturbances (w offset 10, measurement offset 1)
    P1f  P1 noise-free
    P2   (s+1)/(s^2+0.5s+1) with K2 = (0.5s-0.75)/(s+1)
    P3   (s-1)/(s^2-4)      with K3 = (5.5s+11)/(s-2.8)
    P4   2x2 unstable matrix fraction of order 3 with an observer-based
         regulator placed on its 3-state minimal realization

Filter ids: `eqF` is a third-order band-pass s/((s+1)(s^2+1.8s+1)) whose
differentiating numerator nulls constant offsets and which supplies up to two
derivatives; `eqF3` is a fourth-order low-pass 1/((s+1)^2((s+0.2)^2+1.99^2))
supplying three.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from . import lti
from .simulate import NoiseSpec
from .svf import SvfFilter, pack_theta

__all__ = ["Preset", "preset_catalog", "PRESET_NAMES", "make_filter", "FILTER_IDS"]

FILTER_IDS = ("eqF", "eqF3")

PRESET_NAMES = ("P1", "P1o", "P1f", "P2", "P3", "P4")

_FILTER_TF = {
    # s / ((s+1)(s^2+1.8s+1)), relative degree 2
    "eqF": ([0.0, 1.0], [1.0, 2.8, 2.8, 1.0]),
    # 1 / ((s+1)^2 ((s+0.2)^2 + 1.99^2)), relative degree 4
    "eqF3": ([1.0], [4.0001, 8.4002, 5.8001, 2.4, 1.0]),
}


def make_filter(filter_id: str, max_derivative: int) -> SvfFilter:
    """Instantiate a built-in filter for a model of order max_derivative."""
    if filter_id not in _FILTER_TF:
        raise ValueError(f"unknown filter id {filter_id!r}; choose from {FILTER_IDS}")
    num, den = _FILTER_TF[filter_id]
    return SvfFilter(lti.tf(num, den), max_derivative)


def default_filter_id(order: int) -> str:
    if order <= 2:
        return "eqF"
    if order == 3:
        return "eqF3"
    raise ValueError(f"no built-in filter supplies {order} derivatives")


@dataclass(eq=False)
class Preset:
    """Everything a sweep needs to know about one benchmark loop."""

    name: str
    plant: object               # RationalTransfer or MatrixFraction truth model
    plant_ss: lti.StateSpace    # realization used for simulation
    controller: lti.StateSpace
    structure: tuple            # (n, m, l)
    filter_id: str
    discard: float
    noise_w: tuple              # per plant input
    noise_eta: tuple            # per plant output
    theta_star: np.ndarray

    @property
    def n_inputs(self) -> int:
        return self.structure[1]

    @property
    def n_outputs(self) -> int:
        return self.structure[2]

    def svf_filter(self) -> SvfFilter:
        return make_filter(self.filter_id, self.structure[0])


def _controllable_part(A, B, C, tol: float):
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    K = np.hstack(blocks)
    U, s, _ = np.linalg.svd(K, full_matrices=True)
    rank = int(np.sum(s > tol * s[0])) if s.size else 0
    V = U[:, :rank]
    return V.T @ A @ V, V.T @ B, C @ V


def _minimal_realization(ss: lti.StateSpace, tol: float = 1e-9) -> lti.StateSpace:
    """Kalman-style reduction: drop uncontrollable then unobservable states.

    Desk-scale tolerance; intended for the well-separated rank gaps of the
    preset models, not as a general-purpose minimal realization.
    """
    A, B, C = _controllable_part(ss.A, ss.B, ss.C, tol)
    At, Ct, Bt = _controllable_part(A.T, C.T, B.T, tol)
    reduced = lti.StateSpace(At.T, Bt.T, Ct.T, ss.D)
    w_check = np.array([0.13, 0.71, 2.3, 17.0])
    orig = lti.frequency_response(ss, w_check)
    red = lti.frequency_response(reduced, w_check)
    err = np.max(np.abs(orig - red)) / max(np.max(np.abs(orig)), 1e-30)
    if err > 1e-8:
        raise ValueError(f"state reduction changed the I/O map by {err:.2e}")
    return reduced


def _static_controller(gains: np.ndarray) -> lti.StateSpace:
    gains = np.atleast_2d(gains)
    m, l = gains.shape
    return lti.StateSpace(np.zeros((0, 0)), np.zeros((0, l)), np.zeros((m, 0)), gains)


def _mimo_plant() -> lti.MatrixFraction:
    den = [-4.0, 3.6, -0.6, 1.0]  # (p - 1)(p^2 + 0.4 p + 4)
    nums = (
        ([4.4, 1.4, 1.0], [1.0]),
        ([7.6, -3.8, 3.0], [-1.0, 1.0, 1.0]),
    )
    return lti.MatrixFraction(lti.Polynomial(den), nums)


def _mimo_regulator(plant_min: lti.StateSpace) -> lti.StateSpace:
    """Observer-based regulator: state feedback at 0.8x and observer at 1.1x
    the mirrored filter pole pattern (-1, -0.9 +/- j sqrt(0.19))."""
    base = np.array(
        [-1.0, -0.9 + 1j * np.sqrt(0.19), -0.9 - 1j * np.sqrt(0.19)]
    )
    fb = scipy.signal.place_poles(plant_min.A, plant_min.B, 0.8 * base)
    F = fb.gain_matrix
    ob = scipy.signal.place_poles(plant_min.A.T, plant_min.C.T, 1.1 * base)
    L = ob.gain_matrix.T
    A_k = plant_min.A - plant_min.B @ F - L @ plant_min.C
    return lti.StateSpace(A_k, L, F, np.zeros((plant_min.n_inputs, plant_min.n_outputs)))


def _check_stable_loop(plant_ss: lti.StateSpace, ctrl: lti.StateSpace, name: str):
    loop = lti.closed_loop_assemble(plant_ss, ctrl)
    eigs = loop.poles()
    if eigs.size and np.max(eigs.real) >= 0:
        raise ValueError(f"preset {name} closed loop is unstable: eigenvalues {eigs}")


def _siso_preset(name, plant, ctrl_tf, *, std=0.1, offset_w=0.0, offset_eta=0.0,
                 discard=10.0) -> Preset:
    n = plant.den.degree
    preset = Preset(
        name=name,
        plant=plant,
        plant_ss=lti.realize(plant),
        controller=lti.realize(ctrl_tf),
        structure=(n, 1, 1),
        filter_id=default_filter_id(n),
        discard=discard,
        noise_w=(NoiseSpec(std=std, offset=offset_w),),
        noise_eta=(NoiseSpec(std=std, offset=offset_eta),),
        theta_star=pack_theta(plant),
    )
    _check_stable_loop(preset.plant_ss, preset.controller, name)
    return preset


def _build(name: str) -> Preset:
    if name == "P1":
        return _siso_preset("P1", lti.tf([1.0], [-1.0, 1.0]), lti.tf([7.0, 3.0], [-2.0, 0.2]))
    if name == "P1o":
        return _siso_preset(
            "P1o", lti.tf([1.0], [-1.0, 1.0]), lti.tf([7.0, 3.0], [-2.0, 0.2]),
            offset_w=10.0, offset_eta=1.0, discard=15.0,
        )
    if name == "P1f":
        return _siso_preset(
            "P1f", lti.tf([1.0], [-1.0, 1.0]), lti.tf([7.0, 3.0], [-2.0, 0.2]), std=0.0
        )
    if name == "P2":
        return _siso_preset(
            "P2", lti.tf([1.0, 1.0], [1.0, 0.5, 1.0]), lti.tf([-0.75, 0.5], [1.0, 1.0])
        )
    if name == "P3":
        return _siso_preset(
            "P3", lti.tf([-1.0, 1.0], [-4.0, 0.0, 1.0]), lti.tf([11.0, 5.5], [-2.8, 1.0])
        )
    if name == "P4":
        plant = _mimo_plant()
        plant_min = _minimal_realization(lti.realize(plant))
        ctrl = _mimo_regulator(plant_min)
        preset = Preset(
            name="P4",
            plant=plant,
            plant_ss=plant_min,
            controller=ctrl,
            structure=(3, 2, 2),
            filter_id="eqF3",
            discard=10.0,
            noise_w=(NoiseSpec(std=0.1), NoiseSpec(std=0.1)),
            noise_eta=(NoiseSpec(std=0.1), NoiseSpec(std=0.1)),
            theta_star=pack_theta(plant),
        )
        _check_stable_loop(plant_min, ctrl, "P4")
        return preset
    raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


_CACHE: dict = {}


def preset_catalog(name: str) -> Preset:
    """Fetch a benchmark preset by name (cached; treat results as immutable)."""
    if name not in _CACHE:
        _CACHE[name] = _build(name)
    return _CACHE[name]
