"""Closed-loop simulation on a fine grid, plus decimation to a sampling rate.

Everything is built around exact zero-order-hold propagation: excitations and
noises are piecewise constant on the fine grid, so the discretized recursion
reproduces the continuous trajectories at grid instants up to roundoff. There
is no integration error to tune away.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import lti
from ._recursion import propagate

__all__ = [
    "ExcitationSpec",
    "NoiseSpec",
    "SimulationConfig",
    "FineRecord",
    "SampledRecord",
    "square_wave",
    "sample_noise",
    "noise_stream",
    "simulate_closed_loop",
    "decimate",
    "write_record_csv",
]

_GRID_RTOL = 1e-9


@dataclass(eq=False)
class ExcitationSpec:
    """Reference signal on one channel: a square wave or silence."""

    kind: str = "square_wave"  # "square_wave" | "zero"
    period: float = 8.0
    amplitude: float = 1.0
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("square_wave", "zero"):
            raise ValueError(f"unknown excitation kind {self.kind!r}")
        if self.kind == "square_wave" and not self.period > 0:
            raise ValueError("square-wave period must be positive")


@dataclass(eq=False)
class NoiseSpec:
    """Held Gaussian noise: N(offset, std^2) redrawn every hold_step seconds.

    hold_step None means one draw per fine step. std = 0 gives a pure
    constant offset.
    """

    std: float = 0.1
    offset: float = 0.0
    hold_step: float | None = None

    def __post_init__(self) -> None:
        if self.std < 0:
            raise ValueError("noise std must be non-negative")
        if self.hold_step is not None and not self.hold_step > 0:
            raise ValueError("noise hold_step must be positive")


@dataclass(eq=False)
class SimulationConfig:
    """One closed-loop run: grid, seed, and per-channel excitation/noise."""

    fine_step: float = 1e-5
    t_start: float = -10.0
    t_end: float = 20.0
    seed: int = 0
    excitation_u: tuple = (ExcitationSpec(period=5.0),)
    excitation_y: tuple = (ExcitationSpec(period=8.0),)
    noise_w: tuple = (NoiseSpec(),)
    noise_eta: tuple = (NoiseSpec(),)

    def __post_init__(self) -> None:
        if not self.fine_step > 0:
            raise ValueError("fine_step must be positive")
        span = self.t_end - self.t_start
        if not span > 0:
            raise ValueError("t_end must exceed t_start")
        steps = span / self.fine_step
        if abs(steps - round(steps)) > _GRID_RTOL * max(1.0, steps):
            raise ValueError("simulation span must be an integer number of fine steps")
        self.excitation_u = tuple(self.excitation_u)
        self.excitation_y = tuple(self.excitation_y)
        self.noise_w = tuple(self.noise_w)
        self.noise_eta = tuple(self.noise_eta)

    @property
    def n_samples(self) -> int:
        return int(round((self.t_end - self.t_start) / self.fine_step)) + 1


@dataclass(eq=False)
class FineRecord:
    """Fine-grid channel-major signals, noisy and noise-free."""

    t0: float
    step: float
    u: np.ndarray        # (m, N) plant input as seen by the plant's sensor
    y: np.ndarray        # (l, N) measured output
    u_clean: np.ndarray  # (m, N) same loop with noises and offsets zeroed
    y_clean: np.ndarray  # (l, N)

    @property
    def n_samples(self) -> int:
        return self.u.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.step * np.arange(self.n_samples)


@dataclass(eq=False)
class SampledRecord:
    """Decimated I/O record at sampling interval h."""

    h: float
    t0: float
    u: np.ndarray  # (m, N_h)
    y: np.ndarray  # (l, N_h)

    @property
    def n_samples(self) -> int:
        return self.u.shape[1]

    @property
    def n_inputs(self) -> int:
        return self.u.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.y.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.n_samples)


def square_wave(spec: ExcitationSpec, t) -> np.ndarray:
    """Evaluate the excitation at times t.

    The wave is +amplitude on [phase + k*period, phase + (k + 1/2)*period) and
    -amplitude on the second half-period, for all integer k (also before the
    phase instant).
    """
    t = np.asarray(t, dtype=float)
    if spec.kind == "zero":
        return np.zeros_like(t)
    frac = np.mod((t - spec.phase) / spec.period, 1.0)
    return np.where(frac < 0.5, spec.amplitude, -spec.amplitude)


def noise_stream(*key: int) -> np.random.Generator:
    """Deterministic generator for a (base_seed, realization, channel) key."""
    return np.random.default_rng([int(k) for k in key])


def sample_noise(spec: NoiseSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent draws from N(offset, std^2)."""
    return rng.normal(spec.offset, spec.std, size=n)


def _snap(value: float, step: float) -> float:
    return round(value / step) * step


def _held_noise(spec: NoiseSpec, n: int, step: float, rng) -> np.ndarray:
    hold = spec.hold_step if spec.hold_step is not None else step
    factor = hold / step
    if abs(factor - round(factor)) > _GRID_RTOL * max(1.0, factor):
        raise ValueError("noise hold_step must be a multiple of the fine step")
    factor = int(round(factor))
    if factor == 1:
        return sample_noise(spec, n, rng)
    draws = sample_noise(spec, -(-n // factor), rng)
    return np.repeat(draws, factor)[:n]


def simulate_closed_loop(
    P: lti.StateSpace, K: lti.StateSpace, cfg: SimulationConfig
) -> FineRecord:
    """Propagate the loop u = K(r_y - y) + r_u, y = P(u + w) + eta.

    Inputs are held constant over each fine step, so the discretized
    recursion is exact at grid instants. Instability is not an error; the
    run is rejected only if the state leaves floating-point range, with the
    offending step index reported. The clean channels repeat the recursion
    with w and eta identically zero (offsets included).
    """
    m, l = P.n_inputs, P.n_outputs
    if len(cfg.excitation_u) != m or len(cfg.noise_w) != m:
        raise ValueError(f"need {m} excitation_u / noise_w specs, one per plant input")
    if len(cfg.excitation_y) != l or len(cfg.noise_eta) != l:
        raise ValueError(f"need {l} excitation_y / noise_eta specs, one per plant output")

    loop = lti.closed_loop_assemble(P, K)
    dss = lti.c2d_zoh(loop, cfg.fine_step)
    N = cfg.n_samples
    t = cfg.t_start + cfg.fine_step * np.arange(N)

    U = np.zeros((N, 2 * m + 2 * l))
    for j, spec in enumerate(cfg.excitation_u):
        snapped = ExcitationSpec(spec.kind, spec.period, spec.amplitude,
                                 _snap(spec.phase, cfg.fine_step))
        U[:, j] = square_wave(snapped, t)
    for i, spec in enumerate(cfg.excitation_y):
        snapped = ExcitationSpec(spec.kind, spec.period, spec.amplitude,
                                 _snap(spec.phase, cfg.fine_step))
        U[:, m + i] = square_wave(snapped, t)
    for j, spec in enumerate(cfg.noise_w):
        U[:, m + l + j] = _held_noise(spec, N, cfg.fine_step, noise_stream(cfg.seed, 0, j))
    for i, spec in enumerate(cfg.noise_eta):
        U[:, 2 * m + l + i] = _held_noise(spec, N, cfg.fine_step, noise_stream(cfg.seed, 1, i))

    out = propagate(dss.Ad, dss.Bd, dss.Cd, dss.Dd, U)
    if not np.all(np.isfinite(out)):
        k_bad = int(np.argmax(~np.all(np.isfinite(out), axis=1)))
        raise ValueError(
            f"state left floating-point range at step {k_bad} (t = {t[k_bad]:.6g} s)"
        )

    U[:, m + l :] = 0.0  # rerun without disturbances or measurement noise
    out_clean = propagate(dss.Ad, dss.Bd, dss.Cd, dss.Dd, U)

    return FineRecord(
        t0=cfg.t_start,
        step=cfg.fine_step,
        u=np.ascontiguousarray(out[:, :m].T),
        y=np.ascontiguousarray(out[:, m:].T),
        u_clean=np.ascontiguousarray(out_clean[:, :m].T),
        y_clean=np.ascontiguousarray(out_clean[:, m:].T),
    )


def decimate(rec: FineRecord, h: float, retain_from: float | None = None) -> SampledRecord:
    """Keep every (h / step)-th sample from retain_from onward.

    h must be a whole multiple of the fine step and retain_from must lie on
    the fine grid; no anti-alias filtering is applied, matching what a slow
    sampler physically sees.
    """
    factor = h / rec.step
    if abs(factor - round(factor)) > _GRID_RTOL * max(1.0, factor):
        raise ValueError(f"h = {h:g} is not a whole multiple of the fine step {rec.step:g}")
    factor = int(round(factor))
    if factor < 1:
        raise ValueError("h must be at least the fine step")
    if retain_from is None:
        retain_from = rec.t0
    offset = (retain_from - rec.t0) / rec.step
    if offset < -_GRID_RTOL or abs(offset - round(offset)) > _GRID_RTOL * max(1.0, abs(offset)):
        raise ValueError("retain_from must lie on the fine grid and inside the record")
    i0 = int(round(offset))
    if i0 >= rec.n_samples:
        raise ValueError("retain_from is past the end of the record")
    return SampledRecord(
        h=h,
        t0=rec.t0 + i0 * rec.step,
        u=rec.u[:, i0::factor].copy(),
        y=rec.y[:, i0::factor].copy(),
    )


def write_record_csv(path, times: np.ndarray, u: np.ndarray, y: np.ndarray) -> None:
    """Write a channel-major record as CSV with header t,u1..um,y1..yl."""
    m, l = u.shape[0], y.shape[0]
    header = ["t"] + [f"u{j + 1}" for j in range(m)] + [f"y{i + 1}" for i in range(l)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(len(times)):
            row = [f"{times[k]:.9g}"]
            row += [f"{u[j, k]:.9g}" for j in range(m)]
            row += [f"{y[i, k]:.9g}" for i in range(l)]
            writer.writerow(row)
