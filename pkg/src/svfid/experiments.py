"""Experiment harness: config schema, sweeps, verifiers, table emitters.

A sweep simulates each realization once on the fine grid, decimates the same
record to every requested sampling interval, runs each method on the result,
and scores it against the truth model. Per-row failures are recorded in the
row's error column and the run continues.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict, fields

import numpy as np

from . import lti, metrics, presets, simulate, svf
from .arx import fit_arx
from .simulate import ExcitationSpec, NoiseSpec, SimulationConfig

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SweepRow",
    "SweepResult",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "model_from_literal",
    "resolve",
    "run_sweep",
    "rows_to_csv",
    "verify_lemma1",
    "verify_covariance",
    "bode_table",
    "write_bode_csv",
]

VALID_METHODS = ("svf", "arx")

SWEEP_COLUMNS = (
    "preset",
    "method",
    "h",
    "seed",
    "normalized_param_error",
    "nu_gap",
    "residual_norm",
    "condition_number",
    "wall_time_s",
    "error",
)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    """Flat, JSON-native experiment description.

    `preset` picks a benchmark loop; "custom" requires a `plant` literal
    (and optionally `controller`). None on an override field means "use the
    preset default".
    """

    preset: str = "P1"
    plant: dict | None = None
    controller: dict | None = None
    filter: object = ""  # "" -> preset default; id string; or tf literal dict
    h_grid: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])
    realizations: int = 20
    base_seed: int = 20260814
    fine_step: float = 1e-5
    t_start: float = -10.0
    t_end: float = 20.0
    discard: float | None = None
    methods: list = field(default_factory=lambda: ["svf"])
    noise_std_w: float | None = None
    noise_std_eta: float | None = None
    noise_offset_w: float | None = None
    noise_offset_eta: float | None = None
    noise_hold_step: float | None = None
    period_u: float = 5.0
    period_y: float = 8.0
    amplitude: float = 1.0
    arx_na: int = 10
    arx_nb: int = 10
    arx_nk: int = 1


def config_from_dict(doc: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        cfg = ExperimentConfig(**doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    _validate_config(cfg)
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    return config_from_dict(doc)


def _validate_config(cfg: ExperimentConfig) -> None:
    if cfg.preset != "custom" and cfg.preset not in presets.PRESET_NAMES:
        raise ConfigError(
            f"unknown preset {cfg.preset!r}; choose from {presets.PRESET_NAMES} or 'custom'"
        )
    if cfg.preset == "custom" and cfg.plant is None:
        raise ConfigError("custom preset requires a plant literal")
    if not cfg.h_grid:
        raise ConfigError("h_grid must not be empty")
    for h in cfg.h_grid:
        if not h > 0:
            raise ConfigError("sampling intervals must be positive")
        factor = h / cfg.fine_step
        if abs(factor - round(factor)) > 1e-9 * max(1.0, factor) or round(factor) < 1:
            raise ConfigError(
                f"h = {h:g} is not a whole multiple of fine_step = {cfg.fine_step:g}"
            )
    if cfg.realizations < 1:
        raise ConfigError("realizations must be at least 1")
    bad = [m for m in cfg.methods if m not in VALID_METHODS]
    if bad:
        raise ConfigError(f"unknown methods {bad}; valid: {VALID_METHODS}")
    if not cfg.methods:
        raise ConfigError("methods must not be empty")
    if not cfg.t_end > cfg.t_start:
        raise ConfigError("t_end must exceed t_start")
    if cfg.discard is not None and cfg.discard < 0:
        raise ConfigError("discard must be non-negative")
    if min(cfg.arx_na, cfg.arx_nb) < 1 or cfg.arx_nk < 0:
        raise ConfigError("ARX orders must satisfy na, nb >= 1 and nk >= 0")


def model_from_literal(obj: dict):
    """Build a truth model from {"num", "den"} or {"den", "nums"} literals."""
    if not isinstance(obj, dict):
        raise ConfigError("model literal must be a JSON object")
    try:
        if "nums" in obj:
            rows = tuple(tuple(lti.Polynomial(p) for p in row) for row in obj["nums"])
            return lti.MatrixFraction(lti.Polynomial(obj["den"]), rows)
        return lti.tf(obj["num"], obj["den"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad model literal: {exc}") from exc


@dataclass(eq=False)
class Resolved:
    """Config with presets applied and models materialized."""

    name: str
    plant: object
    plant_ss: lti.StateSpace
    controller: lti.StateSpace
    structure: tuple
    filt: svf.SvfFilter
    theta_star: np.ndarray
    discard: float
    noise_w: tuple
    noise_eta: tuple
    period_u: float
    period_y: float
    amplitude: float
    h_grid: tuple
    fine_step: float
    t_start: float
    t_end: float
    methods: tuple
    base_seed: int
    realizations: int
    arx_orders: tuple


def _override_noise(spec: NoiseSpec, std, offset, hold) -> NoiseSpec:
    return NoiseSpec(
        std=spec.std if std is None else std,
        offset=spec.offset if offset is None else offset,
        hold_step=spec.hold_step if hold is None else hold,
    )


def resolve(cfg: ExperimentConfig) -> Resolved:
    _validate_config(cfg)
    if cfg.preset == "custom":
        plant = model_from_literal(cfg.plant)
        if isinstance(plant, lti.MatrixFraction):
            n = plant.den.degree
            l, m = plant.shape
        else:
            n, m, l = plant.den.degree, 1, 1
        plant_ss = lti.realize(plant)
        if cfg.controller is not None:
            controller = lti.realize(model_from_literal(cfg.controller))
        else:
            controller = lti.StateSpace(
                np.zeros((0, 0)), np.zeros((0, l)), np.zeros((m, 0)), np.zeros((m, l))
            )
        structure = (n, m, l)
        filter_id = cfg.filter or presets.default_filter_id(n)
        base_noise_w = tuple(NoiseSpec() for _ in range(m))
        base_noise_eta = tuple(NoiseSpec() for _ in range(l))
        discard = 10.0 if cfg.discard is None else cfg.discard
        theta_star = svf.pack_theta(plant)
        name = "custom"
    else:
        p = presets.preset_catalog(cfg.preset)
        plant, plant_ss, controller = p.plant, p.plant_ss, p.controller
        structure = p.structure
        filter_id = cfg.filter or p.filter_id
        base_noise_w, base_noise_eta = p.noise_w, p.noise_eta
        discard = p.discard if cfg.discard is None else cfg.discard
        theta_star = p.theta_star
        name = p.name

    if isinstance(filter_id, dict):
        try:
            filt = svf.SvfFilter(
                lti.tf(filter_id["num"], filter_id["den"]),
                int(filter_id.get("max_derivative", structure[0])),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad filter literal: {exc}") from exc
        if filt.max_derivative != structure[0]:
            raise ConfigError(
                f"filter carries {filt.max_derivative} derivatives, model order is {structure[0]}"
            )
    else:
        try:
            filt = presets.make_filter(filter_id, structure[0])
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    noise_w = tuple(
        _override_noise(s, cfg.noise_std_w, cfg.noise_offset_w, cfg.noise_hold_step)
        for s in base_noise_w
    )
    noise_eta = tuple(
        _override_noise(s, cfg.noise_std_eta, cfg.noise_offset_eta, cfg.noise_hold_step)
        for s in base_noise_eta
    )
    if discard >= cfg.t_end - cfg.t_start:
        raise ConfigError("discard must leave part of the record")
    return Resolved(
        name=name,
        plant=plant,
        plant_ss=plant_ss,
        controller=controller,
        structure=structure,
        filt=filt,
        theta_star=theta_star,
        discard=discard,
        noise_w=noise_w,
        noise_eta=noise_eta,
        period_u=cfg.period_u,
        period_y=cfg.period_y,
        amplitude=cfg.amplitude,
        h_grid=tuple(sorted(cfg.h_grid, reverse=True)),
        fine_step=cfg.fine_step,
        t_start=cfg.t_start,
        t_end=cfg.t_end,
        methods=tuple(cfg.methods),
        base_seed=int(cfg.base_seed),
        realizations=int(cfg.realizations),
        arx_orders=(cfg.arx_na, cfg.arx_nb, cfg.arx_nk),
    )


@dataclass
class SweepRow:
    preset: str
    method: str
    h: float
    seed: int
    normalized_param_error: float | None
    nu_gap: float | None
    residual_norm: float | None
    condition_number: float | None
    wall_time_s: float
    error: str = ""


@dataclass(eq=False)
class SweepResult:
    rows: list
    summary: dict


def _realization_sim_config(res: Resolved, r: int) -> SimulationConfig:
    """Per-realization excitation phases and noise seed.

    Phase draws come from stream (base_seed, r, 2), input channels first,
    then output channels, each uniform over its period and snapped to the
    fine grid.
    """
    rng = simulate.noise_stream(res.base_seed, r, 2)
    n, m, l = res.structure

    def snap(x: float) -> float:
        return round(x / res.fine_step) * res.fine_step

    exc_u = tuple(
        ExcitationSpec("square_wave", res.period_u, res.amplitude,
                       snap(rng.uniform(0.0, res.period_u)))
        for _ in range(m)
    )
    exc_y = tuple(
        ExcitationSpec("square_wave", res.period_y, res.amplitude,
                       snap(rng.uniform(0.0, res.period_y)))
        for _ in range(l)
    )
    seed = int(np.random.SeedSequence([res.base_seed, r]).generate_state(1, np.uint64)[0])
    return SimulationConfig(
        fine_step=res.fine_step,
        t_start=res.t_start,
        t_end=res.t_end,
        seed=seed,
        excitation_u=exc_u,
        excitation_y=exc_y,
        noise_w=res.noise_w,
        noise_eta=res.noise_eta,
    )


def _rows_for_realization(res: Resolved, r: int) -> list:
    simcfg = _realization_sim_config(res, r)
    fine = simulate.simulate_closed_loop(res.plant_ss, res.controller, simcfg)
    rows = []
    for h in res.h_grid:
        rec = simulate.decimate(fine, h)
        for method in res.methods:
            start = time.perf_counter()
            npe = gap = resid = cond = None
            err = ""
            try:
                if method == "svf":
                    est = svf.identify_svf(rec, res.structure, res.filt, res.discard)
                    npe = metrics.normalized_param_error(est.theta, res.theta_star)
                    gap = metrics.nu_gap(res.plant, est.model).value
                    resid, cond = est.residual_norm, est.condition_number
                else:
                    na, nb, nk = res.arx_orders
                    model = fit_arx(rec, na, nb, nk)
                    gap = metrics.nu_gap(res.plant, model).value
                    resid, cond = model.residual_norm, model.condition_number
            except (ValueError, np.linalg.LinAlgError) as exc:
                err = str(exc)
            rows.append(
                SweepRow(res.name, method, h, r, npe, gap, resid, cond,
                         time.perf_counter() - start, err)
            )
    return rows


def _worker(args) -> tuple:
    res, r = args
    return r, _rows_for_realization(res, r)


def run_sweep(cfg: ExperimentConfig, jobs: int = 1) -> SweepResult:
    """Run the full (realization x h x method) grid and summarize it.

    Row order is deterministic: realization-major, then h descending, then
    method order from the config, regardless of worker scheduling.
    """
    res = resolve(cfg)
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")
    if jobs == 1 or res.realizations == 1:
        per_real = [_rows_for_realization(res, r) for r in range(res.realizations)]
    else:
        # Warm the jit cache in the parent so forked workers inherit it.
        from ._recursion import propagate

        propagate(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)),
                  np.zeros((1, 1)), np.zeros((2, 1)))
        with ProcessPoolExecutor(max_workers=min(jobs, res.realizations)) as pool:
            results = list(pool.map(_worker, [(res, r) for r in range(res.realizations)]))
        per_real = [rows for _, rows in sorted(results, key=lambda t: t[0])]
    rows = [row for rows_r in per_real for row in rows_r]
    return SweepResult(rows, summarize_rows(rows))


def summarize_rows(rows: list) -> dict:
    def quartiles(vals):
        q1, q2, q3 = np.percentile(vals, [25, 50, 75])
        return {"q1": float(q1), "median": float(q2), "q3": float(q3)}

    methods: dict = {}
    for row in rows:
        methods.setdefault(row.method, {}).setdefault(row.h, []).append(row)
    summary = {
        "rows": len(rows),
        "errors": sum(1 for r in rows if r.error),
        "methods": {},
    }
    for method, by_h in methods.items():
        per_h = {}
        mean_npe = {}
        for h, hrows in sorted(by_h.items(), reverse=True):
            ok = [r for r in hrows if not r.error]
            entry: dict = {"count": len(hrows), "errors": len(hrows) - len(ok)}
            gaps = [r.nu_gap for r in ok if r.nu_gap is not None]
            if gaps:
                entry["nu_gap"] = quartiles(gaps)
            npes = [r.normalized_param_error for r in ok
                    if r.normalized_param_error is not None]
            if npes:
                entry["normalized_param_error"] = quartiles(npes)
                entry["normalized_param_error"]["mean"] = float(np.mean(npes))
                mean_npe[h] = float(np.mean(npes))
            per_h[f"{h:.12g}"] = entry
        method_summary: dict = {"per_h": per_h}
        if len(mean_npe) >= 2 and all(v > 0 for v in mean_npe.values()):
            hs = sorted(mean_npe)
            method_summary["npe_slope"] = metrics.loglog_slope(
                hs, [mean_npe[h] for h in hs]
            )
        summary["methods"][method] = method_summary
    return summary


def _fmt(value, spec="%.12g") -> str:
    if value is None:
        return ""
    return spec % value


def rows_to_csv(rows: list, path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.preset,
                    r.method,
                    _fmt(r.h),
                    str(r.seed),
                    _fmt(r.normalized_param_error),
                    _fmt(r.nu_gap),
                    _fmt(r.residual_norm),
                    _fmt(r.condition_number),
                    _fmt(r.wall_time_s, "%.6f"),
                    r.error,
                ]
            )


def verify_lemma1(filt: lti.RationalTransfer, h_list) -> dict:
    """Check h * ||F||_2^2 against the ZOH-sampled ||F_h||_2^2.

    Passes when the ratio approaches 1 monotonically for h <= 1e-2 and is
    within 2 percent at the smallest h.
    """
    h_list = sorted(float(h) for h in h_list)
    if not h_list or h_list[0] <= 0:
        raise ConfigError("h list must contain positive values")
    ss = lti.realize(filt)
    ct_sq = lti.h2_norm_ct(ss) ** 2
    rows = []
    for h in h_list:
        dt_sq = lti.h2_norm_dt(lti.c2d_zoh(ss, h)) ** 2
        rows.append(
            {
                "h": h,
                "dt_norm_sq": dt_sq,
                "scaled_ct_norm_sq": h * ct_sq,
                "ratio": dt_sq / (h * ct_sq),
            }
        )
    checked = [r for r in rows if r["h"] <= 1e-2 + 1e-15]
    devs = [abs(r["ratio"] - 1.0) for r in sorted(checked, key=lambda r: -r["h"])]
    monotone = all(a >= b - 1e-12 for a, b in zip(devs, devs[1:]))
    closest = abs(rows[0]["ratio"] - 1.0)
    report = {
        "ct_norm_sq": ct_sq,
        "rows": rows,
        "monotone": monotone,
        "closest_ratio_dev": closest,
        "pass": bool(monotone and closest < 0.02),
    }
    return report


def verify_covariance(
    h_list=(1e-2, 1e-3, 1e-4),
    runs: int = 200,
    sigma: float = 1.0,
    t_final: float = 20.0,
    seed: int = 0,
) -> dict:
    """Monte Carlo check that trace Cov(theta_hat) scales like O(h).

    Regressor preset: phi(t) = [sin t, cos t] sampled on [0, t_final]. The
    analytic reference is sigma^2 h trace(R^{-1}) with R the continuous Gram
    matrix by quadrature. Passes when the fitted slope lies in [0.85, 1.15].
    """
    if runs < 2:
        raise ConfigError("need at least 2 runs to estimate a covariance")
    if sigma < 0:
        raise ConfigError("sigma must be non-negative")
    h_list = sorted(float(h) for h in h_list)
    t_ref = np.linspace(0.0, t_final, 200001)
    phi_ref = np.stack([np.sin(t_ref), np.cos(t_ref)], axis=1)
    R = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            R[i, j] = np.trapezoid(phi_ref[:, i] * phi_ref[:, j], t_ref)
    trace_Rinv = float(np.trace(np.linalg.inv(R)))
    rows = []
    for idx, h in enumerate(h_list):
        N = int(round(t_final / h)) + 1
        t = h * np.arange(N)
        Phi = np.stack([np.sin(t), np.cos(t)], axis=1)
        Minv = np.linalg.pinv(Phi)
        rng = simulate.noise_stream(seed, idx)
        devs = np.empty((runs, 2))
        for run in range(runs):
            devs[run] = sigma * (Minv @ rng.standard_normal(N))
        C = np.cov(devs.T, ddof=1)
        rows.append(
            {
                "h": h,
                "trace": float(np.trace(C)),
                "analytic_trace": sigma**2 * h * trace_Rinv,
            }
        )
    traces = [r["trace"] for r in rows]
    report = {
        "runs": runs,
        "sigma": sigma,
        "t_final": t_final,
        "trace_R_inv": trace_Rinv,
        "rows": rows,
    }
    if sigma == 0:
        report["slope"] = None
        report["pass"] = bool(all(tr == 0.0 for tr in traces))
    else:
        slope = metrics.loglog_slope([r["h"] for r in rows], traces)
        report["slope"] = slope
        report["pass"] = bool(0.85 <= slope <= 1.15)
    return report


def bode_table(truth, models: list, grid: metrics.FrequencyGrid) -> tuple:
    """Header and rows of dB magnitude and unwrapped phase, truth first.

    SISO only; columns come in (mag_db, phase_deg) pairs per model.
    """
    w = grid.omegas
    header = ["omega", "truth_mag_db", "truth_phase_deg"]
    resp = [metrics._model_response(truth, w)[:, 0, 0]]
    for k, model in enumerate(models):
        header += [f"m{k}_mag_db", f"m{k}_phase_deg"]
        resp.append(metrics._model_response(model, w)[:, 0, 0])
    cols = [w]
    for r in resp:
        if r.ndim != 1:
            raise ValueError("bode table supports single-output single-input models")
        cols.append(20.0 * np.log10(np.abs(r)))
        cols.append(np.degrees(np.unwrap(np.angle(r))))
    rows = np.stack(cols, axis=1)
    return header, rows


def write_bode_csv(path, header, rows) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.12g}" for v in row])
