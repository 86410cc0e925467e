"""Command-line front end.

Exit codes: 0 success, 1 a verifier's pass rule failed, 2 configuration
error (argparse uses 2 as well). Output files are UTF-8, comma-separated,
LF-terminated; identical config and base seed reproduce identical bytes
except for wall-clock columns.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

PROFILES = {
    "desk": {"fine_step": 1e-5, "h_grid": [1e-1, 1e-2, 1e-3, 1e-4], "realizations": 20},
    "paper": {
        "fine_step": 5e-6,
        "h_grid": [1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
        "realizations": 50,
    },
}


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="svfid",
        description="Continuous-time system identification experiments",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def add_common(p, out_required):
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--preset", help="benchmark preset name (alternative to --config)")
        p.add_argument("--out", type=Path, required=out_required, help="output directory")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument(
            "--profile",
            choices=sorted(PROFILES),
            default="desk",
            help="grid/realization defaults (explicit config values win)",
        )

    p = sub.add_parser("sweep", help="run the (h x seed x method) sweep")
    add_common(p, out_required=True)
    p.add_argument("--methods", help="comma list, e.g. svf,arx")

    p = sub.add_parser("verify-lemma1", help="check the O(h) sampled-norm scaling")
    p.add_argument("--filter", default="eqF", help="filter id or tf literal JSON")
    p.add_argument("--h", default="1e-1,1e-2,1e-3,1e-4", help="comma list of intervals")
    p.add_argument("--out", type=Path, help="optional output directory")

    p = sub.add_parser("verify-covariance", help="Monte Carlo O(h) covariance check")
    p.add_argument("--h", default="1e-2,1e-3,1e-4", help="comma list of intervals")
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="optional output directory")

    p = sub.add_parser("bode", help="identified frequency responses vs truth")
    add_common(p, out_required=True)
    p.add_argument("--h", type=float, help="sampling interval (default: smallest in grid)")

    p = sub.add_parser("nugap", help="nu-gap between two models")
    p.add_argument("--p1", required=True, help="preset name or model literal JSON")
    p.add_argument("--p2", required=True, help="preset name or model literal JSON")
    p.add_argument("--out", type=Path, help="optional output directory")

    p = sub.add_parser("simulate", help="dump one realization's records")
    add_common(p, out_required=True)
    p.add_argument("--realization", type=int, default=0)
    p.add_argument("--fine", action="store_true", help="also dump the fine-grid record")
    return top


def _load_cfg(args):
    from . import experiments

    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise experiments.ConfigError(f"config is not valid JSON: {exc}")
        if not isinstance(doc, dict):
            raise experiments.ConfigError("config document must be a JSON object")
    elif args.preset is not None:
        doc = {"preset": args.preset}
    else:
        raise experiments.ConfigError("provide --config or --preset")
    for key, value in PROFILES[getattr(args, "profile", "desk")].items():
        doc.setdefault(key, value)
    if getattr(args, "methods", None):
        doc["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    if args.seed is not None:
        doc["base_seed"] = args.seed
    return experiments.config_from_dict(doc)


def _parse_h_list(text: str):
    from . import experiments

    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise experiments.ConfigError(f"bad h list {text!r}: {exc}")
    if not values:
        raise experiments.ConfigError("h list must not be empty")
    return values


def _model_arg(text: str):
    from . import experiments, presets

    if text in presets.PRESET_NAMES:
        return presets.preset_catalog(text).plant
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise experiments.ConfigError(
            f"{text!r} is neither a preset name nor valid JSON: {exc}"
        )
    return experiments.model_from_literal(doc)


def _cmd_sweep(args) -> int:
    from . import experiments

    cfg = _load_cfg(args)
    result = experiments.run_sweep(cfg, jobs=args.jobs)
    args.out.mkdir(parents=True, exist_ok=True)
    experiments.rows_to_csv(result.rows, args.out / "rows.csv")
    with open(args.out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(args.out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(experiments.config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"sweep {cfg.preset}: {result.summary['rows']} rows, "
        f"{result.summary['errors']} errors -> {args.out}"
    )
    return 0


def _cmd_verify_lemma1(args) -> int:
    from . import experiments, lti, presets

    if args.filter.lstrip().startswith("{"):
        doc = json.loads(args.filter)
        filt_tf = lti.tf(doc["num"], doc["den"])
    else:
        if args.filter not in presets.FILTER_IDS:
            raise experiments.ConfigError(
                f"unknown filter id {args.filter!r}; choose from {presets.FILTER_IDS}"
            )
        num, den = presets._FILTER_TF[args.filter]
        filt_tf = lti.tf(num, den)
    report = experiments.verify_lemma1(filt_tf, _parse_h_list(args.h))
    for row in report["rows"]:
        print(
            f"h={row['h']:<8g} sampled={row['dt_norm_sq']:.6e} "
            f"scaled={row['scaled_ct_norm_sq']:.6e} ratio={row['ratio']:.6f}"
        )
    print(f"pass={report['pass']}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        with open(args.out / "lemma1.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if report["pass"] else 1


def _cmd_verify_covariance(args) -> int:
    from . import experiments

    report = experiments.verify_covariance(
        h_list=_parse_h_list(args.h), runs=args.runs, sigma=args.sigma, seed=args.seed
    )
    for row in report["rows"]:
        print(
            f"h={row['h']:<8g} trace={row['trace']:.6e} "
            f"analytic={row['analytic_trace']:.6e}"
        )
    slope = report["slope"]
    print(f"slope={'n/a' if slope is None else f'{slope:.4f}'} pass={report['pass']}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        with open(args.out / "covariance.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0 if report["pass"] else 1


def _cmd_bode(args) -> int:
    from . import experiments, metrics, simulate, svf

    cfg = _load_cfg(args)
    h = args.h if args.h is not None else min(cfg.h_grid)
    cfg.h_grid = [h]
    res = experiments.resolve(cfg)
    models = []
    skipped = 0
    for r in range(res.realizations):
        simcfg = experiments._realization_sim_config(res, r)
        fine = simulate.simulate_closed_loop(res.plant_ss, res.controller, simcfg)
        rec = simulate.decimate(fine, h)
        try:
            models.append(svf.identify_svf(rec, res.structure, res.filt, res.discard).model)
        except ValueError:
            skipped += 1
    grid = metrics.FrequencyGrid.log_spaced(1e-2, 1e2)
    header, rows = experiments.bode_table(res.plant, models, grid)
    args.out.mkdir(parents=True, exist_ok=True)
    experiments.write_bode_csv(args.out / "bode.csv", header, rows)
    print(
        f"bode: truth + {len(models)} estimates ({skipped} skipped) "
        f"-> {args.out / 'bode.csv'}"
    )
    return 0


def _cmd_nugap(args) -> int:
    from . import experiments, metrics

    result = metrics.nu_gap(_model_arg(args.p1), _model_arg(args.p2))
    doc = result.to_json_dict()
    print(json.dumps(doc, indent=2, sort_keys=True))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        with open(args.out / "nugap.json", "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_simulate(args) -> int:
    from . import experiments, simulate

    cfg = _load_cfg(args)
    res = experiments.resolve(cfg)
    if not 0 <= args.realization < res.realizations:
        raise experiments.ConfigError(
            f"realization must lie in [0, {res.realizations - 1}]"
        )
    simcfg = experiments._realization_sim_config(res, args.realization)
    fine = simulate.simulate_closed_loop(res.plant_ss, res.controller, simcfg)
    args.out.mkdir(parents=True, exist_ok=True)
    if args.fine:
        simulate.write_record_csv(args.out / "fine.csv", fine.times, fine.u, fine.y)
    for h in res.h_grid:
        rec = simulate.decimate(fine, h)
        simulate.write_record_csv(
            args.out / f"sampled_h{h:g}.csv", rec.times, rec.u, rec.y
        )
    print(f"simulate {cfg.preset} realization {args.realization} -> {args.out}")
    return 0


_COMMANDS = {
    "sweep": _cmd_sweep,
    "verify-lemma1": _cmd_verify_lemma1,
    "verify-covariance": _cmd_verify_covariance,
    "bode": _cmd_bode,
    "nugap": _cmd_nugap,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    from . import experiments

    try:
        return _COMMANDS[args.command](args)
    except experiments.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
