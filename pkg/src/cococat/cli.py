"""Command-line interface: ``cococat {price,sweep,calibrate,simulate,validate}``.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical or fit
failure, 3 input/output error, 4 validation failed (some ``|z| > 3``).
Output files default to ``$COCOCAT_OUTPUT_DIR`` (or the working directory).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import calibration as cal
from .config import load_config, model_to_json, parse_config, severity_to_json
from .errors import ConfigError, DataError, FitError, NumericalToleranceError, ParameterError
from .loss_models import ILA, PLA
from .montecarlo import simulate_price
from .pricing import price, riskless_value, sweep, write_sweep_csv
from .validation import validate

__all__ = ["main", "build_parser", "parse_grid", "OUTPUT_ENV"]

OUTPUT_ENV = "COCOCAT_OUTPUT_DIR"
EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO, EXIT_VALIDATION = 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def parse_grid(text):
    """``"a,b,c"`` or ``"start:stop:count"`` into a list of floats."""
    text = text.strip()
    if not text:
        raise ConfigError("empty grid")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"range {text!r} must read start:stop:count")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(f"range {text!r} must read start:stop:count") from None
        if count < 1:
            raise ConfigError("range count must be positive")
        return [float(v) for v in np.linspace(start, stop, count)]
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"grid {text!r} is not a list of numbers") from None
    if not values:
        raise ConfigError("empty grid")
    return values


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _output_path(arg, default_name):
    if arg:
        return Path(arg)
    return Path(os.environ.get(OUTPUT_ENV, ".")) / default_name


def _write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _apply_overrides(cfg, args):
    raw = json.loads(json.dumps(cfg.raw))
    for key in ("d1", "d2"):
        value = getattr(args, key, None)
        if value is not None:
            raw["model"][key] = value
    for key in ("nu", "zeta"):
        value = getattr(args, key, None)
        if value is not None:
            raw["covenant"][key] = value
    var = raw.setdefault("variants", {})
    if getattr(args, "variant_coupon", None):
        var["coupon"] = args.variant_coupon
    if getattr(args, "variant_exponent", None):
        var["exponent"] = args.variant_exponent
    sim = raw.setdefault("simulation", {})
    if getattr(args, "paths", None) is not None:
        sim["n_paths"] = args.paths
    if getattr(args, "seed", None) is not None:
        sim["seed"] = args.seed
    return parse_config(raw)


def cmd_price(args):
    cfg = _apply_overrides(load_config(args.config), args)
    res = price(cfg.covenant, cfg.market, cfg.model, cfg.impact, cfg.variants, cfg.numerics)
    out = res.as_dict()
    out["riskless_bound"] = riskless_value(cfg.covenant, cfg.market, cfg.variants.coupon)
    text = _dump(out) + "\n"
    if args.out:
        _write_text(args.out, text)
    sys.stdout.write(text)
    return 0


def _monotone(values, increasing):
    diffs = np.diff(values)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(values))))
    return bool(np.all(diffs >= -tol) if increasing else np.all(diffs <= tol))


def _sweep_verdicts(rows):
    verdicts = {}
    axes = (("D2", ("D1", "nu", "q"), True), ("D1", ("D2", "nu", "q"), True),
            ("nu", ("D1", "D2", "q"), False))
    for axis, fixed, increasing in axes:
        groups = {}
        for row in rows:
            groups.setdefault(tuple(row[k] for k in fixed), []).append(row)
        ok = True
        for members in groups.values():
            if len(members) < 2:
                continue
            members = sorted(members, key=lambda r: r[axis])
            ok &= _monotone([r["total"] for r in members], increasing)
        verdicts[f"{'nondecreasing' if increasing else 'nonincreasing'}_in_{axis}"] = ok
    return verdicts


def cmd_sweep(args):
    # the grid flags are strings here, so only the variant switches are overrides
    switches = argparse.Namespace(variant_coupon=args.variant_coupon,
                                  variant_exponent=args.variant_exponent)
    cfg = _apply_overrides(load_config(args.config), switches)
    d1 = parse_grid(args.d1) if args.d1 is not None else None
    d2 = parse_grid(args.d2) if args.d2 is not None else None
    nu = parse_grid(args.nu) if args.nu is not None else None
    qs = parse_grid(args.quantiles) if args.quantiles is not None else None
    if qs is not None and any(not (0.0 < q < 1.0) for q in qs):
        raise ConfigError("quantile orders must lie in (0, 1)")
    if all(g is None for g in (d1, d2, nu, qs)):
        raise ConfigError("sweep needs at least one of --d1, --d2, --nu, --quantiles")
    rows = sweep(cfg.covenant, cfg.market, cfg.model, cfg.impact, d1=d1, d2=d2, nu=nu,
                 quantiles=qs, variants=cfg.variants, numerics=cfg.numerics)
    path = _output_path(args.out, "sweep.csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, path)
    totals = [r["total"] for r in rows]
    summary = {"rows": len(rows), "csv": str(path), "min_total": min(totals),
               "max_total": max(totals), "monotonicity": _sweep_verdicts(rows)}
    sys.stdout.write(_dump(summary) + "\n")
    return 0


def _fit_region(samples, families):
    positive = samples[samples > 0]
    best, reports = cal.select_family(positive, families)
    admissible = [r for r in reports if r.family in cal.PRICING_FAMILIES]
    if not admissible:
        raise FitError("no pricing-admissible family could be fitted")
    return admissible[0], reports, int(samples.size - positive.size)


def cmd_calibrate(args):
    data = cal.load_losses(args.data)
    if args.cpi:
        data = cal.adjust_cpi(data, cal.load_index(args.cpi))
    families = tuple(f.strip() for f in args.families.split(",")) if args.families \
        else cal.FAMILIES
    unknown = set(families) - set(cal.FAMILIES)
    if unknown:
        raise ConfigError(f"unknown families {sorted(unknown)}")
    intensity = cal.estimate_hpp_intensity(data)
    lam = intensity.params["lambda"]
    report = {"mode": args.mode, "n_events": data.n_events,
              "window_years": data.window_years, "intensity": intensity.as_dict()}
    if args.mode == "ILA":
        fit1, reps1, ex1 = _fit_region(data.loss1, families)
        fit2, reps2, ex2 = _fit_region(data.loss2, families)
        model = ILA(lam, fit1.distribution(), fit2.distribution(), 1.0, 1.0)
        report["severity1"] = {"selected": fit1.family, "excluded_zero": ex1,
                               "candidates": [r.as_dict() for r in reps1]}
        report["severity2"] = {"selected": fit2.family, "excluded_zero": ex2,
                               "candidates": [r.as_dict() for r in reps2]}
    else:
        fit, reps, ex = _fit_region(data.total, families)
        prop = cal.fit_proportion(data)
        model = PLA(lam, fit.distribution(), prop.distribution(), 1.0, 1.0)
        report["total_severity"] = {"selected": fit.family, "excluded_zero": ex,
                                    "candidates": [r.as_dict() for r in reps]}
        report["proportion"] = prop.as_dict()
    impact = cal.impact_coefficients(args.delta, model)
    report["impact"] = {"alpha": impact.alpha, "beta": impact.beta, "delta": args.delta}

    template = load_config(args.template).raw
    new = json.loads(json.dumps(template))
    model_json = model_to_json(model)
    model_json["d1"] = template["model"]["d1"]
    model_json["d2"] = template["model"]["d2"]
    new["model"] = model_json
    new["impact"] = {"alpha": impact.alpha, "beta": impact.beta}
    parse_config(new)       # emitted configs must validate
    out_path = _output_path(args.out, "calibrated.cfg")
    _write_text(out_path, _dump(new) + "\n")
    report["config"] = str(out_path)
    sys.stdout.write(_dump(report) + "\n")
    return 0


def cmd_simulate(args):
    cfg = _apply_overrides(load_config(args.config), args)
    est = simulate_price(cfg.covenant, cfg.market, cfg.model, cfg.impact, cfg.simulation,
                         dump_path=args.dump)
    out = est.as_dict()
    out["seed"] = cfg.simulation.seed
    text = _dump(out) + "\n"
    if args.out:
        _write_text(args.out, text)
    sys.stdout.write(text)
    return 0


def cmd_validate(args):
    cfg = _apply_overrides(load_config(args.config), args)
    report = validate(cfg, trigger_paths=args.trigger_paths,
                      negative_control=args.negative_control)
    text = _dump(report) + "\n"
    if args.out:
        _write_text(args.out, text)
    sys.stdout.write(text)
    return 0 if report["passed"] else EXIT_VALIDATION


def _common(p, overrides=True, sim=False):
    p.add_argument("config", help="JSON configuration file or bundled name (paper-ila.cfg)")
    if overrides:
        p.add_argument("--d1", type=float, help="override threshold D1")
        p.add_argument("--d2", type=float, help="override threshold D2")
        p.add_argument("--nu", type=float, help="override conversion exponent")
        p.add_argument("--zeta", type=float, help="override conversion fraction")
    p.add_argument("--variant-exponent", choices=("proof", "theorem"))
    p.add_argument("--variant-coupon", choices=("minus", "plus"))
    if sim:
        p.add_argument("--paths", type=int, help="number of Monte Carlo paths")
        p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output file")


def build_parser():
    parser = _Parser(prog="cococat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("price", help="closed-form price breakdown as JSON")
    _common(p)
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("sweep", help="price over a grid of thresholds, exponents or quantiles")
    p.add_argument("config")
    p.add_argument("--d1", help="D1 grid: list a,b,c or range start:stop:count")
    p.add_argument("--d2", help="D2 grid")
    p.add_argument("--nu", help="nu grid")
    p.add_argument("--quantiles", help="quantile orders q; sets D1, D2 to severity quantiles")
    p.add_argument("--variant-exponent", choices=("proof", "theorem"))
    p.add_argument("--variant-coupon", choices=("minus", "plus"))
    p.add_argument("--out", help="CSV path (default $COCOCAT_OUTPUT_DIR/sweep.csv)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="fit a model to a loss history and emit a config")
    p.add_argument("data", help="CSV with header date,loss_region1,loss_region2")
    p.add_argument("--mode", choices=("ILA", "PLA"), default="ILA")
    p.add_argument("--delta", type=float, default=0.02,
                   help="share-price drop caused by an average loss")
    p.add_argument("--cpi", help="optional CSV date,index for inflation adjustment")
    p.add_argument("--families", help="comma list of candidate severity families")
    p.add_argument("--template", default="paper-ila.cfg",
                   help="config supplying contract and market terms")
    p.add_argument("--out", help="emitted config (default $COCOCAT_OUTPUT_DIR/calibrated.cfg)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("simulate", help="Monte Carlo price estimate")
    _common(p, sim=True)
    p.add_argument("--dump", help="CSV receiving per-path payoffs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="analytic versus Monte Carlo z-scores")
    _common(p, sim=True)
    p.add_argument("--trigger-paths", type=int, help="paths for the trigger-law checks")
    p.add_argument("--negative-control", action="store_true",
                   help="perturb kappa by 0.1 in the martingale checks")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"cococat: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalToleranceError, FitError) as exc:
        print(f"cococat: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, DataError) as exc:
        print(f"cococat: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
