"""Batch command-line front end.

Commands consume a JSON run configuration and emit plot-ready CSV (flat
tables, 12 significant digits) or JSON (nested reports).  Exit codes:
0 success, 2 configuration error, 3 an equilibrium-existence or validation
condition failed, 4 numeric non-convergence.
"""

import argparse
import csv
import io
import json
import os
import sys
import tempfile

import numpy as np

from . import equilibria as eq
from . import revenue as rev
from . import simulate as sim
from .beliefs import DEFAULT_GRID, GameSetup
from .numerics import DEFAULT_SPEC, IntegrationError, QuadratureSpec
from .predictors import predictor_from_json, validate_predictor

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONDITION = 3
EXIT_NUMERIC = 4

_FORMATS = (eq.SECOND_PRICE, eq.FIRST_PRICE, eq.ALL_PAY)
_OBJECTIVES = (rev.REVENUE, rev.HIGHEST_BID)


class ConfigError(ValueError):
    pass


_KNOWN_KEYS = {
    "predictor", "m", "n", "formats", "format", "objective", "reserve",
    "items", "trials", "seed", "grid", "backend", "abs_tol", "rel_tol",
    "sweep", "checks",
}


def load_config(path, overrides):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = dict(raw)
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    if "predictor" not in cfg:
        raise ConfigError("config requires a 'predictor'")
    try:
        cfg["predictor"] = predictor_from_json(cfg["predictor"])
    except ValueError as exc:
        raise ConfigError(str(exc))
    m = cfg.get("m")
    if not isinstance(m, int) or m < 2:
        raise ConfigError("'m' must be an integer >= 2")
    n = cfg.get("n")
    if n is not None and not (isinstance(n, int) and 2 <= n <= m):
        raise ConfigError(f"'n' must be an integer in [2, {m}]")
    if "format" in cfg and "formats" not in cfg:
        cfg["formats"] = [cfg.pop("format")]
    fmts = cfg.get("formats", list(_FORMATS))
    if isinstance(fmts, str):
        fmts = [fmts]
    for f in fmts:
        if f not in _FORMATS:
            raise ConfigError(f"unknown format {f!r}")
    cfg["formats"] = fmts
    obj = cfg.get("objective", rev.REVENUE)
    if obj not in _OBJECTIVES:
        raise ConfigError(f"unknown objective {obj!r}")
    cfg["objective"] = obj
    reserve = float(cfg.get("reserve", 0.0))
    if not 0.0 <= reserve < 1.0:
        raise ConfigError("'reserve' must lie in [0, 1)")
    cfg["reserve"] = reserve
    cfg["backend"] = cfg.get("backend", "auto")
    if cfg["backend"] not in ("auto", "generic", "closed-form"):
        raise ConfigError(f"unknown backend {cfg['backend']!r}")
    cfg["trials"] = int(cfg.get("trials", 100_000))
    cfg["seed"] = int(cfg.get("seed", 0))
    items = int(cfg.get("items", 0))
    if items < 0:
        raise ConfigError("'items' must be non-negative")
    cfg["items"] = items
    grid = int(cfg.get("grid", DEFAULT_GRID))
    if grid < 33:
        raise ConfigError("'grid' must be at least 33")
    cfg["grid"] = grid
    try:
        cfg["spec"] = QuadratureSpec(
            abs_tol=float(cfg.get("abs_tol", DEFAULT_SPEC.abs_tol)),
            rel_tol=float(cfg.get("rel_tol", DEFAULT_SPEC.rel_tol)))
    except ValueError as exc:
        raise ConfigError(str(exc))
    return cfg


def _setup_kwargs(cfg):
    return {"grid_size": cfg["grid"], "spec": cfg["spec"]}


def _fmt_num(x):
    if x is None:
        return ""
    return f"{float(x):.12g}"


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt_num(c) if isinstance(c, (int, float))
                         and not isinstance(c, bool) else c for c in row])
    _atomic_write(path, buf.getvalue())


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def write_json(path, payload):
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _atomic_write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".prescreen-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _curves(cfg, objective):
    rows = []
    for fmt in cfg["formats"]:
        if objective == rev.HIGHEST_BID and fmt != eq.ALL_PAY:
            continue
        curve = rev.sweep_optimal_n(cfg["predictor"], cfg["m"], fmt,
                                    objective=objective,
                                    reserve=cfg["reserve"],
                                    backend=cfg["backend"],
                                    **_setup_kwargs(cfg))
        rows.append((fmt, curve))
    return rows


def cmd_revenue_curve(cfg, out):
    header = ["n", "format", "objective", "value", "existence", "reserve",
              "backend"]
    rows = []
    ns = [cfg["n"]] if cfg.get("n") else None
    for fmt, curve in _curves(cfg, cfg["objective"]):
        for p in curve.points:
            if ns and p.n not in ns:
                continue
            rows.append([p.n, fmt, cfg["objective"], p.value, p.existence,
                         cfg["reserve"], cfg["backend"]])
    write_csv(out, header, rows)
    return EXIT_OK


def cmd_optimal_n(cfg, out):
    header = ["n", "format", "objective", "value", "existence", "is_argmax",
              "reserve"]
    rows = []
    for fmt, curve in _curves(cfg, cfg["objective"]):
        for p in curve.points:
            rows.append([p.n, fmt, cfg["objective"], p.value, p.existence,
                         str(p.n == curve.argmax_n).lower(), cfg["reserve"]])
    write_csv(out, header, rows)
    return EXIT_OK


def cmd_compare(cfg, out):
    report = rev.ranking_report(cfg["predictor"], cfg["m"],
                                reserve=cfg["reserve"],
                                backend=cfg["backend"],
                                items=cfg["items"],
                                **_setup_kwargs(cfg))
    payload = {
        "m": cfg["m"],
        "reserve": cfg["reserve"],
        "rows": [{
            "n": r.n, "second-price": r.sp, "first-price": r.fp,
            "all-pay": r.ap, "uniform": r.uniform,
            "h2_nonpositive": {str(k): v for k, v in
                               r.h2_nonpositive.items()},
            "h_over_h2_decreasing": {str(k): v for k, v in
                                     r.h_over_h2_decreasing.items()},
        } for r in report.rows],
        "optimal": {k: {"n": v[0], "value": v[1]}
                    for k, v in report.optimal.items()},
        "optimal_ranking": report.optimal_ranking,
    }
    write_json(out, payload)
    return EXIT_OK


def _build_strategy(cfg, gs, fmt):
    if fmt == eq.SECOND_PRICE:
        return eq.sp_strategy(gs, cfg["reserve"])
    if fmt == eq.FIRST_PRICE:
        return eq.fp_strategy(gs, cfg["reserve"])
    return eq.ap_strategy(gs, cfg["reserve"])


def cmd_strategy(cfg, out):
    if not cfg.get("n"):
        raise ConfigError("'strategy' requires an explicit 'n'")
    gs = GameSetup(cfg["m"], cfg["n"], cfg["predictor"],
                   backend=cfg["backend"], **_setup_kwargs(cfg))
    header = ["v", "bid", "format", "n", "reserve", "cutoff", "existence"]
    rows = []
    code = EXIT_OK
    for fmt in cfg["formats"]:
        strat = _build_strategy(cfg, gs, fmt)
        if not strat.existence.verified:
            code = EXIT_CONDITION
        bids = strat.bid(gs.grid)
        for v, b in zip(gs.grid, bids):
            rows.append([v, None if np.isnan(b) else b, fmt, cfg["n"],
                         cfg["reserve"], strat.cutoff,
                         strat.existence.status])
    write_csv(out, header, rows)
    return code


def cmd_simulate(cfg, out):
    if not cfg.get("n"):
        raise ConfigError("'simulate' requires an explicit 'n'")
    gs = GameSetup(cfg["m"], cfg["n"], cfg["predictor"],
                   backend=cfg["backend"], **_setup_kwargs(cfg))
    payload = {}
    for fmt in cfg["formats"]:
        strat = _build_strategy(cfg, gs, fmt)
        scfg = sim.SimConfig(trials=cfg["trials"], seed=cfg["seed"],
                             format=fmt, reserve=cfg["reserve"])
        res = sim.run_sim(gs, strat, scfg)
        payload[fmt] = {
            "revenue_mean": res.revenue_mean,
            "revenue_stderr": res.revenue_stderr,
            "admission_freq": [float(f) for f in res.admission_freq],
            "sale_rate": res.sale_rate,
            "trials": res.trials,
            "seed": res.seed,
            "existence": strat.existence.status,
        }
    write_json(out, payload)
    return EXIT_OK


def cmd_check(cfg, out):
    requested = cfg.get("checks",
                        ["predictor", "fp-existence", "ap-existence",
                         "condition12"])
    report = {}
    failed = False
    vr = validate_predictor(cfg["predictor"])
    if "predictor" in requested:
        report["predictor"] = {
            "assumption1": vr.assumption1,
            "prd_v_given_s": vr.prd_v_given_s,
            "prd_s_given_v": vr.prd_s_given_v,
            "condition13": vr.condition13,
        }
        failed |= not vr.all_ok
    ns = [cfg["n"]] if cfg.get("n") else list(range(2, cfg["m"] + 1))
    if "fp-existence" in requested or "ap-existence" in requested:
        per_n = {}
        for n in ns:
            gs = GameSetup(cfg["m"], n, cfg["predictor"],
                           backend=cfg["backend"], **_setup_kwargs(cfg))
            entry = {}
            if "fp-existence" in requested:
                fp = eq.fp_strategy(gs, cfg["reserve"])
                entry["first-price"] = fp.existence.status
                failed |= not fp.existence.verified
            if "ap-existence" in requested:
                ap = eq.ap_existence_check(gs)
                entry["all-pay"] = ap.status
                entry["theta_monotone"] = ap.theta_monotone
                failed |= not ap.verified
            per_n[str(n)] = entry
        report["existence"] = per_n
    if "condition12" in requested:
        gs = GameSetup(cfg["m"], ns[0], cfg["predictor"],
                       backend=cfg["backend"], **_setup_kwargs(cfg))
        verdict = rev.condition12_check(gs)
        report["condition12"] = verdict.status
        failed |= not verdict.verified
    report["ok"] = not failed
    write_json(out, report)
    return EXIT_CONDITION if failed else EXIT_OK


def cmd_accuracy_sweep(cfg, out):
    """Revenue vs admitted number for a ladder of hallucinatory gammas."""
    sweep = cfg.get("sweep", [0.0, 0.25, 0.5, 0.75, 1.0])
    f1 = cfg["predictor"].f1
    f2 = cfg["predictor"].f2
    from .predictors import hallucinatory_predictor
    header = ["gamma", "n", "format", "objective", "value", "existence"]
    rows = []
    for gamma in sweep:
        pred = hallucinatory_predictor(float(gamma), f1, f2)
        for fmt in cfg["formats"]:
            curve = rev.sweep_optimal_n(pred, cfg["m"], fmt,
                                        objective=cfg["objective"],
                                        reserve=cfg["reserve"],
                                        backend=cfg["backend"],
                                        **_setup_kwargs(cfg))
            for p in curve.points:
                rows.append([gamma, p.n, fmt, cfg["objective"], p.value,
                             p.existence])
    write_csv(out, header, rows)
    return EXIT_OK


_COMMANDS = {
    "revenue-curve": cmd_revenue_curve,
    "optimal-n": cmd_optimal_n,
    "compare": cmd_compare,
    "strategy": cmd_strategy,
    "simulate": cmd_simulate,
    "check": cmd_check,
    "accuracy-sweep": cmd_accuracy_sweep,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="prescreen",
        description="Equilibria, revenue and prescreening for auctions "
                    "with copula-based valuation predictors.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run config")
    parser.add_argument("--out", default="-", help="output path (- = stdout)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--backend", choices=("auto", "generic",
                                              "closed-form"), default=None)
    parser.add_argument("--tol", type=float, default=None,
                        help="quadrature abs/rel tolerance override")
    args = parser.parse_args(argv)
    overrides = {"seed": args.seed, "trials": args.trials,
                 "backend": args.backend}
    try:
        if args.tol is not None:
            overrides["abs_tol"] = overrides["rel_tol"] = args.tol
        cfg = load_config(args.config, overrides)
        code = _COMMANDS[args.command](cfg, args.out)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except rev.ExistenceFailure as exc:
        print(f"existence failure: {exc}", file=sys.stderr)
        return EXIT_CONDITION
    except IntegrationError as exc:
        print(f"numeric non-convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return code


if __name__ == "__main__":
    sys.exit(main())
