"""Command-line interface: ``lamnrisk <subcommand> [options]``.

Exit status is 0 on success, 1 for usage or configuration errors and 2 for
numerical failures. A divergent bound is an answer, not a failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys

from . import __version__
from . import harness as H
from . import limit_experiment as LE
from . import losses as L
from . import mixing as M
from .bias import DEFAULT_CONFIG, SolverError, solve_beta0
from .bound import minimax_bound, minimax_bound_truncated
from .mixing import IntegrationError
from .models import make_model
from .quadrature import EvaluationError
from .rng import check_seed, substream

CSV_VERSION = "1"
NUMERICAL_ERRORS = (SolverError, EvaluationError, IntegrationError, H.HarnessError, ArithmeticError)


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _emit(args, text):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(kind, header, rows, meta=None):
    buf = io.StringIO()
    buf.write(f"# lamnrisk csv v{CSV_VERSION} {kind}\n")
    if meta is not None:
        buf.write("# config " + json.dumps(meta, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _json(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _load_config(path):
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _loss(text):
    if text is None:
        raise ConfigError("a loss is required (--loss or config)")
    try:
        return L.from_dict(text) if isinstance(text, dict) else L.parse(text)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad loss {text!r}: {exc}") from exc


def _mixing(text):
    if text is None:
        raise ConfigError("a mixing law is required (--mixing or config)")
    try:
        return M.from_dict(text) if isinstance(text, dict) else M.parse(text)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad mixing law {text!r}: {exc}") from exc


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


# -- subcommands -----------------------------------------------------------


def cmd_beta0(args):
    cfg = _load_config(args.config)
    loss = _loss(args.loss or cfg.get("loss"))
    ws = args.w or cfg.get("w")
    if not ws:
        raise ConfigError("at least one --w is required")
    ws = [ws] if isinstance(ws, (int, float)) else ws
    if any(not float(w) > 0 for w in ws):
        raise ConfigError("w must be positive")
    rows = []
    for w in map(float, ws):
        r = solve_beta0(loss, w, DEFAULT_CONFIG)
        rows.append((w, r.beta0, r.h_min, r.converged))
    if args.format == "json":
        _emit(args, _json([dict(zip(("w", "beta0", "h_min", "converged"), r)) for r in rows]))
    else:
        _emit(args, _csv("beta0", ("w", "beta0", "h_min", "converged"), rows, {"loss": loss.to_dict()}))
    print(f"beta0: {len(rows)} value(s), all converged={all(r[3] for r in rows)}", file=sys.stderr)
    return 0 if all(r[3] for r in rows) else 2


def cmd_bound(args):
    cfg = _load_config(args.config)
    loss = _loss(args.loss or cfg.get("loss"))
    g = _mixing(args.mixing or cfg.get("mixing"))
    trunc = args.truncation if args.truncation is not None else cfg.get("truncation", loss.truncation)
    if trunc is not None and not trunc > 0:
        raise ConfigError("truncation must be positive")
    if trunc is not None:
        res = minimax_bound_truncated(loss.untruncated(), trunc, g)
    else:
        res = minimax_bound(loss, g)
    out = {
        "loss": loss.untruncated().to_dict(),
        "mixing": g.to_dict(),
        "truncation": trunc,
        "bound": res.value,
        "divergent": res.divergent,
    }
    _emit(args, _json(out))
    print("bound: divergent" if res.divergent else f"bound: {res.value:.10g}", file=sys.stderr)
    return 0


def cmd_simulate(args):
    seed = _require_seed(args)
    model = make_model(args.model, args.theta0)
    traj = model.simulate(args.n, substream(seed, 0), args.reps)
    st = model.local_stats(traj, mask_degenerate=True)
    meta = {"model": model.name, "theta0": model.theta0, "n": args.n, "reps": args.reps, "seed": seed}
    rows = zip(range(args.reps), st.W_n, st.Z_n, st.G_n, st.mle)
    if args.format == "json":
        _emit(args, _json({"config": meta, "delta_n": st.delta_n, "W_n": st.W_n.tolist(), "Z_n": st.Z_n.tolist(),
                           "G_n": st.G_n.tolist(), "mle": st.mle.tolist()}))
    else:
        rows = ((i, float(a), float(b), float(c), float(d)) for i, a, b, c, d in rows)
        _emit(args, _csv("simulate", ("path", "W_n", "Z_n", "G_n", "mle"), rows, meta))
    print(f"simulate: {args.reps} paths, delta_n={st.delta_n:.6g}", file=sys.stderr)
    return 0


def _require_seed(args, cfg=None):
    seed = args.seed if args.seed is not None else (cfg or {}).get("seed")
    if seed is None:
        raise ConfigError("--seed is required for stochastic subcommands")
    try:
        return check_seed(seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _risk_config(args, extra=None):
    raw = _load_config(args.config)
    seed = _require_seed(args, raw)
    d = dict(raw)
    d["seed"] = seed
    for key in ("model", "n", "reps", "workers", "chunk_size"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v
    if getattr(args, "theta0", None) is not None:
        d["t"] = args.theta0
    if getattr(args, "loss", None):
        d["loss"] = args.loss
    if getattr(args, "h_grid", None):
        d["h_grid"] = _floats(args.h_grid)
    if getattr(args, "estimators", None):
        d["estimators"] = args.estimators.split(",")
    d.update(extra or {})
    try:
        return H.RiskConfig.from_dict(d)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid risk config: {exc}") from exc


def cmd_risk(args):
    cfg = _risk_config(args)
    report = H.run_risk(cfg, compute_bound=not args.no_bound)
    if args.format == "csv":
        _emit(args, _csv("risk", ("estimator", "h", "risk", "stderr"), report.rows(), report.config))
    else:
        _emit(args, report.to_json(indent=2) + "\n")
    summary = ", ".join(f"{k}={v[0]:.4g}" for k, v in report.local_sup.items())
    print(f"risk: local-sup {summary}; bound={report.bound}", file=sys.stderr)
    return 0


def cmd_sweep(args):
    cfg = _risk_config(args, {"sweep": list(range(9)), "h_grid": [0.0]})
    report = H.run_risk(cfg, compute_bound=False)
    rows = [(k, r, se) for k, (r, se) in sorted(report.sweep.items())]
    if args.format == "csv":
        _emit(args, _csv("sweep", ("k", "risk", "stderr"), rows, report.config))
    else:
        _emit(args, _json({"config": report.config, "config_hash": report.config_hash,
                           "sweep": {str(k): [r, se] for k, r, se in rows}, "argmin": report.sweep_argmin()}))
    print(f"sweep: argmin k={report.sweep_argmin()}", file=sys.stderr)
    return 0


def cmd_diagnose(args):
    seed = _require_seed(args)
    rows = H.diagnose(args.model, args.theta0, _ints(args.n_list), args.reps, seed)
    meta = {"model": args.model, "theta0": args.theta0, "reps": args.reps, "seed": seed}
    if args.format == "csv":
        keys = ("n", "ks_W", "ks_G", "corr_G_W", "corr_G2_W")
        _emit(args, _csv("diagnose", keys, ([r[k] for k in keys] for r in rows), meta))
    else:
        _emit(args, _json({"config": meta, "diagnostics": rows}))
    print(f"diagnose: {len(rows)} sample size(s)", file=sys.stderr)
    return 0


def cmd_limit(args):
    seed = _require_seed(args)
    loss = _loss(args.loss)
    g = _mixing(args.mixing)
    risk_loss = loss.truncated(args.truncation) if args.truncation else loss
    sigma = math.sqrt(args.prior_var)
    out = {"config": {"loss": loss.to_dict(), "mixing": g.to_dict(), "prior_var": args.prior_var,
                      "truncation": args.truncation, "reps": args.reps, "seed": seed}}
    for i, (name, xi) in enumerate((("bayes_diffuse", LE.bayes_estimator(loss)),
                                    ("posterior_mean_diffuse", LE.posterior_mean_estimator(loss)))):
        r = LE.bayes_risk_mc(xi, g, risk_loss, args.reps, substream(seed, i), sigma=sigma)
        out[name] = {"risk": r.risk, "stderr": r.stderr}
    b = minimax_bound_truncated(loss, args.truncation, g) if args.truncation else minimax_bound(loss, g)
    out["bound"] = b.value
    out["bound_divergent"] = b.divergent
    _emit(args, _json(out))
    print(f"limit: bayes risk {out['bayes_diffuse']['risk']:.4g}, bound {b.value}", file=sys.stderr)
    return 0


def build_parser():
    p = _Parser(prog="lamnrisk", description="Asymmetric-loss minimax risk in LAMN models.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt="json", stochastic=False):
        sp.add_argument("--config", help="JSON config file; flags override its fields")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("json", "csv"), default=fmt)
        if stochastic:
            sp.add_argument("--seed", type=int, help="64-bit seed (required)")
            sp.add_argument("--workers", type=int)

    sp = sub.add_parser("beta0", help="optimal bias correction beta0(w)")
    common(sp, "csv")
    sp.add_argument("--loss", help="e.g. linex:a=1,b=1 or check:c1=4,c2=1,trunc=50")
    sp.add_argument("--w", type=float, nargs="+")
    sp.set_defaults(func=cmd_beta0)

    sp = sub.add_parser("bound", help="minimax lower bound")
    common(sp)
    sp.add_argument("--loss")
    sp.add_argument("--mixing", help="chi2_1, exp1 or point:w0=4")
    sp.add_argument("--truncation", type=float)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("simulate", help="simulate paths and local statistics")
    common(sp, "csv", stochastic=True)
    sp.add_argument("--model", choices=("ar1", "gw"), required=True)
    sp.add_argument("--theta0", type=float, default=2.0)
    sp.add_argument("--n", type=int, default=30)
    sp.add_argument("--reps", type=int, default=1000)
    sp.set_defaults(func=cmd_simulate)

    for name, func, help_ in (("risk", cmd_risk, "Monte Carlo risk report"),
                              ("sweep", cmd_sweep, "risk along the shifted-estimator family")):
        sp = sub.add_parser(name, help=help_)
        common(sp, stochastic=True)
        sp.add_argument("--model", choices=("ar1", "gw"))
        sp.add_argument("--theta0", type=float, help="centre t of the neighbourhood")
        sp.add_argument("--n", type=int)
        sp.add_argument("--reps", type=int)
        sp.add_argument("--loss")
        sp.add_argument("--chunk-size", dest="chunk_size", type=int)
        if name == "risk":
            sp.add_argument("--h-grid", dest="h_grid", help="comma-separated local points")
            sp.add_argument("--estimators", help="comma-separated: mle,corrected")
            sp.add_argument("--no-bound", action="store_true")
        sp.set_defaults(func=func)

    sp = sub.add_parser("diagnose", help="convergence of (W_n, G_n) to the limit")
    common(sp, stochastic=True)
    sp.add_argument("--model", choices=("ar1", "gw"), required=True)
    sp.add_argument("--theta0", type=float, default=2.0)
    sp.add_argument("--n-list", dest="n_list", default="10,20,30")
    sp.add_argument("--reps", type=int, default=10_000)
    sp.set_defaults(func=cmd_diagnose)

    sp = sub.add_parser("limit", help="Bayes risk in the limit experiment")
    common(sp, stochastic=True)
    sp.add_argument("--loss", default="linex:a=1,b=1")
    sp.add_argument("--mixing", default="point:w0=1")
    sp.add_argument("--prior-var", dest="prior_var", type=float, default=1e4)
    sp.add_argument("--truncation", type=float, default=1e3)
    sp.add_argument("--reps", type=int, default=100_000)
    sp.set_defaults(func=cmd_limit)
    return p


def run(argv=None):
    """Parse ``argv`` and run the subcommand; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        return args.func(args)
    except ConfigError as exc:
        print(f"lamnrisk: error: {exc}", file=sys.stderr)
        return 1
    except NUMERICAL_ERRORS as exc:
        print(f"lamnrisk: numerical failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # invalid parameters caught by the library (e.g. theta0 outside the model region)
        print(f"lamnrisk: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
