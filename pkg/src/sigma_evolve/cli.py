"""Command-line front end: ``sigma-evolve {theory,simulate,sweep,lemma,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from importlib import resources
from pathlib import Path

from . import harness, theory
from .harness import ConfigError, ExperimentRefused

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_VERIFY = 4

DEFAULT_OUT = "out"

log = logging.getLogger("sigma_evolve")


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def bundled_configs() -> list:
    root = resources.files("sigma_evolve") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def read_config(name: str) -> bytes:
    """Read a config file, falling back to a bundled config of that name."""
    path = Path(name)
    if path.is_file():
        return path.read_bytes()
    root = resources.files("sigma_evolve") / "configs"
    for candidate in (name, name + ".json"):
        res = root / candidate
        if res.is_file():
            return res.read_bytes()
    raise CliError(f"config not found: {name} (bundled: {', '.join(bundled_configs())})")


def out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get("SIGMA_EVOLVE_OUT", DEFAULT_OUT))


# theory ---------------------------------------------------------------------

def theory_summary(params: theory.ModelParams) -> dict:
    cls = theory.classify_regime(params)
    out = {"params": params.to_dict(), "regime": cls.regime.value, "reason": cls.reason,
           "boundary": cls.boundary, "non_integer_n": params.non_integer_n}
    if not cls.regime.covered:
        return out
    crit = theory.critical_exponent(params, cls.regime)
    rng = theory.admissible_p_range(params)
    rates = theory.decay_rates(params, cls.regime)
    w_u, w_grad = theory.solution_norm_weights(params, cls.regime)
    out.update({
        "critical_exponent": theory.to_json_number(crit.value),
        "p1": theory.to_json_number(crit.p1),
        "p2": theory.to_json_number(crit.p2),
        "p_range": rng.to_dict(),
        "rate_u": theory.to_json_number(rates.rate_u),
        "rate_grad": theory.to_json_number(rates.rate_grad),
        "weights": [theory.to_json_number(w_u), theory.to_json_number(w_grad)],
    })
    if params.p is not None:
        out["p_admissible"] = rng.contains(params.p)
        gn = {}
        for label, target in (("L^qp", params.q * params.p), ("L^m2p", params.m2 * params.p)):
            if target > 1:
                g = theory.gn_theta(0, params.sigma, target, params.q, params.n)
                gn[label] = {"theta": theory.to_json_number(g.theta), "valid": g.valid}
        out["gn_theta"] = gn
    return out


def _show(v) -> str:
    if isinstance(v, dict) and "value" in v:
        return str(v.get("exact", v["value"]))
    return "-" if v is None else str(v)


def print_theory(summary: dict):
    p = summary["params"]
    print("params  " + ", ".join(f"{k}={v}" for k, v in p.items()))
    print(f"regime  {summary['regime']}  ({summary['reason']})")
    if summary["non_integer_n"]:
        print("warning non-integer n")
    if "p_range" not in summary:
        return
    print(f"p_c     {_show(summary['critical_exponent'])}   p1={_show(summary['p1'])}  p2={_show(summary['p2'])}")
    rng = summary["p_range"]
    print(f"p-range {rng['interval']}  ({rng['reason']})")
    print(f"rates   ||u||_q ~ (1+t)^{_show(summary['rate_u'])}   gradient pair ~ (1+t)^{_show(summary['rate_grad'])}")
    if "p_admissible" in summary:
        print(f"p       {p['p']} {'admissible' if summary['p_admissible'] else 'not admissible'}")
        for label, g in summary["gn_theta"].items():
            print(f"GN      {label}: theta={_show(g['theta'])} {'valid' if g['valid'] else 'invalid'}")


def print_example_table(checks) -> None:
    print(f"{'n':>2}  {'region':<44} {'regime':<8} {'claimed p-range':<28} {'points':>6}  status")
    for c in checks:
        b = c.bullet
        status = "reproduced" if c.ok else f"MISMATCH: {c.mismatch}"
        print(f"{b.n:>2}  {b.region:<44} {b.regime.value:<8} {b.range_text:<28} {c.points:>6}  {status}")


def cmd_theory(args) -> int:
    if args.example:
        checks = theory.example_table()
        if args.json:
            print(json.dumps([{"label": c.bullet.label, "n": c.bullet.n, "region": c.bullet.region,
                               "regime": c.bullet.regime.value, "claimed": c.bullet.range_text,
                               "points": c.points, "agree": c.agree, "mismatch": c.mismatch}
                              for c in checks], indent=2))
        else:
            print_example_table(checks)
        return EXIT_OK
    missing = [k for k in ("n", "sigma", "q", "m1", "m2") if getattr(args, k) is None]
    if missing:
        raise CliError(f"{missing[0]}: required unless --example is given")
    try:
        params = theory.ModelParams(args.n, args.sigma, args.q, args.m1, args.m2, args.p)
    except theory.ParameterError as exc:
        raise CliError(str(exc)) from None
    summary = theory_summary(params)
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print_theory(summary)
    return EXIT_OK


# simulate / sweep -------------------------------------------------------------

def _load(args, want_sweep: bool):
    try:
        spec, plan = harness.parse_config(read_config(args.config))
    except ConfigError as exc:
        raise CliError(f"{args.config}: {exc}") from None
    if want_sweep and plan is None:
        raise CliError(f"{args.config}: sweep config needs a 'sweep' section")
    if not want_sweep and plan is not None:
        raise CliError(f"{args.config}: 'sweep' section is only valid for the sweep command")
    if args.strict and not spec.guard_ok:
        raise CliError(f"{args.config}: wrap-around guard violated (--strict)")
    return spec, plan


def cmd_simulate(args) -> int:
    spec, _ = _load(args, want_sweep=False)
    try:
        report = harness.run_decay_experiment(spec)
    except ExperimentRefused as exc:
        raise CliError(f"refused: {exc}") from None
    paths = harness.emit_report(report, out_dir(args))
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{spec.name}: {report.outcome}" +
          (f" at t={report.blowup_time:g}" if report.blowup_time is not None else ""))
    for label, fit, rate in (("rate_u", report.fit_u, report.theory_rates.rate_u),
                             ("rate_grad", report.fit_grad, report.theory_rates.rate_grad)):
        if fit is not None:
            print(f"  {label:<9} measured {fit.slope:+.4f}  theory {float(rate):+.4f}  "
                  f"diff {fit.slope - float(rate):+.4f}  r2 {fit.r2:.4f}")
    if report.weighted_norm is not None:
        print(f"  weighted solution norm {report.weighted_norm:.6g}")
    print(f"  wrote {paths[0]}")
    if not report.trajectory.completed:
        return EXIT_BLOWUP
    if args.check_rate is not None:
        diffs = [abs(f.slope - float(r)) for f, r in ((report.fit_u, report.theory_rates.rate_u),
                                                     (report.fit_grad, report.theory_rates.rate_grad))]
        if max(diffs) > args.check_rate:
            print(f"rate check failed: |difference| {max(diffs):.4f} > {args.check_rate}", file=sys.stderr)
            return EXIT_VERIFY
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec, plan = _load(args, want_sweep=True)
    workers = args.workers if args.workers is not None else plan.workers
    report = harness.critical_sweep(spec, plan.p_grid, plan.epsilon, workers=workers)
    paths = harness.emit_report(report, out_dir(args))
    print(f"{spec.name}: epsilon={plan.epsilon:g}, theory {report.theory}")
    for e in report.entries:
        slope = "" if e["slope"] is None else f" slope {e['slope']:+.3f}"
        extra = f" ({e['error']})" if e["error"] else ""
        print(f"  p={e['p']:<6g} {e['classification'] or 'Error'}{slope}{extra}")
    print(f"  bracket {report.bracket}")
    for v in report.violations:
        print(f"  monotonicity violation: {v}")
    print(f"  wrote {paths[0]}")
    return EXIT_OK


# lemma / report -------------------------------------------------------------

def cmd_lemma(args) -> int:
    if not (math.isfinite(args.a) and math.isfinite(args.b)):
        raise CliError("a and b must be finite")
    try:
        chk = harness.verify_integral_lemma(args.a, args.b)
    except ArithmeticError as exc:
        print(f"quadrature failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    log_note = " (I(t)/log(2+t))" if chk.log_factor else ""
    print(f"{chk.branch}, fitted {chk.fitted:+.2f}{log_note}, predicted {chk.predicted:+.2f}, "
          f"{'agree' if chk.agree else 'DISAGREE'}")
    if args.out or os.environ.get("SIGMA_EVOLVE_OUT"):
        harness.emit_report(chk, out_dir(args))
    return EXIT_OK if chk.agree else EXIT_VERIFY


def cmd_report(args) -> int:
    path = Path(args.path)
    if path.is_dir():
        path = path / "report.json"
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: malformed JSON at position {exc.pos}: {exc.msg}") from None
    if data.get("schema") != harness.SCHEMA_VERSION:
        raise CliError(f"{path}: unsupported schema {data.get('schema')!r}")
    kind = data.get("kind")
    print(f"{path}: {kind} report generated {data.get('generated_at')}")
    if kind == "decay":
        print(f"  {data['spec']['name']}: {data['outcome']}, regime {data['regime']}")
        for key in ("fit_u", "fit_grad"):
            f = data.get(key)
            if f:
                print(f"  {key}: measured {f['measured']:+.4f} theory {f['theoretical']:+.4f} "
                      f"diff {f['difference']:+.4f}")
        for w in data.get("warnings", []):
            print(f"  warning: {w}")
        return EXIT_BLOWUP if data["outcome"] == "BlowUp" else EXIT_OK
    if kind == "sweep":
        for e in data["entries"]:
            print(f"  p={e['p']:<6g} {e['classification']}")
        print(f"  bracket {data['bracket']}  theory {data['theory']}")
        return EXIT_OK
    if kind == "lemma":
        print(f"  a={data['a']} b={data['b']}: {data['branch']} fitted {data['fitted']:+.3f} "
              f"predicted {data['predicted']:+.3f} agree={data['agree']}")
        return EXIT_OK if data["agree"] else EXIT_VERIFY
    raise CliError(f"{path}: unknown report kind {kind!r}")


def _number(text: str):
    """Keep exact decimals/fractions as strings for the theory engine."""
    try:
        float(theory.as_number(text))
    except (TypeError, ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    return text


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sigma-evolve", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    t = sub.add_parser("theory", help="regime, critical exponent, p-range and decay rates")
    for name in ("n", "sigma", "q", "m1", "m2", "p"):
        t.add_argument(f"--{name}", type=_number)
    t.add_argument("--json", action="store_true")
    t.add_argument("--example", action="store_true", help="reproduce the worked example table")
    t.set_defaults(func=cmd_theory)

    s = sub.add_parser("simulate", help="run a decay experiment from a config")
    s.add_argument("config", help="config path or bundled name")
    s.add_argument("--out")
    s.add_argument("--strict", action="store_true", help="treat wrap-around guard warnings as errors")
    s.add_argument("--check-rate", type=float, metavar="TOL",
                   help="exit 4 when a measured rate differs from theory by more than TOL")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="classify runs over a p-grid")
    w.add_argument("config")
    w.add_argument("--out")
    w.add_argument("--workers", type=int)
    w.add_argument("--strict", action="store_true")
    w.set_defaults(func=cmd_sweep)

    lm = sub.add_parser("lemma", help="check the convolution-integral decay orders by quadrature")
    lm.add_argument("a", type=float)
    lm.add_argument("b", type=float)
    lm.add_argument("--out")
    lm.set_defaults(func=cmd_lemma)

    r = sub.add_parser("report", help="summarize an existing report")
    r.add_argument("path")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
