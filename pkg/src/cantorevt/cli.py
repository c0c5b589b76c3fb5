"""Command-line interface: ``cantorevt <command> [flags]``.

Every command writes CSV (or JSON for ``verify``) preceded by ``#`` comment
lines recording the package version and the fully resolved configuration.
Exit codes: 0 success, 1 domain or runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import DomainError, InvalidLawError, Params, PreconditionError, ResourceError
from .evt import limit_law_dependent, limit_law_iid
from .exactlaw import closed_form_law, make_levels, p_recursion, run_automaton_law
from .marginal import cdf, nu, quantile
from .simulate import (
    MonteCarloConfig,
    doa_convergence,
    empirical_max_law,
    estimate_extremal_index,
    simulate_ar,
)
from .svg import Panel, render
from .verify import SUITES, run_suites

FIGURES = {"1": (Fraction(1, 3), 0.5), "2": (Fraction(1, 2), 0.25), "3": (Fraction(1, 2), 0.75)}


class UsageError(Exception):
    """Bad flags or configuration (exit code 2)."""


def _number(text: str):
    """Parse a decimal or a fraction such as ``1/3`` (kept exact)."""
    text = str(text).strip()
    try:
        return Fraction(text) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _probability(text: str) -> float:
    return float(_number(text))


def _number_list(text: str):
    return [_number(t) for t in str(text).split(",") if t.strip()]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating, Fraction)):
        return "%.17g" % float(v)
    if v is None:
        return ""
    return str(v)


def _meta(v) -> str:
    """Config values in the metadata header; exact fractions stay exact."""
    if isinstance(v, list):
        return ",".join(_meta(t) for t in v)
    if isinstance(v, Fraction) and v.denominator != 1:
        return str(v)
    if isinstance(v, float):
        return repr(v + 0.0)
    return _fmt(v)


# ------------------------------------------------------------------ parsing


def _global_flags(top: bool = False) -> argparse.ArgumentParser:
    """Flags accepted before or after the command name.

    Copies attached to subcommands leave the namespace alone when the flag
    is absent, so a value given before the command name survives.
    """
    unset = {} if top else {"default": argparse.SUPPRESS}
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--config", metavar="PATH", help="key=value configuration file",
                   **({"default": None} if top else unset))
    g.add_argument("--seed", type=int, help="unsigned 64-bit seed", **({"default": 0} if top else unset))
    g.add_argument("--out", metavar="PATH", help="output file (default: standard output)",
                   **({"default": None} if top else unset))
    return g


def _law_flags() -> argparse.ArgumentParser:
    f = argparse.ArgumentParser(add_help=False)
    f.add_argument("--beta", type=_number, default=Fraction(1, 3))
    f.add_argument("--p", type=_probability, default=0.5)
    f.add_argument("--depth", type=int, default=64)
    return f


def build_parser() -> argparse.ArgumentParser:
    common = [_global_flags(), _law_flags()]
    parser = argparse.ArgumentParser(prog="cantorevt", description=__doc__.splitlines()[0],
                                     parents=[_global_flags(top=True)])
    parser.add_argument("--version", action="version", version=f"cantorevt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("cdf", parents=common, help="evaluate F_{beta,p}")
    grp = s.add_mutually_exclusive_group()
    grp.add_argument("--x", type=_number_list, help="comma-separated points")
    grp.add_argument("--grid", type=int, help="N+1 equally spaced points on [0, 1]")

    s = sub.add_parser("nu", parents=common, help="log-periodic component over one period")
    s.add_argument("--grid", type=int, default=256)

    s = sub.add_parser("quantile", parents=common, help="generalised inverse of F")
    grp = s.add_mutually_exclusive_group()
    grp.add_argument("--alpha", type=_number_list)
    grp.add_argument("--grid", type=int)

    s = sub.add_parser("simulate", parents=common, help="one trajectory X_0..X_m")
    s.add_argument("--m", type=int, default=100)

    s = sub.add_parser("max-law", parents=common, help="empirical versus limiting law of the maximum")
    s.add_argument("--x-grid", type=_number_list, default=[-1.0])
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--reps", type=int, default=100_000)
    s.add_argument("--mode", choices=("dep", "iid"), default="dep")

    s = sub.add_parser("extremal-index", parents=common, help="estimate the extremal index at x = -1")
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--reps", type=int, default=100_000)
    s.add_argument("--method", choices=("runs", "ratio", "both"), default="both")
    s.add_argument("--control", choices=("dependent", "iid"), default="dependent")
    s.add_argument("--boot", type=int, default=400)

    s = sub.add_parser("exact-law", parents=common, help="exact P(M_s <= u_n) by every available route")
    s.add_argument("--x", type=_number, default=-1.0)
    s.add_argument("--n", type=int, default=4)
    s.add_argument("--s", type=_number_list, help="comma-separated s (default 2..j_n+1)")

    s = sub.add_parser("verify", parents=[_global_flags()], help="run invariant suites")
    s.add_argument("--suite", choices=SUITES + ("all",), default="all")

    s = sub.add_parser("figures", parents=[_global_flags()], help="figure data as CSV and SVG")
    s.add_argument("--fig", choices=tuple(FIGURES) + ("convergence",), required=True)
    s.add_argument("--out-dir", default=".")
    s.add_argument("--grid", type=int, default=729)
    s.add_argument("--reps", type=int, default=20_000)
    return parser


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (t.strip() for t in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


_LIST_FLAGS = ("--x", "--x-grid", "--alpha", "--s")
_NEGATIVE = re.compile(r"^-(\d|\.\d)")


def _attach_values(argv):
    """Join list flags with values such as ``-1.5,-1`` that argparse would read as options."""
    out, i = [], 0
    argv = list(argv)
    while i < len(argv):
        tok = argv[i]
        if tok in _LIST_FLAGS and i + 1 < len(argv) and _NEGATIVE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def parse_args(argv):
    parser = build_parser()
    argv = _attach_values(argv)
    args = parser.parse_args(argv)
    if args.config:
        conf = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, raw in conf.items():
            if key in ("config", "command") or key not in known:
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            action = known[key]
            if any(tok == opt or tok.startswith(opt + "=") for tok in argv for opt in action.option_strings):
                continue  # flags override the file
            try:
                defaults[key] = action.type(raw) if action.type else raw
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"bad value for {key}: {raw!r}") from exc
            if action.choices is not None and defaults[key] not in action.choices:
                raise UsageError(f"bad value for {key}: {raw!r}")
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


# ------------------------------------------------------------------ output


def _resolved(args) -> list:
    skip = {"out", "config", "command"}
    return [(k, v) for k, v in sorted(vars(args).items()) if k not in skip]


def _header(args) -> list:
    lines = [f"# cantorevt {__version__}", f"# command: {args.command}"]
    for k, v in _resolved(args):
        lines.append(f"# {k}={_meta(v)}")
    return lines


def csv_text(args, columns, rows) -> str:
    buf = io.StringIO()
    buf.write("\n".join(_header(args)) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _params(args) -> Params:
    return Params(args.beta, args.p)


def _cfg(args) -> MonteCarloConfig:
    return MonteCarloConfig(seed=args.seed, replications=args.reps, depth=args.depth)


# ------------------------------------------------------------------ commands


def cmd_cdf(args):
    P = _params(args)
    if args.grid is not None:
        if args.grid < 1:
            raise UsageError("--grid must be >= 1")
        xs = [Fraction(i, args.grid) for i in range(args.grid + 1)]
    else:
        xs = args.x if args.x is not None else [0.5]
    rows = []
    for x in xs:
        v = cdf(P, x, args.depth)
        rows.append((x, v.value, v.error_bound, v.exact))
    return csv_text(args, ["x", "F", "error_bound", "exact"], rows)


def _nu_rows(P, grid, depth):
    period = math.log(P.beta)
    ts = [period * (1 - i / grid) + 0.0 for i in range(grid + 1)]
    return [(t, nu(P, t, depth)) for t in ts]


def cmd_nu(args):
    if args.grid < 1:
        raise UsageError("--grid must be >= 1")
    return csv_text(args, ["t", "nu"], _nu_rows(_params(args), args.grid, args.depth))


def cmd_quantile(args):
    P = _params(args)
    if args.grid is not None:
        alphas = [Fraction(i, args.grid) for i in range(args.grid + 1)]
    else:
        alphas = args.alpha if args.alpha is not None else [0.5]
    return csv_text(args, ["alpha", "x"], [(a, quantile(P, a, args.depth)) for a in alphas])


def cmd_simulate(args):
    P = _params(args)
    path = simulate_ar(P, MonteCarloConfig(args.seed, 1, args.depth), args.m)
    eps = np.concatenate([[0.0], path.innovations])
    rows = [(k, path.values[k], eps[k]) for k in range(args.m + 1)]
    return csv_text(args, ["k", "X", "epsilon"], rows)


def cmd_max_law(args):
    P = _params(args)
    if P.degenerate:
        raise DomainError("beta = p = 1/2 is excluded from the limit theorems")
    law = empirical_max_law(P, [float(x) for x in args.x_grid], args.n, _cfg(args), mode=args.mode)
    rows = []
    for x, est, ci in zip(law.x_grid, law.estimates, law.ci_halfwidths):
        rows.append((x, est, ci, limit_law_dependent(P, x, args.depth), limit_law_iid(P, x, args.depth)))
    return csv_text(args, ["x", "empirical", "ci", "theory_dep", "theory_iid"], rows)


def cmd_extremal_index(args):
    P = _params(args)
    methods = ("runs", "ratio") if args.method == "both" else (args.method,)
    rows = []
    for m in methods:
        e = estimate_extremal_index(P, args.n, _cfg(args), method=m, control=args.control, n_boot=args.boot)
        rows.append((m, e.estimate, e.ci_low, e.ci_high, P.p))
    return csv_text(args, ["method", "estimate", "ci_lo", "ci_hi", "theta_theory"], rows)


def cmd_exact_law(args):
    P = _params(args)
    lv = make_levels(P, args.x, args.n, args.depth)
    ss = [int(s) for s in args.s] if args.s else list(range(2, lv.j_n + 2))
    rows = []
    for s in ss:
        rec = p_recursion(P, lv, s) if 1 <= s <= lv.j_n + 1 else None
        closed = closed_form_law(P, lv, s) if 2 <= s <= lv.j_n + 1 else None
        auto = run_automaton_law(P, args.n, s) if float(args.x) == -1.0 else None
        rows.append((s, rec, closed, auto))
    return csv_text(args, ["s", "recursion", "closed_form", "automaton"], rows)


def cmd_verify(args):
    report = run_suites([args.suite], seed=args.seed)
    report["version"] = __version__
    return json.dumps(report, indent=2, sort_keys=True) + "\n", report["passed"]


def _write_figure(args, stem, columns, rows, out_dir):
    (out_dir / f"{stem}.csv").write_text(csv_text(args, columns, rows))


def cmd_figures(args):
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if args.fig in FIGURES:
        beta, p = FIGURES[args.fig]
        P = Params(beta, p)
        expo = math.log(p) / math.log(P.beta)
        grid = [Fraction(i, args.grid) for i in range(args.grid + 1)]
        rows = [(x, cdf(P, x).value, float(x) ** expo) for x in grid]
        nu_rows = _nu_rows(P, 256, 64)
        stem = f"fig{args.fig}"
        _write_figure(args, f"{stem}_cdf", ["x", "F", "reference"], rows, out_dir)
        _write_figure(args, f"{stem}_nu", ["t", "nu"], nu_rows, out_dir)
        left = Panel(f"F (beta={float(beta):.4g}, p={p})").add("F", [r[0] for r in rows], [r[1] for r in rows])
        left.add("x^(log p/log beta)", [r[0] for r in rows], [r[2] for r in rows])
        right = Panel("nu", xlabel="t").add("nu", [r[0] for r in nu_rows], [r[1] for r in nu_rows])
        (out_dir / f"{stem}.svg").write_text(render([left, right]))
        written = [f"{stem}_cdf.csv", f"{stem}_nu.csv", f"{stem}.svg"]
    else:
        P = Params(Fraction(1, 3), 0.5)
        doa = doa_convergence(P, -1.0, range(2, 13))
        _write_figure(args, "convergence_doa", ["n", "value", "gap", "identity_defect"],
                      [(r.n, r.value, r.gap, r.identity_defect) for r in doa], out_dir)
        xs = [-3.0, -2.0, -1.5, -1.0, -0.75, -0.5, -0.25]
        law = empirical_max_law(P, xs, 8, MonteCarloConfig(args.seed, args.reps))
        iid = empirical_max_law(P, xs, 8, MonteCarloConfig(args.seed, args.reps), mode="iid")
        rows = [(x, d, dc, i, ic, limit_law_dependent(P, x), limit_law_iid(P, x))
                for x, d, dc, i, ic in zip(law.x_grid, law.estimates, law.ci_halfwidths,
                                           iid.estimates, iid.ci_halfwidths)]
        _write_figure(args, "convergence_maxlaw",
                      ["x", "empirical_dep", "ci_dep", "empirical_iid", "ci_iid", "theory_dep", "theory_iid"],
                      rows, out_dir)
        left = Panel("|F(u_n)^k_n - limit|", xlabel="n").add("gap", [r.n for r in doa],
                                                            [math.log10(r.gap) for r in doa])
        right = Panel("max law, n=8").add("empirical dep", xs, [r[1] for r in rows])
        right.add("theory dep", xs, [r[5] for r in rows]).add("empirical iid", xs, [r[3] for r in rows])
        right.add("theory iid", xs, [r[6] for r in rows])
        (out_dir / "convergence.svg").write_text(render([left, right]))
        written = ["convergence_doa.csv", "convergence_maxlaw.csv", "convergence.svg"]
    return "".join(f"{out_dir / name}\n" for name in written)


COMMANDS = {
    "cdf": cmd_cdf,
    "nu": cmd_nu,
    "quantile": cmd_quantile,
    "simulate": cmd_simulate,
    "max-law": cmd_max_law,
    "extremal-index": cmd_extremal_index,
    "exact-law": cmd_exact_law,
    "figures": cmd_figures,
}


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except UsageError as exc:
        print(f"cantorevt: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse reports usage errors this way
        return int(exc.code or 0)
    try:
        if args.command == "verify":
            text, ok = cmd_verify(args)
            _emit(text, args.out)
            return 0 if ok else 1
        _emit(COMMANDS[args.command](args), args.out)
        return 0
    except UsageError as exc:
        print(f"cantorevt: {exc}", file=sys.stderr)
        return 2
    except (DomainError, PreconditionError, ResourceError, InvalidLawError, ValueError) as exc:
        print(f"cantorevt: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
