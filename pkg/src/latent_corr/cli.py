"""Command-line driver.

Exit status: 0 on success, 1 on a usage or input error, 2 on a numerical
failure. Data goes to ``--output`` or standard output; diagnostics go to
standard error. Every table starts with ``#`` comment lines naming the tool
version, the resolved configuration and the seed.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
import warnings
from typing import Sequence

import numpy as np

from . import __version__
from . import dist as dist_mod
from . import experiments as ex
from . import likelihood as lik
from . import stocks
from .errors import DegenerateFrequencyError, DomainError, FormatError, NumericalError, ParameterError
from .estimators import CSV_COLUMNS, binary_mle, hidden_pairs, trinary_moment, ustat_common_corr
from .model import (
    BinarySample,
    TrinarySample,
    discretize_binary,
    discretize_trinary,
    read_sample_csv,
    sample_to_csv,
    simulate_latent,
)
from .tables import provenance_lines, read_table, table_to_string

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
FAMILIES = [f.value for f in dist_mod.Family]

# config-file keys that differ from flag destinations
CONFIG_ALIASES = {"n_list": "ns", "output_path": "output"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- argument helpers -------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _grid(text) -> list[float]:
    """``lo:hi:step`` (inclusive) or a comma-separated list."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        if ":" in text:
            lo, hi, step = (float(v) for v in text.split(":"))
            k = int(math.floor((hi - lo) / step + 1e-9))
            return [round(lo + i * step, 12) for i in range(k + 1)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _add_model_flags(p: argparse.ArgumentParser, thresholds: bool = True) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--case", choices=["1", "2", "3"], help="preset setting (wins over explicit flags)")
    g.add_argument("--noise", choices=FAMILIES, help="law of the idiosyncratic terms")
    g.add_argument("--noise-df", type=float, help="degrees of freedom when --noise scaled_t")
    g.add_argument("--factor", choices=FAMILIES, help="law of the shared factor")
    g.add_argument("--factor-df", type=float, help="degrees of freedom when --factor scaled_t")
    g.add_argument("--a-star", type=float, help="common correlation a*")
    if thresholds:
        g.add_argument("--tau", type=float, help="binary threshold")
        g.add_argument("--tau1", type=float, help="lower trinary break point")
        g.add_argument("--tau2", type=float, help="upper trinary break point")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", "-o", help="output file (default: standard output)")
    p.add_argument("--format", choices=["csv", "json"], default="csv", dest="out_format")


def _add_workers(p: argparse.ArgumentParser) -> None:
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: $LATENT_CORR_WORKERS or 1)")


def resolve_case(args) -> ex.CaseSpec:
    """Build the case from ``--case`` or the explicit model flags."""
    explicit = {
        "noise": _law(getattr(args, "noise", None), getattr(args, "noise_df", None)),
        "factor": _law(getattr(args, "factor", None), getattr(args, "factor_df", None)),
        "a_star": getattr(args, "a_star", None),
        "tau": getattr(args, "tau", None),
        "tau1": getattr(args, "tau1", None),
        "tau2": getattr(args, "tau2", None),
    }
    explicit = {k: v for k, v in explicit.items() if v is not None}
    if args.case is not None:
        preset = ex.get_case(args.case)
        clash = [k for k, v in explicit.items() if getattr(preset, k) != v]
        if clash:
            warnings.warn(f"--case {args.case} overrides --{', --'.join(k.replace('_', '-') for k in clash)}")
        return preset
    if not explicit:
        return ex.get_case("1")
    base = ex.get_case("1")
    return ex.CaseSpec("custom", **{**{k: getattr(base, k) for k in ("noise", "factor", "a_star", "tau", "tau1", "tau2")}, **explicit})


def _law(name, df):
    if name is None:
        if df is not None:
            raise UsageError("a --*-df flag needs the matching law flag")
        return None
    return dist_mod.from_name(name, df)


def _workers(args) -> int:
    w = getattr(args, "workers", None)
    if w is None:
        return ex.default_workers()
    if w < 1:
        raise UsageError("--workers must be at least 1")
    return w


# -- output --------------------------------------------------------------------------------


def _config_dict(args, case: ex.CaseSpec | None = None) -> dict:
    skip = {"func", "config", "output", "out_format"}
    d = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    if case is not None:
        d["case_spec"] = case.to_dict()
    return d


def _emit(args, columns, rows, config: dict, seed=None) -> None:
    header = provenance_lines(config, seed)
    if args.out_format == "json":
        text = json.dumps(
            {"header": header, "columns": list(columns), "rows": [list(r) for r in rows]},
            indent=1,
            default=_json_default,
        ) + "\n"
    else:
        text = table_to_string(columns, rows, header)
    _write(args, text)


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return str(v)


def _write(args, text: str) -> None:
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- subcommands ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    case = resolve_case(args)
    cfg = case.config()
    if args.n is None or args.n < 1:
        raise UsageError("--n must be given and at least 1")
    ls = simulate_latent(cfg, args.n, args.seed, args.fixed_y)
    disc = None
    if args.binary:
        disc = discretize_binary(ls, cfg.tau)
    elif args.trinary:
        disc = discretize_trinary(ls, cfg.tau1, cfg.tau2)
    header = provenance_lines(_config_dict(args, case), args.seed)
    header.append(f"factor_draw: {ls.y!r}")
    text = "".join(f"# {h}\n" for h in header) + sample_to_csv(ls, disc)
    _write(args, text)
    return EXIT_OK


def _curve(args, kind: str) -> int:
    case = resolve_case(args)
    cfg = case.config()
    grid = args.grid
    if args.sample:
        with open(args.sample) as fh:
            x, disc, col = read_sample_csv(fh.read())
        b = BinarySample.from_bits(disc) if col == "bit" else discretize_binary(x, cfg.tau)
        if kind == "log-lik":
            curves = [lik.normalized_loglik_curve(b, cfg, grid, seed="input")]
        else:
            curves = [lik.scaled_likelihood_curve(b, cfg, grid, seed="input")]
        rows = [r for c in curves for r in c.rows()]
    else:
        n = args.n
        cs = ex.curve_experiment(case, n, args.n_curves, grid, args.seed, n_trinary=None)
        rows = [r for r in cs.rows() if r[2].startswith(kind)]
    if args.log10 and kind == "log-lik":
        rows = [(a, v / math.log(10.0), k, n, s) for a, v, k, n, s in rows]
    _emit(args, ("a", "value", "kind", "n", "seed"), rows, _config_dict(args, case), args.seed)
    return EXIT_OK


def cmd_loglik_curve(args) -> int:
    return _curve(args, "log-lik")


def cmd_scaled_lik_curve(args) -> int:
    return _curve(args, "scaled-lik")


def cmd_estimate(args) -> int:
    case = resolve_case(args)
    cfg = case.config()
    if args.input:
        with open(args.input) as fh:
            x, disc, col = read_sample_csv(fh.read())
    else:
        ls = simulate_latent(cfg, args.n, args.seed)
        x, disc, col = ls.x, None, None
    m = args.method
    if m == "trinary_moment":
        t = TrinarySample.from_cats(disc) if col == "cat" else discretize_trinary(x, cfg.tau1, cfg.tau2)
        rec = trinary_moment(t, cfg.tau1, cfg.tau2, cfg.noise)
    elif m == "binary_mle":
        b = BinarySample.from_bits(disc) if col == "bit" else discretize_binary(x, cfg.tau)
        rec = binary_mle(b, cfg)
    elif m == "hidden_pairs":
        rec = hidden_pairs(x)
    else:
        rec = ustat_common_corr(x)
    _emit(args, CSV_COLUMNS, [rec.csv_row()], _config_dict(args, case), args.seed)
    return EXIT_OK


def cmd_mc_sweep(args) -> int:
    case = resolve_case(args)
    res = ex.mc_error_sweep(case, args.ns, args.reps, args.seed, _workers(args))
    _emit(args, ex.MCResult.COLUMNS, res.table(), _config_dict(args, case), args.seed)
    return EXIT_OK


def cmd_slope(args) -> int:
    src = args.input if args.input else io.StringIO(sys.stdin.read())
    try:
        df = read_table(src)
    except Exception as exc:  # pandas raises several parser error types
        raise FormatError(f"cannot read sweep table: {exc}") from None
    if not {"n", "mean_abs_err"} <= set(df.columns):
        raise FormatError("sweep table needs columns n and mean_abs_err")
    key = "case_id" if "case_id" in df.columns else None
    groups = df.groupby(key, sort=False) if key else [("", df)]
    rows = [(str(cid), ex.loglog_slope((g["n"].to_numpy(), g["mean_abs_err"].to_numpy()))) for cid, g in groups]
    _emit(args, ("case_id", "slope"), rows, _config_dict(args))
    return EXIT_OK


def cmd_kl_curve(args) -> int:
    case = resolve_case(args)
    for a in (args.a1, args.a2):
        if not 0.0 < a < 1.0:
            raise UsageError("--a1 and --a2 must lie in (0, 1)")
    rows = ex.kl_curve(case, args.a1, args.a2, args.ns)
    _emit(args, ex.KL_COLUMNS, rows, _config_dict(args, case))
    return EXIT_OK


def cmd_check_dist(args) -> int:
    laws = []
    if args.family:
        laws.append(("law", dist_mod.from_name(args.family, args.df)))
    else:
        case = resolve_case(args)
        laws += [("noise", case.noise), ("factor", case.factor)]
    grid = np.linspace(args.lo, args.hi, args.points)
    rows = []
    for role, d in laws:
        mass, mean, var = dist_mod.moments(d)
        # each law is checked both as noise (B) and as factor (A, C)
        rep = dist_mod.check_regularity(d, d, grid, threshold=args.threshold)
        rows.append((
            role, d.name, mass, mean, var,
            rep.max_abs_dgamma, max(rep.max_abs_d3_logcdf, rep.max_abs_d3_logsf), rep.c_ratio,
            " ".join(rep.flags), " ".join(f"{z:g}" for z in rep.excluded),
        ))
    columns = ("role", "law", "mass", "mean", "var", "max_abs_dgamma", "max_abs_d3_log", "c_ratio", "flags", "excluded")
    _emit(args, columns, rows, _config_dict(args))
    return EXIT_OK


def cmd_stocks(args) -> int:
    sub = args.stocks_cmd
    if sub == "synthesize":
        panel = stocks.synthesize_prices(args.m, args.days, args.a_star, args.seed, args.window)
        header = "".join(f"# {h}\n" for h in provenance_lines(_config_dict(args), args.seed))
        _write(args, header + panel.to_long().to_csv(index=False))
        return EXIT_OK
    panel = stocks.ingest_prices(args.input, args.price_format)
    if panel.rejected:
        print(f"rejected rows: {panel.rejected}", file=sys.stderr)
    if sub == "ingest":
        columns = ("date", *panel.tickers)
        rows = [(d.strftime("%Y-%m-%d"), *row) for d, row in zip(panel.dates, panel.close)]
        _emit(args, columns, rows, _config_dict(args))
        return EXIT_OK
    sp = stocks.rolling_standardize(stocks.log_returns(panel), args.window)
    if sub == "qq":
        if args.date:
            hit = np.flatnonzero(sp.dates == np.datetime64(args.date))
            if hit.size == 0:
                raise UsageError(f"no standardized values for {args.date}")
            idx = int(hit[0])
        else:
            idx = args.index
        theo, emp = stocks.qq_data(sp.values[idx])
        _emit(args, stocks.QQ_COLUMNS, list(zip(theo, emp)), _config_dict(args))
        return EXIT_OK
    est = stocks.daily_estimates(sp, args.tau, args.tau1, args.tau2)
    _emit(args, stocks.DAILY_COLUMNS, [e.row() for e in est], _config_dict(args))
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="latent-corr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON file with default flag values")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate", help="draw a latent sample")
    _add_model_flags(s)
    s.add_argument("--n", type=int, help="sequence length (required)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--fixed-y", type=float, help="condition on this factor value")
    kind = s.add_mutually_exclusive_group()
    kind.add_argument("--binary", action="store_true")
    kind.add_argument("--trinary", action="store_true")
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_simulate)

    for name, fn, what in (
        ("loglik-curve", cmd_loglik_curve, "normalized log-likelihood curves"),
        ("scaled-lik-curve", cmd_scaled_lik_curve, "scaled likelihood curves"),
    ):
        c = sub.add_parser(name, help=what)
        _add_model_flags(c)
        c.add_argument("--n", type=int, default=1000)
        c.add_argument("--n-curves", type=int, default=10)
        c.add_argument("--grid", type=_grid, default=list(ex.DEFAULT_GRID), help="lo:hi:step or comma list")
        c.add_argument("--seed", type=int, default=0)
        c.add_argument("--sample", help="sample CSV from 'simulate' instead of simulated replications")
        c.add_argument("--log10", action="store_true", help="report log-likelihood in base 10")
        _add_output_flags(c)
        c.set_defaults(func=fn)

    e = sub.add_parser("estimate", help="estimate a* from a sample")
    _add_model_flags(e)
    e.add_argument("--method", required=True, choices=["trinary_moment", "binary_mle", "hidden_pairs", "ustat"])
    e.add_argument("--input", help="sample CSV from 'simulate' (default: simulate one)")
    e.add_argument("--n", type=int, default=1000)
    e.add_argument("--seed", type=int, default=0)
    _add_output_flags(e)
    e.set_defaults(func=cmd_estimate)

    m = sub.add_parser("mc-sweep", help="Monte Carlo error of the trinary estimator")
    _add_model_flags(m)
    m.add_argument("--ns", type=_int_list, default=[1000, 1500, 2000, 2500, 3000])
    m.add_argument("--reps", type=int, default=2000)
    m.add_argument("--seed", type=int, default=0)
    _add_workers(m)
    _add_output_flags(m)
    m.set_defaults(func=cmd_mc_sweep)

    sl = sub.add_parser("slope", help="log-log slope of a sweep table (stdin by default)")
    sl.add_argument("--input")
    _add_output_flags(sl)
    sl.set_defaults(func=cmd_slope)

    k = sub.add_parser("kl-curve", help="KL divergence between two correlations")
    _add_model_flags(k)
    k.add_argument("--a1", type=float, default=0.3)
    k.add_argument("--a2", type=float, default=0.7)
    k.add_argument("--n", "--ns", dest="ns", type=_int_list, default=[1000, 2000, 5000, 10000])
    _add_output_flags(k)
    k.set_defaults(func=cmd_kl_curve)

    st = sub.add_parser("stocks", help="stock-return pipeline")
    st_sub = st.add_subparsers(dest="stocks_cmd", parser_class=_Parser)
    st_sub.required = True
    for name, what in (("ingest", "pivot a price file"), ("estimate", "daily estimates"), ("qq", "Q-Q data for one date")):
        q = st_sub.add_parser(name, help=what)
        q.add_argument("--input", required=True)
        q.add_argument("--price-format", choices=["long", "wide"], default="long")
        q.add_argument("--window", type=int, default=100)
        if name == "estimate":
            q.add_argument("--tau", type=float, default=0.0)
            q.add_argument("--tau1", type=float, default=-0.5)
            q.add_argument("--tau2", type=float, default=0.5)
        if name == "qq":
            which = q.add_mutually_exclusive_group()
            which.add_argument("--date")
            which.add_argument("--index", type=int, default=0, help="row of the standardized panel")
        _add_output_flags(q)
        q.set_defaults(func=cmd_stocks)
    q = st_sub.add_parser("synthesize", help="prices from the Gaussian one-factor sequence")
    q.add_argument("--m", type=int, default=63)
    q.add_argument("--days", type=int, default=100)
    q.add_argument("--a-star", type=float, default=0.5)
    q.add_argument("--window", type=int, default=100)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--output", "-o")
    q.set_defaults(func=cmd_stocks)

    d = sub.add_parser("check-dist", help="moments and regularity proxies")
    _add_model_flags(d, thresholds=False)
    d.add_argument("--family", choices=FAMILIES)
    d.add_argument("--df", type=float)
    d.add_argument("--lo", type=float, default=-10.0)
    d.add_argument("--hi", type=float, default=10.0)
    d.add_argument("--points", type=int, default=2001)
    d.add_argument("--threshold", type=float, default=1e6)
    _add_output_flags(d)
    d.set_defaults(func=cmd_check_dist)
    return p


def _subparser(parser: argparse.ArgumentParser, names: Sequence[str]) -> argparse.ArgumentParser:
    for name in names:
        action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        parser = action.choices[name]
    return parser


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config) as fh:
            conf = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(conf, dict):
        raise UsageError("config file must hold a JSON object")
    names = [args.command] + ([args.stocks_cmd] if args.command == "stocks" else [])
    target = _subparser(parser, names)
    dests = {a.dest: a for a in target._actions}
    defaults = {}
    for key, val in conf.items():
        dest = CONFIG_ALIASES.get(key, key).replace("-", "_")
        if dest not in dests:
            raise UsageError(f"config key {key!r} does not apply to '{' '.join(names)}'")
        action = dests[dest]
        if isinstance(val, list) and action.type is _int_list:
            val = [int(v) for v in val]
        elif isinstance(val, (str, int, float)) and action.type in (_int_list, _grid):
            val = action.type(str(val))
        elif isinstance(val, list) and action.type is _grid:
            val = [float(v) for v in val]
        elif val is not None and action.type in (int, float):
            val = action.type(val)
        elif dest == "case" and val is not None:
            val = str(val)
        defaults[dest] = val
    # flags given on the command line override the file
    target.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("default")
        try:
            code = _dispatch(argv)
        finally:
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
    return code


def _dispatch(argv: list[str]) -> int:
    try:
        args = parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParameterError, DomainError, FormatError, FileNotFoundError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, DegenerateFrequencyError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)

if __name__ == "__main__":
    sys.exit(main())
