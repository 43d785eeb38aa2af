"""Command-line interface: ``greedy-ldp <subcommand> [options]``.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 infeasible or
outside the domain.  Any option can also come from ``--config FILE`` holding
``key = value`` lines (keys are option names; command-line flags win).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import hamiltonian as ham
from .checks import run_all
from .deviations import deviation_point, rate_curve_regular, rate_vs_epsilon
from .dynamics import path_columns, run_to_absorption, write_path_csv
from .errors import (ContractViolation, HamiltonianDomainError, Infeasible, InvalidInput,
                     NumericalFailure, SingularityError)
from .legendre import cost_general, cost_regular
from .model import (DegreeDistribution, DegreeSequence, make_regular, parse_probs,
                    read_distribution_file)
from .montecarlo import THREADS_ENV, default_threads, ensemble
from .odeflow import DEFAULT_STEP, fluid_limit, hamilton_path, hamilton_path_regular

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_DOMAIN = 0, 2, 3, 4
COMMANDS = ("simulate", "fluid", "hamilton", "rate-curve", "deviation", "montecarlo", "cost",
            "hamiltonian", "validate")
_NOT_SAVED = {"config", "save_config", "func"}


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# run configuration

def _encode(value) -> str:
    if isinstance(value, str):
        try:
            json.loads(value)
        except ValueError:
            return value
        return json.dumps(value)
    return json.dumps(value)


def _decode(text: str):
    try:
        return json.loads(text)
    except ValueError:
        return text


@dataclass
class RunConfig:
    """Subcommand plus its options, keyed by option name (``rate-curve`` style
    dashes are stored as underscores)."""

    command: str
    options: dict = field(default_factory=dict)

    @property
    def model(self) -> dict:
        return {k: self.options[k] for k in ("regular", "probs", "dist_file", "degrees")
                if self.options.get(k) is not None}

    @property
    def N(self):
        return self.options.get("n")

    @property
    def seed(self):
        return self.options.get("seed")

    @property
    def step(self):
        return self.options.get("step")

    @property
    def outputs(self) -> dict:
        return {k: self.options[k] for k in ("out", "json") if self.options.get(k) is not None}

    def to_text(self) -> str:
        lines = [f"command = {self.command}"]
        for key in sorted(self.options):
            value = self.options[key]
            if value is not None:
                lines.append(f"{key} = {_encode(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        command = None
        options = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"config line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key == "command":
                command = value
            else:
                options[key] = _decode(value)
        return cls(command, options)

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:12]

    def metadata(self) -> str:
        return f"greedy-ldp {__version__} config={self.digest()} seed={self.seed}"


# --------------------------------------------------------------------------
# argument parsing

def _floats(text):
    try:
        return [float(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from exc


def _range(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}")
    return vals


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _model_args(p, sequence=False):
    g = p.add_argument_group("model")
    g.add_argument("--regular", type=int, metavar="D", help="d-regular degree law")
    g.add_argument("--probs", help="degree law p0,p1,...,pD (fractions allowed)")
    g.add_argument("--dist-file", help="degree law file with 'j = p_j' lines")
    if sequence:
        g.add_argument("--degrees", help="explicit degree sequence d1,d2,...,dN")
        g.add_argument("--n", type=int, help="number of vertices N")


def _common(p, out_help="CSV output path"):
    p.add_argument("--config", help="key = value file supplying defaults for any option")
    p.add_argument("--save-config", help="write the effective configuration to this file")
    p.add_argument("--out", help=out_help)
    p.add_argument("--json", help="also write the JSON summary to this file")
    p.add_argument("--gnuplot", action="store_true", help="write <out>.gp plotting the CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="greedy-ldp", description="Greedy independent sets on configuration-model "
                     "graphs: simulation, fluid limits and large-deviation rates.",
                     epilog=f"Default worker threads come from ${THREADS_ENV}.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="one exploration run; CSV path of rescaled counts")
    _model_args(p, sequence=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--thin", type=int, default=1, help="record every k-th step")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fluid", help="fluid limit ODE; CSV path ending at T*")
    _model_args(p)
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.add_argument("--every", type=int, default=1, help="write every k-th grid row (T* row always kept)")
    _common(p)
    p.set_defaults(func=cmd_fluid)

    p = sub.add_parser("hamilton", help="Hamilton trajectory from launch adjoint alpha0")
    _model_args(p)
    p.add_argument("--alpha0", type=_floats, required=False,
                   help="scalar (d-regular reduced system) or D+3 comma separated entries")
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.add_argument("--every", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_hamilton)

    p = sub.add_parser("rate-curve", help="F(alpha0) and T_alpha0 on a grid (d-regular)")
    p.add_argument("--regular", type=int, metavar="D")
    p.add_argument("--range", type=_range, default=[-1.0, 1.0], metavar="A,B")
    p.add_argument("--points", type=int, default=41)
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.add_argument("--threads", type=int, default=None)
    _common(p, "CSV output (alpha0, T_alpha0, F)")
    p.set_defaults(func=cmd_rate_curve)

    p = sub.add_parser("deviation", help="rate of P(T_N*/N >= T*+eps) or <= T*-eps (d-regular)")
    p.add_argument("--regular", type=int, metavar="D")
    p.add_argument("--eps", type=_floats, help="one value, or a list for a CSV curve")
    p.add_argument("--side", choices=("upper", "lower"), default="upper")
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.add_argument("--threads", type=int, default=None)
    _common(p, "CSV output (eps, alpha0, T_alpha0, F)")
    p.set_defaults(func=cmd_deviation)

    p = sub.add_parser("montecarlo", help="replica ensemble of T_N*/N; JSON summary, CSV histogram")
    _model_args(p, sequence=True)
    p.add_argument("--replicas", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=_floats, default=None)
    p.add_argument("--side", choices=("upper", "lower"), default="upper")
    p.add_argument("--threads", type=int, default=None)
    _common(p, "CSV histogram output (fraction, probability)")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("cost", help="Legendre-dual cost L(x, beta)")
    p.add_argument("--regular", type=int, metavar="D", help="use the closed form on x = (s, u, e)")
    p.add_argument("--x", type=_floats)
    p.add_argument("--beta", type=_floats)
    _common(p)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("hamiltonian", help="H(x, alpha) and its gradients")
    p.add_argument("--x", type=_floats)
    p.add_argument("--alpha", type=_floats)
    _common(p)
    p.set_defaults(func=cmd_hamiltonian)

    p = sub.add_parser("validate", help="built-in cross-check suite")
    p.add_argument("--points", type=int, default=100)
    _common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices.get(name)
    return None


_NUMBERS = re.compile(r"^-[\d.]+(e[-+]?\d+)?(,[-+\d.e]*)*$", re.IGNORECASE)


def _glue_negative(argv):
    """``--range -1,1`` -> ``--range=-1,1`` (argparse would read ``-1,1`` as a flag)."""
    out = []
    for tok in argv:
        if out and _NUMBERS.match(tok) and out[-1].startswith("--") and "=" not in out[-1]:
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def parse(argv) -> tuple:
    """``(namespace, RunConfig)`` with config-file values merged under the flags."""
    argv = _glue_negative(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise UsageError("a subcommand is required")
    if getattr(args, "config", None):
        try:
            cfg = RunConfig.from_text(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        if cfg.command not in (None, args.command):
            raise UsageError(f"config is for '{cfg.command}', not '{args.command}'")
        sp = _subparser(parser, args.command)
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(cfg.options) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        defaults = {}
        for key, value in cfg.options.items():
            action = next(a for a in sp._actions if a.dest == key)
            if action.type is not None and not isinstance(value, str):
                value = str(value) if not isinstance(value, list) else ",".join(map(repr, value))
            defaults[key] = value
        sp.set_defaults(**defaults)
        args = parser.parse_args(argv)
    opts = {k: v for k, v in vars(args).items() if k not in _NOT_SAVED and k != "command" and v is not None}
    return args, RunConfig(args.command, opts)


# --------------------------------------------------------------------------
# helpers

def _distribution(args) -> DegreeDistribution:
    given = [k for k in ("regular", "probs", "dist_file") if getattr(args, k, None) is not None]
    if len(given) != 1:
        raise InvalidInput("give exactly one of --regular, --probs, --dist-file")
    if args.regular is not None:
        return DegreeDistribution.regular(args.regular)
    if args.probs is not None:
        return parse_probs(args.probs)
    return read_distribution_file(args.dist_file)


def _sequence(args) -> DegreeSequence:
    if getattr(args, "degrees", None):
        try:
            degrees = np.array([int(tok) for tok in args.degrees.split(",") if tok.strip()])
        except ValueError as exc:
            raise InvalidInput(f"bad degree list {args.degrees!r}") from exc
        return DegreeSequence(degrees)
    if args.n is None:
        raise InvalidInput("--n is required unless --degrees is given")
    if args.regular is not None and args.probs is None and args.dist_file is None:
        return make_regular(args.regular, args.n)
    return DegreeSequence.from_distribution(_distribution(args), args.n)


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise InvalidInput(f"missing required option(s): {' '.join(missing)}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def _emit(args, cfg: RunConfig, summary: dict) -> None:
    summary = {"metadata": cfg.metadata(), **summary}
    text = json.dumps(_jsonable(summary), indent=1)
    print(text)
    if getattr(args, "json", None):
        Path(args.json).write_text(text + "\n")


def _write_csv(path, header, rows, metadata) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {metadata}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _gnuplot(args, xcol: str, ycols: list, header: list, title: str, style="lines") -> None:
    if not (args.gnuplot and args.out):
        return
    idx = {name: i + 1 for i, name in enumerate(header)}
    plots = ", ".join(f"'{args.out}' using {idx[xcol]}:{idx[y]} with {style} title '{y}'" for y in ycols)
    script = (f"set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n"
              f"set title '{title}'\nset xlabel '{xcol}'\nplot {plots}\n")
    Path(str(args.out) + ".gp").write_text(script)


def _thin_rows(table, every):
    if every < 1:
        raise InvalidInput("--every must be >= 1")
    keep = np.zeros(len(table), dtype=bool)
    keep[::every] = True
    keep[-1] = True
    return table[keep]


# --------------------------------------------------------------------------
# subcommands

def cmd_simulate(args, cfg):
    seq = _sequence(args)
    res = run_to_absorption(seq, args.seed, thin=args.thin)
    table = res.rescaled()
    header = path_columns(table.shape[1] - 4)
    if args.out:
        write_path_csv(args.out, table, cfg.metadata())
        _gnuplot(args, "t", header[1:], header, f"simulated path, N = {seq.N}")
    _emit(args, cfg, {"N": seq.N, "T_star_steps": res.T_star_steps,
                      "independent_set_fraction": res.independent_set_fraction})


def cmd_fluid(args, cfg):
    traj = fluid_limit(_distribution(args), args.step)
    table = _thin_rows(traj.table(), args.every)
    header = path_columns(table.shape[1] - 4)
    if args.out:
        write_path_csv(args.out, table, cfg.metadata())
        _gnuplot(args, "t", header[2:], header, "fluid limit")
    _emit(args, cfg, {"T_star": traj.T_star, "stop_times": traj.stop_times,
                      "reached_extinction": traj.reached_extinction})


def cmd_hamilton(args, cfg):
    _require(args, "alpha0")
    dist = _distribution(args)
    a0 = args.alpha0
    if len(a0) == 1 and dist.regular_degree is not None:
        sol = hamilton_path_regular(dist.regular_degree, a0[0], args.step)
    else:
        sol = hamilton_path(dist, np.array(a0), args.step)
    x = sol.trajectory.table()
    n = x.shape[1] - 1
    cols = path_columns(n - 3)
    if n == 3:
        cols[-1] = f"e_{dist.regular_degree}"
    header = cols + ["a_" + c for c in cols[1:]] + ["action"]
    table = _thin_rows(np.column_stack([x, sol.adjoint, sol.action_path]), args.every)
    if args.out:
        _write_csv(args.out, header, table, cfg.metadata())
        _gnuplot(args, "t", cols[2:] + ["action"], header, f"Hamilton path, alpha0 = {a0}")
    _emit(args, cfg, {"alpha0": sol.alpha0, "T_alpha0": sol.T_alpha0, "action": sol.action,
                      "horizon_reached": sol.horizon_reached})


def cmd_rate_curve(args, cfg):
    _require(args, "regular")
    curve = rate_curve_regular(args.regular, tuple(args.range), args.points, args.step, args.threads)
    header = ["alpha0", "T_alpha0", "F"]
    if args.out:
        _write_csv(args.out, header, curve.table(), cfg.metadata())
        _gnuplot(args, "alpha0", ["F"], header, f"F(alpha0), d = {args.regular}", "linespoints")
    for a, msg in curve.errors.items():
        print(f"warning: alpha0 = {a:g}: {msg}", file=sys.stderr)
    _emit(args, cfg, {"d": args.regular, "points": int(curve.alpha0_grid.size),
                      "failed_points": sorted(curve.errors), "rows": curve.table()})


def cmd_deviation(args, cfg):
    _require(args, "regular", "eps")
    if len(args.eps) == 1 and not args.out:
        p = deviation_point(args.regular, args.eps[0], args.side, args.step)
        _emit(args, cfg, {"d": p.d, "epsilon": p.epsilon, "side": p.side, "alpha0": p.alpha0,
                          "T_alpha0": p.T_alpha0, "rate": p.rate})
        return
    rows = rate_vs_epsilon(args.regular, args.eps, args.side, args.step, args.threads)
    header = ["eps", "alpha0", "T_alpha0", "F"]
    if args.out:
        _write_csv(args.out, header, rows, cfg.metadata())
        _gnuplot(args, "eps", ["F"], header, f"F(alpha0(T* +- eps)), d = {args.regular}", "linespoints")
    _emit(args, cfg, {"d": args.regular, "side": args.side, "rows": rows})


def cmd_montecarlo(args, cfg):
    seq = _sequence(args)
    threads = args.threads if args.threads is not None else default_threads()
    res = ensemble(seq, args.replicas, args.seed, threads, args.threshold or (), args.side)
    hist = res.histogram()
    header = ["fraction", "probability"]
    if args.out:
        _write_csv(args.out, header, list(hist.items()), cfg.metadata())
        _gnuplot(args, "fraction", ["probability"], header, f"T_N*/N, N = {seq.N}", "impulses")
    _emit(args, cfg, res.summary())


def cmd_cost(args, cfg):
    _require(args, "x", "beta")
    if args.regular is not None and len(args.x) == 3:
        c = cost_regular(args.regular, args.x, args.beta)
    else:
        c = cost_general(np.array(args.x), np.array(args.beta))
    _emit(args, cfg, {"value": c.value, "status": c.status, "maximizer": c.maximizer})


def cmd_hamiltonian(args, cfg):
    _require(args, "x", "alpha")
    ev = ham.evaluate(np.array(args.x), np.array(args.alpha))
    _emit(args, cfg, {"H": ev.value, "grad_alpha": ev.grad_alpha, "grad_x": ev.grad_x})


def cmd_validate(args, cfg):
    results = run_all(args.points)
    for r in results:
        print(r.line(), file=sys.stderr)
    _emit(args, cfg, {"checks": {r.name: {"passed": r.passed, "worst": r.worst} for r in results}})
    if not all(r.passed for r in results):
        return EXIT_NUMERIC


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args, cfg = parse(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.save_config:
        Path(args.save_config).write_text(cfg.to_text())
    try:
        status = args.func(args, cfg)
    except (InvalidInput, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SingularityError, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (Infeasible, HamiltonianDomainError, ContractViolation) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK if status is None else status


if __name__ == "__main__":
    sys.exit(main())
