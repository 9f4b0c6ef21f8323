"""Command-line front end: ``ml``, ``solve``, ``verify``, ``dispersion`` and ``contour``.

Exit codes: 0 success, 1 a verification check failed, 2 the configuration
could not be parsed or validated, 3 a numerical error (its context goes to
the report).  A ``--config`` file holds flat ``key=value`` lines whose keys
are the long option names; values may be JSON (problem matrices, model
parameters).  Options given on the command line win over the file.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import contour_solver as cs
from .acceptance import CRITERIA, SuiteOptions, run_suite
from .degenerate_solver import solve_modewise, solve_series
from .errors import ConfigError, DegenFracError, NumericalError, UnknownModel
from .physics_models import DEFAULT_GRIDS, REGISTRY, build_model, dispersion
from .reports import BELOW, ReportLine, encode, grid_label
from .special_functions import mittag_leffler
from .spectral_calculus import SpectralField, SpectralGrid, read_snapshot, write_csv, write_snapshot

COMMANDS = ("ml", "solve", "verify", "dispersion", "contour")
EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


# -- value parsers (argparse ``type=`` callables) ---------------------------

def _complex(text: str) -> complex:
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _complex_list(text: str) -> list[complex]:
    return [_complex(t) for t in str(text).split(",") if t.strip()]


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _grid(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(t) for t in str(text).lower().split("x"))
        SpectralGrid(sizes)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a grid (powers of two >= 4, like 32x32): {text!r}") from None
    return sizes


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None


def _assignment(text: str) -> tuple[str, object]:
    key, sep, raw = str(text).partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        v = math.nan
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


# -- parser ---------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, out: bool = True) -> None:
    p.add_argument("--config", help="key=value file with option defaults")
    p.add_argument("--seed", type=int, default=0, help="seed for random data and sampled checks")
    if out:
        p.add_argument("--out", default=".", help="output directory")


def _model_options(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--model", required=required, help=f"one of: {', '.join(sorted(REGISTRY))}")
    p.add_argument("--param", type=_assignment, action="append", default=[], metavar="KEY=VALUE",
                   help="model parameter override (repeatable)")
    p.add_argument("--formulation", default=None, help="matricial_first_order or scalar_alpha2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="degenfrac", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("ml", help="evaluate E_{beta,gamma} at points (CSV)")
    _common(p)
    p.add_argument("--beta", type=_positive_float, required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--z", type=_complex_list, action="append", default=[], help="point(s), comma separated")
    p.add_argument("--csv", help="write to this file instead of stdout")

    p = sub.add_parser("solve", help="solve a named model, write DFRC1 and CSV snapshots")
    _common(p)
    _model_options(p, required=True)
    p.add_argument("--grid", type=_grid)
    p.add_argument("--times", type=_complex_list, default=[0.0, 0.5, 1.0, 2.0])
    p.add_argument("--route", choices=("modewise", "series"), default="modewise")
    p.add_argument("--data", help="DFRC1 snapshot with the data x' (default: seeded random field)")

    p = sub.add_parser("verify", help="run the acceptance suite, write a JSON-lines report")
    _common(p)
    p.add_argument("--model", help="restrict the per-model checks to this model")
    p.add_argument("--grid", type=_grid, help="grid for the per-model checks, like 32x32")
    p.add_argument("--criteria", type=_int_list, help="comma separated criterion numbers (default: all)")
    p.add_argument("--tolerance", type=_assignment, action="append", default=[], metavar="CHECK=TOL",
                   help="tolerance override for a check id (repeatable)")
    p.add_argument("--report", default="verify_report.jsonl", help="report file name inside --out")

    p = sub.add_parser("dispersion", help="print per-mode spectra of P2^{-1} P1 (CSV)")
    _common(p, out=False)
    _model_options(p, required=True)
    p.add_argument("--xi", type=_float_list, action="append", default=[], help="frequency, comma separated")
    p.add_argument("--grid", type=_grid, help="use every nonsingular lattice mode of this grid")
    p.add_argument("--csv", help="write to this file instead of stdout")

    p = sub.add_parser("contour", help="run a pencil scenario including the eps -> 0 sweep")
    _common(p)
    p.add_argument("--scenario", default="scalar", help=f"one of: {', '.join(cs.SCENARIOS)}")
    p.add_argument("--problem", help="PencilProblem as a JSON file path or inline JSON object")
    p.add_argument("--zeta", type=float, help="order override for a named scenario")
    p.add_argument("--r", type=_positive_float, help="arc radius override for a named scenario")
    p.add_argument("--a", type=_positive_float, help="damping shift override for a named scenario")
    p.add_argument("--epsilon", type=_positive_float, default=0.05)
    p.add_argument("--epsilons", type=_float_list, default=[0.04, 0.02, 0.01, 0.005, 0.0025])
    p.add_argument("--times", type=_float_list, default=[0.0, 0.5, 1.0, 2.0])
    p.add_argument("--points-per-segment", type=int, default=16)
    p.add_argument("--epsilon-floor", type=_positive_float, default=0.001)
    p.add_argument("--tolerance", type=_assignment, action="append", default=[], metavar="CHECK=TOL")
    return parser


# -- configuration files -------------------------------------------------------

def read_config(path: str) -> dict[str, str]:
    """Flat ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    out: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("_", "-")
        if not sep or not key:
            raise ConfigError(f"{path}:{number}: expected key=value, got {raw!r}")
        if key in out:
            raise ConfigError(f"{path}:{number}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _config_tokens(sub: argparse.ArgumentParser, config: dict[str, str], path: str) -> list[str]:
    actions = {opt[2:]: act for act in sub._actions for opt in act.option_strings if opt.startswith("--")}
    tokens: list[str] = []
    for key, value in config.items():
        if key in ("command", "config"):
            continue
        act = actions.get(key)
        if act is None:
            raise ConfigError(f"{path}: unknown key {key!r} for this command")
        values = [value]
        if isinstance(act, argparse._AppendAction) and value.startswith("["):
            try:
                values = [json.dumps(v) if not isinstance(v, str) else v for v in json.loads(value)]
            except json.JSONDecodeError:
                raise ConfigError(f"{path}: {key} is not a JSON list") from None
        for v in values:
            tokens += [f"--{key}", v]
    return tokens


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    """Parse ``argv``, merging a ``--config`` file if one is named."""
    argv = list(argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    config = read_config(known.config) if known.config else {}
    command = next((a for a in argv if a in COMMANDS), None)
    if command is None:
        command = config.get("command")
        if command is None:
            parser.error("a command is required: " + ", ".join(COMMANDS))
        if command not in COMMANDS:
            raise ConfigError(f"unknown command {command!r}; valid commands: {', '.join(COMMANDS)}")
        argv = [command] + argv
    elif "command" in config and config["command"] != command:
        raise ConfigError(f"config names command {config['command']!r} but {command!r} was given")
    sub = parser._subparsers._group_actions[0].choices[command]
    at = argv.index(command)
    merged = argv[: at + 1] + _config_tokens(sub, config, known.config or "") + argv[at + 1:]
    return parser.parse_args(merged)


# -- helpers ----------------------------------------------------------------

def _threads_env() -> None:
    raw = os.environ.get("DEGENFRAC_THREADS")
    if raw is None:
        return
    try:
        ok = int(raw) >= 1
    except ValueError:
        ok = False
    if not ok:
        raise ConfigError(f"DEGENFRAC_THREADS must be a positive integer, got {raw!r}")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def _tolerances(pairs) -> dict[str, float]:
    out = {}
    for key, value in pairs:
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not (value > 0):
            raise ConfigError(f"tolerance for {key!r} must be a positive number, got {value!r}")
        out[key] = float(value)
    return out


def _model(args):
    params = {}
    for key, value in args.param:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"model parameter {key!r} must be a number, got {value!r}")
        params[key] = float(value)
    if args.model not in REGISTRY:
        raise ConfigError(f"unknown model {args.model!r}; valid models: {', '.join(sorted(REGISTRY))}")
    return build_model(args.model, params, args.formulation)


def _error_line(exc: Exception, command: str, seed: int, model: str = "-", grid: str = "-") -> ReportLine:
    context = {"command": command, "error": type(exc).__name__, "message": str(exc)}
    xi = getattr(exc, "xi", None)
    if xi is not None:
        context["xi"] = list(xi)
    return ReportLine("numerical_error", command, 0.0, math.inf, False, model=model, grid=grid, seed=seed,
                      detail=context)


def _fmt(x: float) -> str:
    return repr(float(x))


# -- commands -------------------------------------------------------------

def cmd_ml(args) -> int:
    points = [z for group in args.z for z in group]
    if not points:
        raise ConfigError("ml needs at least one --z")
    # the scalar path sums the series with compensation, so E_1(1) is correctly rounded
    values = [complex(mittag_leffler(complex(z), args.beta, args.gamma)) for z in points]
    rows = ["beta,gamma,z_re,z_im,value_re,value_im"]
    for z, v in zip(points, values):
        rows.append(",".join(_fmt(c) for c in (args.beta, args.gamma, z.real, z.imag, v.real, v.imag)))
    target = None
    if args.csv:
        target = _out_dir(args) / args.csv
    _write_text(target, "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_solve(args) -> int:
    model = _model(args)
    spec = model.spec
    if args.data:
        path = Path(args.data)
        if not path.is_file():
            raise ConfigError(f"data file {args.data!r} does not exist")
        x = read_snapshot(str(path))
        sizes = x.grid.sizes
        if x.m != spec.m or len(sizes) != spec.n:
            raise ConfigError(f"data has {x.m} components on a {len(sizes)}-d grid; "
                              f"{args.model} needs {spec.m} on {spec.n}-d")
    else:
        sizes = args.grid or DEFAULT_GRIDS[args.model]
        if len(sizes) != spec.n:
            raise ConfigError(f"grid {grid_label(sizes)} is not {spec.n}-dimensional")
        x = SpectralField.random(SpectralGrid(sizes), spec.m, np.random.default_rng(args.seed))
    out = _out_dir(args)
    label = grid_label(sizes)
    try:
        solver = solve_modewise if args.route == "modewise" else solve_series
        bundle = solver(spec, x, args.times)
    except NumericalError as exc:
        _write_text(out / "solve_report.jsonl", encode([_error_line(exc, "solve", args.seed, args.model, label)]))
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    index = []
    for k, t in enumerate(bundle.points):
        f = bundle.field(k)
        stem = f"u_{k:03d}"
        write_snapshot(f, str(out / f"{stem}.dfrc"))
        write_csv(f, str(out / f"{stem}.csv"))
        index.append({"index": k, "t": [float(t.real), float(t.imag)], "snapshot": f"{stem}.dfrc",
                      "csv": f"{stem}.csv", "model": args.model, "formulation": model.formulation,
                      "grid": label, "seed": args.seed, "route": args.route})
    _write_text(out / "solve_index.jsonl", "".join(json.dumps(r, sort_keys=True) + "\n" for r in index))
    print(f"wrote {len(index)} snapshots to {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.model is not None and args.model not in REGISTRY:
        raise ConfigError(f"unknown model {args.model!r}; valid models: {', '.join(sorted(REGISTRY))}")
    if args.grid is not None and args.model is None:
        raise ConfigError("--grid needs --model")
    criteria = args.criteria
    if criteria is not None:
        bad = [c for c in criteria if c not in CRITERIA]
        if bad:
            raise ConfigError(f"unknown criterion {bad[0]}; valid: 1..{len(CRITERIA)}")
    opts = SuiteOptions(seed=args.seed, models=(args.model,) if args.model else tuple(sorted(REGISTRY)),
                        grid=args.grid, tolerances=_tolerances(args.tolerance))
    out = _out_dir(args)

    def progress(crit, lines, elapsed):
        ok = all(line.passed for line in lines) and bool(lines)
        print(f"criterion {crit.number:2d} {crit.name}: {'PASS' if ok else 'FAIL'} "
              f"({len(lines)} checks, {elapsed:.2f}s)", flush=True)

    result = run_suite(opts, criteria, progress)
    _write_text(out / args.report, encode(result.lines))
    failed = sum(not line.passed for line in result.lines)
    print(f"{len(result.lines) - failed}/{len(result.lines)} checks passed; report: {out / args.report}")
    if result.errors:
        return EXIT_NUMERICAL
    return EXIT_OK if result.passed else EXIT_FAILED


def cmd_dispersion(args) -> int:
    model = _model(args)
    n = model.spec.n
    if args.xi:
        freqs = [np.asarray(xi, dtype=float) for xi in args.xi]
        if any(f.size != n for f in freqs):
            raise ConfigError(f"{args.model} needs {n} frequency components")
    else:
        sizes = args.grid or (8,) * n
        if len(sizes) != n:
            raise ConfigError(f"grid {grid_label(sizes)} is not {n}-dimensional")
        lattice = SpectralGrid(sizes).freq_lattice.reshape(-1, n)
        order = np.lexsort(lattice.T[::-1])
        freqs = [lattice[k] for k in order if np.any(lattice[k] != 0)]
    head = [f"xi{k}" for k in range(n)] + ["mode", "re", "im"]
    rows = [",".join(head)]
    for xi in freqs:
        for j, ev in enumerate(dispersion(model, xi)):
            rows.append(",".join([_fmt(v) for v in xi] + [str(j), _fmt(ev.real), _fmt(ev.imag)]))
    target = Path(args.csv) if args.csv else None
    _write_text(target, "\n".join(rows) + "\n")
    return EXIT_OK


def _problem(args) -> tuple[str, cs.PencilProblem]:
    if args.problem:
        text = args.problem.strip()
        if not text.startswith("{"):
            path = Path(text)
            if not path.is_file():
                raise ConfigError(f"problem file {text!r} does not exist")
            text = path.read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"problem is not valid JSON: {exc.msg}") from None
        return "custom", cs.PencilProblem.from_json(doc)
    if args.scenario not in cs.SCENARIOS:
        raise ConfigError(f"unknown scenario {args.scenario!r}; valid scenarios: {', '.join(cs.SCENARIOS)}")
    kwargs = {k: getattr(args, k) for k in ("zeta", "r", "a") if getattr(args, k) is not None}
    if args.scenario == "diagonal3x3":
        kwargs["seed"] = args.seed
    return args.scenario, cs.SCENARIOS[args.scenario](**kwargs)


def _emit(lines, tolerances, check, anchor, observed, tol, relation="<=", **kw):
    lines.append(ReportLine.compare(check, anchor, observed, tolerances.get(check, tol), relation, **kw))


def cmd_contour(args) -> int:
    label, p = _problem(args)
    tolerances = _tolerances(args.tolerance)
    eps = sorted(args.epsilons, reverse=True)
    times = [float(t) for t in args.times]
    if not times or min(times) < 0:
        raise ConfigError("times must be nonnegative")
    if min(eps) < args.epsilon_floor or args.epsilon < args.epsilon_floor:
        raise ConfigError(f"epsilons must be at least the floor {args.epsilon_floor}")
    out = _out_dir(args)
    common = {"model": label, "seed": args.seed}
    lines: list[ReportLine] = []
    try:
        quad = cs.build_contour(p, args.points_per_segment, args.epsilon_floor, t_max=max(times + [1.0]))
        X, Y = cs.scenario_data(p, args.seed)
        sector = cs.sector_check(p)
        if not sector.bounded:
            # outside the sector hypothesis only data in the range of B has a limit
            proj = p.B @ np.linalg.pinv(p.B)
            X = X @ proj.T
            Y = None if Y is None else Y @ proj.T
        _emit(lines, tolerances, "contour_sector_growth", "(1+|mu|)^(-nu') |P^{-1} C| bounded",
              sector.growth_exponent, 1e-6, detail={"constant": sector.constant, "bounded": sector.bounded,
                                                    "data_projected": not sector.bounded}, **common)
        rep = cs.verify_pde(p, quad, X, Y, epsilon=args.epsilon, time_grid=times)
        _emit(lines, tolerances, "contour_pde_residual", "sum_i A_i (D^zeta)^(q_i) u_eps = 0",
              rep.observed, 1e-10, detail={"nodes": rep.detail["nodes"], "epsilon": args.epsilon}, **common)
        _emit(lines, tolerances, "contour_doubling_shift", "u_eps stable under node doubling",
              rep.detail["doubling_shift"], cs.DOUBLING_TOL, **common)
        qn = p.q[-1]
        for l in range(qn):
            for omega in range(qn):
                aj = cs.initial_limit_check(p, quad, X, eps, l, omega, data_y=Y)
                d = np.asarray(aj.deviations)
                anchor = "lim_eps (D^zeta)^l u_eps(0) = e^{-i phi} delta_{omega l} C x_omega"
                tag = {"l": l, "omega": omega}
                if l == omega:
                    ratio = float(np.max(d[1:] / d[:-1])) if np.all(d[:-1] > 0) else 0.0
                    _emit(lines, tolerances, "initial_limit_monotone", anchor, ratio, 1.0, BELOW,
                          detail={**tag, "deviations": aj.deviations}, **common)
                scale = max(float(np.linalg.norm(p.C @ X[omega])), 1.0)
                _emit(lines, tolerances, "initial_limit_extrapolated", anchor, aj.limit_error / scale, 1e-4,
                      detail={**tag, "epsilons": eps}, **common)
        for t in times:
            c = cs.damping_constant(p, quad, args.epsilon, t)
            _emit(lines, tolerances, "contour_damping_constant", "|e^{-eps(a-lam)^{b/zeta}} E_zeta| <= c bound",
                  c, 10.0, detail={"t": t}, **common)
        rows = ["t,component,re,im"]
        for t in times:
            u = cs.u_epsilon(p, quad, X, Y, args.epsilon, t, check=False)
            rows += [f"{_fmt(t)},{j},{_fmt(v.real)},{_fmt(v.imag)}" for j, v in enumerate(np.atleast_1d(u))]
    except NumericalError as exc:
        lines.append(_error_line(exc, "contour", args.seed, label))
        _write_text(out / "contour_report.jsonl", encode(lines))
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _write_text(out / "contour_u.csv", "\n".join(rows) + "\n")
    _write_text(out / "contour_problem.json", json.dumps(p.to_json(), sort_keys=True, indent=1) + "\n")
    _write_text(out / "contour_report.jsonl", encode(lines))
    failed = [line.check for line in lines if not line.passed]
    print(f"{len(lines) - len(failed)}/{len(lines)} checks passed; report: {out / 'contour_report.jsonl'}")
    return EXIT_OK if not failed else EXIT_FAILED


HANDLERS = {"ml": cmd_ml, "solve": cmd_solve, "verify": cmd_verify, "dispersion": cmd_dispersion,
            "contour": cmd_contour}


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        _threads_env()
        args = parse_args(argv)
        if args.command is None:
            build_parser().print_usage(sys.stderr)
            return EXIT_CONFIG
        return HANDLERS[args.command](args)
    except SystemExit as exc:  # argparse reports parse errors this way
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DegenFracError, ValueError) as exc:
        message = exc.args[0] if isinstance(exc, UnknownModel) and exc.args else str(exc)
        print(f"configuration error: {message}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
