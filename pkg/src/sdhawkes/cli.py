"""Command line entry point ``sdhawkes``.

Every subcommand prints a JSON summary on stdout and logs on stderr. Exit
codes: 0 success, 1 usage error, 2 bad input data, 3 numerical failure.
A ``--config file.json`` mapping of option names (dashes or underscores) to
values supplies defaults; flags given on the command line take precedence.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, diagnostics, experiments, lobdata, presets
from . import io as sio
from .estimate import FitConfig, fit
from .exceptions import InvalidInputError, NumericalError
from .likelihood import log_likelihood, log_likelihood_naive
from .model import check_stability
from .simulate import RNG_SCHEME, SimulationConfig, make_rng, simulate
from .validation import infer_dimensions

log = logging.getLogger("sdhawkes")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

PRESETS = {
    "toggle": presets.toggle_excitation_model,
    "contrasting-qi": presets.contrasting_qi_model,
    "poisson": presets.homogeneous_poisson_model,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _emit(summary):
    json.dump(summary, sys.stdout, indent=2, default=_json_default)
    sys.stdout.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _load_model_arg(args):
    if getattr(args, "model", None):
        return sio.load_model(args.model)
    preset = getattr(args, "preset", None)
    if preset:
        return PRESETS[preset]()
    raise InvalidInputError("give --model or --preset")


def _jobs(args):
    return args.jobs if args.jobs and args.jobs > 0 else (os.cpu_count() or 1)


# subcommands -----------------------------------------------------------------

def cmd_simulate(args):
    model = _load_model_arg(args)
    config = SimulationConfig(
        initial_state=args.initial_state,
        horizon=math.inf if args.horizon is None else args.horizon,
        seed=args.seed, n_events=args.n_events, max_events=args.max_events,
    )
    seq = simulate(model, config, rng=make_rng(args.seed))
    sio.save_sequence(seq, args.out, model.dims.event_labels, model.dims.state_labels)
    return {
        "command": "simulate", "out": args.out, "sidecar": sio.sidecar_path(args.out),
        "n_events": seq.n_events, "t0": seq.t0, "T": seq.T, "seed": args.seed, "rng": RNG_SCHEME,
    }


def _load_data(args):
    seq = sio.load_sequence(args.data)
    ev, st = sio.load_sequence_labels(args.data)
    return seq, ev, st


def cmd_estimate(args):
    seq, ev_labels, st_labels = _load_data(args)
    dims = infer_dimensions(seq, ev_labels, st_labels)
    warm = tuple(sio.load_model(p) for p in args.warm_start)
    config = FitConfig(
        n_random_starts=args.starts, warm_starts=warm, ordinary_warm_start=args.ordinary_warm_start,
        max_iterations=args.max_iter, gradient_tolerance=args.tol, seed=args.seed, n_jobs=_jobs(args),
    )
    result = fit(seq, dims, config)
    sio.save_model(result.model, args.out)
    if args.trace:
        doc = [t.to_dict(with_path=True) for t in result.traces]
        Path(args.trace).write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")
    stability = check_stability(result.model)
    return {
        "command": "estimate", "out": args.out, "n_events": seq.n_events,
        "log_likelihood": result.log_likelihood,
        "breakdown": result.breakdown.to_dict(),
        "chosen_start": result.chosen_start,
        "unobserved_rows": np.argwhere(result.transition.unobserved).tolist(),
        "stable": stability.stable,
        "starts": [t.to_dict() for t in result.traces],
    }


def cmd_loglik(args):
    model = _load_model_arg(args)
    seq, _, _ = _load_data(args)
    summary = {"command": "loglik", "n_events": seq.n_events}
    if args.naive:
        summary["log_likelihood"] = log_likelihood_naive(model, seq)
        summary["route"] = "naive"
    else:
        b = log_likelihood(model, seq)
        summary.update(log_likelihood=b.total, route="recursive", breakdown=b.to_dict())
    return summary


def _stream_file(name):
    return "".join(c if c.isalnum() or c in "-+." else "_" for c in name) + ".csv"


def cmd_residuals(args):
    model = _load_model_arg(args)
    seq, _, _ = _load_data(args)
    res = diagnostics.residuals(model, seq)
    labels_e, labels_x = model.dims.event_labels, model.dims.state_labels
    named = [(f"event_{labels_e[e]}", r) for e, r in res.event.items()]
    named += [(f"total_{labels_e[e]}_{labels_x[x]}", r) for (e, x), r in res.total.items()]
    streams = [diagnostics.summary(name, r, args.max_lag) for name, r in named]
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for (name, r), info in zip(named, streams):
            path = out / _stream_file(name)
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["residual"])
                w.writerows([repr(v)] for v in r.tolist())
            qq = out / ("qq_" + _stream_file(name))
            with qq.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["theoretical", "empirical"])
                w.writerows([repr(a), repr(b)] for a, b in diagnostics.qq_points(r).tolist())
            info["file"] = str(path)
    return {
        "command": "residuals", "out_dir": args.out_dir, "streams": streams,
        "short_streams": [[labels_e[e], labels_x[x]] for e, x in res.short_streams],
    }


def cmd_analyze(args):
    model = _load_model_arg(args)
    grid = analysis.default_time_grid(args.grid_points)
    if args.curves:
        labels_e, labels_x = model.dims.event_labels, model.dims.state_labels
        with open(args.curves, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["source", "target", "state", "t", "norm"])
            for src, dst, x, t, v in analysis.norm_curves(model, grid):
                w.writerow([labels_e[src], labels_e[dst], labels_x[x], repr(t), repr(v)])
    stability = check_stability(model)
    return {
        "command": "analyze", "curves": args.curves, "states": analysis.state_report(model),
        "stable": stability.stable, "stability_margin": stability.margin.tolist(),
    }


def cmd_ingest(args):
    seq, ev_labels, st_labels, report = lobdata.ingest(
        args.messages, args.book, state=args.state, t_from=args.t_from, t_to=args.t_to,
        tick=args.tick, keep_history=args.keep_history,
    )
    sio.save_sequence(seq, args.out, ev_labels, st_labels)
    for w in report.warnings:
        log.warning(w)
    return {
        "command": "ingest", "out": args.out, "sidecar": sio.sidecar_path(args.out),
        "n_events": seq.n_events, "n_history": seq.n_history, "initial_state": seq.initial_state,
        "event_labels": list(ev_labels), "state_labels": list(st_labels), **report.to_dict(),
    }


def cmd_mc(args):
    model = _load_model_arg(args)
    report = experiments.monte_carlo_consistency(
        model, args.sizes, n_replications=args.reps, seed=args.seed, n_jobs=_jobs(args),
        initial_state=args.initial_state,
    )
    experiments.write_mc_csv(report, args.out)
    return {"command": "mc", "out": args.out, "seed": args.seed, "sizes": report.summary()}


def cmd_bootstrap(args):
    model = _load_model_arg(args)
    result = experiments.parametric_bootstrap(
        model, args.horizon, n_boot=args.reps, seed=args.seed, quantiles=args.quantiles,
        grid=analysis.default_time_grid(args.grid_points), n_jobs=_jobs(args),
        initial_state=args.initial_state, min_success=args.min_success,
    )
    experiments.write_bootstrap_csv(result, args.out)
    if args.bands:
        experiments.write_band_csv(result, args.bands)
    return {"command": "bootstrap", "out": args.out, "bands": args.bands, "seed": args.seed,
            **result.to_dict()}


# parser ----------------------------------------------------------------------

def _common(p, model=False, data=False):
    p.add_argument("--config", help="JSON file of option defaults")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--jobs", type=int, default=0, help="worker processes (default: all cores)")
    p.add_argument("--log-level", default="WARNING", help="stderr logging level")
    if model:
        p.add_argument("--model", help="model JSON file")
        p.add_argument("--preset", choices=sorted(PRESETS), help="built-in model instead of --model")
    if data:
        p.add_argument("--data", "--events", dest="data", required=True,
                       help="sequence CSV (sidecar JSON alongside)")


def build_parser():
    parser = _Parser(prog="sdhawkes", description="State-dependent Hawkes process toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a path by thinning")
    _common(p, model=True)
    p.add_argument("--horizon", type=float, help="end of the simulation window")
    p.add_argument("--n-events", type=int, help="stop after this many events")
    p.add_argument("--initial-state", type=int, default=0)
    p.add_argument("--max-events", type=int, default=10_000_000, help="explosion guard")
    p.add_argument("--out", required=True, help="sequence CSV to write")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="maximum-likelihood fit")
    _common(p, data=True)
    p.add_argument("--out", "--model-out", dest="out", required=True, help="fitted model JSON")
    p.add_argument("--starts", type=int, default=3, help="random starts per event type")
    p.add_argument("--warm-start", action="append", default=[], help="model JSON used as a start (repeatable)")
    p.add_argument("--ordinary-warm-start", action="store_true",
                   help="also start from a fitted state-independent Hawkes process")
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-7, help="projected-gradient tolerance")
    p.add_argument("--trace", help="write per-start optimisation traces to this JSON file")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("loglik", help="evaluate the log-likelihood")
    _common(p, model=True, data=True)
    p.add_argument("--naive", action="store_true", help="use the quadratic-time direct sum")
    p.set_defaults(func=cmd_loglik)

    p = sub.add_parser("residuals", help="time-change residuals and goodness-of-fit tests")
    _common(p, model=True, data=True)
    p.add_argument("--out-dir", help="directory for per-stream residual and Q-Q CSV files")
    p.add_argument("--max-lag", type=int, default=20)
    p.set_defaults(func=cmd_residuals)

    p = sub.add_parser("analyze", help="kernel norms and spectral radii")
    _common(p, model=True)
    p.add_argument("--curves", help="truncated-norm curve CSV to write")
    p.add_argument("--grid-points", type=int, default=81, help="points on the 1e-6..1e2 s grid")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("ingest", help="build a sequence from LOBSTER-style files")
    _common(p)
    p.add_argument("--messages", required=True, help="message CSV")
    p.add_argument("--book", required=True, help="level-I book CSV aligned with the messages")
    p.add_argument("--state", choices=("spread", "qi"), default="spread")
    p.add_argument("--from", dest="t_from", default="12:00", help="window start (HH:MM[:SS])")
    p.add_argument("--to", dest="t_to", default="14:30", help="window end (HH:MM[:SS])")
    p.add_argument("--tick", type=float, default=0.01, help="tick size in currency units")
    p.add_argument("--keep-history", action="store_true", help="keep events before the window as history")
    p.add_argument("--out", required=True, help="sequence CSV to write")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("mc", help="Monte Carlo consistency study")
    _common(p, model=True)
    p.add_argument("--sizes", type=int, nargs="+", default=[5000, 40000], help="events per path")
    p.add_argument("--reps", type=int, default=20, help="replications per size")
    p.add_argument("--initial-state", type=int, default=0)
    p.add_argument("--out", required=True, help="long-format CSV to write")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("bootstrap", help="parametric bootstrap bands")
    _common(p, model=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--quantiles", type=float, nargs="+", default=[0.005, 0.995])
    p.add_argument("--grid-points", type=int, default=81)
    p.add_argument("--initial-state", type=int, default=0)
    p.add_argument("--min-success", type=float, default=0.5, help="required fraction of successful fits")
    p.add_argument("--out", required=True, help="long-format estimates CSV")
    p.add_argument("--bands", help="curve band CSV to write")
    p.set_defaults(func=cmd_bootstrap)
    return parser


def _read_config(path):
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InvalidInputError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config file {path}: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(doc, dict):
        raise InvalidInputError("config file must hold a JSON object")
    return doc


def parse_args(parser, argv):
    """Parse ``argv``, taking defaults from ``--config`` when one is given."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    choices = parser._subparsers._group_actions[0].choices
    if known.config and known.command in choices:
        sub = choices[known.command]
        actions = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in _read_config(known.config).items():
            dest = {"from": "t_from", "to": "t_to"}.get(key, key.replace("-", "_"))
            if dest not in actions or dest in ("help", "config"):
                raise UsageError(f"unknown option {key!r} in config file")
            defaults[dest] = value
            actions[dest].required = False
        sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    try:
        args = parse_args(parser, argv)
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                            stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
        summary = args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (InvalidInputError, OSError) as exc:
        print(f"sdhawkes: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError) as exc:
        print(f"sdhawkes: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SystemExit as exc:
        # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    _emit(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
