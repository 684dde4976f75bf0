"""Command-line front end: sweep, phase-diagram, simulate, bo-rate.

Each command writes a CSV whose first line is a `#`-prefixed JSON config
from which the theory columns can be re-evaluated; --plot additionally
renders a figure next to the CSV.  Fatal errors exit nonzero with a JSON
object on stderr; per-point failures are recorded as empty cells with a
reason code and do not fail the command unless every point fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .exceptions import RobustAsympError
from .sweeps import (
    AXES,
    DEFAULT_RANGES,
    FIGURE_PRESETS,
    evaluate_bo_rate,
    evaluate_phase_diagram,
    evaluate_simulation,
    evaluate_sweep,
    sweep_config,
    worker_count,
    write_csv,
)

__all__ = ["main", "build_parser"]


def _parse_range(text: str, default_scale: str = "log"):
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise ValueError(f"range must be lo:hi:num[:lin|log], got {text!r}")
    lo, hi, num = float(parts[0]), float(parts[1]), int(parts[2])
    scale = parts[3] if len(parts) == 4 else default_scale
    if scale not in ("lin", "log"):
        raise ValueError(f"range scale must be lin or log, got {scale!r}")
    return [lo, hi, num, scale]


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--eps", type=float, default=0.3, help="outlier fraction")
    p.add_argument("--beta", type=float, default=0.0, help="outlier rescaling")
    p.add_argument("--din", type=float, default=1.0, help="inlier noise variance")
    p.add_argument("--dout", type=float, default=5.0, help="outlier noise variance")


def _add_common_flags(p: argparse.ArgumentParser):
    p.add_argument("--out", type=str, default=None, help="output CSV path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=str, default=None, metavar="FILE",
                   help="key=value file providing flag defaults")
    p.add_argument("--plot", action="store_true", help="render a figure next to the CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-asymp",
        description="Asymptotics of robust regression with outliers: theory sweeps and Monte-Carlo checks.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="theory errors along one parameter axis")
    p.add_argument("axis", choices=AXES)
    _add_model_flags(p)
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--range", type=str, default=None, help="axis grid lo:hi:num[:lin|log]")
    p.add_argument("--methods", type=str, default="l2,l1,huber,bayes",
                   help="comma list from l2,l1,huber,huber_fixed_a[:a],bayes")
    p.add_argument("--lambda", dest="fixed_lambda", type=float, default=None,
                   help="fix the regularisation instead of tuning it")
    p.add_argument("--huber-a", type=float, default=1.0, help="scale for huber_fixed_a")
    p.add_argument("--target", choices=("gen", "estim"), default="gen")
    _add_common_flags(p)

    p = sub.add_parser("phase-diagram", help="l2-vs-Huber error gap over (eps, delta_out)")
    _add_model_flags(p)
    p.add_argument("--eps-range", type=str, default="0.05:0.95:10:lin")
    p.add_argument("--dout-range", type=str, default="0.05:100:10:log")
    p.add_argument("--alphas", type=str, default="10")
    _add_common_flags(p)

    p = sub.add_parser("simulate", help="finite-size runs against theory at tuned hyperparameters")
    p.add_argument("--figure", choices=sorted(FIGURE_PRESETS), default=None,
                   help="use one of the headline parameter sets")
    _add_model_flags(p)
    p.add_argument("--alphas", type=str, default="1,3,10")
    p.add_argument("--methods", type=str, default="l2,l1,huber")
    p.add_argument("--target", choices=("gen", "estim"), default=None)
    p.add_argument("--dim", type=int, default=200)
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--n-test", type=int, default=20_000)
    p.add_argument("--lambda", dest="fixed_lambda", type=float, default=None)
    p.add_argument("--huber-a", type=float, default=1.0)
    _add_common_flags(p)

    p = sub.add_parser("bo-rate", help="Bayes-optimal error rate and its 1/alpha fit")
    _add_model_flags(p)
    p.add_argument("--range", type=str, default="100:10000:9:log", help="alpha grid")
    _add_common_flags(p)

    return parser


def _apply_config_file(argv: list[str]) -> list[str]:
    """Prepend key=value pairs from --config FILE as flag defaults."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    path = argv[idx + 1]
    extra: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            extra.extend([f"--{key.strip().replace('_', '-')}", value.strip()])
    # Insert after the subcommand so explicit flags still win.
    for i, tok in enumerate(argv):
        if not tok.startswith("-") and i > 0:
            return argv[: i + 1] + extra + argv[i + 1 :]
    return argv + extra


def _method_list(text: str) -> list[str]:
    return [tok.strip() for tok in text.split(",") if tok.strip()]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _cmd_sweep(args) -> int:
    rng = _parse_range(args.range, "log" if args.axis in ("alpha", "delta_out") else "lin") \
        if args.range else DEFAULT_RANGES[args.axis]
    cfg = sweep_config(
        args.axis,
        _method_list(args.methods),
        eps=args.eps, beta=args.beta, delta_in=args.din, delta_out=args.dout,
        alpha=args.alpha, range_spec=rng, fixed_lambda=args.fixed_lambda,
        huber_a=args.huber_a, target=args.target, seed=args.seed,
    )
    result = evaluate_sweep(cfg, workers=worker_count())
    out = args.out or f"sweep_{args.axis}.csv"
    write_csv(out, cfg, result.rows)
    if args.plot:
        from .plotting import plot_sweep

        plot_sweep(cfg, result.rows, os.path.splitext(out)[0] + ".png")
    print(out)
    return 0


def _cmd_phase(args) -> int:
    cfg = {
        "command": "phase-diagram",
        "eps": args.eps, "beta": args.beta, "delta_in": args.din, "delta_out": args.dout,
        "eps_range": _parse_range(args.eps_range, "lin"),
        "dout_range": _parse_range(args.dout_range, "log"),
        "alphas": _float_list(args.alphas),
        "seed": args.seed,
        "version": __version__,
    }
    rows, boundary = evaluate_phase_diagram(cfg, workers=worker_count())
    out = args.out or "phase_diagram.csv"
    write_csv(out, cfg, rows)
    boundary_path = os.path.splitext(out)[0] + "_boundary.csv"
    write_csv(boundary_path, {**cfg, "content": "boundary"}, boundary)
    if args.plot:
        from .plotting import plot_phase_diagram

        plot_phase_diagram(cfg, rows, boundary, os.path.splitext(out)[0] + ".png")
    print(out)
    print(boundary_path)
    return 0


def _cmd_simulate(args) -> int:
    cfg = {
        "command": "simulate",
        "eps": args.eps, "beta": args.beta, "delta_in": args.din, "delta_out": args.dout,
        "alphas": _float_list(args.alphas),
        "methods": _method_list(args.methods),
        "target": args.target or "gen",
        "dim": args.dim, "seeds": args.seeds, "seed": args.seed, "n_test": args.n_test,
        "fixed_lambda": args.fixed_lambda, "huber_a": args.huber_a,
        "version": __version__,
    }
    if args.figure:
        preset = FIGURE_PRESETS[args.figure]
        for key in ("eps", "beta", "delta_in", "delta_out"):
            if key in preset:
                cfg[key] = preset[key]
        cfg["target"] = args.target or preset["target"]
        if preset["axis"] != "alpha":
            # the swept model parameter is supplied via its own flag
            cfg["alphas"] = [preset["alpha"]]
            cfg[preset["axis"]] = getattr(args, {"eps": "eps", "delta_out": "dout"}[preset["axis"]])
    rows = evaluate_simulation(cfg)
    out = args.out or "simulate.csv"
    write_csv(out, cfg, rows)
    if args.plot:
        from .plotting import plot_simulation

        plot_simulation(cfg, rows, os.path.splitext(out)[0] + ".png")
    print(out)
    return 0


def _cmd_bo_rate(args) -> int:
    cfg = {
        "command": "bo-rate",
        "eps": args.eps, "beta": args.beta, "delta_in": args.din, "delta_out": args.dout,
        "range": _parse_range(args.range, "log"),
        "seed": args.seed,
        "version": __version__,
    }
    rows, fit = evaluate_bo_rate(cfg)
    out = args.out or "bo_rate.csv"
    write_csv(out, {**cfg, **fit}, rows)
    if args.plot:
        from .plotting import plot_bo_rate

        plot_bo_rate(cfg, rows, fit, os.path.splitext(out)[0] + ".png")
    print(out)
    print(json.dumps(fit))
    return 0


_HANDLERS = {
    "sweep": _cmd_sweep,
    "phase-diagram": _cmd_phase,
    "simulate": _cmd_simulate,
    "bo-rate": _cmd_bo_rate,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config_file(argv)
        args = build_parser().parse_args(argv)
        return _HANDLERS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (RobustAsympError, OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
