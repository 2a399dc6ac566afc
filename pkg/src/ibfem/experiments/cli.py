"""``ibfem`` command line.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 solver or domain error during a run.
"""
import argparse
import os
import sys

from ..errors import ConfigurationError, IBFemError
from .config import build_config, load_config, parse_overrides
from .presets import PRESETS, preset

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _parser():
    p = argparse.ArgumentParser(prog="ibfem", description="Finite element immersed boundary experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", nargs="?", help="flat key = value config file")
        sp.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        sp.add_argument("--output", "-o", help="output directory (default: output.directory)")
        sp.add_argument("--no-figures", action="store_true", help="skip PNG figures")
        sp.add_argument("--seed", type=int, help="reserved; no stochastic components ship")
        sp.add_argument("--quiet", "-q", action="store_true")

    run = sub.add_parser("run", help="run one experiment")
    common(run)
    run.add_argument("--dt", type=float)
    run.add_argument("--steps", type=int)
    run.add_argument("--scheme", choices=("FEIBM", "DLM"))

    sweep = sub.add_parser("sweep", help="stability sweep over dt, h_s and h_x")
    common(sweep)
    sweep.add_argument("--dt", type=_floats, required=True)
    sweep.add_argument("--hs", type=_floats, required=True)
    sweep.add_argument("--hx", type=_floats, required=True)
    sweep.add_argument("--schemes", default="DLM,FEIBM")

    ver = sub.add_parser("verify", help="run the invariant suite")
    ver.add_argument("--only", action="append", default=[], help="check-name prefix (repeatable)")
    sub.add_parser("presets", help="list presets")
    show = sub.add_parser("show", help="print the resolved config")
    common(show)
    return p


def _resolve(args, extra=None):
    base = preset(args.preset) if args.preset else None
    overrides = list(args.set)
    if args.config:
        cfg = load_config(args.config, base, overrides)
    else:
        cfg = build_config(base, **parse_overrides(overrides))
    changes = dict(extra or {})
    if getattr(args, "output", None):
        changes["output_directory"] = args.output
    if getattr(args, "no_figures", False):
        changes["output_figures"] = False
    if args.seed is not None:
        changes["seed"] = args.seed
    return cfg.replace(**changes) if changes else cfg


def _cmd_run(args):
    extra = {}
    if args.dt is not None:
        extra["dt"] = args.dt
    if args.steps is not None:
        extra["n_steps"] = args.steps
    if args.scheme:
        extra["scheme"] = args.scheme
    cfg = _resolve(args, extra)
    from .runner import run_experiment

    def progress(r):
        if not args.quiet and r.step % 10 == 0:
            print(f"step {r.step:5d}  t={r.time:.4g}  energy_ratio={r.energy_ratio:.6g}  area={r.area:.6g}",
                  file=sys.stderr)

    res = run_experiment(cfg, cfg.output_directory, progress=progress)
    print(f"{cfg.name}: status={res.status} steps={res.reports[-1].step} "
          f"max_energy_ratio={res.max_energy_ratio:.6g} output={os.path.abspath(cfg.output_directory)}")
    if res.status == "error":
        print(res.error, file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_sweep(args):
    cfg = _resolve(args)
    schemes = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    for s in schemes:
        if s not in ("FEIBM", "DLM"):
            raise ConfigurationError(f"unknown scheme {s!r}")
    from .runner import sweep_stability

    def progress(c):
        if not args.quiet:
            tag = "stable" if c.stable else f"{c.status} at {c.blew_up_at_step or '-'}"
            print(f"{c.scheme:6s} dt={c.dt:g} h_s={c.h_s:g} h_x={c.h_x:g}: {tag} "
                  f"(max ratio {c.max_energy_ratio:.3g})", file=sys.stderr)

    cells = sweep_stability(cfg, args.dt, args.hs, args.hx, schemes, cfg.output_directory, progress=progress)
    print(f"{len(cells)} cells, {sum(c.stable for c in cells)} stable; "
          f"table: {os.path.join(os.path.abspath(cfg.output_directory), 'stability.csv')}")
    return EXIT_OK


def _cmd_verify(args):
    from .verify import run_verify
    results = run_verify(args.only or None, sys.stdout)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "presets":
            for name, c in PRESETS.items():
                print(f"{name}\t{c.scheme}\t{c.element_pair}\t{c.geometry_kind}")
            return EXIT_OK
        if args.command == "show":
            sys.stdout.write(_resolve(args).to_text())
            return EXIT_OK
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_sweep(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IBFemError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
