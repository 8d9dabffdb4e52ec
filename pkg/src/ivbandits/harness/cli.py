"""Command-line entry point.

Subcommands::

    run --config <path|presets/NAME> [--trials N] [--seed S] [--out DIR] [--workers W]
    design --preset NAME --what xy|e [--eps E]
    rho-star --preset NAME [--gamma G] [--eps E]
    lambda-min --preset NAME [--seed S] [--delta D]
    presets list

Exit status: 0 on success, 1 on invalid input (bad flags, config or
parameters), 2 on a runtime failure.
"""

import argparse
import json
import sys

import numpy as np

from ..algorithms import AlgoParams, estimate_lambda_min
from ..design import SolverOptions, e_design, pair_differences, rho_star, xy_design
from ..errors import BadParam, ConfigError, IVBanditsError
from ..estimators import NoiseBounds
from ..instances import instance_from_spec
from ..numerics import sigma_min
from .config import load_config, load_preset, preset_names
from .outputs import summarize, write_outputs
from .plots import emit_plots
from .runner import run_experiment, trial_seed

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _preset_instance(name, eps=None):
    cfg = load_preset(name)
    specs = cfg.instance_specs()
    if eps is None:
        return specs[0]
    spec = dict(cfg.instance)
    if "eps" not in spec:
        raise BadParam(f"preset {name!r} has no eps parameter")
    spec["eps"] = eps
    return f"{cfg.name}[eps={eps:g}]", spec


def _cmd_run(args, out):
    cfg = load_config(args.config).with_overrides(trials=args.trials, master_seed=args.seed,
                                                  outputs=args.out, workers=args.workers)
    table = run_experiment(cfg)
    paths = write_outputs(table, cfg.outputs)
    if cfg.emit_svg:
        paths += emit_plots(table, cfg.outputs, skip_empty=True)
    summary = summarize(table)
    for key, s in summary.items():
        print(f"{key:32s} n={s['n']:4d}  success={s['success_rate']:.3f}  "
              f"mean_samples={s['mean_samples']:.6g}  std={s['std_samples']:.3g}"
              + (f"  capped={s['cap_exceeded']}" if s["cap_exceeded"] else ""), file=out)
    print(f"wrote {len([p for p in paths if not '/traces/' in p])} files to {cfg.outputs}", file=out)
    return EXIT_OK


def _cmd_design(args, out):
    iid, spec = _preset_instance(args.preset, args.eps)
    env = instance_from_spec(spec)
    opts = SolverOptions()
    if args.what == "xy":
        design = xy_design(pair_differences(env.W), env.Z, env.gamma, opts)
        payload = design.to_json()
    else:
        design, kappa0 = e_design(env.Z, opts)
        payload = dict(design.to_json(), kappa_0=float(kappa0))
    payload["instance"] = iid
    print(json.dumps(payload), file=out)
    return EXIT_OK


def _cmd_rho_star(args, out):
    iid, spec = _preset_instance(args.preset, args.eps)
    env = instance_from_spec(spec)
    value = rho_star(env, args.gamma, SolverOptions())
    print(json.dumps({"instance": iid, "gamma": args.gamma, "rho_star": value}), file=out)
    return EXIT_OK


def _cmd_lambda_min(args, out):
    iid, spec = _preset_instance(args.preset, args.eps)
    env = instance_from_spec(spec)
    params = AlgoParams(NoiseBounds.for_instance(env), delta=args.delta)
    seed = trial_seed(args.seed, iid, "lambda_min", 0)
    lcb, n = estimate_lambda_min(env, params, np.random.default_rng(seed))
    print(json.dumps({"instance": iid, "lcb": lcb, "samples": n, "sigma_min_true": sigma_min(env.gamma)}),
          file=out)
    return EXIT_OK


def _cmd_presets(args, out):
    for name in preset_names():
        print(name, file=out)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="ivbandits", description="Best-arm identification with instrumental variables.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True, help="TOML file or presets/<name>")
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out")
    r.add_argument("--workers", type=int)
    r.set_defaults(func=_cmd_run)

    d = sub.add_parser("design", help="print the XY- or E-optimal design of a preset instance")
    d.add_argument("--preset", required=True)
    d.add_argument("--what", choices=("xy", "e"), required=True)
    d.add_argument("--eps", type=float)
    d.set_defaults(func=_cmd_design)

    s = sub.add_parser("rho-star", help="print the hardness rho*(gamma) of a preset instance")
    s.add_argument("--preset", required=True)
    s.add_argument("--gamma", type=float, default=0.0)
    s.add_argument("--eps", type=float)
    s.set_defaults(func=_cmd_rho_star)

    m = sub.add_parser("lambda-min", help="run the warm-up lower bound on sigma_min(Gamma)")
    m.add_argument("--preset", required=True)
    m.add_argument("--eps", type=float)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--delta", type=float, default=0.1)
    m.set_defaults(func=_cmd_lambda_min)

    pr = sub.add_parser("presets", help="list built-in presets")
    pr.add_argument("action", choices=("list",))
    pr.set_defaults(func=_cmd_presets)
    return p


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args, out)
    except (ConfigError, BadParam) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (IVBanditsError, OSError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
