"""Command-line interface.

Exit codes: 0 success or verification pass, 1 verification fail (or a
computation that could not produce a verdict), 2 usage or configuration
errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import (CFLError, ConfigError, DivergenceError, DomainError,
                     GridMismatchError, InvalidSpeedsError,
                     KernelConvergenceError, PreconditionError,
                     RootBracketError, SpeedOrderError, UndefinedRateError)
from .harness import (counterexample, load_config, make_control,
                      make_initial_data, verify_settling, verify_sharpness,
                      _synthesize)
from .kernels import export_kernels_csv, export_profile_csv, feedback_gains, trace_g
from .mintime import times_report, titchmarsh_check
from .simulator import export_sim_csv, simulate

_USAGE_ERRORS = (ConfigError, PreconditionError, DomainError, CFLError,
                 InvalidSpeedsError, SpeedOrderError, GridMismatchError)
_RUN_ERRORS = (KernelConvergenceError, DivergenceError, RootBracketError,
               UndefinedRateError)


def _outdir(args, cfg=None) -> str:
    if getattr(args, "out", None):
        return args.out
    if cfg is not None:
        return os.path.join(cfg.output_dir, cfg.scenario_id)
    return "out"


def _cmd_mintime(args) -> int:
    cfg = load_config(args.config)
    tr = times_report(cfg.system, grid=cfg.grid)
    print(tr.pretty())
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "times.json")
        with open(path, "w") as fh:
            json.dump(tr.as_dict(), fh, indent=2, default=float)
            fh.write("\n")
        print(f"wrote {path}")
    return 0


def _cmd_kernels(args) -> int:
    cfg = load_config(args.config)
    gauge, K = _synthesize(cfg, cfg.grid)
    g = trace_g(K, cfg.system.speeds)
    law = feedback_gains(K, gauge)
    outdir = _outdir(args, cfg)
    os.makedirs(outdir, exist_ok=True)
    export_kernels_csv(K, os.path.join(outdir, "kernels.csv"))
    export_profile_csv(os.path.join(outdir, "g.csv"), K.grid.nodes, {"g": g})
    export_profile_csv(os.path.join(outdir, "gains.csv"), law.nodes,
                       {"f1": law.f1, "f2": law.f2})
    print(f"kernel solve: iterations={K.iterations} residual={K.residual:.12g}")
    print(f"wrote kernels.csv, g.csv, gains.csv to {outdir}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    law = None
    if cfg.control.get("kind", "feedback") == "feedback":
        gauge, K = _synthesize(cfg, cfg.grid)
        law = feedback_gains(K, gauge)
    control = make_control(cfg.control, feedback=law)
    y0 = make_initial_data(cfg.initial, cfg.grid, cfg.seed)
    sim = simulate(cfg.system, control, y0, cfg.horizon, cfg.grid, cfg.cfl)
    outdir = _outdir(args, cfg)
    export_sim_csv(sim, outdir, max_snapshots=args.snapshots)
    print(f"simulated {cfg.scenario_id}: steps={len(sim.times) - 1} "
          f"dt={sim.scheme_meta['dt']:.12g}")
    print(f"final norms: l2={sim.l2_trace[-1]:.12g} linf={sim.linf_trace[-1]:.12g}")
    print(f"wrote CSV output to {outdir}")
    return 0


def _cmd_verify_settling(args) -> int:
    cfg = load_config(args.config)
    rep = verify_settling(cfg)
    print(rep.pretty())
    rep.write(_outdir(args, cfg))
    return 0 if rep.passed else 1


def _cmd_verify_sharpness(args) -> int:
    cfg = load_config(args.config)
    rep = verify_sharpness(cfg, args.T)
    print(rep.pretty())
    rep.write(_outdir(args, cfg))
    return 0 if rep.passed else 1


def _cmd_counterexample(args) -> int:
    res = counterexample(args.k, n=args.n)
    print(f"k={args.k:.12g} theta={res.theta:.12g} sigma={res.sigma:.12g}")
    print(res.report.pretty())
    if args.out:
        res.report.write(args.out)
    return 0 if res.report.passed else 1


def _cmd_titchmarsh(args) -> int:
    if args.tau <= 0:
        raise ConfigError("tau must be positive")
    if not (0.0 <= args.prefix_a <= args.tau and 0.0 <= args.prefix_b <= args.tau):
        raise ConfigError("prefixes must lie in [0, tau]")
    ts = np.linspace(0.0, args.tau, args.n + 1)
    alpha = (ts > args.prefix_a).astype(float)
    beta = (ts > args.prefix_b).astype(float)
    rep = titchmarsh_check(alpha, beta, args.tau, tol=args.tol)
    for key, val in rep.as_dict().items():
        print(f"{key:<18} {val:.12g}" if isinstance(val, float) else f"{key:<18} {val}")
    return 0 if rep.consistent else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hypmin",
        description="Minimal control time, backstepping synthesis, and "
                    "verification for 1-D 2x2 hyperbolic systems")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("mintime", help="print the times report of a scenario")
    sp.add_argument("config")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_mintime)

    sp = sub.add_parser("kernels", help="solve kernels and export CSVs")
    sp.add_argument("config")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_kernels)

    sp = sub.add_parser("simulate", help="run the scenario simulation")
    sp.add_argument("config")
    sp.add_argument("--out", default=None)
    sp.add_argument("--snapshots", type=int, default=20)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("verify-settling", help="closed-loop settling certificate")
    sp.add_argument("config")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_verify_settling)

    sp = sub.add_parser("verify-sharpness", help="reachability residual at a time T")
    sp.add_argument("config")
    sp.add_argument("--T", type=float, required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_verify_sharpness)

    sp = sub.add_parser("counterexample",
                        help="unstable eigenmode of the reflection feedback")
    sp.add_argument("--k", type=float, required=True)
    sp.add_argument("--n", type=int, default=800)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_counterexample)

    sp = sub.add_parser("titchmarsh", help="convolution-support consistency check")
    sp.add_argument("--prefix-a", type=float, required=True)
    sp.add_argument("--prefix-b", type=float, required=True)
    sp.add_argument("--tau", type=float, required=True)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.set_defaults(func=_cmd_titchmarsh)
    return p


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _RUN_ERRORS as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
