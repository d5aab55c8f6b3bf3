"""Command line entry point: ``mbacd {solve,bench,eso,sampling-check}``.

Exit codes: 0 on success, 1 for usage errors, 2 for runtime errors.
"""
import argparse
import logging
import sys

import numpy as np

from . import eso as eso_mod
from . import harness, linalg
from .sampling import Variant, build_law, empirical_probability_matrix, probability_matrix

DEFAULT_SEED = 42


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _dims(s):
    try:
        m, n = (int(x) for x in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("--dims expects m,n") from None
    return m, n


def _add_problem_args(p):
    p.add_argument("--problem", required=True, help="quadratic | synthetic:<1-5> | logistic | svm-dual")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--m", type=int, default=200, help="toy data rows when --data is absent")
    p.add_argument("--problem-seed", type=int, default=0)
    p.add_argument("--matrix", help="text matrix file (quadratic)")
    p.add_argument("--data", help="LibSVM file (logistic, svm-dual)")
    p.add_argument("--dims", type=_dims, help="m,n override for the LibSVM shape")
    p.add_argument("--rescale", action="store_true", help="corrupt rows/columns with U[0,1] factors")
    p.add_argument("--lambda-mode", default="default", choices=["default", "mean-diag", "max-diag-over-10", "explicit"])
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--smoothness", default="exact", help="exact | diag:<factor> | diag:sqrt-n")


def build_parser():
    parser = _Parser(prog="mbacd", description="Minibatch (accelerated) coordinate descent toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run one solver and write its convergence trace")
    _add_problem_args(p)
    p.add_argument("--method", choices=["cd", "acd"], required=True)
    p.add_argument("--sampling", default="tau-nice")
    p.add_argument("--tau", type=float, default=1)
    p.add_argument("--eso", default="auto", choices=["auto", "accelerated", "plain", "closed", "tau-nice"])
    p.add_argument("--budget-epochs", type=float, default=100)
    p.add_argument("--eps", type=float, help="stop once f - f* <= eps")
    p.add_argument("--every", type=float, default=1.0, help="checkpoint cadence in epochs")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--timing", action="store_true", help="record wall_ms (output no longer reproducible)")
    p.add_argument("--out", required=True, help="CSV output path")

    p = sub.add_parser("bench", help="run an experiment grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("eso", help="ESO constants, step parameters and PSD gap for a matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--variant", required=True)
    p.add_argument("--tau", type=float, default=1)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--mode", default="auto", choices=["auto", "accelerated", "plain", "closed", "tau-nice"],
                   help="auto: tau-nice ESO for tau-nice laws, accelerated otherwise")

    p = sub.add_parser("sampling-check", help="compare analytic and empirical probability matrices")
    p.add_argument("--variant", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--tau", type=float, default=1)
    p.add_argument("--matrix")
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    return parser


def _fmt_vec(v, head=10):
    shown = " ".join(f"{x:.6g}" for x in v[:head])
    more = " ..." if len(v) > head else ""
    return f"[{shown}{more}] (min {np.min(v):.6g}, max {np.max(v):.6g})"


def cmd_solve(args):
    spec = harness.ProblemSpec(
        kind=args.problem, n=args.n, m=args.m, seed=args.problem_seed, matrix=args.matrix,
        data=args.data, dims=args.dims, rescale=args.rescale, lambda_mode=args.lambda_mode,
        lam=args.lam, smoothness=args.smoothness,
    )
    cfg = harness.ExperimentConfig(
        problem=spec, methods=(args.method,), samplings=(args.sampling,), taus=(_tau(args.tau),),
        seeds=(args.seed,), budget_epochs=args.budget_epochs, eps=args.eps, every=args.every,
        eso=args.eso, timing=args.timing,
    )
    problem = harness.build_problem(spec)
    cfg.validate(problem.n)
    trace = harness.run_cell(problem, args.method, args.sampling, cfg.taus[0], args.seed, cfg)
    if trace.status.startswith("aborted"):
        raise RuntimeError(trace.status)
    harness.emit_csv(trace, args.out)
    last = trace.checkpoints[-1]
    gap = "NA" if last.gap is None else f"{last.gap:.3e}"
    print(f"{args.method} {trace.meta['variant']} tau={cfg.taus[0]}: {trace.status} after "
          f"{last.iter} iterations ({last.epochs:.2f} epochs), f={last.f:.10g}, gap={gap}")
    print(f"trace written to {args.out}")
    return 0


def cmd_bench(args):
    cfg = harness.load_config(args.config)
    traces = harness.run_bench(cfg, args.out_dir, workers=args.workers)
    aborted = sum(t.status.startswith("aborted") for t in traces)
    print(f"{len(traces)} runs ({aborted} aborted) written to {args.out_dir}")
    return 0


def _tau(t):
    return int(t) if float(t).is_integer() else float(t)


def cmd_eso(args):
    M = linalg.read_matrix(args.matrix)
    law = build_law(Variant.parse(args.variant), M, _tau(args.tau))
    mode = args.mode
    if mode == "auto":
        mode = "tau-nice" if law.variant is Variant.TAU_NICE else "accelerated"
    params = eso_mod.build_eso(law, M, mode)
    step = eso_mod.acd_step_params(law, params, args.sigma)
    gap = eso_mod.verify_eso(law, M, params.v)
    print(f"variant      {law.variant.value} (tau={law.tau}, E|S|={law.expected_size:.6g})")
    if law.delta is not None:
        print(f"delta        {law.delta:.12g}")
    print(f"eso mode     {params.mode.value}")
    print(f"c            {params.c:.12g}")
    print(f"v            {_fmt_vec(params.v)}")
    print(f"sigma_w      {step.sigma_w:.12g}")
    print(f"theta        {step.theta:.12g}")
    print(f"lower bound  {eso_mod.rate_lower_bound(M, law.expected_size, args.sigma):.12g}")
    print(f"psd gap      {gap:.6e} ({'ok' if eso_mod.eso_holds(law, M, params.v) else 'VIOLATED'})")
    return 0


def cmd_sampling_check(args):
    if args.matrix:
        M = linalg.read_matrix(args.matrix)
    elif args.n:
        M = np.eye(args.n)
    else:
        raise UsageError("sampling-check: give --matrix or --n")
    law = build_law(Variant.parse(args.variant), M, _tau(args.tau))
    P = probability_matrix(law)
    E = empirical_probability_matrix(law, np.random.default_rng(args.seed), args.draws)
    np.set_printoptions(precision=5, suppress=True, linewidth=120)
    print(f"variant {law.variant.value}, n={law.n}, tau={law.tau}, draws={args.draws}")
    print("analytic P:")
    print(P)
    print("empirical P:")
    print(E)
    print(f"max abs deviation {np.max(np.abs(P - E)):.6e}")
    return 0


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "eso": cmd_eso, "sampling-check": cmd_sampling_check}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as err:
        print(err, file=sys.stderr)
        return 1
    except harness.ConfigError as err:
        print(f"mbacd {args.command}: configuration error: {err}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError, ArithmeticError) as err:
        print(f"mbacd {args.command}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
