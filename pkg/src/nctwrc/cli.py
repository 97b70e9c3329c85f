"""Command-line front end.

    nctwrc solve --config fig4 --out out/fig4
    nctwrc check --config fig5 --assert
    nctwrc thresholds --config fig10 --out out/fig10
    nctwrc simulate --config fig4 --horizon 400 --reps 200 --seed 7
    nctwrc suite --out out/suite

``--config`` takes a file path or the name of a bundled figure spec.
Exit status: 0 success, 1 failed assertion or non-convergence, 2 bad input.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .channel import ChannelError
from .config import ConfigError
from .experiments import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, load_spec, run_experiment, run_suite
from .model import build_model
from .policy import extract_thresholds, simulate_chain, stationary_metrics
from .solver import ConvergenceError, value_iteration


def _parse_state(text: str) -> tuple:
    try:
        vals = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected b1,b2,g1,g2, got {text!r}") from None
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("initial state needs four integers b1,b2,g1,g2")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nctwrc", description="Relay transmission-control MDP experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=False):
        p.add_argument("--config", required=True, help="config file or bundled spec name (e.g. fig4)")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the spec seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads")

    p = sub.add_parser("solve", help="run value iteration and write policy/value CSVs")
    common(p)
    p = sub.add_parser("check", help="solve and run the spec's structural checks")
    common(p)
    p.add_argument("--assert", dest="assert_mode", action="store_true",
                   help="exit 1 if any check contradicts its expected verdict")
    p = sub.add_parser("thresholds", help="solve and write the threshold surfaces")
    common(p)
    p = sub.add_parser("simulate", help="Monte Carlo and exact metrics of the optimal policy")
    common(p)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--initial-state", type=_parse_state, default=None, help="b1,b2,g1,g2 (g is 1-based)")
    p = sub.add_parser("suite", help="run every spec in a directory (bundled figures by default)")
    p.add_argument("directory", nargs="?", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--assert", dest="assert_mode", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    return parser


def _solve(spec, out):
    model = build_model(spec.params)
    result = value_iteration(model, spec.tolerance, spec.max_iters)
    return model, result


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = sys.stdout
    try:
        if args.command == "suite":
            res = run_suite(args.directory, args.out, assert_mode=True if args.assert_mode else None,
                            threads=args.threads)
            out.write(res.table())
            return res.exit_code

        if args.command == "check":
            res = run_experiment(args.config, args.out, assert_mode=True if args.assert_mode else None,
                                 seed=args.seed, threads=args.threads, log=out)
            if res.error:
                print(f"error: {res.error}", file=sys.stderr)
            return res.exit_code

        spec = load_spec(args.config)
        model, result = _solve(spec, args.out)
        target = Path(args.out) if args.out else None
        if target:
            target.mkdir(parents=True, exist_ok=True)

        if args.command == "solve":
            out.write(f"{spec.name}: converged in {result.iterations} sweeps "
                      f"(residual {result.residuals[-1]:.3g})\n")
            if target:
                result.policy.to_csv(target / "policy.csv", result.values)
            else:
                result.policy.to_csv(out, result.values)
            return EXIT_OK

        if args.command == "thresholds":
            surface = extract_thresholds(result.policy)
            if target:
                surface.to_csv(target / "thresholds.csv")
            else:
                surface.to_csv(out)
            if not surface.regular:
                out.write("note: some slices are not step functions of b_i; thresholds do not reproduce the policy there\n")
            return EXIT_OK

        if args.command == "simulate":
            horizon = args.horizon or spec.horizon or 1000
            reps = args.reps or spec.replications or 200
            seed = spec.seed if args.seed is None else args.seed
            init = args.initial_state or spec.initial_state
            model.space.validate(init)
            sim = simulate_chain(model, result.policy, horizon, reps, seed, init, spec.burn_in, args.threads)
            exact = stationary_metrics(model, result.policy, init)
            if target:
                sim.to_csv(target / "simulation.csv")
                exact.to_csv(target / "stationary.csv")
            out.write(f"discounted cost from {init}: simulated {sim.discounted_cost:.6g} "
                      f"+/- {sim.discounted_se:.3g} (truncation bias <= {sim.truncation_bias:.3g}), "
                      f"exact {exact.discounted_cost:.6g}\n")
            for k, v in exact.as_dict().items():
                if k.startswith("discounted") or k == "truncation_bias":
                    continue
                out.write(f"  {k:<18} exact {v:.6g}   simulated {sim.as_dict()[k]:.6g}\n")
            if exact.note:
                out.write(f"note: {exact.note}\n")
            return EXIT_OK
    except (ConfigError, ChannelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
