"""Command-line surface for reproducible runs and report emission.

Every subcommand is a deterministic function of its inputs and the run
configuration (seed, trial counts, flags); reports embed that
configuration, so re-runs with identical arguments are byte-identical.
Exit codes: 0 pass, 1 a checked property failed (with witness), 2 usage
or input errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .finite_prob import TOLERANCE, FiniteDistribution
from .mechanisms import TabularMechanism
from .composition import (
    CompositionInput,
    basic_composition,
    rdp_composition,
    rdp_subsample_amplify,
    strong_composition,
)

SEED_ENV = "PRIVLAB_SEED"


@dataclass(frozen=True)
class RunConfig:
    seed: int
    tolerance: float
    trials: int
    relax_entropy: bool = False

    def to_json(self) -> dict:
        return asdict(self)


def _resolve_seed(args) -> int:
    env = os.environ.get(SEED_ENV)
    if getattr(args, "seed", None) is not None:
        return args.seed
    if env is not None:
        return int(env)
    return 0


def _config(args, trials_default: int = 0) -> RunConfig:
    return RunConfig(
        seed=_resolve_seed(args),
        tolerance=TOLERANCE,
        trials=getattr(args, "trials", None) or trials_default,
        relax_entropy=bool(getattr(args, "relax_entropy", False)),
    )


def _emit(report: dict, args) -> None:
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if getattr(args, "pretty", False):
        _print_pretty(report)
    else:
        print(json.dumps(report, indent=2, sort_keys=True))


def _print_pretty(report: dict, indent: int = 0) -> None:
    pad = "  " * indent
    for key in sorted(report):
        value = report[key]
        if isinstance(value, dict):
            print(f"{pad}{key}:")
            _print_pretty(value, indent + 1)
        else:
            print(f"{pad}{key}: {value}")


def _load_mechanism(path: str) -> TabularMechanism:
    with open(path) as fh:
        return TabularMechanism.from_json(json.load(fh))


def cmd_dp_check(args) -> int:
    from .dp_analysis import min_delta_for_epsilon, min_epsilon_for_delta

    config = _config(args)
    mechanism = _load_mechanism(args.mechanism)
    if args.eps is not None:
        report = min_delta_for_epsilon(mechanism, args.eps)
        holds = args.delta is None or report.delta <= args.delta + TOLERANCE
    else:
        if args.delta is None:
            print("need --eps and/or --delta", file=sys.stderr)
            return 2
        report = min_epsilon_for_delta(mechanism, args.delta)
        holds = not math.isinf(report.epsilon)
    payload = {"config": config.to_json(), "report": report.to_json(),
               "requested": {"eps": args.eps, "delta": args.delta},
               "holds": holds}
    _emit(payload, args)
    return 0 if holds else 1


def cmd_compose(args) -> int:
    config = _config(args)
    if args.rule == "basic":
        result = basic_composition(
            CompositionInput(args.eps, args.delta, args.ell)).to_json()
    elif args.rule == "strong":
        result = strong_composition(
            CompositionInput(args.eps, args.delta, args.ell),
            sqrt2=args.sqrt2).to_json()
    elif args.rule == "rdp":
        result = {"epsilon": rdp_composition(args.eps, args.alpha, args.ell)}
    elif args.rule == "subsample":
        result = {"epsilon": rdp_subsample_amplify(args.eps, args.n, args.m)}
    else:
        print(f"unknown rule {args.rule}", file=sys.stderr)
        return 2
    _emit({"config": config.to_json(), "rule": args.rule, "result": result},
          args)
    return 0


def cmd_walk(args) -> int:
    from .coupling import verify_walk_marginals

    config = _config(args, trials_default=100_000)
    report = verify_walk_marginals(args.m, args.d, args.domain,
                                   config.trials, seed=config.seed)
    _emit({"config": config.to_json(), "report": report.to_json()}, args)
    return 0 if report.passed else 1


def cmd_attack(args) -> int:
    from .adversary import blatant_attack

    config = _config(args, trials_default=100)
    mechanism = _load_mechanism(args.mechanism)
    report = blatant_attack(mechanism, args.n, ell=args.ell,
                            trials=config.trials, seed=config.seed,
                            family_mode=args.family, decoys=args.decoys)
    payload = {"config": config.to_json(), "report": report.to_json()}
    payload["report"].pop("gamma_bar", None) if args.no_gamma else None
    _emit(payload, args)
    return 0


def cmd_axioms(args) -> int:
    from .audits import axiom_matrix, matrix_matches_expected

    config = _config(args, trials_default=200)
    out = axiom_matrix(seed=config.seed, blatant_trials=config.trials,
                       scaling_k=tuple(args.k))
    matches = matrix_matches_expected(out["verdicts"])
    payload = {
        "config": config.to_json(),
        "verdicts": out["verdicts"],
        "expected": out["expected"],
        "matches_expected": matches,
        "reports": {m: {a: r.to_json() for a, r in row.items()}
                    for m, row in out["reports"].items()},
    }
    _emit(payload, args)
    return 0 if matches else 1


def cmd_select(args) -> int:
    from .selection import dp_select, pick_heavy, rdp_select

    config = _config(args)
    with open(args.counts) as fh:
        counts = json.load(fh)
    values = [y for y, c in enumerate(counts) for _ in range(c)]
    if args.mechanism == "pick_heavy":
        outcome = pick_heavy(values, args.eps, args.delta, config.seed,
                             output_size=len(counts))
        result = {"value": outcome.value, "bot": outcome.is_bot,
                  "low_confidence": outcome.low_confidence}
    elif args.mechanism == "dp_select":
        chosen = dp_select(values, args.eps, args.delta, config.seed,
                           output_size=len(counts))
        result = {"value": chosen.value, "low_confidence": chosen.low_confidence}
    elif args.mechanism == "rdp_select":
        value = rdp_select(values, args.eps, args.beta, config.seed,
                           output_size=len(counts))
        result = {"value": value}
    else:
        print(f"unknown selection mechanism {args.mechanism}", file=sys.stderr)
        return 2
    _emit({"config": config.to_json(), "mechanism": args.mechanism,
           "result": result}, args)
    return 0


def cmd_rep2dp(args) -> int:
    from .selection import majority_mechanism, rep_to_dp
    from .seeding import derive_rng

    config = _config(args, trials_default=200)
    if args.algorithm != "majority":
        print(f"unknown replicable algorithm {args.algorithm}", file=sys.stderr)
        return 2
    base = majority_mechanism(args.domain, args.n)
    reduced = rep_to_dp(base, args.eps, args.delta, args.beta)
    rng = derive_rng(config.seed, "rep2dp-cli")
    source = np.full(args.domain, (1.0 - args.bias) / (args.domain - 1))
    source[0] = args.bias
    fails = 0
    for _ in range(config.trials):
        data = tuple(int(x) for x in rng.choice(args.domain,
                                                size=reduced.sample_size,
                                                p=source))
        if reduced.sample(data, int(rng.integers(2**63))) != 0:
            fails += 1
    failure = fails / config.trials
    payload = {"config": config.to_json(),
               "parameters": {"eps": args.eps, "delta": args.delta,
                              "beta": args.beta, "n": args.n,
                              "domain": args.domain, "bias": args.bias,
                              "sample_size": reduced.sample_size},
               "failure": failure, "target": 5 * args.beta,
               "holds": failure <= 5 * args.beta}
    _emit(payload, args)
    return 0 if payload["holds"] else 1


def cmd_stability(args) -> int:
    from .stability import stab_tv

    config = _config(args, trials_default=10_000)
    mechanism = _load_mechanism(args.mechanism)
    if args.dist:
        with open(args.dist) as fh:
            dist = FiniteDistribution.from_json(json.load(fh))
    else:
        dist = FiniteDistribution(
            np.full(mechanism.domain_size, 1.0 / mechanism.domain_size))
    report = stab_tv(mechanism, dist, mode=args.mode, pairs=config.trials,
                     seed=config.seed)
    _emit({"config": config.to_json(), "report": report.to_json()}, args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privlab",
        description="finite-domain differential-privacy laboratory")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None,
                       help=f"master seed (env {SEED_ENV} overrides default 0)")
        p.add_argument("--output", help="also write the JSON report here")
        p.add_argument("--pretty", action="store_true",
                       help="human-readable rendering of the same report")

    p = sub.add_parser("dp-check", help="exact (eps, delta) verification")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--delta", type=float)
    common(p)
    p.set_defaults(func=cmd_dp_check)

    p = sub.add_parser("compose", help="composition calculus")
    p.add_argument("--rule", required=True,
                   choices=["basic", "strong", "rdp", "subsample"])
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--ell", type=int, default=1)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--sqrt2", action="store_true")
    common(p)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("walk", help="coupling-walk marginal verification")
    p.add_argument("--domain", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--trials", type=int)
    common(p)
    p.set_defaults(func=cmd_walk)

    p = sub.add_parser("attack", help="reconstruction tournament attack")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ell", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--family", choices=["full", "decoy"], default="decoy")
    p.add_argument("--decoys", type=int, default=20)
    p.add_argument("--no-gamma", action="store_true",
                   help="omit the preprocessor tuple from the report")
    common(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("axioms", help="measure-by-axiom audit matrix")
    p.add_argument("--trials", type=int)
    p.add_argument("--k", type=int, nargs="+", default=[2, 4])
    common(p)
    p.set_defaults(func=cmd_axioms)

    p = sub.add_parser("select", help="private selection over a counts file")
    p.add_argument("--mechanism", required=True,
                   choices=["pick_heavy", "dp_select", "rdp_select"])
    p.add_argument("--counts", required=True,
                   help="JSON list: count per output index")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--beta", type=float, default=0.1)
    common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("rep2dp", help="replicability-to-DP reduction run")
    p.add_argument("--algorithm", default="majority")
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--domain", type=int, default=2)
    p.add_argument("--bias", type=float, default=0.8)
    p.add_argument("--trials", type=int)
    common(p)
    p.set_defaults(func=cmd_rep2dp)

    p = sub.add_parser("stability", help="TV stability of a mechanism")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--dist", help="JSON distribution file; default uniform")
    p.add_argument("--mode", choices=["exact", "monte_carlo"], default="exact")
    p.add_argument("--trials", type=int)
    common(p)
    p.set_defaults(func=cmd_stability)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"missing file: {exc.filename}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
