"""Command line entry point: ``prophetlab {prophet|secretary|gaps|gen}``.

Exit codes: 0 success, 1 verification failure (witness written), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ProphetLabError
from .gaps import LEMMAS
from .harness import ExperimentConfig, generate_instance, instance_to_json, run_experiment


def _instance_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--instance", help="instance JSON file")
    src.add_argument("--generate", metavar="SPEC", help='generator spec, e.g. "prophet days=4 per_day=2"')
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for the trial CSV and summary JSON")


def _gaps_verify_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lemma", choices=(*LEMMAS, "all"), default="all")
    p.add_argument("--n", type=int, default=8, help="largest ground set size")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for verdicts and failure witnesses")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prophetlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prophet", help="simulate the submodular matroid prophet algorithm")
    _instance_args(p)
    p.add_argument("--order", default="identity",
                   help="day arrival order: identity, random, or a comma-separated permutation")

    s = sub.add_parser("secretary", help="simulate the subadditive secretary algorithm")
    _instance_args(s)
    s.add_argument("--alpha-override", type=float, default=None)
    s.add_argument("--baseline", choices=("sample-greedy",), default="sample-greedy")

    g = sub.add_parser("gaps", help="correlation-gap lemma verification")
    gsub = g.add_subparsers(dest="action", required=True)
    _gaps_verify_args(gsub.add_parser("verify"))

    gen = sub.add_parser("gen", help="generate an instance and print it as JSON")
    gen.add_argument("spec", help='e.g. "cut-digraph n=6 density=0.4"')
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", help="write to this file instead of stdout")
    return parser


def _config(args) -> ExperimentConfig:
    if args.command == "gaps":
        lemmas = list(LEMMAS) if args.lemma == "all" else [args.lemma]
        return ExperimentConfig("gaps", seed=args.seed, out_dir=args.out, lemmas=lemmas,
                                n=args.n, instances=args.instances, trials=0)
    order = getattr(args, "order", "identity")
    return ExperimentConfig(args.command, instance=args.instance, generator=args.generate,
                            trials=args.trials, seed=args.seed, order=order, out_dir=args.out,
                            alpha_override=getattr(args, "alpha_override", None),
                            baseline=getattr(args, "baseline", "sample-greedy"))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            doc = json.dumps(instance_to_json(generate_instance(args.spec, args.seed)), indent=2)
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(doc + "\n")
            else:
                print(doc)
            return 0
        summary = run_experiment(_config(args))
    except (ProphetLabError, ValueError) as exc:
        print(f"prophetlab: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"prophetlab: error: {exc}", file=sys.stderr)
        return 2
    if args.command == "gaps":
        print(json.dumps(summary.extra["verdicts"], indent=2))
        return 0 if summary.extra["passed"] else 1
    print(json.dumps(summary.to_json(), indent=2, sort_keys=True))
    return 0


def gaps_main(argv=None) -> int:
    """``gaps verify ...`` as a standalone command."""
    argv = sys.argv[1:] if argv is None else argv
    return main(["gaps", *argv])


if __name__ == "__main__":
    sys.exit(main())
