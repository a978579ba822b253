"""Command-line harness: dataset generation, search runs, theory values."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (
    APPENDIX_B_SCORES,
    ExperimentConfig,
    gen_linear,
    run_experiment,
    sweep_b,
    theory_report,
)
from .oracles import save_csv


def _load_scores(path: str | None):
    if path is None:
        return APPENDIX_B_SCORES
    with open(path) as fh:
        text = fh.read().strip()
    if text.startswith("["):
        return tuple(float(v) for v in json.loads(text))
    return tuple(float(v) for v in text.replace(",", " ").split())


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=str, default=None, help="JSON-lines report path")
    p.add_argument("--max-steps", type=int, default=100_000_000)


def _add_search(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--beta", choices=("theory", "practical"), default="practical")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dagbandit",
        description="Monte-Carlo search in growing single-rooted DAGs: "
        "best-arm / best-leaf identification and feature selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate the synthetic linear dataset as CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, required=True)

    p = sub.add_parser("bai", help="best-arm identification runs")
    _add_search(p)
    _add_common(p)
    p.add_argument("--domain", choices=("lattice", "tree", "flat", "fs"), default="lattice")
    p.add_argument("--n-features", type=int, default=6)
    p.add_argument("--d-l", type=int, default=3)
    p.add_argument("--scores", type=str, default=None, help="feature-score file")
    p.add_argument("--dataset", type=str, default=None)
    p.add_argument("--engine", choices=("auto", "python", "kernel"), default="auto")

    p = sub.add_parser("bli", help="best-leaf identification / feature selection")
    _add_search(p)
    _add_common(p)
    p.add_argument("--domain", choices=("lattice", "tree", "flat", "fs"), default="fs")
    p.add_argument("--dataset", type=str, default="linear",
                   help="CSV path, 'linear', or 'madelon:DATA,LABELS'")
    p.add_argument("--n-features", type=int, default=6)
    p.add_argument("--d-l", type=int, default=3)
    p.add_argument("--scores", type=str, default=None)
    p.add_argument("--init-width", type=int, default=7)
    p.add_argument("--c-l", type=float, default=100.0)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--q", type=float, default=0.9)

    p = sub.add_parser("fuse", help="FUSE baseline with a fixed budget")
    _add_common(p)
    p.add_argument("--dataset", type=str, default="linear")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--b", type=float, default=0.3)
    p.add_argument("--c-l", type=float, default=100.0)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--q", type=float, default=0.9)

    p = sub.add_parser("theory", help="exact complexity quantities and bounds")
    p.add_argument("--domain", choices=("lattice", "tree"), default="lattice")
    p.add_argument("--scores", type=str, default=None)
    p.add_argument("--d-l", type=int, default=3)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--b", type=float, default=None)

    p = sub.add_parser("sweep", help="expansion-parameter sweep on the flat domain")
    p.add_argument("--b-values", type=str, default="0.3,0.35,0.4")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--n-features", type=int, default=15)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--max-steps", type=int, default=100_000_000)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            save_csv(gen_linear(args.seed), args.out)
            print(f"wrote {args.out}")
            return 0
        if args.command == "theory":
            report = theory_report(
                args.domain, _load_scores(args.scores), args.d_l,
                args.epsilon, args.delta, b=args.b,
            )
            for key, value in report.items():
                print(f"{key:36s} {value}")
            return 0
        if args.command == "sweep":
            b_values = [float(v) for v in args.b_values.split(",")]
            rows = sweep_b(
                b_values, reps=args.reps, n_features=args.n_features,
                epsilon=args.epsilon, delta=args.delta, base_seed=args.seed,
                max_steps=args.max_steps,
            )
            for row in rows:
                print(
                    f"b={row['b']:.2f}  mean_samples={row['mean_samples']:,.0f}"
                    f"  tau_max={row['tau_max'] if row['tau_max'] is None else format(row['tau_max'], ',.0f')}"
                    f"  prop1_violations={row['prop1_violations']}"
                )
            if args.out:
                with open(args.out, "w") as fh:
                    for row in rows:
                        fh.write(json.dumps(row, sort_keys=True) + "\n")
            return 0
        # search commands
        config = ExperimentConfig(
            algorithm=args.command,
            domain=getattr(args, "domain", "fs"),
            epsilon=getattr(args, "epsilon", 0.0),
            delta=getattr(args, "delta", 0.1),
            b=args.b if getattr(args, "b", None) is not None else 0.0,
            beta=getattr(args, "beta", "practical"),
            reps=args.reps,
            base_seed=args.seed,
            max_steps=args.max_steps,
            jobs=args.jobs,
            out=args.out,
            scores=_load_scores(getattr(args, "scores", None)),
            n_features=getattr(args, "n_features", 6),
            d_l=getattr(args, "d_l", 3),
            dataset_path=getattr(args, "dataset", None),
            m=getattr(args, "m", 50),
            k=getattr(args, "k", 5),
            q=getattr(args, "q", 0.9),
            init_width=getattr(args, "init_width", 7),
            c_l=getattr(args, "c_l", 100.0),
            budget=getattr(args, "budget", 0),
            engine=getattr(args, "engine", "auto"),
        )
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    try:
        run_experiment(config)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
