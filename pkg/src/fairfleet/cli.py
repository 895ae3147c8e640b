"""Command line entry points."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError
from .harness import parse_config, predefined_runs, run_experiment
from .kernels import BACKEND
from .learner import grad_check, make_grad_batch
from .oracle import ORACLE_TOLERANCE, check_all
from .policy import init_policy


def _parse_seed_list(text: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise ConfigurationError(f"--seeds expects comma-separated integers, got '{text}'") from None
    if not seeds:
        raise ConfigurationError("--seeds list is empty")
    return seeds


def _cmd_run(args: argparse.Namespace) -> int:
    if args.preset:
        seeds = _parse_seed_list(args.seeds) if args.seeds else (0, 1, 2)
        runs = predefined_runs(
            episodes=args.episodes or 1200,
            horizon=args.horizon or 50,
            seeds=seeds,
            c_max_override=args.c_max,
        )
        spec = runs[args.preset]
    else:
        path = Path(args.config)
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            print(f"error: cannot read config '{path}': {exc}", file=sys.stderr)
            return 2
        except json.JSONDecodeError as exc:
            print(f"error: config '{path}' is not valid JSON: {exc}", file=sys.stderr)
            return 2
        spec = parse_config(raw, base_dir=path.parent)
        overrides = {}
        if args.episodes:
            overrides["episodes"] = args.episodes
        if args.horizon:
            overrides["horizon"] = args.horizon
        if args.c_max is not None:
            overrides["c_max"] = args.c_max
        if overrides:
            spec = replace(spec, config=replace(spec.config, **overrides))
        if args.seeds:
            spec = replace(spec, seeds=_parse_seed_list(args.seeds))

    out_dir = Path(args.out) if args.out else Path("runs") / spec.name
    episodes = spec.config.episodes

    def progress(episode, record):
        if not args.quiet and (episode + 1) % 100 == 0:
            print(
                f"[{spec.name} seed {record.seed}] episode {episode + 1}/{episodes} "
                f"reward {record.reward_mean:.3f} emissions {record.emissions:.3f} "
                f"lambda {record.lam:.4f}"
            )

    result = run_experiment(spec, out_dir, workers=args.workers, progress=progress)
    print(f"run {spec.name}: backend={BACKEND} artifacts in {result.out_dir}")
    print(
        f"final-window reward {result.summary['reward_mean']:.6f} "
        f"emissions {result.summary['emissions']:.6f}"
    )
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for index in range(args.batches):
        n_heads = 1 if index % 2 == 0 else 3
        params = init_policy(12, 5, rng, n_heads=n_heads, n_hidden=16)
        batch = make_grad_batch(params, rng, batch_size=24)
        err = grad_check(params, batch, n_probe=args.probes, rng=rng)
        worst = max(worst, err)
        status = "ok" if err <= args.tolerance else "FAIL"
        print(f"batch {index:2d} heads={n_heads} max_rel_err={err:.3e} {status}")
    print(f"worst over {args.batches} batches: {worst:.3e} (tolerance {args.tolerance:.1e})")
    return 0 if worst <= args.tolerance else 1


def _cmd_oracle_check(args: argparse.Namespace) -> int:
    rows = check_all()
    failures = 0
    for case, got, expected, err in rows:
        ok = err <= ORACLE_TOLERANCE
        failures += 0 if ok else 1
        print(f"{case.kind:5s} {case.name:28s} err={err:.2e} {'ok' if ok else 'FAIL'}")
        if not ok or args.verbose:
            print(f"      got={got!r} expected={expected!r}")
    print(f"{len(rows) - failures}/{len(rows)} dynamics cases within {ORACLE_TOLERANCE:.0e}")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairfleet",
        description="Maritime fleet twin with constrained hierarchical RL training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train one experiment and write artifacts")
    source = run_p.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", choices=("A", "B", "C", "D"),
                        help="one of the predefined runs")
    source.add_argument("--config", help="path to an experiment JSON file")
    run_p.add_argument("--seeds", help="comma-separated seed list, e.g. 0,1,2")
    run_p.add_argument("--episodes", type=int, help="episode count override")
    run_p.add_argument("--horizon", type=int, help="episode length override")
    run_p.add_argument("--c-max", dest="c_max", type=float,
                       help="explicit emission cap for capped runs")
    run_p.add_argument("--out", help="output directory (default runs/<name>)")
    run_p.add_argument("--workers", type=int, default=None,
                       help="parallel seed workers (default FAIRFLEET_WORKERS or 1)")
    run_p.add_argument("--quiet", action="store_true", help="suppress progress lines")
    run_p.set_defaults(func=_cmd_run)

    grad_p = sub.add_parser("gradcheck", help="finite-difference check of the PPO gradients")
    grad_p.add_argument("--batches", type=int, default=10)
    grad_p.add_argument("--probes", type=int, default=50, help="random coordinates per batch")
    grad_p.add_argument("--tolerance", type=float, default=1e-4)
    grad_p.add_argument("--seed", type=int, default=0)
    grad_p.set_defaults(func=_cmd_gradcheck)

    oracle_p = sub.add_parser("oracle-check", help="run the fixed dynamics reference table")
    oracle_p.add_argument("--verbose", action="store_true", help="print values for passing cases")
    oracle_p.set_defaults(func=_cmd_oracle_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
