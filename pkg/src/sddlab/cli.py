"""Command-line entry point: ``sddlab {train,eval,compare,solve}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .baseline import RoutingInstance, SolverConfig, solve_exact, validate_solution
from .learner import TrainerConfig, config_hash, load_network, save_network, train, write_curve

log = logging.getLogger("sddlab")


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_train(args) -> int:
    spec = harness.preset(args.preset)
    out = _out_dir(args.out)
    trainer = TrainerConfig(episodes=args.episodes, seed=args.seed)
    if args.lr is not None:
        trainer.learning_rate = args.lr
    trainer.validate()

    def progress(row):
        if row.episode % args.log_every == 0:
            log.info("episode %d reward %.1f eps %.3f loss %.4f", row.episode, row.total_reward, row.epsilon, row.loss)

    result = train(spec.scenario, trainer, progress=progress)
    model = out / "model.bin"
    curve = out / "training_curve.csv"
    h = config_hash(spec.scenario.to_dict(), trainer.to_dict())
    save_network(result.net, model, seed=args.seed, config_hash=h, preset=args.preset)
    write_curve(curve, result.curve)
    spec.trainer = trainer
    harness.write_manifest(out / "manifest.json", "train", spec, [args.seed], [model, curve],
                           transitions=result.transitions, updates=result.updates)
    print(f"saved {model} ({result.updates} updates)")
    return 0


def cmd_eval(args) -> int:
    spec = harness.preset(args.preset).with_policy(args.policy, model_path=args.model,
                                                   eval_episodes=args.episodes, eval_seed=args.eval_seed)
    spec.solver = SolverConfig(time_limit=args.time_limit)
    res = harness.run_evaluation(spec, keep_events=True)
    out = _out_dir(args.out)
    stem = f"{args.preset}_{args.policy}"
    results = out / f"{stem}_results.csv"
    events = out / f"{stem}_events.jsonl"
    harness.write_results_csv(results, [res])
    harness.write_events_jsonl(events, res)
    harness.write_manifest(out / f"{stem}_manifest.json", "eval", spec, res.seeds, [results, events])
    print(f"{args.preset} {args.policy}: mean reward {res.mean_reward:.3f} over {len(res.rewards)} episodes, "
          f"decision time {res.mean_time:.4f} s/episode, near-optimal rate {res.near_optimal_rate:.3f}")
    return 0


def cmd_compare(args) -> int:
    base = harness.preset(args.preset)
    base.eval_episodes = args.episodes
    base.eval_seed = args.eval_seed
    base.solver = SolverConfig(time_limit=args.time_limit)
    net, _ = load_network(args.model)
    report, ra, rb = harness.compare(base.with_policy("dqn", model_path=args.model), base.with_policy("mip"), net_a=net)
    out = _out_dir(args.out)
    results = out / f"{args.preset}_compare_results.csv"
    rewards = out / f"{args.preset}_reward_table.csv"
    timing = out / f"{args.preset}_timing_table.csv"
    harness.write_results_csv(results, [ra, rb])
    harness.write_rows_csv(rewards, [report.reward_row()])
    harness.write_rows_csv(timing, [report.timing_row()])
    harness.write_manifest(out / f"{args.preset}_compare_manifest.json", "compare", base, ra.seeds,
                           [results, rewards, timing], model=str(args.model))
    print(f"{args.preset}: dqn {report.mean_a:.2f} mip {report.mean_b:.2f} difference {report.difference_pct:+.1f}% "
          f"| time dqn {report.time_a:.4f}s mip {report.time_b:.4f}s ratio {report.time_ratio_rounded:g}")
    return 0


def cmd_solve(args) -> int:
    inst = RoutingInstance.from_dict(json.loads(Path(args.instance).read_text()))
    inst.check()
    sol = solve_exact(inst, SolverConfig(travel_cost=inst.travel_cost, time_limit=args.time_limit))
    report = validate_solution(inst, sol)
    doc = sol.to_dict()
    doc["violations"] = [{"constraint": v.constraint, "message": v.message} for v in report.violations]
    print(json.dumps(doc, indent=2))
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sddlab", description="Same-day delivery dispatch experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    presets = sorted(harness.PRESETS)

    p = sub.add_parser("train", help="train the shared Q-network on a preset")
    p.add_argument("--preset", required=True, choices=presets)
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--log-every", type=int, default=100)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate one policy with exploration off")
    p.add_argument("--preset", required=True, choices=presets)
    p.add_argument("--policy", required=True, choices=harness.POLICIES)
    p.add_argument("--model", default=None)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--eval-seed", type=int, default=harness.EVAL_SEED_BASE)
    p.add_argument("--time-limit", type=float, default=SolverConfig.time_limit)
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="learned policy against the routing baseline on the same days")
    p.add_argument("--preset", required=True, choices=presets)
    p.add_argument("--model", required=True)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--eval-seed", type=int, default=harness.EVAL_SEED_BASE)
    p.add_argument("--time-limit", type=float, default=SolverConfig.time_limit)
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("solve", help="solve one routing instance stored as JSON")
    p.add_argument("--instance", required=True)
    p.add_argument("--time-limit", type=float, default=SolverConfig.time_limit)
    p.set_defaults(func=cmd_solve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "train" else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    if args.command == "eval" and args.policy == "dqn" and not args.model:
        print("eval --policy dqn needs --model", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
