"""Command-line front end.

Subcommands:

    train   run one or more seeds of an algorithm and write a run directory
    eval    roll out a saved policy checkpoint and report IQM statistics
    bench   wall-clock benchmarks over a config grid, or inference latency
    export  re-export a trained policy from a run directory to one file

``--set key=value`` accepts any config key (see ``TrainRunConfig``).
Seed lists use ``0..9`` for ranges and commas for unions. The worker
count for multi-seed training comes from ``--workers`` or the
``PICORL_WORKERS`` environment variable (default 1).
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .checkpoint import CheckpointPolicy, PolicyCheckpoint
from .kernels import Activation, Backend
from .nn import Mlp
from .results import read_config, write_run_outputs, write_seed_outputs
from .rng import Prng
from .runtime import InferenceRuntime, measure_allocations, measure_latency
from .training import TrainRunConfig, evaluate_policy, iqm, train

WORKERS_ENV_VAR = "PICORL_WORKERS"


def parse_seeds(text: str) -> list[int]:
    """'0..9' is an inclusive range; commas join pieces."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError(f"no seeds in {text!r}")
    return seeds


def _base_config(args) -> TrainRunConfig:
    """Config file, then explicit flags, then --set pairs, in that order."""
    flat = read_config(args.config) if getattr(args, "config", None) else {}
    if getattr(args, "algo", None):
        flat["algo"] = args.algo
    cfg = TrainRunConfig.from_flat(flat) if flat else TrainRunConfig()
    overrides = []
    if getattr(args, "env", None):
        overrides.append(f"env={args.env}")
    if getattr(args, "backend", None):
        overrides.append(f"backend={args.backend}")
    if getattr(args, "steps", None) is not None:
        overrides.append(f"total_steps={args.steps}")
    if getattr(args, "eval_episodes", None) is not None:
        overrides.append(f"eval_episodes={args.eval_episodes}")
    overrides.extend(getattr(args, "set", None) or [])
    return cfg.with_overrides(overrides) if overrides else cfg


def _train_seed_job(flat: dict, out_dir: str) -> dict:
    cfg = TrainRunConfig.from_flat(flat)
    record = train(cfg)
    return write_seed_outputs(out_dir, record)


def cmd_train(args) -> int:
    cfg = _base_config(args)
    seeds = parse_seeds(args.seeds)
    workers = args.workers or int(os.environ.get(WORKERS_ENV_VAR, "1"))
    os.makedirs(args.out, exist_ok=True)

    jobs = [(cfg.with_overrides([f"seed={s}"]).to_flat(), args.out) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_train_seed_job, *zip(*jobs)))
    else:
        summaries = [_train_seed_job(flat, out) for flat, out in jobs]

    for s in summaries:
        print(f"seed {s['seed']}: final IQM {s['final_iqm']:.1f} "
              f"(train {s['train_seconds']:.1f} s, total {s['total_seconds']:.1f} s)")
    summary = write_run_outputs(args.out, cfg.with_overrides([f"seed={seeds[0]}"]), seeds)
    finals = [summary["final_iqm"][str(s)] for s in seeds]
    print(f"{len(seeds)} seed(s) -> {args.out}; "
          f"final IQM mean {np.mean(finals):.1f}, best seed {summary['best_seed']}")
    return 0


def cmd_eval(args) -> int:
    ckpt = PolicyCheckpoint.load(args.ckpt)
    policy = CheckpointPolicy(ckpt, Backend(args.backend))
    returns = evaluate_policy(policy, args.env, args.episodes, Prng(args.seed))
    stats = iqm(returns)
    print(f"{args.episodes} episodes: IQM {stats.mean:.2f} +- {stats.std:.2f} "
          f"(min {returns.min():.1f}, max {returns.max():.1f})")
    if args.out:
        with open(args.out, "w") as f:
            json.dump({"iqm_mean": stats.mean, "iqm_std": stats.std,
                       "returns": [float(r) for r in returns]}, f)
            f.write("\n")
    return 0


def _parse_grid(entries: list[str]) -> list[list[str]]:
    """['backend=generic,fused'] -> [['backend=generic', 'backend=fused']]"""
    axes = []
    for entry in entries:
        key, sep, values = entry.partition("=")
        if not sep:
            raise ValueError(f"grid entry {entry!r} is not key=v1,v2,...")
        axes.append([f"{key.strip()}={v.strip()}" for v in values.split(",") if v.strip()])
    return axes


def cmd_bench(args) -> int:
    if args.inference:
        return _bench_inference(args)
    cfg = _base_config(args).with_overrides([f"seed={args.seed}"])
    axes = _parse_grid(args.grid or ["backend=generic,fused"])
    rows = []
    for combo in itertools.product(*axes):
        point = cfg.with_overrides(list(combo))
        times = []
        final_iqm = None
        for _ in range(args.reps):
            record = train(point)
            times.append(record.train_seconds)
            final_iqm = record.final_iqm
        row = {
            "overrides": list(combo),
            "train_seconds_mean": float(np.mean(times)),
            "train_seconds_std": float(np.std(times)),
            "reps": args.reps,
            "final_iqm": final_iqm,
        }
        rows.append(row)
        name = " ".join(combo)
        print(f"{name}: train {row['train_seconds_mean']:.2f} "
              f"+- {row['train_seconds_std']:.2f} s, final IQM {final_iqm:.1f}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump(rows, f, indent=2)
            f.write("\n")
    return 0


def _bench_inference(args) -> int:
    if args.ckpt:
        ckpt = PolicyCheckpoint.load(args.ckpt)
    else:
        dims = [int(d) for d in args.dims.split(",")]
        net = Mlp.init(dims[0], dims[1:-1], dims[-1], Prng(args.seed),
                       activation=Activation.RELU)
        ckpt = PolicyCheckpoint.from_mlp(net)
    rows = []
    for backend in (Backend.GENERIC, Backend.FUSED):
        runtime = InferenceRuntime(ckpt, backend)
        lat = measure_latency(runtime, Prng(args.seed + 1), calls=args.calls)
        obs = np.zeros(runtime.input_dim, dtype=ckpt.dtype)
        alloc = measure_allocations(lambda: runtime.forward(obs), calls=args.calls)
        row = {"backend": backend.value, **lat,
               "net_blocks": alloc.net_blocks, "net_bytes": alloc.net_bytes,
               "peak_bytes": alloc.peak_bytes}
        rows.append(row)
        print(f"{backend.value}: mean {lat['mean_us']:.2f} us, p50 {lat['p50_us']:.2f}, "
              f"p99 {lat['p99_us']:.2f}; allocations net {alloc.net_blocks} blocks "
              f"/ {alloc.net_bytes} B, peak {alloc.peak_bytes} B")
    if args.out:
        with open(args.out, "w") as f:
            json.dump(rows, f, indent=2)
            f.write("\n")
    return 0


def cmd_export(args) -> int:
    seed = args.seed
    if seed is None:
        with open(os.path.join(args.run, "summary.json")) as f:
            seed = json.load(f)["best_seed"]
    src = os.path.join(args.run, f"seed_{seed}", "policy.ckpt")
    ckpt = PolicyCheckpoint.load(src)
    ckpt.save(args.out)
    print(f"exported seed {seed} policy ({ckpt.param_count()} parameters) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="picorl", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one or more seeds")
    p.add_argument("--algo", choices=["sac", "td3", "ppo"])
    p.add_argument("--env", default=None)
    p.add_argument("--seeds", default="0", help="e.g. 0..9 or 0,2,5")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--config", default=None, help="key = value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--backend", choices=["generic", "fused"], default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--eval-episodes", type=int, default=None, dest="eval_episodes")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--env", default="pendulum")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", choices=["generic", "fused"], default="fused")
    p.add_argument("--out", default=None, help="write returns as JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="training wall-clock grid or inference latency")
    p.add_argument("--grid", action="append", metavar="KEY=V1,V2",
                   help="config axis; default backend=generic,fused")
    p.add_argument("--algo", choices=["sac", "td3", "ppo"], default="sac")
    p.add_argument("--env", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--eval-episodes", type=int, default=None, dest="eval_episodes")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inference", action="store_true",
                   help="measure forward latency and allocations instead")
    p.add_argument("--ckpt", default=None, help="checkpoint for --inference")
    p.add_argument("--dims", default="13,64,64,4",
                   help="random net dims for --inference without --ckpt")
    p.add_argument("--calls", type=int, default=10_000)
    p.add_argument("--out", default=None, help="write results as JSON")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export", help="re-export a policy from a run directory")
    p.add_argument("--run", required=True, help="training run directory")
    p.add_argument("--seed", type=int, default=None, help="default: best final IQM")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
