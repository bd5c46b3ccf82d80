"""Train one algorithm over a batch of seeds and write a run directory.

Typical use:

    python3 scripts/train_pendulum.py --algo sac --seeds 0..9 --out runs/sac
    python3 scripts/train_pendulum.py --algo ppo --seeds 0..4 --out runs/ppo \
        --set total_steps=100000

This is a thin wrapper over the library; the picorl CLI exposes the same
flow as `picorl train`.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from picorl.cli import parse_seeds
from picorl.results import write_run_outputs, write_seed_outputs
from picorl.training import TrainRunConfig, train


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--algo", default="sac", choices=("sac", "td3", "ppo"))
    ap.add_argument("--seeds", default="0..9")
    ap.add_argument("--out", default=None, help="run directory (default runs/<algo>)")
    ap.add_argument("--backend", default="fused", choices=("generic", "fused"))
    ap.add_argument("--set", dest="overrides", action="append", default=[],
                    metavar="KEY=VALUE")
    args = ap.parse_args()

    base = TrainRunConfig(algo=args.algo, backend=args.backend).with_overrides(args.overrides)
    out = pathlib.Path(args.out or f"runs/{args.algo}")
    seeds = parse_seeds(args.seeds)

    for seed in seeds:
        cfg = base.with_overrides([f"seed={seed}"])
        rec = train(cfg)
        write_seed_outputs(str(out), rec)
        print(f"seed {seed:3d}  final IQM {rec.final_iqm:9.2f}  "
              f"train {rec.train_seconds:6.1f}s  total {rec.total_seconds:6.1f}s")
    write_run_outputs(str(out), base, seeds)
    print(f"wrote {out}/summary.json and {out}/iqm_curve.csv")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
