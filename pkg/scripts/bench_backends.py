"""Compare the generic and fused kernel backends.

Two views: per-call dense-layer latency over a sweep of layer shapes, and
one full SAC training run per backend with the same seed. The backends
share their arithmetic, so the training outcomes should agree and the
interesting number is wall-clock.
"""

import argparse
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from picorl.kernels import Activation, Backend, dense
from picorl.rng import Prng
from picorl.training import TrainRunConfig, train


def bench_dense(backend: Backend, shapes, reps: int = 2000) -> list[tuple]:
    rng = Prng(0)
    rows = []
    for batch, fan_in, fan_out in shapes:
        x = rng.gaussian(batch * fan_in).reshape(batch, fan_in).astype(np.float32)
        w = rng.gaussian(fan_in * fan_out).reshape(fan_in, fan_out).astype(np.float32)
        b = rng.gaussian(fan_out).astype(np.float32)
        out = np.empty((batch, fan_out), dtype=np.float32)
        dense(x, w, b, Activation.RELU, backend=backend, out=out)
        t0 = time.perf_counter()
        for _ in range(reps):
            dense(x, w, b, Activation.RELU, backend=backend, out=out)
        dt = (time.perf_counter() - t0) / reps
        rows.append((batch, fan_in, fan_out, dt * 1e6))
    return rows


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--train", action="store_true", help="also run one SAC seed per backend")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    shapes = [(1, 3, 64), (1, 64, 64), (1, 64, 1), (100, 4, 64), (100, 64, 64), (100, 64, 1)]
    print(f"{'batch':>6} {'in':>4} {'out':>4} {'generic us':>11} {'fused us':>9}")
    gen = bench_dense(Backend.GENERIC, shapes)
    fus = bench_dense(Backend.FUSED, shapes)
    for (b, i, o, tg), (_, _, _, tf) in zip(gen, fus):
        print(f"{b:>6} {i:>4} {o:>4} {tg:>11.2f} {tf:>9.2f}")

    if args.train:
        for backend in ("generic", "fused"):
            cfg = TrainRunConfig(algo="sac", seed=args.seed, backend=backend)
            rec = train(cfg)
            print(f"sac seed {args.seed} backend {backend:8s} "
                  f"final IQM {rec.final_iqm:8.2f}  train {rec.train_seconds:5.1f}s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
