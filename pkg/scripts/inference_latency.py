"""Latency and allocation profile of the standalone inference path.

Builds a policy net (or loads a checkpoint), wraps it in the fixed-buffer
runtime, and reports per-call latency plus heap behaviour over a long call
loop. A clean report means the steady-state forward pass performs no
dynamic allocation.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from picorl.checkpoint import PolicyCheckpoint
from picorl.kernels import Activation, Backend
from picorl.nn import Mlp
from picorl.rng import Prng
from picorl.runtime import InferenceRuntime, measure_allocations, measure_latency


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ckpt", default=None, help="policy checkpoint to load")
    ap.add_argument("--dims", default="13,64,64,4",
                    help="random net layout when no checkpoint is given")
    ap.add_argument("--calls", type=int, default=1_000_000)
    args = ap.parse_args()

    if args.ckpt:
        ckpt = PolicyCheckpoint.load(args.ckpt)
    else:
        dims = [int(p) for p in args.dims.split(",")]
        net = Mlp.init(dims[0], tuple(dims[1:-1]), dims[-1], Prng(0),
                       activation=Activation.RELU, output_activation=Activation.TANH)
        ckpt = PolicyCheckpoint.from_mlp(net, action_scale=np.full(dims[-1], 2.0))
    print(f"net {ckpt.input_dim}-{list(ckpt.hidden_dims)}-{ckpt.output_dim}, "
          f"{ckpt.param_count()} parameters, dtype {ckpt.dtype}")

    obs = Prng(1).gaussian(ckpt.input_dim).astype(ckpt.dtype)
    for backend in (Backend.GENERIC, Backend.FUSED):
        rt = InferenceRuntime(ckpt, backend=backend)
        lat = measure_latency(rt, Prng(2), calls=min(args.calls, 100_000))
        rep = measure_allocations(lambda: rt.forward(obs), calls=args.calls)
        print(f"{backend.value:8s} mean {lat['mean_us']:.2f}us  p50 {lat['p50_us']:.2f}us  "
              f"p99 {lat['p99_us']:.2f}us  | {rep.calls} calls: net {rep.net_bytes}B "
              f"({rep.net_blocks} blocks), peak {rep.peak_bytes}B  "
              f"{'CLEAN' if rep.clean else 'ALLOCATING'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
