"""On-disk layout for training runs.

A run directory holds one subdirectory per seed plus aggregates:

    out/
      config.cfg            resolved base config (seed of the first run)
      summary.json          per-seed finals, timings, best seed
      iqm_curve.csv         step column, per-seed IQM columns, cross-seed mean
      seed_<k>/
        config.cfg          resolved config for this seed
        record.jsonl        one JSON line per eval point, then a summary line
        policy.ckpt[.json]  exported final policy

Per-seed files are written by whoever ran the seed (possibly a worker
process); aggregates are recomputed from those files afterwards, so the
CSV can always be rebuilt from the records alone.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .training import RunRecord, TrainRunConfig


def write_config(path: str, flat: dict[str, str]) -> None:
    with open(path, "w") as f:
        for key, value in flat.items():
            f.write(f"{key} = {value}\n")


def parse_config_text(text: str) -> dict[str, str]:
    """key = value lines; blank lines and # comments are skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ValueError(f"line {lineno} is not of the form key = value: {line!r}")
        out[key.strip()] = value.split("#", 1)[0].strip()
    return out


def read_config(path: str) -> dict[str, str]:
    with open(path) as f:
        return parse_config_text(f.read())


def seed_dir(out_dir: str, seed: int) -> str:
    return os.path.join(out_dir, f"seed_{seed}")


def write_seed_outputs(out_dir: str, record: RunRecord) -> dict:
    """Write one seed's record files and return its summary dict."""
    sdir = seed_dir(out_dir, record.config.seed)
    os.makedirs(sdir, exist_ok=True)
    write_config(os.path.join(sdir, "config.cfg"), record.config.to_flat(resolved=True))
    record.checkpoint.save(os.path.join(sdir, "policy.ckpt"))
    summary = {
        "kind": "summary",
        "seed": record.config.seed,
        "iterations": record.iterations,
        "train_seconds": record.train_seconds,
        "total_seconds": record.total_seconds,
        "final_iqm": record.final_iqm,
        "final_losses": {k: float(v) for k, v in record.final_losses.items()},
    }
    with open(os.path.join(sdir, "record.jsonl"), "w") as f:
        for point in record.eval_points:
            f.write(json.dumps({
                "kind": "eval",
                "step": point.step,
                "iqm_mean": point.iqm_mean,
                "iqm_std": point.iqm_std,
                "returns": [float(r) for r in point.returns],
            }) + "\n")
        f.write(json.dumps(summary) + "\n")
    return summary


def read_seed_record(out_dir: str, seed: int) -> dict:
    """Parse one seed's record.jsonl back into arrays."""
    steps, means, stds, returns = [], [], [], []
    summary = None
    with open(os.path.join(seed_dir(out_dir, seed), "record.jsonl")) as f:
        for line in f:
            row = json.loads(line)
            if row["kind"] == "eval":
                steps.append(row["step"])
                means.append(row["iqm_mean"])
                stds.append(row["iqm_std"])
                returns.append(np.array(row["returns"]))
            else:
                summary = row
    return {
        "steps": np.array(steps, dtype=np.int64),
        "iqm_mean": np.array(means),
        "iqm_std": np.array(stds),
        "returns": returns,
        "summary": summary,
    }


def write_aggregates(out_dir: str, seeds: list[int]) -> dict:
    """Rebuild iqm_curve.csv and summary.json from the seed records."""
    records = {seed: read_seed_record(out_dir, seed) for seed in seeds}
    steps = records[seeds[0]]["steps"]
    for seed in seeds[1:]:
        if not np.array_equal(records[seed]["steps"], steps):
            raise ValueError(f"seed {seed} has a different evaluation schedule")

    with open(os.path.join(out_dir, "iqm_curve.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", *[f"iqm_seed_{s}" for s in seeds], "iqm_mean_across_seeds"])
        for i, step in enumerate(steps):
            row = [records[s]["iqm_mean"][i] for s in seeds]
            writer.writerow([int(step), *[f"{v:.6f}" for v in row],
                             f"{float(np.mean(row)):.6f}"])

    finals = {str(s): records[s]["summary"]["final_iqm"] for s in seeds}
    best = max(seeds, key=lambda s: records[s]["summary"]["final_iqm"])
    summary = {
        "seeds": seeds,
        "final_iqm": finals,
        "best_seed": best,
        "train_seconds": {str(s): records[s]["summary"]["train_seconds"] for s in seeds},
        "total_seconds": {str(s): records[s]["summary"]["total_seconds"] for s in seeds},
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2)
        f.write("\n")
    return summary


def write_run_outputs(out_dir: str, base_cfg: TrainRunConfig, seeds: list[int]) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    write_config(os.path.join(out_dir, "config.cfg"), base_cfg.to_flat(resolved=True))
    return write_aggregates(out_dir, seeds)
