"""Parallel, reproducible sweeps of reconstruction runs."""
from __future__ import annotations

import dataclasses
import os
from concurrent.futures import FIRST_EXCEPTION, ProcessPoolExecutor, wait
from pathlib import Path
from typing import Sequence

from ..measurement import NoiseModel
from .records import record_lines, write_records
from .runner import RunConfig, RunRecord, run_reconstruction

MASK64 = (1 << 64) - 1
TARGET_SALT = 0x5EED_7A26_E7


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 mixer."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Seed of run ``index``: ``splitmix64(splitmix64(master) ^ index)``."""
    if not 0 <= master_seed <= MASK64:
        raise ValueError("master seed must be an unsigned 64-bit integer")
    return splitmix64(splitmix64(master_seed) ^ (index & MASK64))


def apply_variation(base: RunConfig, variation: dict) -> RunConfig:
    """Copy of ``base`` with overrides.

    Besides ``RunConfig`` field names, ``p`` sets the depolarizing strength and
    ``strategy`` may be a kind name.
    """
    changes = dict(variation)
    if "p" in changes:
        p = float(changes.pop("p"))
        changes["noise"] = NoiseModel("depolarizing" if p > 0 else "none", p, base.n_qubits)
    if isinstance(changes.get("strategy"), str):
        changes["strategy"] = dataclasses.replace(base.strategy, kind=changes["strategy"])
    unknown = set(changes) - {f.name for f in dataclasses.fields(RunConfig)}
    if unknown:
        raise ValueError(f"unknown variation keys: {sorted(unknown)}")
    return dataclasses.replace(base, **changes)


def plan_sweep(base: RunConfig, n_targets: int, variations: Sequence[dict] | None,
               master_seed: int) -> list[RunConfig]:
    """Run configurations in run-index order (variation-major).

    Every variation sees the same targets: target ``t`` is seeded from the
    master seed and ``t`` alone.
    """
    if n_targets < 1:
        raise ValueError("n_targets must be >= 1")
    variations = list(variations) if variations else [{}]
    configs = []
    for v, var in enumerate(variations):
        cfg = apply_variation(base, var)
        for t in range(n_targets):
            run = v * n_targets + t
            configs.append(dataclasses.replace(cfg, seed=derive_seed(master_seed, run),
                                               target_seed=derive_seed(master_seed ^ TARGET_SALT, t),
                                               run_id=run))
    return configs


def run_sweep(base: RunConfig, n_targets: int, variations: Sequence[dict] | None = None,
              workers: int | None = None, master_seed: int = 0, out_dir=None) -> list[RunRecord]:
    """Run every (variation, target) pair and return records ordered by run id.

    With ``out_dir`` set, finished runs are appended to ``records.partial.jsonl``
    as they complete and ``records.jsonl`` is written in run order at the end,
    so its bytes do not depend on the worker count. If a worker fails, the
    sweep stops and the partial file keeps the completed runs.
    """
    configs = plan_sweep(base, n_targets, variations, master_seed)
    workers = workers or os.cpu_count() or 1
    partial = None
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        partial = Path(out_dir) / "records.partial.jsonl"
        partial.write_text("")

    def store(rec: RunRecord) -> None:
        if partial is not None:
            with partial.open("a") as fh:
                fh.write("".join(line + "\n" for line in record_lines(rec)))

    results: dict[int, RunRecord] = {}
    if workers == 1:
        for cfg in configs:
            rec = run_reconstruction(cfg)
            store(rec)
            results[rec.run_id] = rec
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pending = {pool.submit(run_reconstruction, cfg) for cfg in configs}
            while pending:
                finished, pending = wait(pending, return_when=FIRST_EXCEPTION)
                for fut in finished:
                    if fut.exception() is not None:
                        for p in pending:
                            p.cancel()
                        raise fut.exception()
                    rec = fut.result()
                    store(rec)
                    results[rec.run_id] = rec
    records = [results[k] for k in sorted(results)]
    if out_dir is not None:
        write_records(Path(out_dir) / "records.jsonl", records)
        partial.unlink()
    return records
