"""Line-delimited JSON persistence for run records and aggregate curves."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable

from .runner import SCHEMA_VERSION, RunRecord

RECORD_FIELDS = ("schema_version", "run_id", "n_qubits", "strategy", "p", "mitigation", "seed",
                 "target", "valid", "N", "infidelity", "uncertainty_R")


def _value(x) -> str:
    """JSON text for ``x``; floats carry 17 significant digits, NaN becomes null."""
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return "null"
        return format(x, ".17g")
    return json.dumps(x)


def format_line(fields: dict) -> str:
    return "{" + ", ".join(f'"{k}": {_value(v)}' for k, v in fields.items()) + "}"


def record_lines(record: RunRecord) -> list[str]:
    """One line per checkpoint; a run without checkpoints still gets a single line with ``N`` null."""
    head = dict(schema_version=SCHEMA_VERSION, run_id=record.run_id, n_qubits=record.n_qubits,
                strategy=record.strategy, p=float(record.p), mitigation=record.mitigation,
                seed=int(record.seed), target=record.target, valid=record.valid)
    if not record.N:
        return [format_line(dict(head, N=None, infidelity=None, uncertainty_R=None))]
    return [format_line(dict(head, N=int(n), infidelity=float(f), uncertainty_R=float(r)))
            for n, f, r in zip(record.N, record.infidelity, record.uncertainty_R)]


def write_records(path, records: Iterable[RunRecord]) -> None:
    lines = [line for r in records for line in record_lines(r)]
    Path(path).write_text("".join(line + "\n" for line in lines))


def parse_records(text: str, source: str = "<records>") -> list[RunRecord]:
    """Group checkpoint lines back into records, ordered by run id.

    Raises:
        ValueError: on malformed lines, unknown schema versions, or no records.
    """
    runs: dict[int, RunRecord] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if obj.get("schema_version") != SCHEMA_VERSION:
                raise ValueError(f"unsupported schema_version {obj.get('schema_version')!r}")
            rid = int(obj["run_id"])
            rec = runs.get(rid)
            if rec is None:
                rec = RunRecord(rid, int(obj["n_qubits"]), obj["strategy"], float(obj["p"]), obj["mitigation"],
                                int(obj["seed"]), obj.get("target", ""), valid=bool(obj.get("valid", True)))
                runs[rid] = rec
            if obj["N"] is not None:
                rec.N.append(int(obj["N"]))
                rec.infidelity.append(float(obj["infidelity"]))
                r = obj["uncertainty_R"]
                rec.uncertainty_R.append(float("nan") if r is None else float(r))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{source}:{lineno}: malformed record ({exc})") from exc
    if not runs:
        raise ValueError(f"{source}: no records found")
    return [runs[k] for k in sorted(runs)]


def read_records(path) -> list[RunRecord]:
    return parse_records(Path(path).read_text(), str(path))


def write_aggregates(path, groups: dict) -> None:
    """``groups`` maps a metadata dict (as a tuple of items) to a :class:`Curve`."""
    lines = []
    for meta, curve in groups.items():
        for i, n in enumerate(curve.N):
            lines.append(format_line(dict(schema_version=SCHEMA_VERSION, **dict(meta), N=int(n),
                                          mean=float(curve.mean[i]), q25=float(curve.q25[i]),
                                          q50=float(curve.q50[i]), q75=float(curve.q75[i]),
                                          count=int(curve.count))))
    Path(path).write_text("".join(line + "\n" for line in lines))
