"""Command-line entry point: ``remtomo {run,fit,detector,fisher}``.

Each command reads an optional YAML config (``--config``), applies
``--set key=value`` overrides on top, and rejects unknown keys.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from collections import defaultdict
from pathlib import Path

import numpy as np
import yaml

from .adaptive import Strategy
from .detector import calibrate, depolarized_diagonal, povm_distance, write_diagonal_povm
from .estimator import EstimatorConfig
from .fisher import (fisher_matrix, nearly_pure, noisy_amplification_audit, orthogonal_completion_operators,
                     physical_dimension, predicted_infidelity, projective_pair, rank_deficiency)
from .measurement import MeasurementSetting, NoiseModel, apply_depolarizing, pauli6
from .qcore import eigendecompose, haar_random_pure, haar_random_unitary, pure_to_density
from .experiments import (RunConfig, aggregate_curve, log_checkpoints, power_law_fit, read_records,
                          rolling_power_law, run_sweep, write_aggregates)

RUN_DEFAULTS = {
    "n_qubits": 1,
    "target_kind": "haar_pure",
    "strategy": "static",
    "switch_fraction": 0.5,
    "n_random_candidates": 30,
    "include_posterior_eigenbasis": True,
    "include_current_best": True,
    "refinement_steps": 20,
    "adaptation": None,
    "p": 0.0,
    "mitigation": "exact",
    "p_assumed": 0.0,
    "calibration_shots": 1000,
    "budget": 1000,
    "checkpoints_per_decade": 30,
    "n_targets": 2,
    "n_part": None,
    "tau": None,
    "k": None,
    "n_mh": None,
    "sigma_mode": None,
    "variations": [],
    "seed": 0,
}

DETECTOR_DEFAULTS = {
    "n_qubits": 1,
    "p": 0.15,
    "budgets": [1000, 1000000],
    "tol": 1e-10,
    "max_iter": 100000,
    "seed": 0,
}

FISHER_DEFAULTS = {
    "n_qubits": 1,
    "target": "zero",
    "p": 0.0,
    "N": 1,
    "nu": None,
    "vanish_tol": 1e-8,
    "complete": False,
    "near_pure_eps": 1e-10,
    "audit_samples": 1000,
    "seed": 0,
}


class ConfigError(ValueError):
    pass


def _load_config(path, overrides, defaults: dict, seed=None) -> dict:
    cfg = dict(defaults)
    if path:
        try:
            loaded = yaml.safe_load(Path(path).read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        except OSError as exc:
            raise ConfigError(str(exc)) from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        for key, value in loaded.items():
            if key not in defaults:
                raise ConfigError(f"{path}: unknown config key {key!r}")
            cfg[key] = value
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in defaults:
            raise ConfigError(f"--set: unknown config key {key!r}")
        try:
            cfg[key] = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"--set {key}: {exc}") from exc
    if seed is not None:
        cfg["seed"] = seed
    if not isinstance(cfg.get("seed"), int) or not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


def build_run_config(cfg: dict) -> RunConfig:
    n = int(cfg["n_qubits"])
    strategy = Strategy(kind=cfg["strategy"], switch_fraction=float(cfg["switch_fraction"]),
                        n_random_candidates=int(cfg["n_random_candidates"]),
                        include_posterior_eigenbasis=bool(cfg["include_posterior_eigenbasis"]),
                        include_current_best=bool(cfg["include_current_best"]),
                        refinement_steps=int(cfg["refinement_steps"]), adaptation=cfg["adaptation"])
    est = {k: cfg[k] for k in ("n_part", "tau", "k", "n_mh", "sigma_mode") if cfg[k] is not None}
    p = float(cfg["p"])
    budget = int(cfg["budget"])
    return RunConfig(n_qubits=n, target_kind=cfg["target_kind"], strategy=strategy,
                     noise=NoiseModel("depolarizing" if p > 0 else "none", p, n),
                     mitigation=cfg["mitigation"], p_assumed=float(cfg["p_assumed"]),
                     calibration_shots=int(cfg["calibration_shots"]), budget=budget,
                     checkpoints=log_checkpoints(budget, int(cfg["checkpoints_per_decade"])),
                     estimator=EstimatorConfig.defaults(n, **est))


def _group_key(rec) -> tuple:
    return (("n_qubits", rec.n_qubits), ("strategy", rec.strategy), ("p", rec.p),
            ("mitigation", rec.mitigation), ("target", rec.target))


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload) if args.json else text)


def cmd_run(args) -> int:
    cfg = _load_config(args.config, args.set, RUN_DEFAULTS, args.seed)
    base = build_run_config(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(yaml.safe_dump(cfg, sort_keys=True))
    records = run_sweep(base, int(cfg["n_targets"]), cfg["variations"] or None,
                        workers=args.workers, master_seed=cfg["seed"], out_dir=out)
    groups = defaultdict(list)
    for rec in records:
        groups[_group_key(rec)].append(rec)
    curves = {}
    for key, recs in groups.items():
        if any(r.valid for r in recs):
            curves[key] = aggregate_curve(recs)
    write_aggregates(out / "aggregates.jsonl", curves)
    n_invalid = sum(not r.valid for r in records)
    _emit(args, {"runs": len(records), "invalid": n_invalid, "out": str(out)},
          f"{len(records)} runs written to {out} ({n_invalid} invalid)")
    return 1 if n_invalid else 0


def cmd_fit(args) -> int:
    records = read_records(args.records)
    groups = defaultdict(list)
    for rec in records:
        groups[_group_key(rec)].append(rec)
    report = []
    for key, recs in groups.items():
        curve = aggregate_curve(recs)
        meta = dict(key)
        if args.mode == "global":
            lo, hi = (float(x) for x in (args.range or (curve.N[0], curve.N[-1])))
            fit = power_law_fit(curve, (lo, hi))
            report.append(dict(meta, exponent=fit.exponent, stderr=fit.stderr, prefactor=fit.prefactor,
                               range=[lo, hi]))
        else:
            roll = rolling_power_law(curve, args.window)
            report.append(dict(meta, rolling=[[n, a] for n, a in roll]))
    if args.json:
        print(json.dumps(report))
    else:
        for row in report:
            head = " ".join(f"{k}={row[k]}" for k in ("n_qubits", "strategy", "p", "mitigation", "target"))
            if "exponent" in row:
                print(f"{head} a={row['exponent']:.4f} +/- {row['stderr']:.4f}")
            else:
                print(head)
                for n, a in row["rolling"]:
                    print(f"  N={n:g} a={a:.4f}")
    return 0


def cmd_detector(args) -> int:
    cfg = _load_config(args.config, args.set, DETECTOR_DEFAULTS, args.seed)
    budgets = [int(b) for b in cfg["budgets"]]
    if not budgets or min(budgets) <= 0:
        raise ConfigError("budgets must be positive shot counts")
    n, p = int(cfg["n_qubits"]), float(cfg["p"])
    truth = depolarized_diagonal(n, p)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(yaml.safe_dump(cfg, sort_keys=True))
    rows = []
    streams = np.random.SeedSequence(cfg["seed"]).spawn(len(budgets))
    for b, ss in zip(budgets, streams):
        est = calibrate(truth.to_povm(), b, np.random.default_rng(ss), tol=float(cfg["tol"]),
                        max_iter=int(cfg["max_iter"]))
        path = out / f"povm_{b}.txt"
        write_diagonal_povm(path, est)
        rows.append({"budget": b, "distance": povm_distance(est, truth), "converged": est.converged,
                     "iterations": est.iterations, "file": str(path)})
    lines = "\n".join(f"budget={r['budget']} distance={r['distance']:.6g} iterations={r['iterations']}"
                      f"{'' if r['converged'] else ' (not converged)'}" for r in rows)
    _emit(args, {"results": rows}, lines)
    return 0


def _fisher_target(spec: str, n: int, rng) -> np.ndarray:
    d = 2**n
    if spec == "zero":
        rho = np.zeros((d, d), dtype=complex)
        rho[0, 0] = 1
        return rho
    if spec == "mixed":
        return np.eye(d, dtype=complex) / d
    if spec == "haar":
        return pure_to_density(haar_random_pure(n, rng))
    raise ConfigError(f"unknown fisher target {spec!r} (zero, mixed, haar)")


def cmd_fisher(args) -> int:
    cfg = _load_config(args.config, args.set, FISHER_DEFAULTS, args.seed)
    n, p, N = int(cfg["n_qubits"]), float(cfg["p"]), float(cfg["N"])
    rng = np.random.default_rng(cfg["seed"])
    rho = _fisher_target(cfg["target"], n, rng)
    povms = [apply_depolarizing(pauli6(n), p)]
    weights = [1.0]
    if cfg["complete"]:
        vals, vecs = eigendecompose(rho)
        rank = int(np.sum(vals > 1e-9))
        ops = orthogonal_completion_operators(vecs, rank)
        if ops:
            rho = nearly_pure(rho, float(cfg["near_pure_eps"]))
            povms += [projective_pair(o) for o in ops]
            weights = [0.5] + [0.5 / len(ops)] * len(ops)
    spec = fisher_matrix(rho, povms, weights, N)
    nu = cfg["nu"] if cfg["nu"] is not None else physical_dimension(n)
    total, vanishing = predicted_infidelity(spec, int(nu), float(cfg["vanish_tol"]))
    audit = noisy_amplification_audit(
        rho, lambda g: MeasurementSetting(tuple(haar_random_unitary(2, g) for _ in range(n))), p,
        int(cfg["audit_samples"]), rng)
    payload = {"singular_values": [float(s) for s in spec.singular_values], "vanishing": vanishing,
               "predicted_infidelity": total, "rank_deficiency_pure": rank_deficiency(n, 1),
               "excluded_terms": len(spec.excluded),
               "audit": {"checked": audit.n_checked, "violations": audit.violations,
                         "max_amplification": audit.max_amplification,
                         "bound_amplification": audit.bound_amplification, "unbounded": audit.unbounded}}
    text = "\n".join([
        "singular values: " + " ".join(f"{s:.6g}" for s in spec.singular_values),
        f"vanishing: {vanishing}",
        f"predicted infidelity: {total:.6g}",
        f"audit: {audit.violations} violations in {audit.n_checked} outcomes, max amplification "
        f"{audit.max_amplification:.6g}" + (" (p=0: unbounded)" if audit.unbounded else
                                            f", bound {audit.bound_amplification:.6g}"),
    ])
    _emit(args, payload, text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="remtomo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value (repeatable)")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        if out:
            p.add_argument("--out", default="out", help="output directory")

    p_run = sub.add_parser("run", help="run a reconstruction sweep")
    common(p_run)
    p_run.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p_run.set_defaults(func=cmd_run)

    p_fit = sub.add_parser("fit", help="fit power laws to record files")
    p_fit.add_argument("records", help="records.jsonl from a run")
    p_fit.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
    p_fit.add_argument("--mode", choices=("global", "rolling"), default="global")
    p_fit.add_argument("--window", type=float, default=5.0, help="rolling window factor")
    p_fit.add_argument("--json", action="store_true")
    p_fit.set_defaults(func=cmd_fit)

    p_det = sub.add_parser("detector", help="detector tomography budget sweep")
    common(p_det)
    p_det.set_defaults(func=cmd_detector)

    p_fis = sub.add_parser("fisher", help="Fisher spectrum and noise-bound audit")
    common(p_fis, out=False)
    p_fis.set_defaults(func=cmd_fisher)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
