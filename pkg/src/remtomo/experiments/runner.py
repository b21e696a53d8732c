"""A single simulated reconstruction: target, noisy readout, mitigation model and estimator."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..adaptive import Strategy, adaptation_schedule, initial_setting, next_setting_infogain, two_step_setting
from ..detector import DiagonalPovm, calibrate
from ..estimator import BayesFilter, DegenerateUpdateError, EstimatorConfig, uncertainty_R
from ..measurement import NoiseModel, Povm, computational_povm, depolarize_operators, pauli6, rotate_elements
from ..measurement import hermitian_to_real, sample_sequence, born_probabilities
from ..qcore import haar_random_pure, hilbert_schmidt_random_mixed, infidelity, pure_to_density

MITIGATION_MODES = ("exact", "none", "offset", "calibrated")
TARGET_KINDS = ("haar_pure", "hs_mixed", "fixed")
SCHEMA_VERSION = 1


def log_checkpoints(budget: int, per_decade: int = 30) -> list[int]:
    """Deduplicated integers ``round(10^(k/per_decade))`` up to ``budget``, always ending at ``budget``."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    top = int(np.ceil(np.log10(budget) * per_decade))
    pts = np.unique(np.round(10 ** (np.arange(top + 1) / per_decade)).astype(int))
    pts = [int(x) for x in pts if 1 <= x < budget]
    return pts + [budget]


@dataclass
class RunConfig:
    """Everything that defines one reconstruction run.

    ``seed`` drives outcomes, resampling, strategy randomness and calibration;
    ``target_seed`` (default: ``seed``) fixes the target so that variations of
    a sweep share targets.
    """

    n_qubits: int = 1
    target_kind: str = "haar_pure"
    target: np.ndarray | None = None
    strategy: Strategy = field(default_factory=Strategy)
    noise: NoiseModel = field(default_factory=NoiseModel)
    mitigation: str = "exact"
    p_assumed: float = 0.0
    calibration_shots: int = 1000
    calibration: DiagonalPovm | None = None
    budget: int = 1000
    checkpoints: list[int] | None = None
    estimator: EstimatorConfig | None = None
    seed: int = 0
    target_seed: int | None = None
    run_id: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.target_kind not in TARGET_KINDS:
            raise ValueError(f"unknown target kind {self.target_kind!r}")
        if self.target_kind == "fixed" and self.target is None:
            raise ValueError("a fixed target needs a density matrix")
        if self.mitigation not in MITIGATION_MODES:
            raise ValueError(f"unknown mitigation mode {self.mitigation!r}")
        if not 0 <= self.p_assumed <= 1:
            raise ValueError("p_assumed must lie in [0, 1]")
        if self.checkpoints is None:
            self.checkpoints = log_checkpoints(self.budget)
        cps = list(self.checkpoints)
        if not cps or any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] < 1 or cps[-1] > self.budget:
            raise ValueError("checkpoints must be ascending integers within [1, budget]")
        self.checkpoints = [int(c) for c in cps]

    def estimator_config(self) -> EstimatorConfig:
        return self.estimator or EstimatorConfig.defaults(self.n_qubits)


@dataclass
class RunRecord:
    run_id: int
    n_qubits: int
    strategy: str
    p: float
    mitigation: str
    seed: int
    target: str
    N: list[int] = field(default_factory=list)
    infidelity: list[float] = field(default_factory=list)
    uncertainty_R: list[float] = field(default_factory=list)
    valid: bool = True
    error: str = ""


def make_target(config: RunConfig) -> np.ndarray:
    if config.target_kind == "fixed":
        return np.asarray(config.target, dtype=complex)
    seed = config.seed if config.target_seed is None else config.target_seed
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7A56]))
    if config.target_kind == "haar_pure":
        return pure_to_density(haar_random_pure(config.n_qubits, rng))
    return hilbert_schmidt_random_mixed(config.n_qubits, rng)


def mitigation_operators(config: RunConfig, true_comp: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Computational-basis operators the estimator assumes for the readout."""
    n = config.n_qubits
    if config.mitigation == "exact":
        return true_comp
    if config.mitigation == "none":
        return computational_povm(n).elements
    if config.mitigation == "offset":
        return depolarize_operators(computational_povm(n).elements, config.p_assumed)
    cal = config.calibration
    if cal is None:
        cal = calibrate(Povm(true_comp, validate=False), config.calibration_shots, rng)
    return cal.operators()


class _Readout:
    """Paired true and assumed POVMs for the setting currently in use."""

    def __init__(self, tag, true_elements: np.ndarray, model_elements: np.ndarray):
        self.tag = tag
        self.true = Povm(true_elements, validate=False)
        self.model_vectors = hermitian_to_real(model_elements)


def run_reconstruction(config: RunConfig) -> RunRecord:
    """Simulate one measurement sequence and record the estimate at each checkpoint.

    Outcomes are drawn from the noisy readout acting on the target. The
    estimator sees the mitigation model's operators for the same outcomes.
    A degenerate Bayes update ends the run early with ``valid=False``.
    """
    n = config.n_qubits
    streams = np.random.SeedSequence(config.seed).spawn(4)
    rng_out, rng_est, rng_strat, rng_cal = (np.random.default_rng(s) for s in streams)
    target = make_target(config)
    true_comp = depolarize_operators(computational_povm(n).elements, config.noise.strength)
    model_comp = mitigation_operators(config, true_comp, rng_cal)
    est = config.estimator_config()
    filt = BayesFilter(n, est, rng_est)
    strategy = config.strategy
    budget = config.budget

    record = RunRecord(config.run_id, n, strategy.kind, config.noise.strength, config.mitigation,
                       config.seed, config.target_kind)

    def pauli_readout(tag, frame=None):
        return _Readout(tag, pauli6(n, true_comp, frame).elements, pauli6(n, model_comp, frame).elements)

    def setting_readout(tag, setting):
        u = setting.unitary
        return _Readout(tag, rotate_elements(true_comp, u), rotate_elements(model_comp, u))

    # shot indices (1-based) before which the readout changes
    changes: list[int] = [1]
    if strategy.kind == "two_step":
        n_switch = max(1, int(round(strategy.switch_fraction * budget)))
        if n_switch < budget:
            changes.append(n_switch + 1)
    elif strategy.kind == "info_gain":
        changes = adaptation_schedule(budget, strategy.adaptation_mode(n))
    boundaries = sorted(set(config.checkpoints) | {c - 1 for c in changes if c > 1})
    change_set = set(changes)
    checkpoint_set = set(config.checkpoints)

    readout = None
    setting = initial_setting(n)
    done = 0
    try:
        for end in boundaries:
            start = done + 1
            if start in change_set:
                if strategy.kind == "static":
                    readout = pauli_readout("p6")
                elif strategy.kind == "two_step":
                    if readout is None:
                        readout = pauli_readout("p6")
                    else:
                        readout = pauli_readout("p6r", two_step_setting(filt.estimate()))
                else:
                    setting = next_setting_infogain(filt.swarm, model_comp, strategy, rng_strat, setting).setting
                    readout = setting_readout(start, setting)
            probs = born_probabilities(target, readout.true)
            idx = sample_sequence(probs, end - done, rng_out)
            filt.observe([(readout.tag, int(i)) for i in idx], readout.model_vectors[idx])
            done = end
            if end in checkpoint_set:
                rho_hat = filt.estimate()
                record.N.append(end)
                record.infidelity.append(infidelity(target, rho_hat))
                record.uncertainty_R.append(uncertainty_R(filt.swarm, rho_hat, target))
    except DegenerateUpdateError as exc:
        record.valid = False
        record.error = str(exc)
    return record
