"""Measurement strategies: static, two-step eigenbasis, and information-gain adaptation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimator import ParticleSwarm, mean_estimate
from .measurement import (MeasurementSetting, NoiseModel, Povm, computational_povm, depolarize_operators,
                          hermitian_to_real, identity_setting, pauli_settings, rotate_elements)
from .qcore import PAULI_X, PAULI_Y, PAULI_Z, eigendecompose, haar_random_unitary, reduced_state

UTILITY_TIE_TOL = 1e-12
STRATEGY_KINDS = ("static", "two_step", "info_gain")
ADAPTATION_MODES = ("every_shot", "block")


@dataclass(frozen=True)
class Strategy:
    """How measurement settings are chosen during a run.

    Attributes:
        kind: ``static``, ``two_step`` or ``info_gain``.
        switch_fraction: share of the budget measured before the two-step rotation.
        n_random_candidates: Haar-random settings added to each info-gain pool.
        include_posterior_eigenbasis: add the eigenbasis of the mean estimate to the pool.
        include_current_best: keep the previous choice in the pool.
        refinement_steps: hill-climbing steps around the best pool member.
        initial_step: starting perturbation angle for hill climbing.
        adaptation: ``every_shot`` or ``block``; ``None`` picks every_shot for
            one qubit and block otherwise.
    """

    kind: str = "static"
    switch_fraction: float = 0.5
    n_random_candidates: int = 30
    include_posterior_eigenbasis: bool = True
    include_current_best: bool = True
    refinement_steps: int = 20
    initial_step: float = 0.3
    adaptation: str | None = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if not 0 < self.switch_fraction < 1:
            raise ValueError("switch_fraction must lie in (0, 1)")
        if self.n_random_candidates < 0 or self.refinement_steps < 0:
            raise ValueError("candidate counts must be non-negative")
        if self.adaptation is not None and self.adaptation not in ADAPTATION_MODES:
            raise ValueError(f"unknown adaptation mode {self.adaptation!r}")

    def adaptation_mode(self, n_qubits: int) -> str:
        if self.adaptation is not None:
            return self.adaptation
        return "every_shot" if n_qubits == 1 else "block"


@dataclass(frozen=True)
class UtilityEvaluation:
    setting: MeasurementSetting
    utility: float


def shannon_entropy(probs) -> float:
    """Natural-log entropy with ``0 log 0 = 0``."""
    p = np.asarray(probs, dtype=float)
    if np.any(p < -1e-9) or abs(p.sum() - 1) > 1e-9:
        raise ValueError("input is not a probability vector")
    return float(_entropy(p))


def _entropy(p: np.ndarray) -> np.ndarray:
    # entropy along the last axis
    p = np.clip(p, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=-1)


def _utilities(swarm: ParticleSwarm, element_vectors: np.ndarray) -> np.ndarray:
    """Information gain of each candidate; ``element_vectors`` is ``(S, outcomes, 2 d^2)``."""
    s, k, _ = element_vectors.shape
    p = np.clip(swarm.vectors @ element_vectors.reshape(s * k, -1).T, 0.0, None).reshape(-1, s, k)
    p = p / p.sum(axis=2, keepdims=True)
    w = swarm.weights
    marginal = np.einsum("i,isk->sk", w, p)
    return _entropy(marginal) - w @ _entropy(p)


def info_gain_utility(swarm: ParticleSwarm, povm: Povm) -> float:
    """Expected entropy reduction ``H(sum_i w_i p_i) - sum_i w_i H(p_i)`` for ``povm``."""
    if povm.dim != swarm.dim:
        raise ValueError("POVM dimension does not match the swarm")
    return float(_utilities(swarm, povm.real_vectors[None])[0])


def _unitary_from_columns(vectors: np.ndarray) -> np.ndarray:
    """Columns are ``vectors`` with the phase fixed so each first nonzero entry is real positive."""
    u = np.array(vectors, dtype=complex).T
    for j in range(u.shape[1]):
        col = u[:, j]
        i = int(np.argmax(np.abs(col) > 1e-12))
        u[:, j] = col * (abs(col[i]) / col[i])
    return u


def _eigenbasis_unitary(rho: np.ndarray, degenerate_tol: float = 1e-12) -> np.ndarray:
    vals, vecs = eigendecompose(rho)
    if np.all(np.abs(np.diff(vals)) < degenerate_tol):
        return np.eye(len(vals), dtype=complex)
    return _unitary_from_columns(vecs)


def two_step_setting(initial_estimate: np.ndarray) -> MeasurementSetting:
    """Setting whose readout basis diagonalizes each single-qubit reduction of the estimate.

    For one qubit the first column of the unitary is the principal
    eigenvector, so outcome ``0`` projects onto it. A fully degenerate
    spectrum returns the computational basis.
    """
    rho = np.asarray(initial_estimate, dtype=complex)
    n = int(round(math.log2(rho.shape[0])))
    if n == 1:
        return MeasurementSetting((_eigenbasis_unitary(rho),), label="eig")
    us = tuple(_eigenbasis_unitary(reduced_state(rho, q, n)) for q in range(n))
    return MeasurementSetting(us, label="eig")


def adaptation_schedule(total_budget: int, mode: str) -> list[int]:
    """1-based measurement indices at which the setting is re-optimized.

    ``block`` refreshes at the deduplicated values of ``ceil(1.1^j)``.
    """
    if total_budget < 1:
        raise ValueError("total_budget must be >= 1")
    if mode == "every_shot":
        return list(range(1, total_budget + 1))
    if mode != "block":
        raise ValueError(f"unknown adaptation mode {mode!r}")
    points = []
    j = 0
    while True:
        x = math.ceil(1.1**j)
        if x > total_budget:
            break
        if not points or x != points[-1]:
            points.append(x)
        j += 1
    return points


def noisy_computational(noise: NoiseModel, n_qubits: int) -> np.ndarray:
    return depolarize_operators(computational_povm(n_qubits).elements, noise.strength)


def _candidate_vectors(settings: list[MeasurementSetting], computational: np.ndarray) -> np.ndarray:
    return np.stack([hermitian_to_real(rotate_elements(computational, s.unitary)) for s in settings])


def _random_su2_step(eps: float, rng: np.random.Generator) -> np.ndarray:
    h = rng.normal(size=3)
    norm = np.linalg.norm(h)
    gen = (h[0] * PAULI_X + h[1] * PAULI_Y + h[2] * PAULI_Z) / norm
    return np.cos(eps * norm) * np.eye(2) - 1j * np.sin(eps * norm) * gen


def candidate_pool(swarm: ParticleSwarm, n_qubits: int, strategy: Strategy, rng: np.random.Generator,
                   current: MeasurementSetting | None = None) -> list[MeasurementSetting]:
    """Pauli settings, posterior eigenbasis, current setting, then Haar-random settings, in that order."""
    pool = list(pauli_settings(n_qubits))
    if strategy.include_posterior_eigenbasis:
        pool.append(two_step_setting(mean_estimate(swarm)))
    if strategy.include_current_best and current is not None:
        pool.append(current)
    for _ in range(strategy.n_random_candidates):
        pool.append(MeasurementSetting(tuple(haar_random_unitary(2, rng) for _ in range(n_qubits)), label="haar"))
    return pool


def evaluate_candidates(swarm: ParticleSwarm, settings: list[MeasurementSetting],
                        computational: np.ndarray) -> list[UtilityEvaluation]:
    u = _utilities(swarm, _candidate_vectors(settings, computational))
    return [UtilityEvaluation(s, float(x)) for s, x in zip(settings, u)]


def next_setting_infogain(swarm: ParticleSwarm, noise: NoiseModel | np.ndarray, strategy: Strategy,
                          rng: np.random.Generator, current: MeasurementSetting | None = None
                          ) -> UtilityEvaluation:
    """Setting with the largest expected information gain.

    Args:
        swarm: current posterior.
        noise: readout model, either a :class:`NoiseModel` or the ``(d, d, d)``
            computational-basis operators the estimator assumes.
        strategy: pool and refinement parameters.
        rng: random stream for Haar candidates and hill climbing.
        current: setting in use, added to the pool if the strategy asks for it.

    Returns:
        The winning setting with its utility. Ties go to the earliest pool entry.

    Raises:
        ValueError: if the candidate pool is empty.
    """
    n_qubits = int(round(math.log2(swarm.dim)))
    comp = noisy_computational(noise, n_qubits) if isinstance(noise, NoiseModel) else np.asarray(noise)
    pool = candidate_pool(swarm, n_qubits, strategy, rng, current)
    if not pool:
        raise ValueError("empty candidate pool")
    util = _utilities(swarm, _candidate_vectors(pool, comp))
    best_i = int(np.argmax(util >= util.max() - UTILITY_TIE_TOL))
    best, best_u = pool[best_i], float(util[best_i])
    eps = strategy.initial_step
    for _ in range(strategy.refinement_steps):
        trial = MeasurementSetting(tuple(_random_su2_step(eps, rng) @ u for u in best.unitaries), label="refined")
        tu = float(_utilities(swarm, _candidate_vectors([trial], comp))[0])
        if tu > best_u + UTILITY_TIE_TOL:
            best, best_u = trial, tu
        else:
            eps *= 0.7
    return UtilityEvaluation(best, best_u)


def initial_setting(n_qubits: int) -> MeasurementSetting:
    return identity_setting(n_qubits)
