"""Fisher-information analysis in the real embedding of purified states.

A state ``rho = sum_k lambda_k |lambda_k><lambda_k|`` is purified to
``|Psi> = sum_k sqrt(lambda_k) |k> (x) |lambda_k>`` (auxiliary factor first)
and stored as ``v = [Re Psi; Im Psi]``. A measurement operator ``M`` acts as
``A = I (x) M``, embedded as ``O = [[Re A, -Im A], [Im A, Re A]]``, so that
``v^T O v = Tr(rho M)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .measurement import MeasurementSetting, Povm, depolarize_operators, computational_povm, rotate_elements
from .qcore import dim_to_qubits, eigendecompose, pure_to_density

ZERO_PROB = 1e-15
ZERO_NORM = 1e-12


@dataclass
class PurifiedEmbedding:
    psi: np.ndarray
    v: np.ndarray
    operators: np.ndarray

    def probabilities(self) -> np.ndarray:
        return np.einsum("i,kij,j->k", self.v, self.operators, self.v)


@dataclass
class FisherSpectrum:
    matrix: np.ndarray
    singular_values: np.ndarray
    N: float
    excluded: list = field(default_factory=list)


def purified_vector(rho: np.ndarray) -> np.ndarray:
    vals, vecs = eigendecompose(rho)
    vals = np.clip(vals, 0.0, None)
    return (np.sqrt(vals)[:, None] * vecs).reshape(-1)


def embed_operator(m: np.ndarray) -> np.ndarray:
    d = m.shape[-1]
    a = np.kron(np.eye(d), m)
    return np.block([[a.real, -a.imag], [a.imag, a.real]])


def purify_embed(rho: np.ndarray, povm: Povm) -> PurifiedEmbedding:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (povm.dim, povm.dim):
        raise ValueError("state and POVM dimensions differ")
    psi = purified_vector(rho)
    v = np.concatenate([psi.real, psi.imag])
    ops = np.array([embed_operator(m) for m in povm.elements])
    return PurifiedEmbedding(psi, v, ops)


def fisher_matrix(rho: np.ndarray, povm_list: Sequence[Povm], weights: Sequence[float] | None = None,
                  N: float = 1.0) -> FisherSpectrum:
    """``N sum_s w_s sum_g (4 / p_g) (O_g v)(O_g v)^T`` with its singular values.

    Outcomes with ``p_g < 1e-15`` contribute nothing when ``|O_g v| < 1e-12``
    (the limit along physical directions). Otherwise they are dropped and
    listed in ``excluded`` as ``(setting index, outcome index, |O_g v|)``.

    Args:
        rho: state at which the information is evaluated.
        povm_list: measurement settings.
        weights: fraction of the budget spent on each setting; uniform if omitted.
        N: total number of measurements.
    """
    if weights is None:
        weights = np.full(len(povm_list), 1.0 / len(povm_list))
    weights = np.asarray(weights, dtype=float)
    if len(weights) != len(povm_list) or abs(weights.sum() - 1) > 1e-9:
        raise ValueError("need one weight per POVM, summing to 1")
    d = np.asarray(rho).shape[0]
    mat = np.zeros((2 * d * d, 2 * d * d))
    excluded = []
    for s, (povm, w) in enumerate(zip(povm_list, weights)):
        emb = purify_embed(rho, povm)
        ov = np.einsum("kij,j->ki", emb.operators, emb.v)
        probs = ov @ emb.v
        for g, (p, u) in enumerate(zip(probs, ov)):
            if p < ZERO_PROB:
                norm = float(np.linalg.norm(u))
                if norm >= ZERO_NORM:
                    excluded.append((s, g, norm))
                continue
            mat += w * (4.0 / p) * np.outer(u, u)
    mat *= N
    mat = 0.5 * (mat + mat.T)
    sv = np.linalg.svd(mat, compute_uv=False)
    return FisherSpectrum(mat, sv, N, excluded)


def physical_dimension(n_qubits: int) -> int:
    return 4**n_qubits - 1


def predicted_infidelity(spectrum: FisherSpectrum, nu: int | None = None,
                         vanish_tol: float = 1e-8) -> tuple[float, int]:
    """Sum of ``1/sigma_i`` over positions 2..nu+1 that do not vanish, and the vanishing count.

    The largest value is skipped as the normalization direction. A value
    vanishes when it is at most ``vanish_tol * sigma_max``.
    """
    sv = np.asarray(spectrum.singular_values)
    if nu is None:
        nu = physical_dimension(dim_to_qubits(int(round(np.sqrt(len(sv) / 2)))))
    if nu + 1 > len(sv):
        raise ValueError("nu + 1 exceeds the number of singular values")
    window = sv[1:nu + 1]
    keep = window > vanish_tol * sv[0]
    return float(np.sum(1.0 / window[keep])), int(np.count_nonzero(~keep))


def rank_deficiency(n_qubits: int, R: int) -> int:
    """Parameters the estimator carries beyond those of a rank-``R`` state."""
    d = 2**n_qubits
    if not 1 <= R <= d:
        raise ValueError(f"rank must lie in [1, {d}]")
    return 4**n_qubits - 1 - (R * 2 ** (n_qubits + 1) - R * R - 1)


def orthogonal_completion_operators(eigenvectors: np.ndarray, R: int) -> list[np.ndarray]:
    """Rank-one projectors spanning operators on the complement of the first ``R`` eigenvectors.

    For the complement basis ``e_1..e_m`` they are ``|e_j><e_j|`` followed by
    the projectors onto ``(e_j + e_k)/sqrt 2`` and ``(e_j + i e_k)/sqrt 2``
    for each ``j < k``, which makes ``m^2`` operators.

    Args:
        eigenvectors: orthonormal vectors as rows, dominant ones first.
        R: number of non-vanishing eigenvalues.
    """
    vecs = np.asarray(eigenvectors, dtype=complex)
    d = vecs.shape[1]
    if not 1 <= R <= d:
        raise ValueError(f"rank must lie in [1, {d}]")
    rest = vecs[R:]
    ops = [pure_to_density(e) for e in rest]
    for j in range(len(rest)):
        for k in range(j + 1, len(rest)):
            ops.append(pure_to_density((rest[j] + rest[k]) / np.sqrt(2)))
            ops.append(pure_to_density((rest[j] + 1j * rest[k]) / np.sqrt(2)))
    return ops


def projective_pair(op: np.ndarray, label: str = "P") -> Povm:
    """Two-outcome POVM ``{P, I - P}``."""
    d = op.shape[0]
    return Povm(np.array([op, np.eye(d) - op]), (label, "not_" + label))


def nearly_pure(rho: np.ndarray, eps: float = 1e-10) -> np.ndarray:
    """Lift the vanishing eigenvalues of ``rho`` to ``eps``, keeping the trace at 1."""
    vals, vecs = eigendecompose(rho)
    vals = np.where(vals < eps, eps, vals)
    vals /= vals.sum()
    return (vecs.T * vals) @ vecs.conj()


@dataclass
class AuditReport:
    p: float
    n_checked: int = 0
    violations: int = 0
    max_amplification: float = 0.0
    bound_amplification: float = float("inf")
    unbounded: bool = False
    rows: list = field(default_factory=list)

    def lines(self) -> list[str]:
        return [json.dumps(dict(zip(("setting", "outcome", "p", "bound", "amplification"), r))) for r in self.rows]


def noisy_amplification_audit(rho, setting_generator: Callable[[np.random.Generator], MeasurementSetting],
                              p: float, n_samples: int, rng: np.random.Generator,
                              keep_rows: bool = False, slack: float = 1e-12) -> AuditReport:
    """Check ``p_g >= Tr(M_g) p / 2^n`` for depolarized readouts in random settings.

    Args:
        rho: target state, or a callable drawing one from ``rng`` per sample.
        setting_generator: draws a setting from ``rng``.
        p: depolarizing strength.
        n_samples: number of settings to test.
        rng: random stream.
        keep_rows: keep one row per (setting, outcome) for :meth:`AuditReport.lines`.
        slack: tolerance on the bound.

    Returns:
        Counts of checks and violations plus the largest ``1/p_g`` observed.
        With ``p = 0`` the bound is zero and ``unbounded`` is set.
    """
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    report = AuditReport(p=p, unbounded=(p == 0))
    for i in range(n_samples):
        state = rho(rng) if callable(rho) else np.asarray(rho, dtype=complex)
        setting = setting_generator(rng)
        n = setting.n_qubits
        comp = depolarize_operators(computational_povm(n).elements, p)
        el = rotate_elements(comp, setting.unitary)
        probs = np.einsum("ij,kji->k", state, el).real
        tau = np.einsum("kii->k", el).real
        bound = tau * p / 2**n
        amp = np.where(probs > 0, 1.0 / np.where(probs > 0, probs, 1.0), np.inf)
        report.n_checked += len(probs)
        if p > 0:
            report.violations += int(np.sum(probs < bound - slack))
            report.bound_amplification = float(2**n / (tau.min() * p))
        report.max_amplification = max(report.max_amplification, float(amp.max()))
        if keep_rows:
            label = setting.label or f"s{i}"
            report.rows += [(label, g, float(probs[g]), float(bound[g]), float(amp[g])) for g in range(len(probs))]
    return report
