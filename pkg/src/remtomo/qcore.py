"""Quantum-state primitives: random ensembles, fidelities and distances.

States are plain numpy arrays. A density matrix is a ``(d, d)`` complex
array, a pure state a length-``d`` complex vector, and batches of density
matrices are ``(n, d, d)`` arrays.
"""
from __future__ import annotations

import numpy as np

PURITY_THRESHOLD = 1 - 1e-9

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def kron_all(*ops: np.ndarray) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def dim_to_qubits(d: int) -> int:
    n = int(round(np.log2(d)))
    if 2**n != d:
        raise ValueError(f"dimension {d} is not a power of two")
    return n


def _check_qubits(n_qubits: int) -> None:
    if int(n_qubits) != n_qubits or n_qubits < 1:
        raise ValueError(f"n_qubits must be a positive integer, got {n_qubits!r}")


def is_hermitian(a: np.ndarray, atol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= atol)


def check_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    """Validate ``rho`` as a density matrix and return it as a complex array.

    Raises:
        ValueError: if ``rho`` is not square, not Hermitian, not of unit
            trace, or has an eigenvalue below ``-atol``.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if not is_hermitian(rho, atol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise ValueError(f"density matrix trace is {np.trace(rho).real}, expected 1")
    if np.linalg.eigvalsh(rho)[0] < -atol:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def is_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> bool:
    try:
        check_density_matrix(rho, atol)
    except ValueError:
        return False
    return True


def pure_to_density(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def haar_random_pure(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state vector on ``n_qubits`` qubits.

    A normalised vector of i.i.d. complex Gaussians is unitarily invariant,
    which is all the Haar measure on pure states asks for.
    """
    _check_qubits(n_qubits)
    d = 2**n_qubits
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def haar_random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random ``d x d`` unitary via QR with the phase fix of Mezzadri."""
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def hilbert_schmidt_random_mixed(n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    """Density matrix from the Hilbert-Schmidt ensemble, ``G G^† / Tr(G G^†)``."""
    _check_qubits(n_qubits)
    d = 2**n_qubits
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def hilbert_schmidt_random_batch(n: int, n_qubits: int, rng: np.random.Generator) -> np.ndarray:
    _check_qubits(n_qubits)
    d = 2**n_qubits
    g = rng.normal(size=(n, d, d)) + 1j * rng.normal(size=(n, d, d))
    rho = g @ np.conj(np.swapaxes(g, -1, -2))
    tr = np.einsum("nii->n", rho).real
    return rho / tr[:, None, None]


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Square root of a Hermitian PSD matrix (batched), eigenvalues clipped at 0."""
    w, v = np.linalg.eigh(a)
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def _trace_product(rho: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    # Tr(rho sigma) for Hermitian arguments, broadcasting over leading axes
    return np.einsum("...ij,...ji->...", rho, sigma).real


def _fidelity_general(rho: np.ndarray, sigma: np.ndarray) -> float:
    s = psd_sqrt(rho)
    ev = np.linalg.eigvalsh(s @ sigma @ s)
    return float(np.sum(np.sqrt(np.clip(ev, 0.0, None))) ** 2)


def _fidelity_qubit(rho: np.ndarray, sigma: np.ndarray) -> float:
    det_r = max(np.linalg.det(rho).real, 0.0)
    det_s = max(np.linalg.det(sigma).real, 0.0)
    return float(_trace_product(rho, sigma) + 2 * np.sqrt(det_r * det_s))


def _is_pure(rho: np.ndarray) -> bool:
    return bool(np.linalg.eigvalsh(rho)[-1] > PURITY_THRESHOLD)


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Quantum fidelity ``[Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2``.

    The pure-state shortcut ``Tr(rho sigma)`` is taken whenever either state
    has a largest eigenvalue above ``1 - 1e-9``; qubits otherwise use
    ``Tr(rho sigma) + 2 sqrt(det rho det sigma)``. The result is clamped to
    ``[0, 1]``.
    """
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape or rho.ndim != 2:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    if _is_pure(rho) or _is_pure(sigma):
        f = float(_trace_product(rho, sigma))
    elif rho.shape[0] == 2:
        f = _fidelity_qubit(rho, sigma)
    else:
        f = _fidelity_general(rho, sigma)
    return min(max(f, 0.0), 1.0)


def fidelity_batch(rhos: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Fidelities between every state in ``rhos`` (n, d, d) and a single ``sigma``.

    Same formula selection as :func:`fidelity`, decided per pair.
    """
    rhos = np.asarray(rhos, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rhos.ndim != 3 or rhos.shape[1:] != sigma.shape:
        raise ValueError(f"dimension mismatch: {rhos.shape} vs {sigma.shape}")
    tr = _trace_product(rhos, sigma[None])
    if _is_pure(sigma):
        return np.clip(tr, 0.0, 1.0)
    ev = np.linalg.eigvalsh(rhos)
    pure = ev[:, -1] > PURITY_THRESHOLD
    d = sigma.shape[0]
    if d == 2:
        det_r = np.clip(ev[:, 0] * ev[:, 1], 0.0, None)
        det_s = max(np.linalg.det(sigma).real, 0.0)
        f = tr + 2 * np.sqrt(det_r * det_s)
    else:
        s = psd_sqrt(sigma)
        inner = np.linalg.eigvalsh(s[None] @ rhos @ s[None])
        f = np.sum(np.sqrt(np.clip(inner, 0.0, None)), axis=1) ** 2
    f = np.where(pure, tr, f)
    return np.clip(f, 0.0, 1.0)


def infidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    return 1.0 - fidelity(rho, sigma)


def bures_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """``2 (1 - sqrt(F))``; the convention used by the estimator-uncertainty ratio."""
    return 2.0 * (1.0 - np.sqrt(fidelity(rho, sigma)))


def bures_distance_batch(rhos: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    return 2.0 * (1.0 - np.sqrt(fidelity_batch(rhos, sigma)))


def eigendecompose(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and the matching orthonormal eigenvectors.

    Returns:
        ``(values, vectors)`` where ``vectors[k]`` is the eigenvector for
        ``values[k]``.

    Raises:
        ValueError: if ``rho`` is not Hermitian.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or not is_hermitian(rho):
        raise ValueError("eigendecompose expects a square Hermitian matrix")
    w, v = np.linalg.eigh(rho)
    return w[::-1].copy(), v[:, ::-1].T.copy()


def reduced_state(rho: np.ndarray, keep: int, n_qubits: int) -> np.ndarray:
    """Single-qubit reduced state of qubit ``keep`` (qubit 0 is the leftmost factor)."""
    t = rho.reshape((2,) * (2 * n_qubits))
    row = list(range(n_qubits))
    col = list(range(n_qubits, 2 * n_qubits))
    for q in range(n_qubits):
        if q != keep:
            col[q] = row[q]
    out = np.einsum(t, row + col, [keep, n_qubits + keep])
    return out


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    return np.array([_trace_product(rho, p) for p in (PAULI_X, PAULI_Y, PAULI_Z)])


def from_bloch(r) -> np.ndarray:
    x, y, z = r
    return 0.5 * (PAULI_I + x * PAULI_X + y * PAULI_Y + z * PAULI_Z)
