"""Detector tomography of diagonal computational-basis readout operators."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .measurement import Povm, born_probabilities, read_records, sample_outcomes, write_records
from .qcore import kron_all, pure_to_density

P_FLOOR = 1e-12


def tetrahedron_states(n_qubits: int) -> np.ndarray:
    """Tetrahedron probe states; for several qubits, every tensor product of them."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    w = np.exp(2j * np.pi / 3)
    single = [np.array([1.0, 0.0], dtype=complex)]
    single += [np.array([1, np.sqrt(2) * w**k]) / np.sqrt(3) for k in range(3)]
    single = [pure_to_density(v) for v in single]
    return np.array([kron_all(*combo) for combo in itertools.product(single, repeat=n_qubits)])


@dataclass
class CalibrationData:
    probes: np.ndarray
    counts: np.ndarray
    shots_per_probe: int

    def __post_init__(self):
        self.probes = np.asarray(self.probes, dtype=complex)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape[0] != len(self.probes):
            raise ValueError("one row of counts per probe is required")
        if np.any(self.counts < 0) or np.any(self.counts.sum(axis=1) != self.shots_per_probe):
            raise ValueError("counts must be non-negative with rows summing to shots_per_probe")

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / max(self.shots_per_probe, 1)


@dataclass
class DiagonalPovm:
    """Diagonal readout operators; ``entries[i, b]`` is ``<b|M_i|b>``.

    ``iterations``, ``residual`` and ``converged`` describe the reconstruction
    that produced it, when there was one.
    """

    entries: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.ndim != 2:
            raise ValueError("entries must be a (outcomes, dim) array")
        if np.any(self.entries < -1e-12) or np.any(np.abs(self.entries.sum(axis=0) - 1) > 1e-9):
            raise ValueError("diagonal POVM entries must be non-negative with unit column sums")

    @property
    def dim(self) -> int:
        return self.entries.shape[1]

    def operators(self) -> np.ndarray:
        """The ``(outcomes, d, d)`` diagonal matrices."""
        n_out, d = self.entries.shape
        ops = np.zeros((n_out, d, d), dtype=complex)
        ops[:, np.arange(d), np.arange(d)] = self.entries
        return ops

    def to_povm(self) -> Povm:
        n = int(round(np.log2(self.dim)))
        return Povm(self.operators(), tuple(format(b, f"0{n}b") for b in range(len(self.entries))))

    @classmethod
    def from_povm(cls, povm: Povm) -> "DiagonalPovm":
        el = povm.elements
        off = el - np.einsum("kii->ki", el)[:, :, None] * np.eye(povm.dim)
        if np.max(np.abs(off)) > 1e-12:
            raise ValueError("POVM is not diagonal in the computational basis")
        return cls(np.einsum("kii->ki", el).real)


def simulate_calibration(true_povm: Povm, shots_per_probe: int, rng: np.random.Generator,
                         probes: np.ndarray | None = None) -> CalibrationData:
    """Measure every tetrahedron probe ``shots_per_probe`` times with ``true_povm``."""
    if shots_per_probe < 0:
        raise ValueError("shots_per_probe must be non-negative")
    if probes is None:
        probes = tetrahedron_states(true_povm.n_qubits)
    counts = np.array([sample_outcomes(born_probabilities(r, true_povm), shots_per_probe, rng) for r in probes])
    return CalibrationData(probes, counts, shots_per_probe)


def log_likelihood(data: CalibrationData, povm: DiagonalPovm) -> float:
    q = np.einsum("sbb->sb", data.probes).real
    p = np.clip(q @ povm.entries.T, P_FLOOR, None)
    return float(np.sum(data.counts * np.log(p)))


def ml_reconstruct_diagonal(data: CalibrationData, tol: float = 1e-10, max_iter: int = 100_000,
                            debug: bool = False) -> DiagonalPovm:
    """Maximum-likelihood diagonal POVM for the calibration counts.

    Uses the multiplicative update ``m_ib <- m_ib r_ib / sum_j m_jb r_jb`` with
    ``r_ib = sum_s n_si <b|rho_s|b> / p_si``, started from the uniform POVM.
    Each sweep keeps the columns normalized and never lowers the likelihood.

    Args:
        data: calibration counts.
        tol: stop when no entry changes by more than this.
        max_iter: iteration cap.
        debug: check likelihood monotonicity at every iteration.

    Returns:
        The last iterate, with ``converged`` and ``residual`` set.

    Raises:
        ValueError: if the data holds no shots.
        RuntimeError: in debug mode, if the likelihood decreases.
    """
    if data.shots_per_probe <= 0 or data.counts.sum() == 0:
        raise ValueError("calibration data contains no shots")
    q = np.einsum("sbb->sb", data.probes).real
    n = data.counts.astype(float)
    n_out, d = n.shape[1], q.shape[1]
    m = np.full((n_out, d), 1.0 / n_out)
    residual = np.inf
    prev_ll = -np.inf
    for it in range(1, max_iter + 1):
        p = np.clip(q @ m.T, P_FLOOR, None)
        r = (n / p).T @ q
        new = m * r
        new /= new.sum(axis=0, keepdims=True)
        residual = float(np.max(np.abs(new - m)))
        m = new
        if debug:
            ll = float(np.sum(n * np.log(np.clip(q @ m.T, P_FLOOR, None))))
            if ll < prev_ll - 1e-9 * abs(prev_ll):
                raise RuntimeError(f"log-likelihood decreased at iteration {it}")
            prev_ll = ll
        if residual < tol:
            return DiagonalPovm(m, it, residual, True)
    return DiagonalPovm(m, max_iter, residual, False)


def povm_distance(a: DiagonalPovm, b: DiagonalPovm) -> float:
    """Largest entrywise difference between two diagonal POVMs."""
    if a.entries.shape != b.entries.shape:
        raise ValueError("POVM shapes differ")
    return float(np.max(np.abs(a.entries - b.entries)))


def depolarized_diagonal(n_qubits: int, p: float) -> DiagonalPovm:
    """Exact diagonal form of the ``p``-depolarized computational measurement."""
    d = 2**n_qubits
    return DiagonalPovm((1 - p) * np.eye(d) + p / d)


def calibrate(true_povm: Povm, total_shots: int, rng: np.random.Generator, **kwargs) -> DiagonalPovm:
    """Simulate tomography with ``total_shots`` split evenly over the probes, then reconstruct.

    Raises:
        ValueError: if the budget leaves a probe without shots.
    """
    probes = tetrahedron_states(true_povm.n_qubits)
    per_probe = int(total_shots) // len(probes)
    if per_probe < 1:
        raise ValueError(f"calibration budget {total_shots} is smaller than the {len(probes)} probes")
    return ml_reconstruct_diagonal(simulate_calibration(true_povm, per_probe, rng, probes), **kwargs)


def write_diagonal_povm(dest, povm: DiagonalPovm) -> None:
    write_records(dest, zip(povm.to_povm().labels, povm.operators()))


def read_diagonal_povm(src) -> DiagonalPovm:
    recs = read_records(src)
    return DiagonalPovm.from_povm(Povm(np.array([r[1] for r in recs]), tuple(r[0] for r in recs)))


def write_calibration(dest, data: CalibrationData) -> None:
    recs = [(f"probe{s}", r) for s, r in enumerate(data.probes)]
    recs.append(("counts", data.counts.astype(float)))
    write_records(dest, recs)


def read_calibration(src) -> CalibrationData:
    recs = dict(read_records(src))
    counts = recs.pop("counts").real.round().astype(np.int64)
    probes = np.array([recs[f"probe{s}"] for s in range(len(recs))])
    return CalibrationData(probes, counts, int(counts[0].sum()))
