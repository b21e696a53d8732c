"""POVMs, depolarizing readout noise, Born-rule probabilities and sampling."""
from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .qcore import HADAMARD, dim_to_qubits, kron_all

PROB_TOL = 1e-9

_BASIS_UNITARIES = {
    "x": HADAMARD,
    "y": np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2),
    "z": np.eye(2, dtype=complex),
}


def hermitian_to_real(ops: np.ndarray) -> np.ndarray:
    """Flatten Hermitian matrices ``(..., d, d)`` to real vectors ``(..., 2 d^2)``.

    With this embedding ``Tr(rho M) = real(rho) . real(M)``, which turns
    Born-rule evaluation over many states and operators into one matmul.
    """
    ops = np.asarray(ops)
    flat = ops.reshape(ops.shape[:-2] + (-1,))
    return np.concatenate([flat.real, flat.imag], axis=-1)


@dataclass(frozen=True, eq=False)
class Povm:
    """Ordered measurement operators with outcome labels."""

    elements: np.ndarray
    labels: tuple[str, ...] = ()
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        el = np.array(self.elements, dtype=complex)
        if el.ndim != 3 or el.shape[1] != el.shape[2]:
            raise ValueError(f"POVM elements must have shape (k, d, d), got {el.shape}")
        el.setflags(write=False)
        object.__setattr__(self, "elements", el)
        labels = tuple(str(x) for x in self.labels) or tuple(str(i) for i in range(len(el)))
        if len(labels) != len(el):
            raise ValueError("number of labels does not match number of elements")
        object.__setattr__(self, "labels", labels)
        if self.validate:
            check_povm(el)

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    @property
    def n_qubits(self) -> int:
        return dim_to_qubits(self.dim)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def traces(self) -> np.ndarray:
        return np.einsum("kii->k", self.elements).real

    @cached_property
    def real_vectors(self) -> np.ndarray:
        return hermitian_to_real(self.elements)


def check_povm(elements: np.ndarray, atol: float = 1e-9) -> None:
    herm = np.max(np.abs(elements - np.conj(np.swapaxes(elements, 1, 2))))
    if herm > 1e-10:
        raise ValueError("POVM element is not Hermitian")
    if np.min(np.linalg.eigvalsh(elements)) < -1e-10:
        raise ValueError("POVM element is not positive semidefinite")
    d = elements.shape[1]
    if np.max(np.abs(elements.sum(axis=0) - np.eye(d))) > atol:
        raise ValueError("POVM elements do not sum to the identity")


@dataclass(frozen=True, eq=False)
class MeasurementSetting:
    """A product of single-qubit rotations applied before a computational readout."""

    unitaries: tuple[np.ndarray, ...]
    label: str | None = None

    def __post_init__(self):
        us = tuple(np.array(u, dtype=complex) for u in self.unitaries)
        if not us:
            raise ValueError("a setting needs at least one qubit")
        for u in us:
            if u.shape != (2, 2):
                raise ValueError(f"per-qubit unitaries must be 2x2, got {u.shape}")
        object.__setattr__(self, "unitaries", us)

    @property
    def n_qubits(self) -> int:
        return len(self.unitaries)

    @cached_property
    def unitary(self) -> np.ndarray:
        return kron_all(*self.unitaries)


def identity_setting(n_qubits: int) -> MeasurementSetting:
    return MeasurementSetting(tuple(np.eye(2) for _ in range(n_qubits)), label="z" * n_qubits)


def pauli_setting(bases: str) -> MeasurementSetting:
    """Setting that reads out the Pauli eigenbases named in ``bases`` (e.g. ``"xz"``)."""
    return MeasurementSetting(tuple(_BASIS_UNITARIES[b] for b in bases), label=bases)


def pauli_settings(n_qubits: int) -> list[MeasurementSetting]:
    return [pauli_setting("".join(b)) for b in itertools.product("xyz", repeat=n_qubits)]


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"
    p: float = 0.0
    n_qubits: int = 1

    def __post_init__(self):
        if self.kind not in ("none", "depolarizing"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"noise strength must lie in [0, 1], got {self.p}")

    @property
    def strength(self) -> float:
        return self.p if self.kind == "depolarizing" else 0.0


def computational_povm(n_qubits: int) -> Povm:
    d = 2**n_qubits
    el = np.zeros((d, d, d), dtype=complex)
    el[np.arange(d), np.arange(d), np.arange(d)] = 1.0
    return Povm(el, tuple(format(b, f"0{n_qubits}b") for b in range(d)))


def _is_unitary(u: np.ndarray, atol: float = 1e-10) -> bool:
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(len(u)))) <= atol)


def rotate_elements(elements: np.ndarray, u: np.ndarray) -> np.ndarray:
    return u[None] @ elements @ u.conj().T[None]


def rotated_computational_povm(setting: MeasurementSetting,
                               computational: np.ndarray | None = None) -> Povm:
    """Projectors ``U|b><b|U^†`` for the setting's product unitary ``U``.

    ``computational`` replaces the ideal computational-basis operators, e.g.
    by noisy or calibrated ones; they are rotated the same way.
    """
    for u in setting.unitaries:
        if not _is_unitary(u):
            raise ValueError("measurement setting contains a non-unitary matrix")
    n = setting.n_qubits
    base = computational_povm(n).elements if computational is None else np.asarray(computational)
    labels = tuple(format(b, f"0{n}b") for b in range(2**n))
    return Povm(rotate_elements(base, setting.unitary), labels, validate=False)


def pauli6(n_qubits: int, computational: np.ndarray | None = None,
           frame: MeasurementSetting | None = None) -> Povm:
    """Pauli-6 POVM on ``n_qubits``: every product of x/y/z eigenbasis readouts, each weighted ``3^-n``.

    Element order is setting-major: bases in ``product('xyz')`` order, then
    computational outcomes, so ``x+`` comes first and ``z-`` last for one qubit.
    Passing ``computational`` builds the POVM from those (noisy or calibrated)
    readout operators, one rotated copy per basis setting. ``frame`` applies
    an extra per-qubit rotation ``U`` on top, giving ``U M U^†`` for every
    ideal element.
    """
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    if frame is not None and frame.n_qubits != n_qubits:
        raise ValueError("frame acts on the wrong number of qubits")
    elements, labels = [], []
    for setting in pauli_settings(n_qubits):
        if frame is not None:
            setting = MeasurementSetting(tuple(u @ b for u, b in zip(frame.unitaries, setting.unitaries)),
                                         setting.label)
        rot = rotated_computational_povm(setting, computational)
        elements.append(rot.elements / 3**n_qubits)
        for bits in itertools.product("+-", repeat=n_qubits):
            labels.append("".join(b + s for b, s in zip(setting.label, bits)))
    return Povm(np.concatenate(elements), tuple(labels), validate=computational is None)


def depolarize_operators(ops: np.ndarray, p: float) -> np.ndarray:
    ops = np.asarray(ops, dtype=complex)
    d = ops.shape[-1]
    tr = np.einsum("...ii->...", ops)
    return (1 - p) * ops + p * tr[..., None, None] * np.eye(d) / d


def apply_depolarizing(povm: Povm, p: float) -> Povm:
    """Map every element ``M`` to ``(1 - p) M + p Tr(M) 1/2^n``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing strength must lie in [0, 1], got {p}")
    if p == 0:
        return povm
    return Povm(depolarize_operators(povm.elements, p), povm.labels, validate=False)


def born_probabilities(rho: np.ndarray, povm: Povm) -> np.ndarray:
    """Outcome probabilities ``Tr(rho M_i)``, clipped at zero.

    Raises:
        ValueError: on a dimension mismatch, or when the probabilities are
            negative or fail to sum to one by more than 1e-9.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (povm.dim, povm.dim):
        raise ValueError(f"state of shape {rho.shape} does not match POVM dimension {povm.dim}")
    p = np.einsum("ij,kji->k", rho, povm.elements).real
    return _clean_probabilities(p)


def _clean_probabilities(p: np.ndarray) -> np.ndarray:
    if np.min(p) < -PROB_TOL:
        raise ValueError(f"negative outcome probability {np.min(p)}")
    p = np.clip(p, 0.0, None)
    s = p.sum()
    if abs(s - 1.0) > PROB_TOL:
        raise ValueError(f"outcome probabilities sum to {s}")
    return p / s


def sample_sequence(probs: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent categorical draws by inverse CDF; returns outcome indices."""
    probs = np.asarray(probs, dtype=float)
    if count < 0:
        raise ValueError("count must be non-negative")
    probs = _clean_probabilities(probs)
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    u = rng.random(count)
    return np.searchsorted(cdf, u, side="right")


def sample_outcomes(probs: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial outcome counts for ``count`` shots."""
    idx = sample_sequence(probs, count, rng)
    return np.bincount(idx, minlength=len(probs))


def probability_lower_bound(povm_element_trace: float, p: float, n_qubits: int) -> float:
    """Smallest outcome probability a ``p``-depolarized element of trace ``tau`` can give."""
    if povm_element_trace < 0 or p < 0:
        raise ValueError("trace and noise strength must be non-negative")
    return povm_element_trace * p / 2**n_qubits


# ---------------------------------------------------------------------------
# text serialization

MATRIX_HEADER = "# remtomo matrix records v1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_matrix_record(label: str, matrix: np.ndarray) -> str:
    """One line: ``label rows cols re im re im ...`` in row-major order."""
    if any(c.isspace() for c in label) or not label:
        raise ValueError(f"labels must be non-empty and whitespace-free: {label!r}")
    m = np.atleast_2d(np.asarray(matrix, dtype=complex))
    parts = [label, str(m.shape[0]), str(m.shape[1])]
    for z in m.ravel():
        parts += [_fmt(z.real), _fmt(z.imag)]
    return " ".join(parts)


def parse_matrix_record(line: str) -> tuple[str, np.ndarray]:
    tok = line.split()
    if len(tok) < 3:
        raise ValueError(f"malformed record: {line[:40]!r}")
    label, rows, cols = tok[0], int(tok[1]), int(tok[2])
    vals = np.array([float(t) for t in tok[3:]])
    if vals.size != 2 * rows * cols:
        raise ValueError(f"record {label!r}: expected {2 * rows * cols} numbers, got {vals.size}")
    return label, (vals[0::2] + 1j * vals[1::2]).reshape(rows, cols)


def write_records(dest, records: Iterable[tuple[str, np.ndarray]]) -> None:
    text = "\n".join([MATRIX_HEADER] + [format_matrix_record(l, m) for l, m in records]) + "\n"
    if isinstance(dest, io.TextIOBase):
        dest.write(text)
    else:
        Path(dest).write_text(text)


def read_records(src) -> list[tuple[str, np.ndarray]]:
    text = src.read() if isinstance(src, io.TextIOBase) else Path(src).read_text()
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        out.append(parse_matrix_record(line))
    return out


def write_povm(dest, povm: Povm) -> None:
    write_records(dest, zip(povm.labels, povm.elements))


def read_povm(src, validate: bool = True) -> Povm:
    recs = read_records(src)
    if not recs:
        raise ValueError("no POVM elements found")
    labels: Sequence[str] = [r[0] for r in recs]
    return Povm(np.array([r[1] for r in recs]), tuple(labels), validate=validate)
