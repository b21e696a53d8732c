"""Bayesian mean estimation with a weighted particle swarm.

The posterior over density matrices is carried by ``n_part`` particles with
weights. Each observed outcome reweights the particles by its Born
probability. When the effective sample size drops below ``tau * n_part`` the
swarm is redrawn by weight and diffused with Metropolis-Hastings steps on
purified states, targeting the likelihood of all data seen so far.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .measurement import hermitian_to_real
from .qcore import bures_distance, bures_distance_batch, fidelity_batch, hilbert_schmidt_random_batch

LOG_FLOOR = 1e-300


class DegenerateUpdateError(RuntimeError):
    """Every particle assigns zero probability to an observed outcome."""


@dataclass(frozen=True)
class EstimatorConfig:
    """Swarm size and resampling parameters.

    Attributes:
        n_part: number of particles.
        tau: resample when the effective sample size falls below ``tau * n_part``.
        k: strength of the Metropolis-Hastings perturbation.
        n_mh: Metropolis-Hastings steps per new particle.
        sigma_mode: ``"infidelity"`` uses ``2k * sum_i w_i (1 - F(rho_i, mean))``;
            ``"sqrt_bures"`` uses ``k * sqrt(sum_i w_i d_B(rho_i, mean))``.
    """

    n_part: int = 200
    tau: float = 0.1
    k: float = 0.15
    n_mh: int = 100
    sigma_mode: str = "sqrt_bures"

    def __post_init__(self):
        if self.n_part < 2:
            raise ValueError("n_part must be >= 2")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.n_mh < 1:
            raise ValueError("n_mh must be >= 1")
        if self.sigma_mode not in ("infidelity", "sqrt_bures"):
            raise ValueError(f"unknown sigma_mode {self.sigma_mode!r}")

    @classmethod
    def defaults(cls, n_qubits: int, **overrides) -> "EstimatorConfig":
        base = {1: dict(n_part=200, tau=0.1, k=0.15, n_mh=100),
                2: dict(n_part=1000, tau=0.05, k=0.4, n_mh=200)}
        params = dict(base.get(n_qubits, base[2]))
        params.update(overrides)
        return cls(**params)


class ParticleSwarm:
    """Particles ``(n_part, d, d)`` with normalized weights ``(n_part,)``."""

    def __init__(self, particles: np.ndarray, weights: np.ndarray | None = None):
        particles = np.asarray(particles, dtype=complex)
        if particles.ndim != 3 or particles.shape[1] != particles.shape[2]:
            raise ValueError(f"particles must have shape (n, d, d), got {particles.shape}")
        n = len(particles)
        if weights is None:
            weights = np.full(n, 1.0 / n)
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (n,) or np.any(weights < 0) or weights.sum() <= 0:
            raise ValueError("weights must be non-negative, one per particle, with positive sum")
        self.particles = particles
        self.weights = weights / weights.sum()
        self._vectors = None

    @property
    def n_part(self) -> int:
        return len(self.particles)

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    @property
    def vectors(self) -> np.ndarray:
        """Real embedding of the particles, see :func:`hermitian_to_real`."""
        if self._vectors is None:
            self._vectors = hermitian_to_real(self.particles)
        return self._vectors

    def copy(self) -> "ParticleSwarm":
        return ParticleSwarm(self.particles.copy(), self.weights.copy())


class Dataset:
    """Outcome counts aggregated per distinct measurement operator."""

    def __init__(self, dim: int):
        self.dim = dim
        self._index: dict[Hashable, int] = {}
        self._vectors: list[np.ndarray] = []
        self._counts: list[int] = []

    def __len__(self) -> int:
        return len(self._counts)

    @property
    def total_count(self) -> int:
        return int(sum(self._counts))

    @property
    def counts(self) -> np.ndarray:
        return np.array(self._counts, dtype=float)

    @property
    def vectors(self) -> np.ndarray:
        return np.array(self._vectors).reshape(len(self._vectors), 2 * self.dim**2)

    def add(self, key: Hashable, operator: np.ndarray, count: int = 1) -> None:
        """Record ``count`` occurrences of ``operator`` (a d x d matrix or its real embedding)."""
        if count < 0:
            raise ValueError("count must be non-negative")
        i = self._index.get(key)
        if i is None:
            vec = np.asarray(operator)
            if vec.ndim == 2:
                vec = hermitian_to_real(vec)
            self._index[key] = len(self._counts)
            self._vectors.append(np.asarray(vec, dtype=float))
            self._counts.append(int(count))
        else:
            self._counts[i] += int(count)


def init_prior(config: EstimatorConfig, n_qubits: int, rng: np.random.Generator) -> ParticleSwarm:
    """Hilbert-Schmidt distributed particles with uniform weights."""
    return ParticleSwarm(hilbert_schmidt_random_batch(config.n_part, n_qubits, rng))


def particle_probabilities(swarm: ParticleSwarm, op_vectors: np.ndarray) -> np.ndarray:
    """``Tr(rho_i M_j)`` for every particle ``i`` and operator ``j``, clipped at zero."""
    return np.clip(swarm.vectors @ np.asarray(op_vectors).T, 0.0, None)


def bayes_update(swarm: ParticleSwarm, observed_element: np.ndarray) -> ParticleSwarm:
    """Reweight by the probability each particle gives ``observed_element``.

    Raises:
        DegenerateUpdateError: if every particle with nonzero weight gives
            the outcome zero probability.
    """
    op = np.asarray(observed_element)
    if op.shape != (swarm.dim, swarm.dim):
        raise ValueError("operator dimension does not match the swarm")
    lik = particle_probabilities(swarm, hermitian_to_real(op)[None])[:, 0]
    w = swarm.weights * lik
    s = w.sum()
    if not s > 0:
        raise DegenerateUpdateError("all posterior weights vanished")
    out = ParticleSwarm.__new__(ParticleSwarm)
    out.particles, out.weights, out._vectors = swarm.particles, w / s, swarm._vectors
    return out


def effective_sample_size(swarm: ParticleSwarm) -> float:
    return float(1.0 / np.sum(swarm.weights**2))


def needs_resample(swarm: ParticleSwarm, config: EstimatorConfig) -> bool:
    return effective_sample_size(swarm) < config.tau * config.n_part


def mean_estimate(swarm: ParticleSwarm) -> np.ndarray:
    return np.einsum("i,ijk->jk", swarm.weights, swarm.particles)


def posterior_spread_sigma(swarm: ParticleSwarm, config: EstimatorConfig) -> float:
    """Standard deviation of the MH perturbation angle for one resampling pass."""
    f = fidelity_batch(swarm.particles, mean_estimate(swarm))
    if config.sigma_mode == "infidelity":
        return float(2 * config.k * np.dot(swarm.weights, 1 - f))
    bures = np.dot(swarm.weights, 2 * (1 - np.sqrt(f)))
    return float(config.k * np.sqrt(max(bures, 0.0)))


def log_likelihood(states_real: np.ndarray, dataset: Dataset) -> np.ndarray:
    """Log-likelihood of the dataset for each state given in real embedding."""
    p = states_real @ dataset.vectors.T
    return np.log(np.clip(p, LOG_FLOOR, None)) @ dataset.counts


def purify(rhos: np.ndarray) -> np.ndarray:
    """Purifications ``psi[k, s] = sqrt(lambda_k) <s|lambda_k>``, auxiliary index first.

    Tracing out the first index with ``psi^T psi^*`` returns ``rho``.
    """
    lam, vec = np.linalg.eigh(rhos)
    lam = np.clip(lam, 0.0, None)
    return np.sqrt(lam)[..., :, None] * np.swapaxes(vec, -1, -2)


def trace_out_auxiliary(psi: np.ndarray) -> np.ndarray:
    return np.einsum("...ks,...kt->...st", psi, psi.conj())


def _draw_angles(sigma: float, size: int, rng: np.random.Generator) -> np.ndarray:
    c = rng.normal(0.0, sigma, size) if sigma > 0 else np.zeros(size)
    bad = c * c > 2
    while np.any(bad):
        c[bad] = rng.normal(0.0, sigma, bad.sum())
        bad = c * c > 2
    return c


def perturb_purified(psi: np.ndarray, c: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Rotate each flattened unit vector by angle-like ``c`` towards a random orthogonal direction.

    ``psi' = a psi + b g_perp / |g_perp|`` with ``a = 1 - c^2/2`` and
    ``b = sqrt(1 - a^2)``; ``c = 0`` returns ``psi`` unchanged.
    """
    shape = psi.shape
    v = psi.reshape(shape[0], -1)
    g = rng.normal(size=v.shape) + 1j * rng.normal(size=v.shape)
    overlap = np.einsum("ij,ij->i", v.conj(), g)
    g_perp = g - v * overlap[:, None]
    g_perp /= np.linalg.norm(g_perp, axis=1)[:, None]
    a = 1 - c**2 / 2
    b = np.sqrt(np.clip(1 - a**2, 0.0, None))
    out = a[:, None] * v + b[:, None] * g_perp
    return out.reshape(shape)


def _finalize_states(rhos: np.ndarray) -> np.ndarray:
    rhos = 0.5 * (rhos + np.conj(np.swapaxes(rhos, -1, -2)))
    lam, vec = np.linalg.eigh(rhos)
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum(axis=-1, keepdims=True)
    return (vec * lam[..., None, :]) @ np.conj(np.swapaxes(vec, -1, -2))


def mh_resample(swarm: ParticleSwarm, dataset: Dataset, config: EstimatorConfig,
                rng: np.random.Generator, sigma: float | None = None,
                return_acceptance: bool = False):
    """Draw a fresh uniformly weighted swarm from the current posterior.

    Ancestors are chosen in proportion to their weights, purified once, and
    moved by ``config.n_mh`` Metropolis-Hastings steps. All chains advance
    together, vectorized over particles.

    Args:
        swarm: current weighted swarm.
        dataset: all outcomes observed so far.
        config: estimator parameters.
        rng: random stream owned by this run.
        sigma: overrides the perturbation scale (``0`` freezes the chains).
        return_acceptance: also return the fraction of accepted steps.

    Returns:
        The new swarm, or ``(swarm, acceptance)``.

    Raises:
        ValueError: if the dataset has no counts.
    """
    if dataset.total_count <= 0:
        raise ValueError("cannot resample against an empty dataset")
    n = config.n_part
    if sigma is None:
        sigma = posterior_spread_sigma(swarm, config)
    ancestors = rng.choice(swarm.n_part, size=n, p=swarm.weights)
    psi = purify(swarm.particles[ancestors])
    rho = trace_out_auxiliary(psi)
    ll = log_likelihood(hermitian_to_real(rho), dataset)
    accepted = 0
    for _ in range(config.n_mh):
        c = _draw_angles(sigma, n, rng)
        cand = perturb_purified(psi, c, rng)
        cand /= np.linalg.norm(cand.reshape(n, -1), axis=1)[:, None, None]
        rho_c = trace_out_auxiliary(cand)
        ll_c = log_likelihood(hermitian_to_real(rho_c), dataset)
        with np.errstate(invalid="ignore", over="ignore"):
            accept = np.log(rng.random(n)) < ll_c - ll
        psi[accept] = cand[accept]
        rho[accept] = rho_c[accept]
        ll[accept] = ll_c[accept]
        accepted += int(accept.sum())
    out = ParticleSwarm(_finalize_states(rho))
    if return_acceptance:
        return out, accepted / (n * config.n_mh)
    return out


def uncertainty_R(swarm: ParticleSwarm, estimate: np.ndarray, target: np.ndarray) -> float:
    """Bures distance of the estimate over the posterior-average Bures distance, both to ``target``.

    Returns NaN when the denominator vanishes.
    """
    denom = float(np.dot(swarm.weights, bures_distance_batch(swarm.particles, target)))
    if denom <= 0:
        return float("nan")
    return bures_distance(estimate, target) / denom


class BayesFilter:
    """Sequential estimator: swarm, dataset and resampling policy for one run."""

    def __init__(self, n_qubits: int, config: EstimatorConfig, rng: np.random.Generator,
                 swarm: ParticleSwarm | None = None):
        self.n_qubits = n_qubits
        self.config = config
        self.rng = rng
        self.swarm = swarm if swarm is not None else init_prior(config, n_qubits, rng)
        self.dataset = Dataset(self.swarm.dim)
        self.n_resamples = 0
        self._since_resample = 0

    def resample(self) -> None:
        self.swarm = mh_resample(self.swarm, self.dataset, self.config, self.rng)
        self.n_resamples += 1
        self._since_resample = 0

    def observe(self, keys: Sequence[Hashable], op_vectors: np.ndarray) -> None:
        """Assimilate outcomes one at a time, resampling whenever the swarm degenerates.

        Weight updates are evaluated in vectorized chunks; the first shot
        whose cumulative weights fall below the resampling threshold ends the
        chunk, so the result matches a shot-by-shot loop exactly.

        Args:
            keys: one dataset key per shot.
            op_vectors: ``(shots, 2 d^2)`` real embeddings of the observed operators.
        """
        op_vectors = np.asarray(op_vectors, dtype=float)
        total = len(keys)
        if op_vectors.shape[0] != total:
            raise ValueError("one operator per key is required")
        thresh = self.config.tau * self.config.n_part
        t = 0
        while t < total:
            size = int(min(total - t, max(16, min(4096, self._since_resample + 1))))
            lik = particle_probabilities(self.swarm, op_vectors[t:t + size])
            with np.errstate(divide="ignore"):
                cum = np.log(self.swarm.weights)[:, None] + np.cumsum(np.log(lik), axis=1)
            top = cum.max(axis=0)
            degenerate = ~np.isfinite(top)
            with np.errstate(invalid="ignore"):
                e = np.exp(cum - np.where(degenerate, 0.0, top))
                ess = e.sum(0) ** 2 / (e**2).sum(0)
            stop = degenerate | (ess < thresh)
            if not stop.any():
                self._absorb(keys, op_vectors, t, size, e[:, -1])
                t += size
                continue
            j = int(np.argmax(stop))
            if degenerate[j]:
                if j > 0:
                    self._absorb(keys, op_vectors, t, j, e[:, j - 1])
                self._recover(keys[t + j], op_vectors[t + j])
                t += j + 1
                continue
            self._absorb(keys, op_vectors, t, j + 1, e[:, j])
            self.resample()
            t += j + 1

    def _absorb(self, keys, op_vectors, start: int, count: int, unnorm: np.ndarray) -> None:
        for i in range(start, start + count):
            self.dataset.add(keys[i], op_vectors[i])
        self.swarm.weights = unnorm / unnorm.sum()
        self._since_resample += count

    def _recover(self, key, vec) -> None:
        # resample against the data so far, then retry the offending shot once
        if self.dataset.total_count == 0:
            raise DegenerateUpdateError("first outcome has zero probability under every particle")
        self.resample()
        lik = particle_probabilities(self.swarm, vec[None])[:, 0]
        w = self.swarm.weights * lik
        if not w.sum() > 0:
            raise DegenerateUpdateError("outcome has zero probability under every particle after resampling")
        self.dataset.add(key, vec)
        self.swarm.weights = w / w.sum()
        self._since_resample += 1
        if needs_resample(self.swarm, self.config):
            self.resample()

    def estimate(self) -> np.ndarray:
        return mean_estimate(self.swarm)
