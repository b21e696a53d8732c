"""Shared experiment helpers for the test suite."""
from __future__ import annotations

import numpy as np

from oracles import grid_posterior_bloch_mean
from remtomo.estimator import BayesFilter, EstimatorConfig
from remtomo.measurement import born_probabilities, pauli6, sample_sequence
from remtomo.qcore import from_bloch, haar_random_pure, infidelity, pure_to_density


def bme_and_grid_infidelities(n_instances: int, shots: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Infidelities of the particle-filter mean and of the grid posterior mean on the same data.

    Targets are Haar-random qubit states measured with ideal Pauli-6.
    """
    povm = pauli6(1)
    rng = np.random.default_rng(seed)
    bme, grid = [], []
    for _ in range(n_instances):
        target = pure_to_density(haar_random_pure(1, rng))
        idx = sample_sequence(born_probabilities(target, povm), shots, rng)
        filt = BayesFilter(1, EstimatorConfig.defaults(1), rng)
        filt.observe([int(i) for i in idx], povm.real_vectors[idx])
        bme.append(infidelity(target, filt.estimate()))
        # Pauli-6 element order is x+, x-, y+, y-, z+, z-
        tally = np.bincount(idx, minlength=6)
        counts = {k: (int(tally[2 * k]), int(tally[2 * k + 1])) for k in range(3)}
        grid.append(infidelity(target, from_bloch(grid_posterior_bloch_mean(counts))))
    return np.array(bme), np.array(grid)
