"""Independent reference computations used by the tests.

None of these reuse the package's estimator or Fisher code paths.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import trapezoid


def _nodes(lo: float, hi: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid nodes and weights on [lo, hi]."""
    x = np.linspace(lo, hi, n)
    w = np.full(n, (hi - lo) / (n - 1))
    w[[0, -1]] *= 0.5
    return x, w


def _radial_nodes(lo: float, n_lin: int = 300, n_log: int = 120) -> tuple[np.ndarray, np.ndarray]:
    # linear spacing plus a geometric cluster just below the unit sphere
    x = np.union1d(np.linspace(lo, 1.0, n_lin), 1.0 - np.geomspace(1e-8, max(1e-7, 1.0 - lo), n_log))
    x = x[(x >= lo) & (x <= 1.0)]
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    return x, w


def _frame(axis: np.ndarray) -> np.ndarray:
    """Orthonormal columns (u, v, axis)."""
    a = axis / np.linalg.norm(axis)
    t = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(a, t)
    u /= np.linalg.norm(u)
    return np.column_stack([u, np.cross(a, u), a])


def grid_posterior_bloch_mean(counts: dict) -> np.ndarray:
    """Posterior-mean Bloch vector under a prior uniform in the Bloch ball.

    The uniform-ball prior is the qubit Hilbert-Schmidt measure. ``counts``
    maps axis index (0, 1, 2) to ``(n_plus, n_minus)`` for ideal projective
    measurements along x, y, z, so the likelihood is
    ``prod_k ((1 + r_k)/2)^n+ ((1 - r_k)/2)^n-``. The integral runs on a
    spherical grid whose pole points at the empirical Bloch vector.
    """
    n_plus = np.array([counts.get(k, (0, 0))[0] for k in range(3)], dtype=float)
    n_minus = np.array([counts.get(k, (0, 0))[1] for k in range(3)], dtype=float)
    tot = np.maximum(n_plus + n_minus, 1)
    r_hat = (n_plus - n_minus) / tot
    norm = np.linalg.norm(r_hat)
    axis = r_hat if norm > 1e-6 else np.array([0.0, 0.0, 1.0])
    frame = _frame(axis)
    width = 14.0 / np.sqrt(tot.min())
    theta_max = min(np.pi, width / max(norm, 0.05))
    r_lo = max(0.0, norm - width)
    r, wr = _radial_nodes(r_lo)
    th, wt = _nodes(0.0, theta_max, 241)
    ph, wp = _nodes(0.0, 2 * np.pi, 97)
    wp = wp[:-1] / wp[:-1].sum() * 2 * np.pi
    ph = ph[:-1]
    dirs = np.stack([np.sin(th)[:, None] * np.cos(ph), np.sin(th)[:, None] * np.sin(ph),
                     np.repeat(np.cos(th)[:, None], len(ph), axis=1)], axis=-1) @ frame.T
    ang_w = (wt * np.sin(th))[:, None] * wp[None, :]
    dirs = dirs.reshape(-1, 3)
    ang_w = ang_w.reshape(-1)
    logs, moments = [], []
    for ri, wri in zip(r, wr):
        pts = ri * dirs
        with np.errstate(divide="ignore"):
            ll = (n_plus * np.log((1 + pts) / 2) + n_minus * np.log((1 - pts) / 2)).sum(axis=1)
        logs.append(ll + np.log(np.maximum(wri * ri * ri * ang_w, 1e-300)))
        moments.append(pts)
    logs = np.concatenate(logs)
    pts = np.concatenate(moments)
    w = np.exp(logs - logs.max())
    return (w[:, None] * pts).sum(axis=0) / w.sum()


def toy_z_posterior_mean(n_plus: int) -> float:
    """``<Z>`` under the ball prior after ``n_plus`` outcomes ``|0>`` in the z basis.

    The ball's cross-section at height z has area proportional to ``1 - z^2``.
    """
    z = np.linspace(-1, 1, 400001)
    with np.errstate(divide="ignore"):
        logw = n_plus * np.log((1 + z) / 2) + np.log(np.clip(1 - z * z, 1e-300, None))
    w = np.exp(logw - logw.max())
    return float(trapezoid(z * w, z) / trapezoid(w, z))


def poisson_loglik_hessian(rho: np.ndarray, povms: list, weights, N: float, h: float = 1e-4) -> np.ndarray:
    """Finite-difference Hessian of ``-N sum_s w_s sum_g [p0_g ln q_g(v) - q_g(v)]`` at the purified ``rho``.

    ``q_g(v) = Re(psi^† (I (x) M_g) psi)`` with ``psi`` rebuilt from the real
    vector ``v``, and ``p0`` the Born probabilities of ``rho``. The extra
    ``-q_g`` term makes the Hessian equal the Fisher information along every
    direction of the embedding, not only those that keep the norm fixed.
    Central differences with four evaluations per entry. ``povms`` holds
    lists of ``d x d`` element matrices.
    """
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    lam, vec = np.linalg.eigh(rho)
    # auxiliary index runs over eigenvalues in descending order
    psi0 = np.concatenate([np.sqrt(max(lam[k], 0.0)) * vec[:, k] for k in reversed(range(d))])
    v0 = np.concatenate([psi0.real, psi0.imag])
    ops, coef = [], []
    for povm, w in zip(povms, weights):
        for m in povm:
            ops.append(np.kron(np.eye(d), m))
            coef.append(w)
    ops = np.array(ops)
    coef = np.array(coef)

    def q(v):
        psi = v[: d * d] + 1j * v[d * d:]
        return np.einsum("i,kij,j->k", psi.conj(), ops, psi).real

    p0 = q(v0)

    def f(v):
        qv = q(v)
        return -N * np.sum(coef * (p0 * np.log(qv) - qv))

    n = len(v0)
    hess = np.zeros((n, n))
    eye = np.eye(n) * h
    for i in range(n):
        for j in range(i, n):
            val = (f(v0 + eye[i] + eye[j]) - f(v0 + eye[i] - eye[j])
                   - f(v0 - eye[i] + eye[j]) + f(v0 - eye[i] - eye[j])) / (4 * h * h)
            hess[i, j] = hess[j, i] = val
    return hess
