"""Lanczos-based Krylov propagation for real-symmetric sparse Hamiltonians."""
from __future__ import annotations

import numpy as np
import scipy.linalg as la

__all__ = ["ConvergenceError", "expm_multiply_krylov", "dense_propagator"]


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""


def _lanczos(H, v, m):
    """Orthonormal Krylov basis (full reorthogonalisation) and tridiagonal T."""
    n = v.shape[0]
    V = np.zeros((m + 1, n), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    V[0] = v
    for j in range(m):
        w = H @ V[j]
        alpha[j] = np.vdot(V[j], w).real
        w = w - alpha[j] * V[j] - (beta[j - 1] * V[j - 1] if j else 0)
        w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] < 1e-13 * max(1.0, abs(alpha[j])):
            return V[: j + 1], alpha[: j + 1], beta[:j], 0.0
        V[j + 1] = w / beta[j]
    return V[:m], alpha, beta[: m - 1], beta[m - 1]


def expm_multiply_krylov(H, psi, t: float, tol: float = 1e-10, krylov_dim: int = 30,
                         max_steps: int = 100000):
    """Return ``exp(-i H t) psi`` by adaptive Krylov substepping.

    Each substep builds a Lanczos basis from the current vector and takes the
    largest step (halving from the remaining time) whose a-posteriori error
    estimate ``beta_m |[exp(-i T tau)]_{m,0}|`` stays below ``tol`` times the
    vector norm.
    """
    v = np.asarray(psi, dtype=complex).copy()
    norm = np.linalg.norm(v)
    if t == 0 or norm == 0:
        return v
    m = min(krylov_dim, v.shape[0])
    remaining = float(t)
    steps = 0
    while remaining != 0.0:
        steps += 1
        if steps > max_steps:
            raise ConvergenceError("Krylov propagation exceeded the step cap")
        V, alpha, offdiag, resid = _lanczos(H, v / norm, m)
        evals, evecs = la.eigh_tridiagonal(alpha, offdiag)
        tau = remaining
        while True:
            y = evecs @ (np.exp(-1j * evals * tau) * evecs[0].conj())
            if resid == 0.0 or resid * abs(y[-1]) <= tol:
                break
            tau *= 0.5
            if abs(tau) < 1e-300:
                raise ConvergenceError("Krylov step size underflow")
        v = norm * (V.T @ y)
        remaining -= tau
        if abs(remaining) <= 1e-15 * abs(t):
            remaining = 0.0
    return v


def dense_propagator(H, t: float) -> np.ndarray:
    """Dense ``exp(-i H t)`` for small Hermitian ``H``."""
    Hd = H.toarray() if hasattr(H, "toarray") else np.asarray(H)
    evals, evecs = np.linalg.eigh(Hd)
    return (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T
