"""Numerically exact strong-coupling backend on small lattices.

The coherence function is evaluated as a Loschmidt echo,
``zeta(t) = Tr[exp(+i H1 t) exp(-i H0 t) rho]``, with H0 the bare
Bose-Hubbard Hamiltonian and ``H1 = H0 + eta (n_L + n_R)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .fock import FockBasis, build_hamiltonian, enumerate_basis
from .krylov import ConvergenceError, dense_propagator, expm_multiply_krylov
from .model import ModelSpec, ProbeLayout

__all__ = [
    "DENSE_CAP",
    "THERMAL_CAP",
    "RDM_CAP",
    "SystemState",
    "ground_state",
    "thermal_state",
    "densities",
    "density_pair",
    "exact_correlation",
    "exact_g2",
    "propagate",
    "coherence_series_ed",
    "two_qubit_rdm",
    "ExactBackend",
]

DENSE_CAP = 500
THERMAL_CAP = 4000
RDM_CAP = 500
RESIDUAL_TOL = 1e-10
MAX_ITER = 5000


@dataclass(frozen=True, eq=False)
class SystemState:
    """Equilibrium state as an ensemble of H0 eigenvectors.

    ``vectors`` holds eigenvectors as columns; ``weights`` sum to one.  A
    pure ground state is the one-column case.
    """

    energies: np.ndarray
    vectors: np.ndarray
    weights: np.ndarray
    beta: float | None = None

    @property
    def is_pure(self) -> bool:
        return self.vectors.shape[1] == 1

    @property
    def probabilities(self) -> np.ndarray:
        """Occupation probability of each Fock basis vector."""
        return np.abs(self.vectors) ** 2 @ self.weights

    def expectation(self, op) -> float:
        Hv = op @ self.vectors
        return float(np.real(np.einsum("in,in,n->", self.vectors.conj(), Hv, self.weights)))


def ground_state(H, tol: float = RESIDUAL_TOL, maxiter: int = MAX_ITER) -> SystemState:
    """Lowest eigenpair; dense below ``DENSE_CAP``, Lanczos (ARPACK) above."""
    dim = H.shape[0]
    if dim <= DENSE_CAP:
        evals, evecs = np.linalg.eigh(H.toarray() if hasattr(H, "toarray") else H)
        psi = evecs[:, 0]
    else:
        v0 = np.ones(dim) / np.sqrt(dim)
        try:
            _, evecs = spla.eigsh(H, k=1, which="SA", v0=v0, tol=0, maxiter=maxiter)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"ground state did not converge: {exc}") from exc
        psi = evecs[:, 0]
    psi = psi / np.linalg.norm(psi)
    # fix the global sign so the largest component is positive
    psi = psi * np.sign(psi[np.argmax(np.abs(psi))])
    energy = float(psi @ (H @ psi))
    residual = np.linalg.norm(H @ psi - energy * psi)
    if residual > tol:
        raise ConvergenceError(f"ground-state residual {residual:.2e} exceeds {tol:.0e}")
    return SystemState(np.array([energy]), psi[:, None], np.ones(1), None)


def thermal_state(H, beta: float | None, degeneracy_tol: float = 1e-10) -> SystemState:
    """Boltzmann ensemble ``exp(-beta H)/Z`` from the full spectrum.

    ``beta=None`` or ``inf`` gives the zero-temperature limit (equal weight
    on an exactly degenerate ground manifold).
    """
    dim = H.shape[0]
    if dim > THERMAL_CAP:
        raise ValueError(f"thermal ensembles need dim <= {THERMAL_CAP}, got {dim}")
    evals, evecs = np.linalg.eigh(H.toarray() if hasattr(H, "toarray") else H)
    gap = evals - evals[0]
    if beta is None or np.isinf(beta):
        weights = (gap <= degeneracy_tol * max(1.0, abs(evals[0]))).astype(float)
    else:
        weights = np.exp(-beta * gap)
    weights /= weights.sum()
    return SystemState(evals, evecs, weights, beta)


def densities(state: SystemState, basis: FockBasis) -> np.ndarray:
    return state.probabilities @ basis.occupations


def density_pair(state: SystemState, basis: FockBasis, i: int, j: int) -> float:
    occ = basis.occupations
    return float(state.probabilities @ (occ[:, i] * occ[:, j]))


def _reference_pairs(num_sites: int, separation: int, boundary: str):
    if boundary == "periodic":
        return [(i, (i + separation) % num_sites) for i in range(num_sites)]
    return [(i, i + separation) for i in range(num_sites - separation)]


def exact_correlation(state: SystemState, basis: FockBasis, separation: int,
                      boundary: str = "periodic") -> float:
    """``<n_i n_{i+dc}>`` averaged over reference sites."""
    pairs = _reference_pairs(basis.num_sites, separation, boundary)
    return float(np.mean([density_pair(state, basis, i, j) for i, j in pairs]))


def exact_g2(state: SystemState, basis: FockBasis, separation: int,
             boundary: str = "periodic") -> float:
    """Normalised connected correlation averaged over reference sites."""
    dens = densities(state, basis)
    vals = [(density_pair(state, basis, i, j) - dens[i] * dens[j]) / dens[i] ** 2
            for i, j in _reference_pairs(basis.num_sites, separation, boundary)]
    return float(np.mean(vals))


def propagate(H, psi, t: float, tol: float = 1e-10, krylov_dim: int = 30,
              method: str = "auto") -> np.ndarray:
    """``exp(-i H t) psi``: dense below ``DENSE_CAP``, Krylov above."""
    if method == "auto":
        method = "dense" if H.shape[0] <= DENSE_CAP else "krylov"
    if method == "dense":
        return dense_propagator(H, t) @ np.asarray(psi, dtype=complex)
    if method == "krylov":
        return expm_multiply_krylov(H, psi, t, tol=tol, krylov_dim=krylov_dim)
    raise ValueError(f"unknown propagation method {method!r}")


def _check_equilibrium(state: SystemState, H0, tol: float = 1e-8):
    scale = max(1.0, float(np.max(np.abs(state.energies))))
    live = state.weights > 0
    V = state.vectors[:, live]
    resid = H0 @ V - V * state.energies[live]
    if np.max(np.abs(resid), initial=0.0) > tol * scale:
        raise ValueError("state does not commute with H0; the coherence function "
                         "moment identities require an equilibrium state")


def coherence_series_ed(state: SystemState, H0, H1, times, tol: float = 1e-12,
                        method: str = "auto") -> np.ndarray:
    """Loschmidt-echo coherence ``Tr[exp(iH1 t) exp(-iH0 t) rho]`` at ``times``.

    Since rho is diagonal in the H0 eigenbasis, each ensemble member only
    picks up the phase ``exp(-i E_n t)`` from the bare evolution.  Small
    problems diagonalise H1 once; larger ones step each member forward with
    the Krylov propagator (times are visited in sorted order).
    """
    _check_equilibrium(state, H0)
    times = np.asarray(times, dtype=float)
    live = np.flatnonzero(state.weights > 1e-300)
    if method == "auto":
        method = "dense" if H1.shape[0] <= DENSE_CAP or not state.is_pure else "krylov"
    zeta = np.zeros(times.shape, dtype=complex)
    if method == "dense":
        lam, W = np.linalg.eigh(H1.toarray() if hasattr(H1, "toarray") else H1)
        overlaps = np.abs(W.T @ state.vectors[:, live]) ** 2          # (m, n)
        for idx, t in np.ndenumerate(times):
            echo = np.exp(1j * lam * t) @ overlaps                   # <n|e^{iH1t}|n>
            zeta[idx] = np.sum(state.weights[live] * np.exp(-1j * state.energies[live] * t) * echo)
        return zeta
    flat = times.ravel()
    order = np.argsort(flat, kind="stable")
    out = np.zeros(flat.shape, dtype=complex)
    for n in live:
        vec = state.vectors[:, n].astype(complex)
        phi, t_prev = vec.copy(), 0.0
        for pos in order:
            t = flat[pos]
            # exp(+i H1 t) is exp(-i H1 (-t))
            phi = expm_multiply_krylov(H1, phi, -(t - t_prev), tol=tol)
            t_prev = t
            out[pos] += state.weights[n] * np.exp(-1j * state.energies[n] * t) * np.vdot(vec, phi)
    return out.reshape(times.shape)


def two_qubit_rdm(state: SystemState, H0, H1, t: float) -> np.ndarray:
    """Reduced density matrix of the probe pair, basis order |00>,|01>,|10>,|11>.

    Starting from the Bell state (|00> + |11>)/sqrt(2), branch |00> evolves
    with H1 and branch |11> with H0, so the populated block is
    ``rho[q, q'] = Tr(U_q rho_S U_q'^dag) / 2``.
    """
    dim = H0.shape[0]
    if dim > RDM_CAP:
        raise ValueError(f"two-qubit density matrix needs dim <= {RDM_CAP}, got {dim}")
    U0 = dense_propagator(H0, t)
    U1 = dense_propagator(H1, t)
    V = state.vectors.astype(complex)
    branch00 = U1 @ V
    branch11 = U0 @ V
    w = state.weights
    amp = {
        (0, 0): np.sum(w * np.einsum("in,in->n", branch00.conj(), branch00)),
        (3, 3): np.sum(w * np.einsum("in,in->n", branch11.conj(), branch11)),
        (3, 0): np.sum(w * np.einsum("in,in->n", branch00.conj(), branch11)),
    }
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = amp[(0, 0)] / 2
    rho[3, 3] = amp[(3, 3)] / 2
    rho[3, 0] = amp[(3, 0)] / 2
    rho[0, 3] = np.conj(rho[3, 0])
    return rho


class ExactBackend:
    """Basis, bare Hamiltonian and equilibrium state for one lattice model."""

    def __init__(self, spec: ModelSpec, n_max: int = 4):
        self.spec = spec
        self.n_max = n_max
        self.basis = enumerate_basis(spec.num_sites, spec.num_particles, n_max)
        self.H0 = build_hamiltonian(self.basis, spec)

    def probed_hamiltonian(self, probes: ProbeLayout):
        return build_hamiltonian(self.basis, self.spec, probes.onsite_shifts(self.spec.num_sites))

    def equilibrium_state(self, beta: float | None = None) -> SystemState:
        if beta is None:
            return ground_state(self.H0)
        return thermal_state(self.H0, beta)

    def coherence(self, state: SystemState, probes: ProbeLayout, times, **kwargs) -> np.ndarray:
        return coherence_series_ed(state, self.H0, self.probed_hamiltonian(probes), times, **kwargs)

    def correlation(self, state: SystemState, separation: int) -> float:
        return exact_correlation(state, self.basis, separation, self.spec.boundary)

    def g2(self, state: SystemState, separation: int) -> float:
        return exact_g2(state, self.basis, separation, self.spec.boundary)

    def moments(self, state: SystemState, probes: ProbeLayout) -> tuple[float, float]:
        """Direct ``<V>`` and ``<V^2>`` for ``V = eta (n_L + n_R)``."""
        coupling_per_state = self.basis.occupations @ probes.onsite_shifts(self.spec.num_sites)
        p = state.probabilities
        return float(p @ coupling_per_state), float(p @ coupling_per_state**2)
