"""Truncated Fock basis and sparse Bose-Hubbard Hamiltonians.

The hot loops (enumeration, ranking, hopping assembly) live in a compiled
extension when it is available; otherwise the numpy versions in
``_fock_py`` are used.  Set ``TWOPROBE_PURE_PYTHON=1`` to force the
fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .model import ModelSpec

if os.environ.get("TWOPROBE_PURE_PYTHON"):
    from . import _fock_py as _kernels
    KERNEL_BACKEND = "python"
else:
    try:
        from . import _fock as _kernels
        KERNEL_BACKEND = "cython"
    except ImportError:
        from . import _fock_py as _kernels
        KERNEL_BACKEND = "python"

__all__ = [
    "KERNEL_BACKEND",
    "FockBasis",
    "enumerate_basis",
    "composition_counts",
    "bonds",
    "build_hamiltonian",
]


def composition_counts(num_sites: int, num_particles: int, n_max: int) -> np.ndarray:
    """``counts[s, r]``: ways to put r bosons on s sites with at most n_max each."""
    counts = np.zeros((num_sites + 1, num_particles + 1), dtype=np.int64)
    counts[0, 0] = 1
    for s in range(1, num_sites + 1):
        for r in range(num_particles + 1):
            counts[s, r] = counts[s - 1, max(0, r - n_max): r + 1].sum()
    return counts


def _rank_offsets(counts: np.ndarray, num_sites: int, num_particles: int, n_max: int) -> np.ndarray:
    offsets = np.zeros((num_sites, num_particles + 1, n_max + 2), dtype=np.int64)
    for i in range(num_sites):
        rest = num_sites - i - 1
        for r in range(num_particles + 1):
            acc = 0
            for v in range(min(n_max, r), -1, -1):
                offsets[i, r, v] = acc
                acc += counts[rest, r - v]
    return offsets


@dataclass(frozen=True, eq=False)
class FockBasis:
    num_sites: int
    num_particles: int
    n_max: int
    states: np.ndarray
    offsets: np.ndarray

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    def index(self, occupations) -> np.ndarray | int:
        """Position of one occupation vector (or a 2-d batch) in the basis."""
        occ = np.asarray(occupations)
        single = occ.ndim == 1
        occ = np.atleast_2d(occ)
        if occ.shape[1] != self.num_sites or np.any(occ.sum(axis=1) != self.num_particles) \
                or np.any(occ < 0) or np.any(occ > self.n_max):
            raise KeyError("occupation vector outside this basis")
        idx = _kernels.rank_states(occ.astype(np.uint8), self.offsets)
        return int(idx[0]) if single else idx

    @cached_property
    def occupations(self) -> np.ndarray:
        """States as a float array, handy for expectation values."""
        return self.states.astype(np.float64)


def enumerate_basis(num_sites: int, num_particles: int, n_max: int) -> FockBasis:
    """All occupation vectors with fixed N and per-site cap, descending-lex ordered."""
    if num_sites < 1 or num_particles < 1:
        raise ValueError("need at least one site and one particle")
    if n_max < 1 or n_max > 255:
        raise ValueError("n_max must lie in 1..255")
    if num_particles > num_sites * n_max:
        raise ValueError(f"empty sector: {num_particles} bosons cannot fit on "
                         f"{num_sites} sites with at most {n_max} each")
    counts = composition_counts(num_sites, num_particles, n_max)
    offsets = _rank_offsets(counts, num_sites, num_particles, n_max)
    states = _kernels.enumerate_states(num_sites, num_particles, n_max, counts)
    return FockBasis(num_sites, num_particles, n_max, states, offsets)


def bonds(num_sites: int, boundary: str = "periodic") -> np.ndarray:
    """Nearest-neighbour pairs; a two-site ring has a single bond."""
    pairs = [(i, i + 1) for i in range(num_sites - 1)]
    if boundary == "periodic" and num_sites > 2:
        pairs.append((num_sites - 1, 0))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def build_hamiltonian(basis: FockBasis, spec: ModelSpec, onsite_shifts=None) -> sp.csr_matrix:
    """Sparse real-symmetric Bose-Hubbard Hamiltonian in ``basis``.

    ``onsite_shifts`` adds ``sum_i shift_i * n_i``; the probe coupling enters
    this way with ``+eta`` on each probed site.
    """
    if basis.num_sites != spec.num_sites or basis.num_particles != spec.num_particles:
        raise ValueError("basis does not match the model's lattice or particle number")
    occ = basis.occupations
    diag = 0.5 * spec.interaction * np.sum(occ * (occ - 1.0), axis=1)
    diag += spec.chemical_potential * spec.num_particles
    if onsite_shifts is not None:
        shifts = np.asarray(onsite_shifts, dtype=float)
        if shifts.shape != (spec.num_sites,):
            raise ValueError("onsite_shifts must have one entry per site")
        diag = diag + occ @ shifts
    dim = basis.dim
    rows, cols, vals = _kernels.hopping_elements(
        basis.states, bonds(spec.num_sites, spec.boundary), basis.n_max, basis.offsets)
    diag_idx = np.arange(dim)
    H = sp.coo_matrix(
        (np.concatenate([diag, -spec.hopping * vals]),
         (np.concatenate([diag_idx, rows]), np.concatenate([diag_idx, cols]))),
        shape=(dim, dim),
    ).tocsr()
    H.sum_duplicates()
    return H
