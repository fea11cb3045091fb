"""Weak-coupling (Bogoliubov) backend.

Every mode sum runs over the non-condensate quasi-momenta of a ring of M
sites, ``k = 2*pi*m/M`` with ``m`` in the symmetric window
``-floor(M/2) .. ceil(M/2)-1`` minus ``m = 0``.  Anomalous averages are
dropped and the condensate number is taken equal to N.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EquilibriumSpec, ModelSpec

__all__ = [
    "momenta",
    "dispersion",
    "quasiparticle_frequency",
    "thermal_occupation",
    "probe_coupling_sq",
    "ModeTable",
    "mode_table",
    "analytic_correlation",
    "analytic_g2",
    "coherence_closed_form",
    "coupling_moments",
]


def momenta(num_sites: int) -> np.ndarray:
    M = int(num_sites)
    m = np.arange(-(M // 2), (M + 1) // 2)
    m = m[m != 0]
    return 2.0 * np.pi * m / M


def dispersion(k, hopping: float = 1.0):
    """Free lattice dispersion ``2J(1 - cos k)``."""
    return 2.0 * hopping * (1.0 - np.cos(k))


def quasiparticle_frequency(eps, interaction: float, density: float):
    eps = np.asarray(eps, dtype=float)
    return np.sqrt(eps * (eps + 2.0 * interaction * density))


def thermal_occupation(omega, beta: float | None):
    """Bose-Einstein occupation; ``beta=None`` (or inf) is the ground state."""
    omega = np.asarray(omega, dtype=float)
    if beta is None or np.isinf(beta):
        return np.zeros_like(omega)
    if np.any(omega <= 0):
        raise ValueError("zero-frequency mode at finite temperature; the k=0 mode must be excluded")
    x = beta * omega
    # exp(-x) / (1 - exp(-x)) stays finite for large x
    return np.exp(-x) / -np.expm1(-x)


def probe_coupling_sq(k, coupling: float, separation: int, density: float, num_sites: int,
                      hopping: float = 1.0, interaction: float = 0.0):
    """Squared coupling ``|eta_k|^2`` of the probe pair to mode k."""
    eps = dispersion(k, hopping)
    omega = quasiparticle_frequency(eps, interaction, density)
    interference = 2.0 * (1.0 + np.cos(np.asarray(k) * separation))
    return coupling**2 * density * eps / (num_sites * omega) * interference


@dataclass(frozen=True)
class ModeTable:
    k: np.ndarray
    eps: np.ndarray
    omega: np.ndarray
    occupation: np.ndarray
    density: float
    num_sites: int

    @property
    def coth(self) -> np.ndarray:
        """``coth(beta*omega/2)`` written as ``1 + 2n``."""
        return 1.0 + 2.0 * self.occupation

    def coupling_sq(self, coupling: float, separation) -> np.ndarray:
        """|eta_k|^2 for one or more separations (modes along the last axis)."""
        sep = np.asarray(separation, dtype=float)[..., None]
        interference = 2.0 * (1.0 + np.cos(self.k * sep))
        return coupling**2 * self.density * self.eps / (self.num_sites * self.omega) * interference


def mode_table(spec: ModelSpec, equilibrium: EquilibriumSpec | None = None) -> ModeTable:
    equilibrium = equilibrium or EquilibriumSpec.ground()
    k = momenta(spec.num_sites)
    eps = dispersion(k, spec.hopping)
    rho = spec.mean_density
    omega = quasiparticle_frequency(eps, spec.interaction, rho)
    beta = equilibrium.beta if equilibrium.is_thermal else None
    return ModeTable(k, eps, omega, thermal_occupation(omega, beta), rho, spec.num_sites)


def analytic_correlation(separation, spec: ModelSpec, equilibrium: EquilibriumSpec | None = None):
    """Density-density correlation <n_j n_{j+dc}> in the Bogoliubov approximation."""
    modes = mode_table(spec, equilibrium)
    sep = np.asarray(separation, dtype=float)
    weights = modes.eps / modes.omega * modes.coth
    rho = modes.density
    fluct = np.cos(modes.k * sep[..., None]) @ weights
    return rho**2 + rho / modes.num_sites * fluct


def analytic_g2(separation, spec: ModelSpec, equilibrium: EquilibriumSpec | None = None):
    rho = spec.mean_density
    return (analytic_correlation(separation, spec, equilibrium) - rho**2) / rho**2


def coupling_moments(separation: int, coupling: float, spec: ModelSpec,
                     equilibrium: EquilibriumSpec | None = None) -> tuple[float, float]:
    """First and second moments <V>, <V^2> of the probe-system coupling."""
    modes = mode_table(spec, equilibrium)
    mean = 2.0 * coupling * modes.density
    eta_sq = modes.coupling_sq(coupling, separation)
    return mean, mean**2 + float(np.sum(eta_sq * modes.coth))


def coherence_closed_form(times, separation, coupling: float, spec: ModelSpec,
                          equilibrium: EquilibriumSpec | None = None) -> np.ndarray:
    """Closed-form coherence function zeta(t) of the probe pair.

    Broadcasts over ``times`` (last axis of the result) and ``separation``
    (leading axes).  Returns a complex array; ``|zeta| <= 1``.
    """
    modes = mode_table(spec, equilibrium)
    t = np.asarray(times, dtype=float)
    sep = np.asarray(separation)
    eta_sq = modes.coupling_sq(coupling, sep)          # (..., K)
    a = eta_sq / modes.omega**2                         # (..., K)
    wt = np.multiply.outer(t, modes.omega)              # (T, K)
    phase_kernel = wt - np.sin(wt)
    decay_kernel = 2.0 * np.sin(0.5 * wt) ** 2 * modes.coth
    phase = 2.0 * coupling * modes.density * t - a @ phase_kernel.T
    decay = -(a @ decay_kernel.T)
    return np.exp(decay + 1j * phase)
