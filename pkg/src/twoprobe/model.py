"""Domain types and parameter validation shared by every backend.

Units are natural throughout: hbar = 1, the hopping J sets the energy scale
and the lattice constant a = 1.  Times are therefore measured in hbar/J.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

__all__ = [
    "ConfigError",
    "ModelSpec",
    "EquilibriumSpec",
    "ProbeLayout",
    "TimeGrid",
    "Configuration",
    "validate",
]


class ConfigError(ValueError):
    """Raised when a configuration is physically or structurally invalid."""


BOUNDARIES = ("periodic", "open")


@dataclass(frozen=True)
class ModelSpec:
    """Bose-Hubbard lattice at fixed particle number.

    The chemical-potential term is kept with the sign ``+mu * sum n_i``.  At
    fixed N it only shifts every eigenvalue by ``mu * N``.
    """

    num_sites: int
    num_particles: int
    hopping: float = 1.0
    interaction: float = 0.0
    chemical_potential: float = 0.0
    boundary: str = "periodic"

    @property
    def mean_density(self) -> float:
        return self.num_particles / self.num_sites

    def to_natural_units(self) -> "ModelSpec":
        """Rescale energies so that J = 1."""
        J = self.hopping
        return ModelSpec(
            self.num_sites,
            self.num_particles,
            1.0,
            self.interaction / J,
            self.chemical_potential / J,
            self.boundary,
        )

    def from_natural_units(self, hopping: float) -> "ModelSpec":
        return ModelSpec(
            self.num_sites,
            self.num_particles,
            hopping,
            self.interaction * hopping,
            self.chemical_potential * hopping,
            self.boundary,
        )


@dataclass(frozen=True)
class EquilibriumSpec:
    kind: str = "ground_state"
    beta: float | None = None

    @property
    def is_thermal(self) -> bool:
        return self.kind == "thermal"

    @classmethod
    def thermal(cls, beta: float) -> "EquilibriumSpec":
        return cls("thermal", float(beta))

    @classmethod
    def ground(cls) -> "EquilibriumSpec":
        return cls("ground_state", None)


@dataclass(frozen=True)
class ProbeLayout:
    """Two probe qubits at ``site_left`` and ``site_right``.

    Coincident probes (separation 0) act as a single probe of strength
    ``2 * coupling`` on that site.
    """

    site_left: int
    site_right: int
    coupling: float
    level_splitting: float = 0.0

    @classmethod
    def from_separation(cls, separation: int, coupling: float, site_left: int = 0) -> "ProbeLayout":
        return cls(site_left, site_left + int(separation), coupling)

    @property
    def separation(self) -> int:
        return self.site_right - self.site_left

    def onsite_shifts(self, num_sites: int) -> np.ndarray:
        """Per-site energy shift produced by the probes in state |0>."""
        shifts = np.zeros(num_sites)
        shifts[self.site_left % num_sites] += self.coupling
        shifts[self.site_right % num_sites] += self.coupling
        return shifts


@dataclass(frozen=True)
class TimeGrid:
    step: float = 0.01
    count: int = 20

    @property
    def times(self) -> np.ndarray:
        return self.step * np.arange(self.count + 1)


@dataclass(frozen=True)
class Configuration:
    model: ModelSpec
    probes: ProbeLayout
    equilibrium: EquilibriumSpec = field(default_factory=EquilibriumSpec)
    grid: TimeGrid = field(default_factory=TimeGrid)
    hopping_scale: float = 1.0
    # inputs as given, so that leaving natural units is lossless
    source: tuple | None = field(default=None, repr=False, compare=False)

    def restore(self) -> tuple[ModelSpec, ProbeLayout, EquilibriumSpec, TimeGrid]:
        """Return the configuration in the caller's original units."""
        if self.source is not None:
            return self.source
        J = self.hopping_scale
        beta = self.equilibrium.beta
        return (
            self.model.from_natural_units(J),
            ProbeLayout(self.probes.site_left, self.probes.site_right, self.probes.coupling * J),
            EquilibriumSpec(self.equilibrium.kind, None if beta is None else beta / J),
            TimeGrid(self.grid.step / J, self.grid.count),
        )

    def to_dict(self) -> dict:
        return {
            "model": asdict(self.model),
            "probes": asdict(self.probes),
            "equilibrium": asdict(self.equilibrium),
            "grid": asdict(self.grid),
        }


def _finite(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    return value


def validate(
    spec: ModelSpec,
    probes: ProbeLayout,
    equilibrium: EquilibriumSpec | None = None,
    grid: TimeGrid | None = None,
) -> Configuration:
    """Check a configuration and return it in natural units (J = 1).

    Times in ``grid`` are rescaled by the hopping so that they are expressed
    in hbar/J; inverse temperatures likewise become beta*J.
    """
    equilibrium = equilibrium or EquilibriumSpec()
    grid = grid or TimeGrid()
    M, N = spec.num_sites, spec.num_particles
    if not isinstance(M, (int, np.integer)) or M < 2:
        raise ConfigError(f"num_sites must be an integer >= 2, got {M!r}")
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ConfigError(f"num_particles must be a positive integer, got {N!r}")
    J = _finite("hopping", spec.hopping)
    if J <= 0:
        raise ConfigError("hopping must be positive (it sets the energy unit)")
    U = _finite("interaction", spec.interaction)
    if U < 0:
        raise ConfigError("interaction must be non-negative")
    _finite("chemical_potential", spec.chemical_potential)
    if spec.boundary not in BOUNDARIES:
        raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {spec.boundary!r}")

    _finite("coupling", probes.coupling)
    if probes.level_splitting != 0:
        raise ConfigError("level_splitting is fixed to 0")
    sep = probes.separation
    if not 0 <= probes.site_left < M or sep < 0:
        raise ConfigError(f"probe sites ({probes.site_left}, {probes.site_right}) invalid")
    if sep >= M:
        raise ConfigError(f"separation {sep} out of range for {M} sites")
    if spec.boundary == "open" and probes.site_right >= M:
        raise ConfigError("right probe falls off an open chain")

    if equilibrium.kind not in ("ground_state", "thermal"):
        raise ConfigError(f"unknown equilibrium kind {equilibrium.kind!r}")
    beta = equilibrium.beta
    if equilibrium.is_thermal:
        if beta is None:
            raise ConfigError("thermal equilibrium requires beta")
        beta = _finite("beta", beta)
        if beta <= 0:
            raise ConfigError("beta must be positive")
        beta = beta * J

    step = _finite("grid.step", grid.step)
    if step <= 0:
        raise ConfigError("grid.step must be positive")
    if not isinstance(grid.count, (int, np.integer)) or grid.count < 1:
        raise ConfigError("grid.count must be a positive integer")

    return Configuration(
        model=spec.to_natural_units(),
        probes=ProbeLayout(probes.site_left, probes.site_right, probes.coupling / J),
        equilibrium=EquilibriumSpec(equilibrium.kind, beta),
        grid=TimeGrid(step * J, int(grid.count)),
        hopping_scale=J,
        source=(spec, probes, equilibrium, grid),
    )
