"""Two-qubit quantum-probe simulator for density correlations of the 1D Bose-Hubbard model.

Backends
--------
bogoliubov
    Closed-form weak-coupling results (quasiparticle modes, correlation
    function, coherence function).
exact
    Exact diagonalisation on small periodic rings, Loschmidt-echo evaluation
    of the coherence function and the probe-pair density matrix.
protocol
    Shot-noise simulation and the fit-based reconstruction of density and
    correlations from measured coherence series.
"""
__version__ = "0.1.0"

from .model import (ConfigError, Configuration, EquilibriumSpec, ModelSpec, ProbeLayout,
                    TimeGrid, validate)
from .protocol import (CoherenceSeries, CorrelationEstimate, NoiseSpec, estimate_correlation,
                       estimate_density, fit_series, run_protocol, simulate_runs)

__all__ = [
    "__version__",
    "ConfigError",
    "Configuration",
    "EquilibriumSpec",
    "ModelSpec",
    "ProbeLayout",
    "TimeGrid",
    "validate",
    "CoherenceSeries",
    "CorrelationEstimate",
    "NoiseSpec",
    "estimate_correlation",
    "estimate_density",
    "fit_series",
    "run_protocol",
    "simulate_runs",
]
