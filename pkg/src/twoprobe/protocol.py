"""Simulated measurement protocol: shot noise, polynomial fits, estimators.

Noise follows the per-run Gaussian surrogate: each run's estimate of
Re(zeta) has variance ``1 - Re(zeta)^2`` (likewise for Im), and runs are
averaged.  Random streams are counter-based (Philox) and keyed by
``(seed, separation, time index, component)``, so results never depend on
evaluation order or thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bogoliubov
from .exact import ExactBackend
from .model import ConfigError, EquilibriumSpec, ModelSpec, ProbeLayout, TimeGrid, validate

__all__ = [
    "NoiseSpec",
    "CoherenceSeries",
    "SeriesFit",
    "DensityEstimate",
    "CorrelationEstimate",
    "ProtocolResult",
    "shot_noise_sigma",
    "simulate_runs",
    "fit_series",
    "estimate_density",
    "pool_density",
    "estimate_correlation",
    "clean_series",
    "run_protocol",
]

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class NoiseSpec:
    runs: int = 10_000
    seed: int = 0
    pairs: int = 1
    model: str = "gaussian_appendixB"

    def __post_init__(self):
        if int(self.runs) < 1:
            raise ConfigError("noise.runs must be >= 1")
        if int(self.pairs) < 1:
            raise ConfigError("noise.pairs must be >= 1")
        if not 0 <= int(self.seed) <= _U64:
            raise ConfigError("noise.seed must be a 64-bit unsigned integer")
        if self.model != "gaussian_appendixB":
            raise ConfigError(f"unknown noise model {self.model!r}")

    @property
    def effective_runs(self) -> int:
        """Runs times parallel probe pairs: the number of averaged shots."""
        return int(self.runs) * int(self.pairs)


@dataclass(frozen=True, eq=False)
class CoherenceSeries:
    times: np.ndarray
    separation: int
    values: np.ndarray
    re_err: np.ndarray
    im_err: np.ndarray
    provenance: str = "closed_form"

    @classmethod
    def noiseless(cls, times, separation: int, values, provenance: str) -> "CoherenceSeries":
        values = np.asarray(values, dtype=complex)
        zeros = np.zeros(values.shape)
        return cls(np.asarray(times, dtype=float), int(separation), values, zeros, zeros.copy(), provenance)


def shot_noise_sigma(zeta, tol: float = 1e-9):
    """Single-run standard deviations of Re and Im of ``zeta``."""
    zeta = np.asarray(zeta, dtype=complex)
    re, im = zeta.real, zeta.imag
    if np.any(np.abs(re) > 1 + tol) or np.any(np.abs(im) > 1 + tol):
        raise ValueError("coherence component exceeds 1 in magnitude")
    re = np.clip(re, -1.0, 1.0)
    im = np.clip(im, -1.0, 1.0)
    return np.sqrt(1.0 - re**2), np.sqrt(1.0 - im**2)


def _stream(seed: int, separation: int, index: int, component: int) -> np.random.Generator:
    key = [int(seed) & _U64, (int(separation) << 32) | (int(index) << 1) | int(component)]
    return np.random.Generator(np.random.Philox(key=key))


def simulate_runs(series: CoherenceSeries, noise: NoiseSpec) -> CoherenceSeries:
    """Average ``noise.effective_runs`` noisy single-run estimates per time.

    The t = 0 point is exact (zeta(0) = 1) and carries no noise.
    """
    n = noise.effective_runs
    sig_re, sig_im = shot_noise_sigma(series.values)
    at_zero = np.asarray(series.times) == 0.0
    sig_re = np.where(at_zero, 0.0, sig_re)
    sig_im = np.where(at_zero, 0.0, sig_im)
    out = np.array(series.values, dtype=complex)
    for r in range(len(series.times)):
        if sig_re[r] > 0:
            draws = _stream(noise.seed, series.separation, r, 0).standard_normal(n)
            out[r] = complex(series.values[r].real + sig_re[r] * draws.mean(), out[r].imag)
        if sig_im[r] > 0:
            draws = _stream(noise.seed, series.separation, r, 1).standard_normal(n)
            out[r] = complex(out[r].real, series.values[r].imag + sig_im[r] * draws.mean())
    scale = 1.0 / math.sqrt(n)
    return CoherenceSeries(series.times, series.separation, out, sig_re * scale, sig_im * scale, "noisy")


@dataclass(frozen=True, eq=False)
class SeriesFit:
    """Polynomial fit pinned at ``zeta(0)``.

    ``re_powers``/``im_powers`` list the fitted powers of t (never 0); the
    coefficient and covariance arrays follow the same order.
    """

    re_powers: tuple
    re_coef: np.ndarray
    re_cov: np.ndarray
    im_powers: tuple
    im_coef: np.ndarray
    im_cov: np.ndarray
    separation: int

    def re_term(self, power: int) -> tuple[float, float]:
        """Coefficient of ``t**power`` in Re(zeta) and its variance."""
        return _term(self.re_powers, self.re_coef, self.re_cov, power)

    def im_term(self, power: int) -> tuple[float, float]:
        return _term(self.im_powers, self.im_coef, self.im_cov, power)

    @property
    def first_derivative(self) -> complex:
        return complex(self.re_term(1)[0], self.im_term(1)[0])

    @property
    def second_derivative(self) -> complex:
        return complex(2 * self.re_term(2)[0], 2 * self.im_term(2)[0])


def _term(powers, coef, cov, power):
    if power not in powers:
        return 0.0, 0.0
    i = powers.index(power)
    return float(coef[i]), float(cov[i, i])


def _powers(degree: int, parity: int | None) -> tuple:
    if parity is None:
        return tuple(range(1, degree + 1))
    return tuple(p for p in range(1, degree + 1) if p % 2 == parity)


def _pinned_fit(t, y, err, y0, powers):
    n = len(powers)
    A = np.stack([t**p for p in powers], axis=1) if n else np.zeros((len(t), 0))
    if len(np.unique(t)) < n or np.linalg.matrix_rank(A) < n:
        raise ValueError(f"too few distinct non-zero times to fit powers {powers}")
    rhs = y - y0
    if np.all(err == 0):
        coef = np.linalg.lstsq(A, rhs, rcond=None)[0]
        return coef, np.zeros((n, n))
    w = 1.0 / np.maximum(err, 1e-300)
    coef = np.linalg.lstsq(A * w[:, None], rhs * w, rcond=None)[0]
    cov = np.linalg.inv((A * w[:, None] ** 2).T @ A)
    return coef, cov


def fit_series(series: CoherenceSeries, degree_re: int = 2, degree_im: int = 2,
               parity: bool = False) -> SeriesFit:
    """Weighted least-squares polynomial fit of Re and Im parts.

    The t = 0 point is known exactly and pinned, so only the coefficients of
    ``t, t^2, ...`` are fitted; the covariance treats the reported standard
    errors as absolute.  With ``parity=True`` Re keeps only even powers and
    Im only odd ones, which is exact for equilibrium states where
    ``zeta(-t) = conj(zeta(t))``.
    """
    t = np.asarray(series.times, dtype=float)
    if t[0] != 0.0:
        raise ValueError("series must start at t = 0")
    re_pows = _powers(degree_re, 0 if parity else None)
    im_pows = _powers(degree_im, 1 if parity else None)
    z0 = series.values[0]
    re_coef, re_cov = _pinned_fit(t[1:], series.values[1:].real, series.re_err[1:], z0.real, re_pows)
    im_coef, im_cov = _pinned_fit(t[1:], series.values[1:].imag, series.im_err[1:], z0.imag, im_pows)
    return SeriesFit(re_pows, re_coef, re_cov, im_pows, im_coef, im_cov, series.separation)


@dataclass(frozen=True)
class DensityEstimate:
    value: float
    error: float


@dataclass(frozen=True)
class CorrelationEstimate:
    separation: int
    cor: float
    cor_err: float
    g2: float
    g2_err: float
    method: str


def _as_fit(obj) -> SeriesFit:
    return obj if isinstance(obj, SeriesFit) else fit_series(obj)


def estimate_density(series, coupling: float) -> DensityEstimate:
    """Mean density from the initial slope of Im(zeta): ``rho = c1 / (2 eta)``."""
    if coupling == 0:
        raise ValueError("density is unobservable at zero coupling")
    slope, var = _as_fit(series).im_term(1)
    return DensityEstimate(slope / (2 * coupling), math.sqrt(var) / (2 * abs(coupling)))


def pool_density(estimates) -> DensityEstimate:
    """Inverse-variance mean of independent density estimates."""
    vals = np.array([e.value for e in estimates])
    errs = np.array([e.error for e in estimates])
    if np.any(errs == 0):
        return DensityEstimate(float(vals.mean()), 0.0)
    w = errs**-2
    return DensityEstimate(float(np.sum(w * vals) / w.sum()), float(w.sum() ** -0.5))


def estimate_correlation(series, reference, coupling: float,
                         density: DensityEstimate | None = None,
                         method: str = "protocol") -> CorrelationEstimate:
    """Density-density correlation from Re-curvatures of two coherence series.

    ``reference`` is the coincident-probe (separation 0) series.  With
    ``c2`` the t^2 coefficients of Re(zeta),
    ``Cor = (c2_ref - 2 c2) / (2 eta^2)``; at separation 0 both series are
    the same measurement and ``Cor = -c2 / (2 eta^2)``.
    """
    if reference is None:
        raise ValueError("a separation-0 reference series is required")
    if coupling == 0:
        raise ValueError("correlations are unobservable at zero coupling")
    fit = _as_fit(series)
    ref = _as_fit(reference)
    if ref.separation != 0:
        raise ValueError("reference series must have separation 0")
    eta2 = coupling**2
    c2, v2 = fit.re_term(2)
    if fit.separation == 0:
        cor = -c2 / (2 * eta2)
        var = v2 / (4 * eta2**2)
        if density is None:
            density = estimate_density(fit, coupling)
    else:
        c2_ref, v2_ref = ref.re_term(2)
        cor = (c2_ref - 2 * c2) / (2 * eta2)
        var = (v2_ref + 4 * v2) / (4 * eta2**2)
        if density is None:
            density = pool_density([estimate_density(fit, coupling), estimate_density(ref, coupling)])
    rho = density.value
    g2 = cor / rho**2 - 1.0
    g2_err = math.hypot(math.sqrt(var) / rho**2, 2 * cor * density.error / rho**3)
    return CorrelationEstimate(fit.separation, float(cor), math.sqrt(var), float(g2), g2_err, method)


@dataclass(eq=False)
class ProtocolResult:
    estimates: list
    density: DensityEstimate
    references: list
    series: dict
    clean: dict
    backend: str
    noise: NoiseSpec | None = None
    meta: dict = field(default_factory=dict)


def clean_series(spec: ModelSpec, separations, coupling: float, equilibrium: EquilibriumSpec,
                 grid: TimeGrid, backend: str = "bogoliubov", n_max: int = 4,
                 exact: ExactBackend | None = None, state=None, site_left: int = 0):
    """Noiseless coherence series and reference correlations per separation."""
    times = grid.times
    seps = [int(s) for s in separations]
    beta = equilibrium.beta if equilibrium.is_thermal else None
    if backend == "bogoliubov":
        values = bogoliubov.coherence_closed_form(times, seps, coupling, spec, equilibrium)
        cor = bogoliubov.analytic_correlation(seps, spec, equilibrium)
        g2 = bogoliubov.analytic_g2(seps, spec, equilibrium)
        series = {s: CoherenceSeries.noiseless(times, s, values[i], "closed_form") for i, s in enumerate(seps)}
        refs = {s: CorrelationEstimate(s, float(cor[i]), 0.0, float(g2[i]), 0.0, "analytic")
                for i, s in enumerate(seps)}
        return series, refs
    if backend == "exact":
        exact = exact or ExactBackend(spec, n_max)
        state = state if state is not None else exact.equilibrium_state(beta)
        series, refs = {}, {}
        for s in seps:
            probes = ProbeLayout.from_separation(s, coupling, site_left)
            series[s] = CoherenceSeries.noiseless(times, s, exact.coherence(state, probes, times), "exact")
            refs[s] = CorrelationEstimate(s, exact.correlation(state, s), 0.0, exact.g2(state, s), 0.0, "exact")
        return series, refs
    raise ConfigError(f"unknown backend {backend!r}")


def run_protocol(spec: ModelSpec, separations, coupling: float,
                 equilibrium: EquilibriumSpec | None = None, grid: TimeGrid | None = None,
                 noise: NoiseSpec | None = None, backend: str = "bogoliubov", n_max: int = 4,
                 threads: int = 1, degree_re: int = 4, degree_im: int = 3,
                 parity: bool = True, site_left: int = 0) -> ProtocolResult:
    """End-to-end reconstruction of the correlation table.

    Computes clean coherence series with the chosen backend, adds shot noise
    (if ``noise`` is given), fits every series and reconstructs the density
    and the correlation function at each separation.

    The default fit uses Re ~ t^2, t^4 and Im ~ t, t^3.  Pass
    ``degree_re=2, degree_im=2, parity=False`` for a plain quadratic fit,
    whose truncation bias grows with ``eta * t_max`` and becomes comparable
    to the shot noise at strong coupling.
    """
    separations = sorted({int(s) for s in separations})
    equilibrium = equilibrium or EquilibriumSpec.ground()
    grid = grid or TimeGrid()
    for s in separations:
        cfg = validate(spec, ProbeLayout.from_separation(s, coupling, site_left), equilibrium, grid)
    spec, equilibrium, grid = cfg.model, cfg.equilibrium, cfg.grid
    coupling = cfg.probes.coupling
    needed = sorted(set(separations) | {0})

    exact = state = None
    if backend == "exact":
        exact = ExactBackend(spec, n_max)
        state = exact.equilibrium_state(equilibrium.beta if equilibrium.is_thermal else None)

    def channel(s):
        clean, refs = clean_series(spec, [s], coupling, equilibrium, grid, backend, n_max,
                                   exact=exact, state=state, site_left=site_left)
        measured = simulate_runs(clean[s], noise) if noise is not None else clean[s]
        return s, clean[s], refs[s], measured, fit_series(measured, degree_re, degree_im, parity)

    workers = max(1, int(threads))
    if workers == 1:
        results = [channel(s) for s in needed]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(channel, needed))

    clean = {s: c for s, c, _, _, _ in results}
    refs = {s: r for s, _, r, _, _ in results}
    measured = {s: m for s, _, _, m, _ in results}
    fits = {s: f for s, _, _, _, f in results}
    density = pool_density([estimate_density(fits[s], coupling) for s in needed])
    estimates = [estimate_correlation(fits[s], fits[0], coupling, density) for s in separations]
    return ProtocolResult(
        estimates=estimates,
        density=density,
        references=[refs[s] for s in separations],
        series={s: measured[s] for s in separations},
        clean={s: clean[s] for s in separations},
        backend=backend,
        noise=noise,
        meta={"coupling": coupling, "n_max": n_max if backend == "exact" else None,
              "fit": {"degree_re": degree_re, "degree_im": degree_im, "parity": parity}},
    )
