import numpy as np
import pytest

from twoprobe import bogoliubov as bg
from twoprobe.exact import ExactBackend, density_pair
from twoprobe.model import ConfigError, EquilibriumSpec, ModelSpec, ProbeLayout, TimeGrid
from twoprobe.protocol import (CoherenceSeries, DensityEstimate, NoiseSpec, estimate_correlation,
                               estimate_density, fit_series, pool_density, run_protocol,
                               shot_noise_sigma, simulate_runs)

WEAK = ModelSpec(1000, 1000, 1.0, 0.1)
WARM = EquilibriumSpec.thermal(10.0)
GRID = TimeGrid()


def closed_series(dc, eta=0.4, spec=WEAK, eq=WARM, grid=GRID):
    t = grid.times
    return CoherenceSeries.noiseless(t, dc, bg.coherence_closed_form(t, dc, eta, spec, eq), "closed_form")


@pytest.fixture(scope="module")
def mott8():
    backend = ExactBackend(ModelSpec(8, 8, 1.0, 3.0), 4)
    return backend, backend.equilibrium_state()


def exact_series(backend, state, dc, eta=1.0, grid=GRID):
    t = grid.times
    z = backend.coherence(state, ProbeLayout.from_separation(dc, eta), t)
    return CoherenceSeries.noiseless(t, dc, z, "exact")


@pytest.mark.parametrize("re,expected", [(1.0, 0.0), (0.0, 1.0), (0.6, 0.8), (-0.6, 0.8)])
def test_shot_noise_sigma(re, expected):
    s_re, s_im = shot_noise_sigma(complex(re, 0.0))
    assert s_re == pytest.approx(expected, abs=1e-15)
    assert s_im == 1.0


def test_shot_noise_sigma_tolerance():
    assert shot_noise_sigma(1 + 5e-10)[0] == 0.0
    with pytest.raises(ValueError):
        shot_noise_sigma(1 + 1e-6)
    with pytest.raises(ValueError):
        shot_noise_sigma(0.5 - 1.1j)


def test_noise_spec_validation():
    assert NoiseSpec(runs=100, pairs=100).effective_runs == 10_000
    for bad in (dict(runs=0), dict(pairs=0), dict(seed=-1), dict(model="bernoulli")):
        with pytest.raises(ConfigError):
            NoiseSpec(**bad)


def test_simulation_is_deterministic():
    s = closed_series(3)
    a = simulate_runs(s, NoiseSpec(1000, seed=7))
    b = simulate_runs(s, NoiseSpec(1000, seed=7))
    c = simulate_runs(s, NoiseSpec(1000, seed=8))
    assert a.values.tobytes() == b.values.tobytes()
    assert not np.array_equal(a.values, c.values)


def test_time_zero_is_noiseless():
    noisy = simulate_runs(closed_series(2), NoiseSpec(10, seed=1))
    assert noisy.values[0] == 1.0
    assert noisy.re_err[0] == 0.0 and noisy.im_err[0] == 0.0
    assert noisy.provenance == "noisy"


def test_law_of_large_numbers():
    s = closed_series(1)
    noisy = simulate_runs(s, NoiseSpec(10**6, seed=3))
    sig_re, sig_im = shot_noise_sigma(s.values[1:])
    np.testing.assert_allclose(noisy.re_err[1:], sig_re / 1000)
    assert np.all(np.abs(noisy.values[1:].real - s.values[1:].real) < 5 * noisy.re_err[1:])
    assert np.all(np.abs(noisy.values[1:].imag - s.values[1:].imag) < 5 * noisy.im_err[1:])


def test_pairs_multiply_effective_runs():
    s = closed_series(4)
    a = simulate_runs(s, NoiseSpec(runs=100, pairs=100, seed=5))
    b = simulate_runs(s, NoiseSpec(runs=10_000, seed=5))
    np.testing.assert_array_equal(a.re_err, b.re_err)
    np.testing.assert_array_equal(a.values, b.values)


def test_fit_recovers_parabola():
    t = GRID.times
    z = 1 - 0.37 * t**2 + 0.11 * t + 1j * (0.8 * t - 0.05 * t**2)
    fit = fit_series(CoherenceSeries.noiseless(t, 2, z, "closed_form"))
    np.testing.assert_allclose(fit.re_coef, [0.11, -0.37], atol=1e-12)
    np.testing.assert_allclose(fit.im_coef, [0.8, -0.05], atol=1e-12)
    assert fit.first_derivative == pytest.approx(0.11 + 0.8j, abs=1e-12)
    assert fit.second_derivative == pytest.approx(-0.74 - 0.1j, abs=1e-12)


def test_fit_parity_powers():
    t = GRID.times
    z = 1 - 0.5 * t**2 + 0.2 * t**4 + 1j * (0.8 * t - 0.3 * t**3)
    fit = fit_series(CoherenceSeries.noiseless(t, 0, z, "closed_form"), 4, 3, parity=True)
    assert fit.re_powers == (2, 4) and fit.im_powers == (1, 3)
    np.testing.assert_allclose(fit.re_coef, [-0.5, 0.2], atol=1e-10)
    np.testing.assert_allclose(fit.im_coef, [0.8, -0.3], atol=1e-10)


def test_fit_rank_deficient():
    s = CoherenceSeries.noiseless([0.0, 0.01], 0, [1.0, 0.99], "closed_form")
    with pytest.raises(ValueError, match="distinct"):
        fit_series(s)


def test_quadratic_fit_second_derivative_truncation():
    # Re zeta is even in t, so the quadratic fit's error comes from the t^4
    # term and shrinks like step^2 at a fixed number of points.
    _, v2 = bg.coupling_moments(3, 0.4, WEAK, WARM)
    errs = []
    for step in (0.01, 0.005):
        fit = fit_series(closed_series(3, grid=TimeGrid(step, 20)))
        errs.append(abs(fit.second_derivative.real + v2))
    assert errs[0] < 300 * 0.01**2
    assert errs[1] / errs[0] == pytest.approx(0.25, rel=0.02)


def test_coefficient_variance_scales_inversely_with_runs():
    s = closed_series(1)
    cov = [fit_series(simulate_runs(s, NoiseSpec(n, seed=1))).re_cov[1, 1] for n in (100, 1000, 10_000)]
    assert cov[0] / cov[1] == pytest.approx(10, rel=1e-9)
    assert cov[1] / cov[2] == pytest.approx(10, rel=1e-9)
    # empirical spread over repeated seeds follows the same law
    spread = []
    for n in (100, 10_000):
        c2 = [fit_series(simulate_runs(s, NoiseSpec(n, seed=k))).re_coef[1] for k in range(300)]
        spread.append(np.var(c2, ddof=1))
    assert spread[0] / spread[1] == pytest.approx(100, rel=0.35)


def test_density_from_slope():
    t = GRID.times
    s = CoherenceSeries.noiseless(t, 1, 1 + 0.8j * t, "closed_form")
    assert estimate_density(s, 0.4).value == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        estimate_density(s, 0.0)


def test_density_from_exact_series(mott8):
    backend, state = mott8
    errs = []
    for step in (0.01, 0.005):
        est = estimate_density(exact_series(backend, state, 2, grid=TimeGrid(step, 20)), 1.0)
        assert est.error == 0.0
        errs.append(abs(est.value - 1.0))
    assert errs[0] < 250 * 0.01**2
    assert errs[1] / errs[0] == pytest.approx(0.25, rel=0.15)
    parity = fit_series(exact_series(backend, state, 2), 4, 3, parity=True)
    assert estimate_density(parity, 1.0).value == pytest.approx(1.0, abs=15 * 0.01**2)


def test_pool_density():
    pooled = pool_density([DensityEstimate(1.0, 0.1), DensityEstimate(2.0, 0.2)])
    assert pooled.value == pytest.approx((1 / 0.01 + 2 / 0.04) / (1 / 0.01 + 1 / 0.04))
    assert pooled.error == pytest.approx((1 / 0.01 + 1 / 0.04) ** -0.5)


def test_coincident_reference_gives_local_fluctuation():
    s = closed_series(0)
    fit = fit_series(s)
    est = estimate_correlation(s, s, 0.4)
    assert est.cor == pytest.approx(-fit.second_derivative.real / (4 * 0.4**2), rel=1e-12)


def test_free_gas_correlation_from_noiseless_series():
    spec = ModelSpec(64, 64, 1.0, 0.0)
    eq = EquilibriumSpec.ground()
    ref = closed_series(0, spec=spec, eq=eq)
    for dc in (1, 5, 20):
        est = estimate_correlation(closed_series(dc, spec=spec, eq=eq), ref, 0.4)
        assert est.cor == pytest.approx(1 - 1 / 64, abs=400 * 0.01**2)


def test_exact_correlation_from_noiseless_series(mott8):
    backend, state = mott8
    ref = exact_series(backend, state, 0)
    for dc in range(4):
        fit = fit_series(exact_series(backend, state, dc), 4, 3, parity=True)
        est = estimate_correlation(fit, fit_series(ref, 4, 3, parity=True), 1.0)
        direct = density_pair(state, backend.basis, 0, dc)
        assert est.cor == pytest.approx(direct, abs=60 * 0.01**2)


def test_missing_or_wrong_reference():
    s = closed_series(3)
    with pytest.raises(ValueError, match="reference"):
        estimate_correlation(s, None, 0.4)
    with pytest.raises(ValueError, match="separation 0"):
        estimate_correlation(s, closed_series(2), 0.4)
    with pytest.raises(ValueError):
        estimate_correlation(s, closed_series(0), 0.0)


def test_only_real_part_feeds_correlation():
    s, ref = closed_series(3), closed_series(0)
    base = estimate_correlation(s, ref, 0.4, DensityEstimate(1.0, 0.0))
    t = s.times
    shifted = CoherenceSeries.noiseless(t, 3, s.values + 0.3j * t**2, "closed_form")
    assert estimate_correlation(shifted, ref, 0.4, DensityEstimate(1.0, 0.0)).cor == base.cor
    bent = CoherenceSeries.noiseless(t, 3, s.values + 0.3 * t**2, "closed_form")
    assert estimate_density(bent, 0.4) == estimate_density(s, 0.4)


@pytest.mark.parametrize("beta", [10.0, 100.0])
def test_noiseless_estimator_consistency(beta):
    # frozen bounds K * step^2 (measured: parity fit ~7, quadratic ~890)
    eq = EquilibriumSpec.thermal(beta)
    r = run_protocol(WEAK, range(16), 0.4, eq, GRID, None)
    assert max(abs(e.cor - ref.cor) for e, ref in zip(r.estimates, r.references)) < 10 * 0.01**2
    r = run_protocol(WEAK, range(16), 0.4, eq, GRID, None, degree_re=2, degree_im=2, parity=False)
    assert max(abs(e.cor - ref.cor) for e, ref in zip(r.estimates, r.references)) < 1000 * 0.01**2


def test_protocol_single_run_smoke():
    noise = NoiseSpec(runs=1, seed=42)
    a = run_protocol(WEAK, [0, 1, 2], 0.4, WARM, GRID, noise)
    b = run_protocol(WEAK, [0, 1, 2], 0.4, WARM, GRID, noise)
    assert [e.g2 for e in a.estimates] == [e.g2 for e in b.estimates]
    assert all(e.g2_err > 1.0 for e in a.estimates)


def test_protocol_independent_of_threads():
    noise = NoiseSpec(runs=500, seed=9)
    a = run_protocol(WEAK, range(6), 0.4, WARM, GRID, noise, threads=1)
    b = run_protocol(WEAK, range(6), 0.4, WARM, GRID, noise, threads=4)
    assert a.estimates == b.estimates
    assert a.density == b.density


def test_protocol_pairs_equivalence():
    a = run_protocol(WEAK, [0, 3], 0.4, WARM, GRID, NoiseSpec(runs=100, pairs=100, seed=2))
    b = run_protocol(WEAK, [0, 3], 0.4, WARM, GRID, NoiseSpec(runs=10_000, seed=2))
    assert [e.g2_err for e in a.estimates] == [e.g2_err for e in b.estimates]


def test_protocol_always_fits_reference():
    r = run_protocol(WEAK, [4], 0.4, WARM, GRID, NoiseSpec(1000, seed=1))
    assert [e.separation for e in r.estimates] == [4]


def test_protocol_rejects_bad_separation():
    with pytest.raises(ConfigError):
        run_protocol(ModelSpec(8, 8), [9], 1.0)


def test_backends_agree_at_weak_coupling():
    spec = ModelSpec(8, 8, 1.0, 0.05)
    backend = ExactBackend(spec, 6)
    state = backend.equilibrium_state()
    t = GRID.times
    for dc in (0, 1, 3):
        exact = backend.coherence(state, ProbeLayout.from_separation(dc, 0.4), t)
        closed = bg.coherence_closed_form(t, dc, 0.4, spec)
        np.testing.assert_allclose(exact.real, closed.real, rtol=0.1)
