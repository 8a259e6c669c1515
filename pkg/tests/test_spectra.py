import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import simpson
from scipy.stats import norm as normal_dist

from qprep.hamiltonian import DenseHamiltonian, normalize_spectrum
from qprep.spectra import (BroadKernel, MomentSet, OrderUnsupported,
                           SolverFailure, SpectralMeasure, broaden,
                           coarse_qpe_sample, default_grid,
                           discretize_density, edgeworth, edgeworth_terms,
                           exact_spectral_measure, gram_charlier,
                           gram_charlier_coefficient, hermite_e_coefficients,
                           kde, moments, moments_from_measure,
                           qpe_kernel_probs, resolvent_distribution)

import oracles


def random_normalized(rng, dim, margin=0.1):
    mat = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    mat = (mat + mat.conj().T) / 2
    h, normalizer = normalize_spectrum(DenseHamiltonian(mat), margin=margin)
    return h, normalizer


def random_state(rng, dim):
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


# ---------------------------------------------------------------------------
# Exact measures
# ---------------------------------------------------------------------------

def test_measure_validation():
    with pytest.raises(ValueError):
        SpectralMeasure([])
    with pytest.raises(ValueError):
        SpectralMeasure([(0.6, 0.5), (0.4, 0.5)])
    with pytest.raises(ValueError):
        SpectralMeasure([(0.2, 0.7), (0.5, 0.7)])
    with pytest.raises(ValueError):
        SpectralMeasure([(0.2, 1.5), (0.5, -0.5)])
    with pytest.raises(ValueError):
        SpectralMeasure([(1.7, 1.0)])


def test_exact_measure_eigenvector():
    rng = np.random.default_rng(1)
    h, _ = random_normalized(rng, 12)
    evals, evecs = h.eigensystem()
    m = exact_spectral_measure(h, evecs[:, 3])
    assert m.probs.sum() == pytest.approx(1.0, abs=1e-12)
    top = int(np.argmax(m.probs))
    assert m.probs[top] > 1 - 1e-10
    assert m.energies[top] == pytest.approx(evals[3], abs=1e-12)


def test_exact_measure_matches_projections():
    rng = np.random.default_rng(2)
    h, normalizer = random_normalized(rng, 10)
    psi = random_state(rng, 10)
    m = exact_spectral_measure(h, 3.0 * psi, normalizer)
    evals, evecs = np.linalg.eigh(h.entries)
    assert np.allclose(m.energies, evals)
    assert np.allclose(m.probs, np.abs(evecs.conj().T @ psi) ** 2)
    assert m.normalizer is normalizer


def test_exact_measure_uniform_superposition():
    rng = np.random.default_rng(3)
    h, _ = random_normalized(rng, 8)
    _, evecs = h.eigensystem()
    m = exact_spectral_measure(h, evecs.sum(axis=1))
    assert np.allclose(m.probs, 1 / 8, atol=1e-12)


# ---------------------------------------------------------------------------
# Kernel broadening
# ---------------------------------------------------------------------------

def test_kernel_validation():
    with pytest.raises(ValueError):
        BroadKernel("boxcar", 0.1)
    with pytest.raises(ValueError):
        BroadKernel("gaussian", 0.0)
    with pytest.raises(ValueError):
        BroadKernel("qpe_sinc", 2.5)


def test_broaden_single_level_gaussian():
    m = SpectralMeasure([(0.5, 1.0)])
    grid, vals = broaden(m, BroadKernel("gaussian", 0.02))
    expected = np.exp(-0.5 * ((grid - 0.5) / 0.02) ** 2) \
        / (0.02 * np.sqrt(2 * np.pi))
    assert np.allclose(vals, expected, atol=1e-12)
    assert np.trapezoid(vals, grid) == pytest.approx(1.0, abs=1e-6)


def test_broaden_small_width_recovers_spikes():
    m = SpectralMeasure([(0.3, 0.4), (0.7, 0.6)])
    grid = np.linspace(0, 1, 2001)
    _, vals = broaden(m, BroadKernel("gaussian", 1e-3), grid)
    for energy, weight in m.levels:
        window = np.abs(grid - energy) < 6e-3
        assert np.trapezoid(vals[window], grid[window]) == pytest.approx(
            weight, abs=1e-3)
        peak = grid[window][np.argmax(vals[window])]
        assert abs(peak - energy) < 1e-3


def test_broaden_lorentzian_tail_budget():
    # an algebraic tail keeps visible mass outside any finite grid; the
    # integral matches the analytic in-window mass instead of 1
    eta = 0.01
    m = SpectralMeasure([(0.5, 1.0)])
    grid = np.linspace(-0.05, 1.05, 20001)
    _, vals = broaden(m, BroadKernel("lorentzian", eta), grid)
    covered = 2 / np.pi * np.arctan(0.55 / eta)
    assert np.trapezoid(vals, grid) == pytest.approx(covered, abs=1e-3)


def test_broaden_qpe_kernel_unit_period():
    k = 4
    kern = BroadKernel("qpe_sinc", k)
    x = np.linspace(-0.5, 0.5, 2 ** 15 + 1)
    assert simpson(kern.evaluate(x), x=x) == pytest.approx(1.0, abs=1e-6)
    assert kern.evaluate(0.0) == 2 ** k
    assert kern.evaluate(1.0) == 2 ** k


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

def test_moments_match_measure_sums():
    rng = np.random.default_rng(7)
    h, _ = random_normalized(rng, 24)
    psi = random_state(rng, 24)
    ms = moments(h, psi, 8)
    m = exact_spectral_measure(h, psi)
    for n in range(9):
        ref = oracles.measure_power_moment(m.energies, m.probs, n)
        assert ms.raw[n] == pytest.approx(ref, abs=1e-9)


def test_moments_eigenvector_degenerate():
    rng = np.random.default_rng(8)
    h, _ = random_normalized(rng, 6)
    evals, evecs = h.eigensystem()
    ms = moments(h, evecs[:, 0], 6)
    for n in range(7):
        assert ms.raw[n] == pytest.approx(evals[0] ** n, abs=1e-12)
    assert ms.sigma == 0.0
    assert ms.mu is None
    with pytest.raises(ValueError):
        gram_charlier(ms, 4)


def test_moments_standardization():
    rng = np.random.default_rng(9)
    h, _ = random_normalized(rng, 16)
    psi = random_state(rng, 16)
    ms = moments(h, psi, 8)
    assert ms.mu[1] == 0.0
    assert ms.mu[2] == 1.0
    assert ms.kappa[3] == pytest.approx(ms.mu[3], abs=1e-12)
    assert ms.kappa[4] == pytest.approx(ms.mu[4] - 3, abs=1e-12)
    m = exact_spectral_measure(h, psi)
    alt = moments_from_measure(m, 8)
    for n in range(9):
        assert alt.raw[n] == pytest.approx(ms.raw[n], abs=1e-9)


# ---------------------------------------------------------------------------
# Series coefficients
# ---------------------------------------------------------------------------

def test_hermite_coefficients():
    assert hermite_e_coefficients(0) == [1]
    assert hermite_e_coefficients(1) == [0, 1]
    assert hermite_e_coefficients(4) == [3, 0, -6, 0, 1]
    assert hermite_e_coefficients(6) == [-15, 0, 45, 0, -15, 0, 1]


def test_gram_charlier_coefficient_table():
    expected = {
        3: {3: Fraction(-1, 6)},
        4: {4: Fraction(1, 24), 0: Fraction(-3, 24)},
        5: {5: Fraction(-1, 120), 3: Fraction(10, 120)},
        6: {6: Fraction(1, 720), 4: Fraction(-15, 720), 0: Fraction(30, 720)},
        7: {7: Fraction(-1, 5040), 5: Fraction(21, 5040),
            3: Fraction(-105, 5040)},
        8: {8: Fraction(1, 40320), 6: Fraction(-28, 40320),
            4: Fraction(210, 40320), 0: Fraction(-315, 40320)},
    }
    for n, table_row in expected.items():
        assert gram_charlier_coefficient(n) == table_row


def test_gram_charlier_two_point_measure():
    # levels at +-1 with equal weight: mu4 = 1, so c4 = (1 - 3)/24 = -1/12
    ms = MomentSet.from_raw([1, 0, 1, 0, 1])
    series = gram_charlier(ms, 4)
    assert series.hermite_weights[4] == pytest.approx(-1 / 12, abs=1e-14)
    assert series.hermite_weights[3] == 0.0


def test_gram_charlier_against_quadrature():
    # standardized two-bump mixture; project onto He_6 by direct quadrature
    a, s = 0.8, 0.6

    def pdf(x):
        return 0.5 * (normal_dist.pdf(x, -a, s) + normal_dist.pdf(x, a, s))

    mu4 = a ** 4 + 6 * a ** 2 * s ** 2 + 3 * s ** 4
    mu6 = (a ** 6 + 15 * a ** 4 * s ** 2 + 45 * a ** 2 * s ** 4
           + 15 * s ** 6)
    ms = MomentSet.from_raw([1, 0, 1, 0, mu4, 0, mu6])
    series = gram_charlier(ms, 6)
    ref = oracles.hermite_projection_coefficient(pdf, 6, -9, 9)
    assert series.hermite_weights[6] == pytest.approx(ref, rel=1e-8)


def test_gram_charlier_gaussian_vanishes():
    ms = MomentSet.from_raw([1, 0, 1, 0, 3, 0, 15, 0, 105])
    series = gram_charlier(ms, 8)
    assert np.allclose(series.hermite_weights[3:], 0.0, atol=1e-12)


def test_gram_charlier_order_guard():
    raw = [1, 0, 1, 0, 3, 0, 15, 0, 105, 0, 945]
    ms = MomentSet.from_raw(raw)
    with pytest.raises(OrderUnsupported):
        gram_charlier(ms, 9)
    series = gram_charlier(ms, 10, generic=True)
    assert np.allclose(series.hermite_weights[3:], 0.0, atol=1e-10)
    with pytest.raises(ValueError):
        gram_charlier(MomentSet.from_raw([1, 0, 1, 0, 3]), 6)


def test_edgeworth_term_table():
    f = Fraction
    assert edgeworth_terms(1) == {3: {(3,): f(1, 6)}}
    assert edgeworth_terms(2) == {4: {(4,): f(1, 24)},
                                  6: {(3, 3): f(1, 72)}}
    assert edgeworth_terms(3) == {5: {(5,): f(1, 120)},
                                  7: {(3, 4): f(1, 144)},
                                  9: {(3, 3, 3): f(1, 1296)}}
    assert edgeworth_terms(4) == {6: {(6,): f(1, 720)},
                                  8: {(3, 5): f(1, 720),
                                      (4, 4): f(1, 1152)},
                                  10: {(3, 3, 4): f(1, 1728)},
                                  12: {(3, 3, 3, 3): f(1, 31104)}}
    assert edgeworth_terms(5) == {7: {(7,): f(1, 5040)},
                                  9: {(3, 6): f(1, 4320),
                                      (4, 5): f(1, 2880)},
                                  11: {(3, 3, 5): f(1, 8640),
                                       (3, 4, 4): f(1, 6912)},
                                  13: {(3, 3, 3, 4): f(1, 31104)},
                                  15: {(3, 3, 3, 3, 3): f(1, 933120)}}


def test_edgeworth_numeric_weights():
    rng = np.random.default_rng(11)
    h, _ = random_normalized(rng, 20)
    ms = moments(h, random_state(rng, 20), 8)
    series = edgeworth(ms, 2)
    assert series.hermite_weights[4] == pytest.approx(ms.kappa[4] / 24)
    assert series.hermite_weights[6] == pytest.approx(ms.kappa[3] ** 2 / 72)
    assert series.hermite_weights[5] == 0.0


def test_edgeworth_gaussian_is_gaussian():
    ms = MomentSet.from_raw([1, 0, 1, 0, 3, 0, 15, 0, 105])
    series = edgeworth(ms, 5, hermite_cap=8)
    grid = np.linspace(-4, 4, 101)
    assert np.allclose(series.standardized(grid), normal_dist.pdf(grid),
                       atol=1e-12)


def test_gc_edgeworth_matched_truncation():
    rng = np.random.default_rng(13)
    for _ in range(5):
        h, _ = random_normalized(rng, 14)
        ms = moments(h, random_state(rng, 14), 8)
        gc = gram_charlier(ms, 8)
        ew = edgeworth(ms, 6, hermite_cap=8)
        assert np.allclose(gc.hermite_weights, ew.hermite_weights,
                           atol=1e-12)
        grid = default_grid()
        assert np.allclose(gc(grid), ew(grid), atol=1e-12)


def test_series_density_unit_integral():
    rng = np.random.default_rng(15)
    h, _ = random_normalized(rng, 12)
    ms = moments(h, random_state(rng, 12), 8)
    series = gram_charlier(ms, 8)
    x = np.linspace(-12, 12, 20001)
    assert np.trapezoid(series.standardized(x), x) == pytest.approx(
        1.0, abs=1e-6)
    e = np.linspace(ms.mean - 12 * ms.sigma, ms.mean + 12 * ms.sigma, 20001)
    assert np.trapezoid(series(e), e) == pytest.approx(1.0, abs=1e-6)


# ---------------------------------------------------------------------------
# Resolvent
# ---------------------------------------------------------------------------

def test_resolvent_eigenvector_is_lorentzian():
    rng = np.random.default_rng(17)
    h, _ = random_normalized(rng, 8)
    evals, evecs = h.eigensystem()
    grid, vals = resolvent_distribution(h, evecs[:, 2], 0.05)
    expected = (0.05 / np.pi) / ((evals[2] - grid) ** 2 + 0.05 ** 2)
    assert np.allclose(vals, expected, atol=1e-10)


def test_resolvent_matches_broadened_measure():
    rng = np.random.default_rng(19)
    h, _ = random_normalized(rng, 16)
    psi = random_state(rng, 16)
    measure = exact_spectral_measure(h, psi)
    grid, direct = broaden(measure, BroadKernel("lorentzian", 0.05))
    for method in ("complex", "real"):
        _, vals = resolvent_distribution(h, psi, 0.05, grid, method=method)
        assert np.max(np.abs(vals - direct)) < 1e-8


def test_resolvent_failure_and_validation():
    h = DenseHamiltonian(np.diag([0.2, 0.8]))
    psi = np.array([1.0, 1.0]) / np.sqrt(2)
    with pytest.raises(SolverFailure):
        resolvent_distribution(h, psi, 0.0, np.array([0.2]))
    with pytest.raises(ValueError):
        resolvent_distribution(h, psi, -0.1)
    with pytest.raises(ValueError):
        resolvent_distribution(h, psi, 0.1, method="dmrg")


# ---------------------------------------------------------------------------
# QPE kernel and coarse sampling
# ---------------------------------------------------------------------------

def test_qpe_kernel_spike_and_wrap():
    probs = qpe_kernel_probs(5 / 16, 4)
    assert probs[5] == 1.0
    assert qpe_kernel_probs(1.0, 4)[0] == 1.0
    assert qpe_kernel_probs(-0.25, 2)[3] == 1.0


def test_qpe_kernel_one_digit_law():
    # k=1 collapses to [cos^2(pi E), sin^2(pi E)]
    for e in (0.13, 0.377, 0.81):
        probs = qpe_kernel_probs(e, 1)
        assert probs[0] == pytest.approx(np.cos(np.pi * e) ** 2, abs=1e-12)
        assert probs[1] == pytest.approx(np.sin(np.pi * e) ** 2, abs=1e-12)


def test_qpe_kernel_midbin_symmetry():
    probs = qpe_kernel_probs(7.5 / 16, 4)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    for j in range(8):
        assert probs[(7 - j) % 16] == pytest.approx(probs[(8 + j) % 16],
                                                    abs=1e-12)


def test_coarse_sample_deterministic_and_sharp():
    m = SpectralMeasure([(0.3127, 1.0)])
    a = coarse_qpe_sample(m, 8, 200, seed=5)
    b = coarse_qpe_sample(m, 8, 200, seed=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, coarse_qpe_sample(m, 8, 200, seed=6))
    close = np.abs(a - 0.3127) <= 2 * 2 ** -8
    assert close.mean() > 0.9
    assert np.all(a > -2 ** -8) and np.all(a < 1.0)


def test_coarse_sample_mean_tracks_measure():
    m = SpectralMeasure([(0.35, 0.5), (0.55, 0.3), (0.6, 0.2)])
    samples = coarse_qpe_sample(m, 6, 4000, seed=11)
    sem = np.std(samples) / np.sqrt(len(samples))
    assert abs(np.mean(samples) - m.mean()) < 3 * sem + 1e-3


# ---------------------------------------------------------------------------
# KDE and discretization
# ---------------------------------------------------------------------------

def test_kde_single_sample_gaussian():
    grid, vals = kde([0.4], bandwidth=0.05)
    assert np.allclose(vals, normal_dist.pdf(grid, 0.4, 0.05), atol=1e-12)
    assert np.trapezoid(vals, grid) == pytest.approx(1.0, abs=1e-6)


def test_kde_default_bandwidth_rule():
    rng = np.random.default_rng(23)
    samples = rng.normal(0.5, 0.1, size=400)
    h = np.std(samples) * 400 ** (-1 / 5)
    grid, auto = kde(samples)
    _, manual = kde(samples, bandwidth=h)
    assert np.allclose(auto, manual)


def test_kde_matches_direct_sum():
    rng = np.random.default_rng(29)
    samples = rng.normal(0.5, 0.08, size=5000)
    grid = np.linspace(0.2, 0.8, 41)
    _, vals = kde(samples, bandwidth=0.03, grid=grid)
    direct = np.zeros_like(grid)
    for i, g in enumerate(grid):
        z = (g - samples) / 0.03
        direct[i] = np.exp(-0.5 * z ** 2).sum() \
            / (len(samples) * 0.03 * np.sqrt(2 * np.pi))
    assert np.allclose(vals, direct, atol=1e-12)


def test_kde_validation():
    with pytest.raises(ValueError):
        kde([])
    with pytest.raises(ValueError):
        kde([0.5, 0.5, 0.5])
    with pytest.raises(ValueError):
        kde([0.1, 0.2], bandwidth=0.0)


def test_kde_mise_slope():
    rng = np.random.default_rng(31)
    grid = np.linspace(0.0, 1.0, 401)
    target = normal_dist.pdf(grid, 0.5, 0.1)
    sizes = [100, 1000, 10000]
    mises = []
    for m in sizes:
        errs = []
        for _ in range(6):
            samples = rng.normal(0.5, 0.1, size=m)
            _, est = kde(samples, grid=grid)
            errs.append(np.trapezoid((est - target) ** 2, grid))
        mises.append(np.mean(errs))
    slope = np.polyfit(np.log(sizes), np.log(mises), 1)[0]
    assert -1.1 < slope < -0.5


def test_discretize_density():
    m = SpectralMeasure([(0.5, 1.0)])
    grid, vals = broaden(m, BroadKernel("gaussian", 0.03))
    binned = discretize_density(grid, vals, n_levels=2048)
    assert len(binned.levels) == 2048
    assert binned.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert binned.mean() == pytest.approx(0.5, abs=1e-4)
    assert abs(math.sqrt(binned.variance()) - 0.03) < 1e-4
    with pytest.raises(ValueError):
        discretize_density(grid, np.zeros_like(vals))
