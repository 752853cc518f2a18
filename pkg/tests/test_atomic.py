import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from chaoscope import rng
from chaoscope.atomic import (GridIntensity, LebesgueIntensity, _AliasTable, alpha_of,
                              beta_constant, compensator_mass, exact_total_masses,
                              fractional_moment_closed_form, kanter_stable, laplace_closed_form,
                              load_atoms, mean_atom_count, negative_moment_closed_form,
                              sample_atomic, sample_total_masses, save_atoms,
                              truncation_bias_bound)
from chaoscope.fields import GridSpec
from chaoscope.gmc import GridMeasure

ONE = lambda x: np.ones(len(x))


def _beta_oracle(d, gamma):
    a = mp.sqrt(2 * d) / gamma
    return float(mp.gamma(1 - a) / a)


@pytest.mark.parametrize("d,gamma", [(2, 3.0), (2, 4.0), (1, 2.0), (3, 3.5), (2, 2 * np.sqrt(2) + 1e-3)])
def test_beta_against_mpmath(d, gamma):
    assert beta_constant(d, gamma) == pytest.approx(_beta_oracle(d, gamma), rel=1e-10)


def test_beta_examples():
    assert beta_constant(2, 3.0) == pytest.approx(1.5 * float(mp.gamma(mp.mpf(1) / 3)), rel=1e-12)
    assert beta_constant(2, 3.0) == pytest.approx(4.0184, abs=1e-4)
    # alpha = 1/2 needs gamma = 4 when d = 2
    assert beta_constant(2, 4.0) == pytest.approx(2 * np.sqrt(np.pi), rel=1e-12)
    # growth like 1/alpha as gamma grows
    assert beta_constant(2, 1e4) * alpha_of(2, 1e4) == pytest.approx(1.0, rel=1e-3)
    with pytest.raises(ValueError):
        beta_constant(2, 2.0)


def test_counts_and_compensator():
    a = alpha_of(2, 3.0)
    assert mean_atom_count(1.0, a, 0.01) == pytest.approx(32.317, abs=1e-3)
    assert compensator_mass(1.0, a, 0.01) == pytest.approx(0.64633, abs=1e-5)
    z = 0.01
    assert integrate.quad(lambda u: u ** (-1 - a), z, np.inf)[0] == pytest.approx(
        mean_atom_count(1.0, a, z), rel=1e-8)
    assert integrate.quad(lambda u: u ** (-a), 0, z)[0] == pytest.approx(
        compensator_mass(1.0, a, z), rel=1e-8)


def test_sample_atomic_invariants():
    nu = LebesgueIntensity([0, 0], [1, 1])
    atoms = sample_atomic(nu, 3.0, 0.01, compensate=True, rng_seed=5)
    assert np.all(atoms.masses >= 0.01)
    assert np.all((atoms.locations >= 0) & (atoms.locations <= 1))
    assert atoms.compensator == pytest.approx(0.64633, abs=1e-5)
    assert sample_atomic(nu, 3.0, 0.01).compensator == 0.0
    with pytest.raises(ValueError):
        sample_atomic(nu, 3.0, 0.0)
    with pytest.raises(ValueError):
        sample_atomic(nu, 1.5, 0.01)


def test_zero_intensity_gives_empty_measure():
    g = GridSpec(2, 8, 1.0)
    nu = GridIntensity(GridMeasure(g, np.zeros(g.shape)))
    atoms = sample_atomic(nu, 3.0, 0.01, compensate=True)
    assert atoms.n_atoms == 0 and atoms.compensator == 0.0
    assert atoms.total_mass == 0.0


def test_atom_count_and_pareto_tail():
    nu = LebesgueIntensity([0, 0], [1, 1])
    counts, masses = [], []
    for r in range(400):
        at = sample_atomic(nu, 3.0, 0.01, rng_seed=1, keys=(r,))
        counts.append(at.n_atoms)
        masses.append(at.masses)
    counts, masses = np.array(counts), np.concatenate(masses)
    lam = 32.317
    assert abs(counts.mean() - lam) <= 3 * np.sqrt(lam / counts.size)
    p = np.mean(masses > 0.1)
    p0 = 10.0 ** (-2.0 / 3.0)
    assert abs(p - p0) <= 3 * np.sqrt(p0 * (1 - p0) / masses.size)


def test_laplace_closed_form_examples():
    nu = LebesgueIntensity([0, 0], [1, 1])
    assert laplace_closed_form(nu, ONE, 3.0) == pytest.approx(np.exp(-4.0184), abs=1e-5)
    assert laplace_closed_form(nu, ONE, 3.0) == pytest.approx(0.01797, abs=2e-5)
    assert laplace_closed_form(nu, lambda x: np.zeros(len(x)), 3.0) == 1.0
    with pytest.raises(ValueError):
        laplace_closed_form(nu, lambda x: -ONE(x), 3.0)


@given(st.floats(0.05, 20.0), st.floats(2.1, 8.0))
def test_laplace_homogeneity(lam, gamma):
    nu = LebesgueIntensity([0, 0], [1, 1])
    phi = lambda x: 1.0 + x[:, 0] * x[:, 1]
    base = -np.log(laplace_closed_form(nu, phi, gamma))
    scaled = -np.log(laplace_closed_form(nu, lambda x: lam * phi(x), gamma))
    assert scaled == pytest.approx(lam ** alpha_of(2, gamma) * base, rel=1e-10)


def test_fractional_moment_against_quadrature():
    d, gamma, q = 2, 3.0, 1.0 / 3.0
    a, b = alpha_of(d, gamma), beta_constant(d, gamma)
    # x^q = -1/Gamma(-q) int (1 - e^{-zx}) z^{-1-q} dz with E e^{-zM} = e^{-b z^a}
    f = lambda z: -np.expm1(-b * z ** a) * z ** (-1 - q)
    val = (integrate.quad(f, 0, 1, limit=200)[0] + integrate.quad(f, 1, np.inf, limit=200)[0])
    oracle = -val / float(mp.gamma(-q))
    assert fractional_moment_closed_form(1.0, q, gamma, d) == pytest.approx(oracle, rel=1e-8)
    assert oracle == pytest.approx(2.624, abs=1e-3)


def test_fractional_moment_domain_and_limit():
    a = alpha_of(2, 3.0)
    with pytest.raises(ValueError):
        fractional_moment_closed_form(1.0, a, 3.0, 2)
    with pytest.raises(ValueError):
        fractional_moment_closed_form(1.0, 0.0, 3.0, 2)
    assert fractional_moment_closed_form(1.0, 1e-8, 3.0, 2) == pytest.approx(1.0, abs=1e-6)


def test_negative_moment_against_quadrature():
    d, gamma = 2, 3.0
    b = beta_constant(d, gamma)
    a = alpha_of(d, gamma)
    for q in (2.0 / 3.0, 0.3, 1.5):
        f = lambda z: np.exp(-b * z ** a) * z ** (q - 1)
        oracle = integrate.quad(f, 0, np.inf, limit=200)[0] / float(mp.gamma(q))
        assert negative_moment_closed_form(1.0, q, gamma, d) == pytest.approx(oracle, rel=1e-8)
    assert negative_moment_closed_form(1.0, 2.0 / 3.0, 3.0, 2) == pytest.approx(0.2756, abs=1e-4)
    assert negative_moment_closed_form(1e6, 0.5, 3.0, 2) < negative_moment_closed_form(1.0, 0.5, 3.0, 2)
    with pytest.raises(ValueError):
        negative_moment_closed_form(1.0, 0.0, 3.0, 2)


def test_kanter_sampler_laplace():
    a = 2.0 / 3.0
    s = kanter_stable(a, 200_000, rng.stream(0, 7))
    for lam in (0.5, 1.0, 2.0):
        v = np.exp(-lam * s)
        assert abs(v.mean() - np.exp(-lam ** a)) <= 3 * v.std() / np.sqrt(v.size)


def test_truncated_sampler_agrees_with_exact_reference():
    x = sample_total_masses(1.0, 2, 3.0, 1e-4, 20_000, 2) ** (1 / 3)
    y = exact_total_masses(1.0, 2, 3.0, 20_000, 3) ** (1 / 3)
    se = np.hypot(x.std(), y.std()) / np.sqrt(x.size)
    assert abs(x.mean() - y.mean()) <= 3 * se


def test_truncation_bias_bounds():
    a = 2.0 / 3.0
    assert truncation_bias_bound(1.0, a, 1e-4) == pytest.approx(1e-4 ** (1 / 3) * 3)
    comp = truncation_bias_bound(1.0, a, 1e-4, compensate=True)
    assert 0 < comp < truncation_bias_bound(1.0, a, 1e-4)


def test_sample_total_masses_reproducible_and_chunk_invariant():
    a = sample_total_masses(1.0, 2, 3.0, 1e-2, 5000, 4)
    b = sample_total_masses(1.0, 2, 3.0, 1e-2, 5000, 4)
    assert np.array_equal(a, b)
    assert np.all(a > 0)


def test_alias_table_distribution():
    p = np.array([0.5, 0.0, 0.2, 0.3])
    draws = _AliasTable(p).draw(100_000, rng.stream(1, 2))
    freq = np.bincount(draws, minlength=4) / draws.size
    assert freq[1] == 0.0
    assert np.all(np.abs(freq - p) <= 4 * np.sqrt(p * (1 - p) / draws.size) + 1e-12)


def test_grid_intensity_locations_follow_weights():
    g = GridSpec(1, 8, 1.0)
    w = np.zeros(8)
    w[2] = 3.0
    w[5] = 1.0
    nu = GridIntensity(GridMeasure(g, w))
    x = nu.sample_locations(20_000, rng.stream(0, 3))[:, 0]
    assert np.all(((x >= 2 / 8) & (x < 3 / 8)) | ((x >= 5 / 8) & (x < 6 / 8)))
    assert abs(np.mean(x < 0.5) - 0.75) < 0.02
    assert nu.describe()["resolution"] == 1 / 8


def test_density_intensity_and_tilt():
    nu = LebesgueIntensity([0], [1])
    tilted = nu.scaled(lambda x: (1 + x[:, 0]) ** 2)
    assert tilted.mass == pytest.approx(7.0 / 3.0)
    x = tilted.sample_locations(50_000, rng.stream(0, 4))[:, 0]
    assert abs(x.mean() - 17 / 28) < 0.01  # int x(1+x)^2 / (7/3)


def test_integrate_includes_compensator():
    nu = LebesgueIntensity([0, 0], [1, 1])
    at = sample_atomic(nu, 3.0, 0.01, compensate=True, rng_seed=0)
    phi = lambda x: x[:, 0]
    expect = np.sum(at.masses * at.locations[:, 0]) + at.compensator * 0.5
    assert at.integrate(phi) == pytest.approx(expect)


def test_atoms_round_trip(tmp_path):
    nu = LebesgueIntensity([0, 0], [1, 1])
    at = sample_atomic(nu, 3.0, 0.01, compensate=True, rng_seed=9)
    save_atoms(tmp_path / "a.csv", at)
    back = load_atoms(tmp_path / "a.csv")
    np.testing.assert_array_equal(back.masses, at.masses)
    np.testing.assert_array_equal(back.locations, at.locations)
    assert back.meta["alpha"] == pytest.approx(2 / 3)
