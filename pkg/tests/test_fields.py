import numpy as np
import pytest
from scipy import integrate, special
from scipy import stats as sstats

from chaoscope.fields import (DecompositionSampler, GridField, GridSpec, LayerCache,
                              NegativeDensityError, eps_grid, lattice_amplitude,
                              lattice_covariance, load_field, sample_decomposed_conv,
                              sample_martingale_path, sample_stationary, save_field)
from chaoscope.spectral import SpectralDensity, spectrum_Kt, variance_Z
from chaoscope.stats import martingale_covariance


def test_gridspec_validation():
    g = GridSpec(2, 64, 2.0)
    assert g.cell_volume == pytest.approx((2.0 / 64) ** 2)
    assert g.origin == (0.0, 0.0)
    for bad in [(2, 100, 1.0), (1, 4, 1.0), (1, 64, 0.0)]:
        with pytest.raises(ValueError):
            GridSpec(*bad)


def test_zero_density_gives_zero_field():
    g = GridSpec(2, 16, 1.0)
    zero = SpectralDensity(2, lambda s: np.zeros_like(s), "zero", 0.0)
    f = sample_stationary(g, zero, 0)
    assert np.all(f.values == 0.0)
    assert f.variance == 0.0


def test_negative_density_aborts():
    g = GridSpec(1, 64, 8.0)
    neg = SpectralDensity(1, lambda s: np.where(s > 2, -1e-3, 1.0), "bad", 1.0)
    with pytest.raises(NegativeDensityError):
        sample_stationary(g, neg, 0)


def test_lattice_covariance_is_riemann_sum(ball1):
    g = GridSpec(1, 4096, 64.0)
    cov = lattice_covariance(g, lattice_amplitude(g, spectrum_Kt(ball1, 1.0)))
    assert cov[0] == pytest.approx(1.0, abs=2e-4)
    h = 2.0
    assert cov[int(h / g.spacing)] == pytest.approx(martingale_covariance(ball1, h, 1.0), abs=2e-4)


def test_periodisation_bias_is_below_mc_error(ball1):
    # doubling L at fixed spacing barely moves the lattice covariance
    dens = spectrum_Kt(ball1, 1.0)
    gaps = []
    for n, L in ((2048, 32.0), (4096, 64.0)):
        g = GridSpec(1, n, L)
        cov = lattice_covariance(g, lattice_amplitude(g, dens))
        lags = [0.5, 1.0, 2.0, 4.0]
        gaps.append(max(abs(cov[int(h / g.spacing)] - martingale_covariance(ball1, h, 1.0))
                        for h in lags))
    mc_se = np.sqrt(2.0 / 2000)
    assert abs(gaps[0] - gaps[1]) < mc_se


def test_stationary_ensemble_variance_and_gaussianity(ball1):
    g = GridSpec(1, 1024, 32.0)
    dens = spectrum_Kt(ball1, 1.0)
    amp = lattice_amplitude(g, dens)
    x = np.array([sample_stationary(g, dens, 3, (1, r), amplitude=amp).values[::128]
                  for r in range(2000)])
    pt = x[:, 0]
    se = pt.var() * np.sqrt(2.0 / pt.size)
    assert abs(pt.var() - 1.0) <= 3 * se + 1e-3
    n = pt.size
    assert abs(sstats.skew(pt)) <= 4 * np.sqrt(6.0 / n)
    assert abs(sstats.kurtosis(pt)) <= 4 * np.sqrt(24.0 / n)


def test_replica_streams_are_reproducible(ball2):
    g = GridSpec(2, 32, 4.0)
    dens = spectrum_Kt(ball2, 1.0)
    a = sample_stationary(g, dens, 11, (1, 5)).values
    b = sample_stationary(g, dens, 11, (1, 5)).values
    c = sample_stationary(g, dens, 11, (1, 6)).values
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_martingale_nodes(ball1):
    g = GridSpec(1, 256, 16.0)
    path = sample_martingale_path(ball1, g, [1.0, 1.0], 0)
    assert np.array_equal(path[0].values, path[1].values)
    with pytest.raises(ValueError):
        sample_martingale_path(ball1, g, [2.0, 1.0], 0)
    with pytest.raises(ValueError):
        sample_martingale_path(ball1, g, [-1.0], 0)


def test_martingale_prefix_independent_of_later_nodes(ball1):
    g = GridSpec(1, 256, 16.0)
    short = sample_martingale_path(ball1, g, [0.5, 1.0], 4)
    long = sample_martingale_path(ball1, g, [0.5, 1.0, 3.0], 4)
    assert np.array_equal(short[1].values, long[1].values)
    assert long[2].meta["layers"] == 3


def test_martingale_cross_covariance_and_increments(ball1):
    g = GridSpec(1, 1024, 32.0)
    cache = LayerCache(ball1, g)
    s, t, h = 0.5, 1.5, 1.0
    i = int(h / g.spacing)
    cross, incr = [], []
    for r in range(2000):
        xs, xt = sample_martingale_path(ball1, g, [s, t], 2, (1, r), cache)
        cross.append(np.mean(xs.values * np.roll(xt.values, -i)))
        incr.append(np.mean((xt.values - xs.values) * np.tanh(xs.values)))
    cross, incr = np.array(cross), np.array(incr)
    target = martingale_covariance(ball1, h, s)
    assert abs(cross.mean() - target) <= 3 * cross.std(ddof=1) / np.sqrt(cross.size) + 1e-3
    assert abs(incr.mean()) <= 3 * incr.std(ddof=1) / np.sqrt(incr.size)


def _log_kernel(x):
    # int_0^inf sin(e^r x)/(e^r x) dr = sin x / x - Ci(x)
    x = abs(x)
    return np.sin(x) / x - special.sici(x)[1]


def test_decomposition_eps_to_t(ball1, moll1, cert1):
    g = GridSpec(1, 64, 8.0)
    smp = DecompositionSampler(ball1, moll1, cert1, cert1.a_const * np.exp(-1), g)
    assert smp.t == pytest.approx(1.0)
    with pytest.raises(ValueError):
        DecompositionSampler(ball1, moll1, cert1, cert1.a_const, g)
    assert eps_grid(0.5, 3) == [0.25, 0.125, 0.0625]


def test_decomposed_sum_matches_convolution_quadrature(ball1, moll1, cert1):
    eps = cert1.a_const * np.exp(-1)
    g = GridSpec(1, 2048, 64.0)
    smp = DecompositionSampler(ball1, moll1, cert1, eps, g)
    rho = moll1.scaled_profile(eps)
    r1 = lambda u: rho(np.array([u]))[0]
    lags = [0.5, 1.0, 2.0, 3.0]
    idx = [int(round(h / g.spacing)) for h in lags]
    acc = {h: [] for h in lags}
    cross = {"XW": [], "XZ": [], "WZ": []}
    for r in range(2000):
        parts = smp(0, (1, r))
        v = parts["sum"].values
        for h, i in zip(lags, idx):
            acc[h].append(np.mean(v * np.roll(v, -i)))
        x, w, z = (parts[k].values for k in ("X_t", "W_t", "Z_t"))
        cross["XW"].append(np.mean(x * w))
        cross["XZ"].append(np.mean(x * z))
        cross["WZ"].append(np.mean(w * z))
    for h in lags:
        oracle = integrate.dblquad(lambda v, u: r1(u) * r1(v) * _log_kernel(h + u - v),
                                   -eps, eps, -eps, eps, epsabs=1e-10)[0]
        vals = np.array(acc[h])
        assert abs(vals.mean() - oracle) <= 3 * vals.std(ddof=1) / np.sqrt(vals.size) + 1e-3, h
    for name, vals in cross.items():
        vals = np.array(vals)
        assert abs(vals.mean()) <= 3 * vals.std(ddof=1) / np.sqrt(vals.size), name


def test_Z_variance_vanishes_with_eps(ball1, moll1, cert1):
    a = cert1.a_const
    g = GridSpec(1, 1024, 32.0)
    out = {}
    for eps in (a * 1e-1, a * 1e-3):
        smp = DecompositionSampler(ball1, moll1, cert1, eps, g)
        z = np.array([smp(1, (1, r))["Z_t"].values[::64] for r in range(300)])
        out[eps] = z.var()
    assert out[a * 1e-3] < out[a * 1e-1]
    assert variance_Z(ball1, moll1, a, np.log(1e3), n=4000) < variance_Z(ball1, moll1, a, np.log(10), n=4000)


def test_snapshot_round_trip(tmp_path, ball2):
    g = GridSpec(2, 16, 1.0)
    (f,) = sample_martingale_path(ball2, g, [1.0], 3)
    path = tmp_path / "f.bin"
    save_field(path, f)
    back = load_field(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
    assert back.meta["kind"] == "martingale_t"
    with open(path, "rb") as fh:
        fh.readline()
        assert len(fh.read()) == 16 * 16 * 8
