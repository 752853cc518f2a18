import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from chaoscope.radial import (RadialTable, ball_volume, characteristic_transform, inverse_spectral,
                              sphere_area, sphere_average, spectral_transform)


def test_sphere_area_and_volume():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * np.pi)
    assert sphere_area(3) == pytest.approx(4 * np.pi)
    assert ball_volume(2) == pytest.approx(np.pi)
    assert ball_volume(3) == pytest.approx(4 * np.pi / 3)


@pytest.mark.parametrize("d, exact", [
    (1, np.cos),
    (2, special.j0),
    (3, lambda z: np.sinc(z / np.pi)),
])
def test_sphere_average_closed_forms(d, exact):
    z = np.linspace(0.0, 30.0, 601)
    np.testing.assert_allclose(sphere_average(z, d), exact(z), atol=1e-13)


@given(st.floats(0.0, 50.0), st.integers(1, 5))
def test_sphere_average_bounded(z, d):
    val = sphere_average(np.array([z]), d)[0]
    assert abs(val) <= 1.0 + 1e-12


@pytest.mark.parametrize("d", [1, 2, 3])
def test_characteristic_transform_of_gaussian(d):
    # exp(-r^2/2) has transform (2 pi)^{d/2} exp(-s^2/2); truncation at r=12 is negligible
    s = np.array([0.0, 0.5, 1.0, 2.0, 4.0])
    got = characteristic_transform(lambda r: np.exp(-r ** 2 / 2), 12.0, s, d)
    np.testing.assert_allclose(got, (2 * np.pi) ** (d / 2) * np.exp(-s ** 2 / 2), atol=1e-11)


def test_spectral_round_trip_gaussian():
    d = 2
    r = np.array([0.0, 0.3, 1.0, 2.5])
    dens = lambda s: spectral_transform(lambda x: np.exp(-x ** 2 / 2), 12.0, s, d)
    back = inverse_spectral(dens, 12.0, r, d, n=400)
    np.testing.assert_allclose(back, np.exp(-r ** 2 / 2), atol=1e-9)


def test_radial_table_meets_tolerance():
    tab = RadialTable(lambda r: np.cos(3 * r) * np.exp(-r), 4.0, tol=1e-10)
    r = np.linspace(0.0, 4.0, 3001)
    assert np.max(np.abs(tab(r) - np.cos(3 * r) * np.exp(-r))) < 5e-10
    assert tab(np.array([5.0]))[0] == 0.0
    assert tab.midpoint_error < 1e-10


def test_radial_table_gives_up():
    with pytest.raises(RuntimeError):
        RadialTable(lambda r: np.sign(r - 0.5), 1.0, tol=1e-12, max_doublings=3)
