"""Radial Fourier machinery shared by the kernel and spectral modules.

Two transforms appear throughout the package:

* the *characteristic* transform ``f^(w) = int f(x) exp(-i w.x) dx`` used for
  mollifiers and bumps (so a unit-mass profile has ``f^(0) = 1``);
* the *spectral-density* convention ``C(x) = int C^(w) exp(i w.x) dw`` used for
  covariances, with the forward map ``C^(w) = (2 pi)^-d int C(x) exp(-i w.x) dx``.

For radial functions both reduce to one-dimensional integrals against the
sphere average ``Lambda_d(z)`` of ``exp(i z theta_1)``.
"""

from functools import lru_cache

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline


def sphere_area(d):
    """(d-1)-dimensional measure of the unit sphere in R^d."""
    return 2.0 * np.pi ** (d / 2.0) / special.gamma(d / 2.0)


def ball_volume(d):
    return np.pi ** (d / 2.0) / special.gamma(d / 2.0 + 1.0)


_SERIES_CUTOFF = 2.0


def sphere_average(z, d):
    """Average of ``exp(i z theta_1)`` over the unit sphere of R^d.

    Equals ``Gamma(d/2) (z/2)^(1-d/2) J_{d/2-1}(z)``; ``cos z`` for d=1 and
    ``J_0(z)`` for d=2. A power series is used for small ``|z|``.
    """
    z = np.abs(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    small = z < _SERIES_CUTOFF
    if np.any(small):
        zs = z[small]
        x = -(zs / 2.0) ** 2
        nu1 = d / 2.0
        term = np.ones_like(zs)
        total = np.ones_like(zs)
        for j in range(1, 30):
            term = term * x / (j * (j - 1 + nu1))
            total = total + term
        out[small] = total
    big = ~small
    if np.any(big):
        zb = z[big]
        if d == 1:
            out[big] = np.cos(zb)
        elif d == 3:
            out[big] = np.sin(zb) / zb
        else:
            nu = d / 2.0 - 1.0
            out[big] = special.gamma(d / 2.0) * (2.0 / zb) ** nu * special.jv(nu, zb)
    return out


@lru_cache(maxsize=64)
def gauss_legendre(n, a, b):
    x, w = special.roots_legendre(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def _node_count(s_max, r_max, base=96):
    # about 6 nodes per oscillation of Lambda(s r) on [0, r_max]
    return int(base + 6 * s_max * r_max / (2 * np.pi) + 0.5)


def radial_integral(values, nodes, weights, s, d, chunk=256):
    """``|S^{d-1}| int_0^R f(r) r^{d-1} Lambda_d(s r) dr`` for each ``s``.

    ``values`` holds ``f`` at the quadrature ``nodes`` on ``[0, R]``.
    This is the characteristic transform of the radial function ``f``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    base = values * weights * nodes ** (d - 1)
    out = np.empty(s.shape, dtype=float)
    flat = s.ravel()
    res = out.ravel()
    for i in range(0, flat.size, chunk):
        block = flat[i:i + chunk]
        res[i:i + chunk] = sphere_average(np.outer(block, nodes), d) @ base
    return sphere_area(d) * out


def characteristic_transform(profile, r_max, s, d, n=None):
    """Characteristic transform of a radial profile supported in ``[0, r_max]``."""
    s = np.asarray(s, dtype=float)
    if n is None:
        n = _node_count(float(np.max(np.abs(s), initial=0.0)), r_max)
    nodes, weights = gauss_legendre(n, 0.0, float(r_max))
    return radial_integral(profile(nodes), nodes, weights, s, d)


def spectral_transform(profile, r_max, s, d, n=None):
    """Spectral density ``(2 pi)^-d int C(x) e^{-i w.x} dx`` of a radial ``C``."""
    return characteristic_transform(profile, r_max, s, d, n) / (2 * np.pi) ** d


def inverse_spectral(density, s_max, r, d, n=None):
    """``C(r) = int C^(w) e^{i w.x} dw`` for a density supported in ``[0, s_max]``."""
    r = np.asarray(r, dtype=float)
    if n is None:
        n = _node_count(float(np.max(np.abs(r), initial=0.0)), s_max)
    nodes, weights = gauss_legendre(n, 0.0, float(s_max))
    return radial_integral(density(nodes), nodes, weights, r, d)


class RadialTable:
    """Cubic-spline tabulation of an expensive radial function on ``[0, r_max]``.

    The node spacing halves until the spline reproduces ``fn`` at every
    midpoint to within ``tol``. Outside ``[0, r_max]`` the table returns
    ``outside``.

    Parameters
    ----------
    fn : callable
        Vectorised ``r -> f(r)``.
    r_max : float
    tol : float
        Absolute midpoint interpolation tolerance.
    n0 : int
        Initial number of intervals.
    max_doublings : int
    outside : float
    """

    def __init__(self, fn, r_max, tol=1e-10, n0=64, max_doublings=12, outside=0.0):
        self.r_max = float(r_max)
        self.outside = outside
        n = n0
        nodes = np.linspace(0.0, self.r_max, n + 1)
        vals = fn(nodes)
        for _ in range(max_doublings + 1):
            spline = CubicSpline(nodes, vals)
            mids = 0.5 * (nodes[1:] + nodes[:-1])
            fmid = fn(mids)
            err = float(np.max(np.abs(spline(mids) - fmid)))
            if err < tol:
                break
            new_nodes = np.empty(2 * n + 1)
            new_vals = np.empty(2 * n + 1)
            new_nodes[0::2], new_nodes[1::2] = nodes, mids
            new_vals[0::2], new_vals[1::2] = vals, fmid
            nodes, vals, n = new_nodes, new_vals, 2 * n
        else:
            raise RuntimeError(
                f"radial table did not reach tol={tol:g} (last midpoint error {err:.3g})")
        self.nodes = nodes
        self.values = vals
        self.midpoint_error = err
        self._spline = spline

    @property
    def resolution(self):
        return self.r_max / (self.nodes.size - 1)

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        out = np.full(r.shape, self.outside, dtype=float)
        inside = r <= self.r_max
        out[inside] = self._spline(r[inside])
        return out
