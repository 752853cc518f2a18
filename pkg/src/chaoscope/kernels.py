"""Seed covariance kernels, mollifiers and truncated kernels.

Conventions: a seed kernel's ``radial_hat_eval`` is a spectral density,
``K(x) = int K^(w) exp(i w.x) dw``, while a mollifier's ``hat_eval`` is the
characteristic transform ``rho^(w) = int rho(x) exp(-i w.x) dx`` so that
``rho^(0) = 1``. With these two conventions the spectral density of
``rho * C`` is ``rho^ . C^`` with no stray powers of ``2 pi``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from math import factorial
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from . import radial
from .radial import RadialTable, ball_volume, sphere_area, sphere_average


@dataclass(frozen=True)
class SeedKernel:
    """Radial seed covariance together with its spectral density.

    ``radial_eval`` maps ``|x|`` to the covariance and ``radial_hat_eval``
    maps ``|w|`` to the spectral density. ``trihat_eval``, when provided, is
    a closed form for the mass of the spectral density inside the ball of
    radius ``|w|``; otherwise it is computed by quadrature.
    """

    dimension: int
    radial_eval: Callable
    radial_hat_eval: Callable
    hat_support_radius: float
    decay_constants: tuple
    trihat_bounds: Optional[tuple]
    k3_compliant: bool
    name: str = "kernel"
    trihat_eval: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def __call__(self, r):
        return self.radial_eval(np.asarray(r, dtype=float))

    def hat(self, s):
        return self.radial_hat_eval(np.asarray(s, dtype=float))


@dataclass(frozen=True)
class Mollifier:
    """Compactly supported, unit-mass radial mollifier.

    ``hat_eval`` is the characteristic transform as a function of ``|w|``;
    ``one_minus_hat_sq`` evaluates ``1 - |rho^|^2`` without cancellation near
    the origin, which the decomposition scans rely on.
    """

    dimension: int
    profile_eval: Callable
    hat_eval: Callable
    support_radius: float
    one_minus_hat_sq: Callable
    order: int = 1
    name: str = "mollifier"
    params: dict = field(default_factory=dict)

    def __call__(self, r):
        return self.profile_eval(np.asarray(r, dtype=float))

    def hat(self, s):
        return self.hat_eval(np.asarray(s, dtype=float))

    def hat_vector(self, omega):
        """``rho^`` at frequency vectors (last axis of length d)."""
        omega = np.asarray(omega, dtype=float)
        return self.hat_eval(np.linalg.norm(omega, axis=-1))

    def scaled_profile(self, eps):
        """Profile of ``rho_eps(x) = eps^-d rho(x / eps)``."""
        d = self.dimension
        return lambda r: eps ** (-d) * self.profile_eval(np.asarray(r, dtype=float) / eps)


@dataclass
class Check:
    name: str
    passed: bool
    margin: float
    detail: str = ""
    vacuous: bool = False

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.margin = float(self.margin)


@dataclass
class ValidationReport:
    subject: str
    checks: list
    resolution: dict

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self):
        return [c for c in self.checks if not c.passed]


# --------------------------------------------------------------------------
# ball kernel


def ball_seed_kernel(d):
    """Seed kernel whose spectral density is the normalised indicator of B(0,1).

    ``K(r) = Gamma(d/2+1) (2/r)^{d/2} J_{d/2}(r)``, i.e. ``sin(r)/r`` for
    ``d = 1`` and ``2 J_1(r)/r`` for ``d = 2``.
    """
    d = int(d)
    if d < 1:
        raise ValueError("dimension must be >= 1")
    vol = ball_volume(d)

    def k(r):
        # the covariance is the sphere average in dimension d+2
        return sphere_average(r, d + 2)

    def khat(s):
        s = np.abs(np.asarray(s, dtype=float))
        return np.where(s <= 1.0, 1.0 / vol, 0.0)

    def trihat(s):
        s = np.abs(np.asarray(s, dtype=float))
        return np.minimum(s, 1.0) ** d

    # |K(x)| <= C (1+|x|)^{-(d+1)/2}; C from a dense scan plus 25% slack
    rr = np.linspace(0.0, 400.0, 400_001)
    decay = (d + 1) / 2.0
    C = 1.25 * float(np.max(np.abs(k(rr)) * (1.0 + rr) ** decay))
    return SeedKernel(
        dimension=d,
        radial_eval=k,
        radial_hat_eval=khat,
        hat_support_radius=1.0,
        decay_constants=(C, decay),
        trihat_bounds=(0.5, 2.0),
        k3_compliant=True,
        name=f"ball_d{d}",
        trihat_eval=trihat,
        params={"kind": "ball", "d": d},
    )


# --------------------------------------------------------------------------
# mollifiers


def _bump(r):
    r = np.abs(np.asarray(r, dtype=float))
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def _radial_moment(profile, d, power, r_max=1.0):
    val, _ = integrate.quad(lambda r: profile(np.array([r]))[0] * r ** (power + d - 1),
                            0.0, r_max, epsabs=0.0, epsrel=1e-13, limit=200)
    return sphere_area(d) * val


@lru_cache(maxsize=16)
def _bump_moments(d, n_terms):
    """Radial moments ``int |x|^{2j} psi(x) dx`` of the unit-mass bump."""
    mass = _radial_moment(_bump, d, 0)
    return np.array([_radial_moment(_bump, d, 2 * j) / mass for j in range(n_terms)]), mass


_N_SERIES = 40
_SERIES_RADIUS = 4.0
_QUAD_NODES = 600


def bump_mixture(d, scales, weights, name="bump_mixture", order=1):
    """Mollifier ``sum_k w_k s_k^-d psi(x/s_k)`` built from the unit bump ``psi``.

    The weights must sum to one (unit mass). Near the origin the transform
    is evaluated by its moment series; further out by Gauss-Legendre
    quadrature of the radial profile.
    """
    scales = np.asarray(scales, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if scales.shape != weights.shape or scales.ndim != 1:
        raise ValueError("scales and weights must be 1-d arrays of equal length")
    if np.any(scales <= 0) or np.any(scales > 1):
        raise ValueError("scales must lie in (0, 1]")
    if abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must sum to 1 (unit mass)")
    psi_moments, psi_mass = _bump_moments(d, _N_SERIES)
    j = np.arange(_N_SERIES)
    moments = psi_moments * (weights[:, None] * scales[:, None] ** (2 * j)).sum(axis=0)
    # coefficient of s^{2j} in the characteristic transform of a radial profile
    coeffs = ((-0.25) ** j * special.gamma(d / 2.0)
              / (special.gamma(j + 1.0) * special.gamma(j + d / 2.0)) * moments)
    support = float(scales.max())

    def profile(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for w, s in zip(weights, scales):
            out = out + w * s ** (-d) * _bump(r / s) / psi_mass
        return out

    def one_minus_hat(s):
        # 1 - rho^(s) = -sum_{j>=1} c_j s^{2j}, no cancellation for small s
        s = np.abs(np.asarray(s, dtype=float))
        out = np.empty_like(s)
        small = s * support <= _SERIES_RADIUS
        if np.any(small):
            x = s[small] ** 2
            acc = np.zeros_like(x)
            for c in coeffs[:0:-1]:
                acc = (acc + c) * x
            out[small] = -acc
        big = ~small
        if np.any(big):
            sb = s[big]
            n = max(_QUAD_NODES, radial._node_count(float(sb.max()), support))
            out[big] = 1.0 - radial.characteristic_transform(profile, support, sb, d, n=n)
        return out

    def hat(s):
        return 1.0 - one_minus_hat(s)

    def one_minus_hat_sq(s):
        g = one_minus_hat(s)
        return g * (2.0 - g)

    return Mollifier(
        dimension=d,
        profile_eval=profile,
        hat_eval=hat,
        support_radius=support,
        one_minus_hat_sq=one_minus_hat_sq,
        order=order,
        name=name,
        params={"kind": "mixture", "d": d, "scales": scales.tolist(),
                "weights": weights.tolist()},
    )


def standard_mollifier(d, order=1):
    """Even smooth mollifier with ``rho^(w) = 1 - C |w|^{2 order} + O(|w|^{2 order + 2})``.

    ``order = 1`` is the classical unit-mass bump. Higher orders combine
    ``order`` dilations of the bump with Lagrange weights that cancel the
    radial moments of orders ``2, ..., 2 order - 2``; the leading coefficient
    ``C`` is then positive, so ``|rho^|`` has a strict local maximum at 0.
    """
    d, order = int(d), int(order)
    if d < 1 or order < 1:
        raise ValueError("d and order must be positive")
    if 2 * order < d:
        raise ValueError(f"order={order} too small for d={d}: need 2*order >= d")
    scales = np.arange(1, order + 1) / order
    vander = np.vander(scales ** 2, order, increasing=True).T
    rhs = np.zeros(order)
    rhs[0] = 1.0
    weights = np.linalg.solve(vander, rhs)
    m = bump_mixture(d, scales, weights, name=f"standard_d{d}_m{order}", order=order)
    params = dict(m.params, kind="standard", order=order)
    return Mollifier(m.dimension, m.profile_eval, m.hat_eval, m.support_radius,
                     m.one_minus_hat_sq, order, m.name, params)


def identity_mollifier(d):
    """Stand-in with ``rho^ == 1`` (no smoothing); for consistency checks only."""
    return Mollifier(
        dimension=d,
        profile_eval=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        hat_eval=lambda s: np.ones_like(np.asarray(s, dtype=float)),
        support_radius=0.0,
        one_minus_hat_sq=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
        name="identity",
        params={"kind": "identity", "d": d},
    )


# --------------------------------------------------------------------------
# validation


def _fd_weights(order):
    q = (order + 2) // 2
    pts = np.arange(-q, q + 1)
    mat = np.vander(pts, 2 * q + 1, increasing=True).T.astype(float)
    rhs = np.zeros(2 * q + 1)
    rhs[order] = factorial(order)
    return pts, np.linalg.solve(mat, rhs)


def fd_partial(f, multi_index, h):
    """Central finite-difference estimate of ``d^j f(0)`` for ``f: R^d -> R``."""
    d = len(multi_index)
    stencils = []
    for p in multi_index:
        if p == 0:
            stencils.append((np.array([0]), np.array([1.0])))
        else:
            stencils.append(_fd_weights(p))
    total = 0.0
    for combo in product(*[range(len(s[0])) for s in stencils]):
        point = np.array([stencils[a][0][i] * h for a, i in enumerate(combo)], dtype=float)
        w = np.prod([stencils[a][1][i] for a, i in enumerate(combo)])
        if w != 0.0:
            total += w * float(f(point.reshape(1, d))[0])
    return total / h ** sum(multi_index)


def multi_indices(d, max_order):
    return [j for j in product(range(max_order + 1), repeat=d) if 0 < sum(j) <= max_order]


def validate_mollifier(m, fd_step=1e-3, local_radius=0.05, n_scan=200, deriv_tol=1e-6):
    """Check unit mass, compact support and the origin conditions on ``rho^``."""
    d = m.dimension
    checks = []
    mass = _radial_moment(m.profile_eval, d, 0, m.support_radius)
    checks.append(Check("A1_unit_mass", abs(mass - 1.0) < 1e-9, -abs(mass - 1.0),
                        f"int rho = {mass:.15g}"))
    r_out = m.support_radius * np.linspace(1.0, 3.0, 50)
    leak = float(np.max(np.abs(m(r_out))))
    checks.append(Check("A1_compact_support", leak == 0.0, -leak,
                        f"support radius {m.support_radius}"))
    h0 = float(m.hat(np.array([0.0]))[0])
    checks.append(Check("hat_at_origin", abs(h0 - 1.0) < 1e-12, -abs(h0 - 1.0)))
    worst = 0.0
    for j in multi_indices(d, d - 1):
        worst = max(worst, abs(fd_partial(m.hat_vector, j, fd_step)))
    checks.append(Check("A2_vanishing_derivatives", worst < deriv_tol, deriv_tol - worst,
                        f"max |d^j rho^(0)| over 0<|j|<={d - 1}: {worst:.3g}",
                        vacuous=(d == 1)))
    radii = np.linspace(0.0, local_radius, n_scan + 1)[1:]
    peak = float(np.max(np.abs(m.hat(radii))))
    checks.append(Check("A2_local_max", peak <= 1.0, 1.0 - peak,
                        f"max |rho^| on 0<|w|<={local_radius}: {peak:.17g}"))
    return ValidationReport(m.name, checks, {"fd_step": fd_step, "local_radius": local_radius,
                                             "n_scan": n_scan})


def hessian_trace_hat_sq(m, h=1e-3):
    """Finite-difference Laplacian of ``|rho^|^2`` at the origin."""
    d = m.dimension
    f = lambda w: m.hat_vector(w) ** 2
    return sum(fd_partial(f, tuple(2 if a == b else 0 for b in range(d)), h) for a in range(d))


def hat_mass(k, n=4000):
    """``int K^(w) dw`` by radial quadrature; equals ``K(0)`` for a valid kernel."""
    s_max = k.hat_support_radius if np.isfinite(k.hat_support_radius) else k.params.get("s_max", 50.0)
    d = k.dimension
    if k.trihat_eval is not None:
        return float(k.trihat_eval(np.array([s_max]))[0])
    nodes, weights = radial.gauss_legendre(n, 0.0, float(s_max))
    return float(sphere_area(d) * np.sum(weights * k.hat(nodes) * nodes ** (d - 1)))


def validate_seed(k, grid, tol=1e-10):
    """Scan-based check of the seed-kernel assumptions on ``grid``.

    ``grid`` holds radii used both as spatial lags and as frequencies.
    Every check records the worst signed margin (negative = violated);
    failures never raise.
    """
    from .spectral import script_T

    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0) or np.any(grid < 0):
        raise ValueError("grid must be nonempty and strictly increasing nonnegative radii")
    d = k.dimension
    checks = []
    k0 = float(k(np.array([0.0]))[0])
    dev = abs(k0 - 1.0)
    checks.append(Check("K1_origin", dev <= tol, -dev, f"K(0) = {k0:.15g}"))

    r = grid[grid > 0]
    vac = r.size == 0
    if vac:
        checks.append(Check("K1_hat_nonnegative", True, np.inf, "no radii", vacuous=True))
        checks.append(Check("K2_decay", True, np.inf, "no radii", vacuous=True))
    else:
        hat = k.hat(r)
        m = float(np.min(hat))
        checks.append(Check("K1_hat_nonnegative", m >= -tol, m))
        C, a = k.decay_constants
        slack = float(np.min(C * (1.0 + r) ** (-a) - np.abs(k(r))))
        checks.append(Check("K2_decay", slack >= 0, slack, f"C={C}, a={a}"))

    if k.k3_compliant:
        outside = r[r > k.hat_support_radius] if not vac else r
        if outside.size == 0:
            checks.append(Check("K3_support", True, np.inf, "no radii beyond 1", vacuous=True))
        else:
            leak = float(np.max(np.abs(k.hat(outside))))
            checks.append(Check("K3_support", leak == 0.0, -leak))
        inner = r[r < 1.0] if not vac else r
        if inner.size == 0 or k.trihat_bounds is None:
            checks.append(Check("K3_sandwich", True, np.inf, "no radii in (0,1)", vacuous=True))
        else:
            lo, hi = k.trihat_bounds
            ratio = script_T(k, inner) / inner ** d
            margin = float(np.min(np.minimum(ratio - lo, hi - ratio)))
            checks.append(Check("K3_sandwich", margin >= 0, margin, f"bounds ({lo}, {hi})"))
    return ValidationReport(k.name, checks, {"n_radii": int(grid.size),
                                             "max_radius": float(grid.max()),
                                             "min_spacing": float(np.min(np.diff(grid))) if grid.size > 1 else 0.0})


# --------------------------------------------------------------------------
# truncation


def _bump_phi(d, support):
    """Radial bump supported in B(0, support) with ``int phi^2 = 1``."""
    norm_sq = _radial_moment(lambda r: _bump(r / support) ** 2, d, 0, support)
    c = 1.0 / np.sqrt(norm_sq)
    return lambda r: c * _bump(np.asarray(r, dtype=float) / support)


def _chi_direct(d, support, n_freq=1600):
    """``chi = phi * phi`` evaluated through ``chi^ = phi^ ^2`` (Parseval route)."""
    phi = _bump_phi(d, support)
    s_max = 400.0 / support
    s_nodes, s_weights = radial.gauss_legendre(n_freq, 0.0, s_max)
    phi_hat = radial.characteristic_transform(phi, support, s_nodes, d,
                                              n=radial._node_count(s_max, support, base=200))
    dens = phi_hat ** 2 / (2 * np.pi) ** d

    def chi(r):
        return radial.radial_integral(dens, s_nodes, s_weights, r, d)

    return chi


@lru_cache(maxsize=16)
def chi_table(d, support=0.5, tol=1e-10):
    """Tabulated ``chi = phi * phi``, rescaled so that ``chi(0) = 1`` exactly."""
    chi = _chi_direct(d, support)
    c0 = float(chi(np.array([0.0]))[0])
    return RadialTable(lambda r: chi(r) / c0, 2.0 * support, tol=tol, n0=64)


def truncate_kernel(k, delta, bump_support=0.5):
    """``K_delta(x) = K(x) chi(delta x)``, compactly supported in B(0, 2 b / delta)."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if not 0 < bump_support <= 0.5:
        raise ValueError("bump support must lie in (0, 1/2]")
    d = k.dimension
    chi = chi_table(d, float(bump_support))
    reach = 2.0 * bump_support / delta

    def kd(r):
        r = np.asarray(r, dtype=float)
        return k(r) * chi(delta * r)

    def kd_hat(s):
        s = np.asarray(s, dtype=float)
        n = radial._node_count(float(np.max(np.abs(s), initial=0.0)) + 1.0, reach, base=400)
        return radial.spectral_transform(kd, reach, s, d, n=n)

    return SeedKernel(
        dimension=d,
        radial_eval=kd,
        radial_hat_eval=kd_hat,
        hat_support_radius=np.inf,
        decay_constants=k.decay_constants,
        trihat_bounds=None,
        k3_compliant=False,
        name=f"{k.name}_trunc{delta:g}",
        params={"kind": "truncated", "base": k.params, "delta": delta,
                "bump_support": bump_support, "s_max": 50.0},
    )


# --------------------------------------------------------------------------
# tabulated kernels and construction by name


def load_tabulated_kernel(path, d, k3_compliant=False, s_max=50.0):
    """Seed kernel from a two-column ``radius value`` text file with one header line.

    The covariance is spline-interpolated and taken as zero beyond the last
    tabulated radius; its spectral density is computed by radial quadrature.
    """
    data = np.loadtxt(path, skiprows=1, ndmin=2)
    r, v = data[:, 0], data[:, 1]
    if np.any(np.diff(r) <= 0):
        raise ValueError("tabulated radii must be strictly increasing")
    spline = CubicSpline(r, v)
    r_max = float(r[-1])

    def k(x):
        x = np.abs(np.asarray(x, dtype=float))
        return np.where(x <= r_max, spline(np.minimum(x, r_max)), 0.0)

    def khat(s):
        s = np.asarray(s, dtype=float)
        n = radial._node_count(float(np.max(np.abs(s), initial=0.0)) + 1.0, r_max, base=400)
        return radial.spectral_transform(k, r_max, s, d, n=n)

    C = float(np.max(np.abs(v) * (1.0 + r)))
    return SeedKernel(d, k, khat, 1.0 if k3_compliant else np.inf, (C, 1.0), None,
                      bool(k3_compliant), name=f"table:{path}",
                      params={"kind": "table", "path": str(path), "d": d, "s_max": s_max})


def write_tabulated_kernel(path, k, radii):
    radii = np.asarray(radii, dtype=float)
    np.savetxt(path, np.column_stack([radii, k(radii)]), header="radius value", comments="")


def make_kernel(kind, d, **params):
    if kind == "ball":
        return ball_seed_kernel(d)
    if kind == "table":
        return load_tabulated_kernel(params["path"], d, bool(params.get("k3_compliant", False)))
    if kind == "truncated":
        base = make_kernel(params.get("base", "ball"), d)
        return truncate_kernel(base, float(params["delta"]), float(params.get("bump_support", 0.5)))
    raise ValueError(f"unknown kernel kind {kind!r}")


def make_mollifier(kind, d, **params):
    if kind in ("standard", "standard_mollifier"):
        return standard_mollifier(d, int(params.get("order", 1)))
    if kind == "mixture":
        return bump_mixture(d, params["scales"], params["weights"])
    raise ValueError(f"unknown mollifier kind {kind!r}")
