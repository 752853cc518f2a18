"""Fourier-side objects of the convolution/martingale decomposition.

All densities are radial and use the spectral-density convention
``C(x) = int C^(w) exp(i w.x) dw``. Writing ``S = |S^{d-1}|``, ``T`` for the
mass of the seed density inside a ball and ``g(w) = 1 - |rho^(w)|^2``::

    K^(w)      = S^-1 |w|^-d T(w)
    K^_t(w)    = S^-1 |w|^-d (T(w) - T(e^-t w))
    K^_W(w)    = S^-1 |w|^-d (T(w) - g(a w))
    K^_{W,t}   = e^{-dt} K^_W(e^-t w)
    K^_{Z,t}   = S^-1 |w|^-d g(a e^-t w) (1 - T(w))
    Delta^_t   = e^{-dt} K^(e^-t w) - g(a e^-t w) K^(w) = K^_{W,t} + K^_{Z,t}
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .radial import gauss_legendre, sphere_area

DEFAULT_T_GRID = (0.0, 1.0, 2.0, 4.0, 8.0, 16.0)


class QuadratureError(RuntimeError):
    pass


class AdmissibilityError(RuntimeError):
    """No dyadic constant made both decomposition densities nonnegative."""

    def __init__(self, message, worst_frequency, worst_value, worst_term):
        super().__init__(message)
        self.worst_frequency = worst_frequency
        self.worst_value = worst_value
        self.worst_term = worst_term


@dataclass(frozen=True)
class SpectralDensity:
    """Isotropic spectral density evaluated through ``eval(|w|)``.

    ``zero_value`` is the radial limit at the origin when finite, else
    ``None``; lattice samplers use it for the zero mode.
    """

    dimension: int
    eval: Callable
    label: str
    zero_value: float = None
    params: dict = field(default_factory=dict)

    def __call__(self, s):
        return self.eval(np.asarray(s, dtype=float))

    def at(self, omega):
        return self.eval(np.linalg.norm(np.asarray(omega, dtype=float), axis=-1))


def _nonzero(s):
    s = np.abs(np.asarray(s, dtype=float))
    if np.any(s == 0):
        raise ValueError("frequency 0 is excluded: these densities are only defined for w != 0")
    return s


def script_T(k, s):
    """Mass of the seed spectral density inside the ball of radius ``|w|``."""
    s = np.abs(np.asarray(s, dtype=float))
    if k.trihat_eval is not None:
        return k.trihat_eval(s)
    d = k.dimension
    cap = k.hat_support_radius if np.isfinite(k.hat_support_radius) else np.inf
    out = np.empty(s.shape)
    for i, si in np.ndenumerate(s):
        hi = min(si, cap)
        if hi <= 0:
            out[i] = 0.0
            continue
        val, err = integrate.quad(lambda v: k.hat(np.array([v]))[0] * v ** (d - 1), 0.0, hi,
                                  epsabs=1e-14, epsrel=1e-12, limit=200)
        if not np.isfinite(val) or err > 1e-8:
            raise QuadratureError(f"T(w) quadrature did not converge at |w|={si}")
        out[i] = sphere_area(d) * val
    return out


def _kt_values(k, s, t_lo, t_hi):
    """Density of the scale increment ``int_{t_lo}^{t_hi} K^(e^-u w) e^{-du} du``."""
    d = k.dimension
    s = np.abs(np.asarray(s, dtype=float))
    out = np.empty(s.shape)
    zero = s == 0
    k0 = float(k.hat(np.array([0.0]))[0])
    out[zero] = k0 * (np.exp(-d * t_lo) - np.exp(-d * t_hi)) / d
    nz = ~zero
    if np.any(nz):
        sn = s[nz]
        lo_T = script_T(k, sn * np.exp(-t_hi)) if np.isfinite(t_hi) else 0.0
        out[nz] = (script_T(k, sn * np.exp(-t_lo)) - lo_T) / (sphere_area(d) * sn ** d)
    return out


def spectrum_Kt(k, t):
    """Spectral density of the martingale approximation covariance at depth ``t``.

    ``t = inf`` gives the full log-correlated density, which blows up at 0.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    d = k.dimension
    k0 = float(k.hat(np.array([0.0]))[0])
    zero = k0 * (1 - np.exp(-d * t)) / d if np.isfinite(t) else None

    def ev(s):
        s = np.asarray(s, dtype=float)
        if not np.isfinite(t):
            s = _nonzero(s)
        return _kt_values(k, s, 0.0, t)

    return SpectralDensity(d, ev, "K_t", zero, {"t": t})


def spectrum_increment(k, t_lo, t_hi):
    """Density of ``K_{t_hi} - K_{t_lo}``: the covariance of one scale layer."""
    if not 0 <= t_lo <= t_hi:
        raise ValueError("need 0 <= t_lo <= t_hi")
    d = k.dimension
    k0 = float(k.hat(np.array([0.0]))[0])
    zero = k0 * (np.exp(-d * t_lo) - np.exp(-d * t_hi)) / d
    return SpectralDensity(d, lambda s: _kt_values(k, s, t_lo, t_hi), "K_layer", zero,
                           {"t_lo": t_lo, "t_hi": t_hi})


def k_hat_full(k, s):
    """``K^ = S^-1 |w|^-d T(w)`` (the t = infinity density)."""
    s = _nonzero(s)
    return script_T(k, s) / (sphere_area(k.dimension) * s ** k.dimension)


def spectrum_conv(k, m, a, t):
    """Density of the convolution approximation at ``eps = a e^-t``."""
    if not k.k3_compliant:
        raise ValueError("spectrum_conv needs a kernel whose density is supported in B(0,1)")
    scale = a * np.exp(-t)

    def ev(s):
        s = _nonzero(s)
        return (1.0 - m.one_minus_hat_sq(scale * s)) * k_hat_full(k, s)

    return SpectralDensity(k.dimension, ev, "K^rho_(eps)", None, {"a": a, "t": t, "eps": scale})


def k_hat_W(k, m, a, s):
    s = _nonzero(s)
    d = k.dimension
    return (script_T(k, s) - m.one_minus_hat_sq(a * s)) / (sphere_area(d) * s ** d)


def k_hat_W_t(k, m, a, t, s):
    """``e^{-dt} K^_W(e^-t w)``, evaluated in the algebraically reduced form."""
    s = _nonzero(s)
    d = k.dimension
    u = np.exp(-t) * s
    return (script_T(k, u) - m.one_minus_hat_sq(a * u)) / (sphere_area(d) * s ** d)


def k_hat_Z(k, m, a, t, s):
    s = _nonzero(s)
    d = k.dimension
    g = m.one_minus_hat_sq(a * np.exp(-t) * s)
    return g * (1.0 - script_T(k, s)) / (sphere_area(d) * s ** d)


def delta_hat(k, m, a, t, s):
    """``K^^rho_t - K^_t`` written through the full density ``K^``."""
    s = _nonzero(s)
    d = k.dimension
    u = np.exp(-t) * s
    return (np.exp(-d * t) * k_hat_full(k, u)
            - m.one_minus_hat_sq(a * u) * k_hat_full(k, s))


def radial_limit_at_zero(fn, h=1e-6):
    """Limit of ``fn(s)`` as ``s -> 0+`` by linear Richardson extrapolation."""
    f1 = float(fn(np.array([h]))[0])
    f2 = float(fn(np.array([h / 2]))[0])
    return 2.0 * f2 - f1


def density_W_t(k, m, a, t):
    fn = lambda x: k_hat_W_t(k, m, a, t, x)
    return SpectralDensity(k.dimension, lambda s: _with_zero(s, fn), "K_{W,t}",
                           radial_limit_at_zero(fn), {"a": a, "t": t})


def density_Z_t(k, m, a, t):
    fn = lambda x: k_hat_Z(k, m, a, t, x)
    return SpectralDensity(k.dimension, lambda s: _with_zero(s, fn), "K_{Z,t}",
                           radial_limit_at_zero(fn), {"a": a, "t": t})


def _with_zero(s, fn):
    s = np.abs(np.asarray(s, dtype=float))
    out = np.empty(s.shape)
    nz = s > 0
    out[nz] = fn(s[nz])
    if np.any(~nz):
        out[~nz] = radial_limit_at_zero(fn)
    return out


# --------------------------------------------------------------------------
# scans and certification


@dataclass(frozen=True)
class FrequencyScan:
    radii: np.ndarray
    spec: dict


def frequency_scan(s_min=1e-6, s_max=1e3, n_log=2000, band=(0.8, 1.2), n_band=801):
    """Log-spaced radii in ``(s_min, s_max]`` plus a fine linear band around 1."""
    logpart = np.geomspace(s_min, s_max, n_log)
    lin = np.linspace(band[0], band[1], n_band)
    radii = np.unique(np.concatenate([logpart, lin, [1.0]]))
    radii = radii[radii > 0]
    return FrequencyScan(radii, {"s_min": s_min, "s_max": s_max, "n_log": n_log,
                                 "band": list(band), "n_band": n_band,
                                 "n_total": int(radii.size)})


@dataclass
class DecompositionCertificate:
    a_const: float
    t_grid: list
    identity_residual: dict
    min_KW: float
    min_KZ: float
    min_KZ_per_t: dict
    sup_KZ_per_t: dict
    scan_spec: dict
    tol: float
    kernel: str = ""
    mollifier: str = ""

    @property
    def valid(self):
        return bool(self.min_KW >= -self.tol and self.min_KZ >= -self.tol)

    def t_eps(self, eps):
        if not 0 < eps < self.a_const:
            raise ValueError(f"eps must lie in (0, a={self.a_const:g})")
        return float(np.log(self.a_const / eps))

    def to_dict(self):
        return {
            "a_const": self.a_const,
            "t_grid": list(self.t_grid),
            "identity_residual": {repr(float(t)): v for t, v in self.identity_residual.items()},
            "min_KW": self.min_KW,
            "min_KZ": self.min_KZ,
            "min_KZ_per_t": {repr(float(t)): v for t, v in self.min_KZ_per_t.items()},
            "sup_KZ_per_t": {repr(float(t)): v for t, v in self.sup_KZ_per_t.items()},
            "scan_spec": self.scan_spec,
            "tol": self.tol,
            "kernel": self.kernel,
            "mollifier": self.mollifier,
            "valid": self.valid,
        }

    @classmethod
    def from_dict(cls, data):
        conv = lambda m: {float(k): v for k, v in m.items()}
        return cls(data["a_const"], list(data["t_grid"]), conv(data["identity_residual"]),
                   data["min_KW"], data["min_KZ"], conv(data["min_KZ_per_t"]),
                   conv(data["sup_KZ_per_t"]), data["scan_spec"], data["tol"],
                   data.get("kernel", ""), data.get("mollifier", ""))


def default_tol(k):
    return 1e-12 / sphere_area(k.dimension)


def _violations(k, m, a, t_grid, radii, rtol):
    """Worst relative violation of nonnegativity of the W and Z brackets.

    Each bracket is compared against roundoff on the scale of its own
    terms, so a sign error is caught even when ``a`` makes it tiny.
    """
    T = script_T(k, radii)
    gW = m.one_minus_hat_sq(a * radii)
    bw = T - gW
    rel_w = bw / (np.abs(T) + np.abs(gW) + 1e-300)
    worst = ("W", float(np.min(rel_w)), float(radii[np.argmin(rel_w)]), 0.0)
    for t in t_grid:
        g = m.one_minus_hat_sq(a * np.exp(-t) * radii)
        inside = T < 1.0
        if not np.any(inside):
            continue
        # the bracket g (1 - T) has the sign of g wherever T < 1
        rel_z = np.where(inside, g / (np.abs(g) + 1e-300), 1.0)
        rel_z = np.where(g == 0, 0.0, rel_z)
        i = int(np.argmin(rel_z))
        if rel_z[i] < worst[1]:
            worst = ("Z", float(rel_z[i]), float(radii[i]), float(t))
    return worst


def find_admissible_a(k, m, scan=None, tol=None, t_grid=DEFAULT_T_GRID, j_max=40, rtol=1e-12):
    """Largest ``a = 2^-j`` (``j = 1..j_max``) making ``K^_W`` and ``K^_{Z,t}`` nonnegative.

    Nonnegativity is judged on the scan for every ``t`` in ``t_grid``.
    The returned certificate records the absolute minima, the per-``t``
    suprema of ``K^_{Z,t}`` and the decomposition identity residuals.

    Raises
    ------
    AdmissibilityError
        If no ``a`` down to ``2^-j_max`` works; carries the worst frequency.
    """
    if not k.k3_compliant:
        raise ValueError("the decomposition needs a kernel whose density is supported in B(0,1)")
    scan = scan or frequency_scan()
    radii = scan.radii
    if np.any(radii <= 0):
        raise ValueError("scan must exclude 0")
    tol = default_tol(k) if tol is None else tol
    worst_seen = None
    for j in range(1, j_max + 1):
        a = 2.0 ** (-j)
        term, rel, where, t_at = _violations(k, m, a, t_grid, radii, rtol)
        if rel >= -rtol:
            return certify(k, m, a, scan, tol, t_grid)
        if worst_seen is None or rel < worst_seen[1]:
            worst_seen = (term, rel, where, t_at)
    term, rel, where, t_at = worst_seen
    raise AdmissibilityError(
        f"no admissible a down to 2^-{j_max}: K_{term} bracket negative at |w|={where:.6g}"
        f" (t={t_at:g}, relative value {rel:.3g})", where, rel, term)


def certify(k, m, a, scan, tol=None, t_grid=DEFAULT_T_GRID):
    """Build the certificate for a given constant ``a`` (admissible or not)."""
    radii = scan.radii
    tol = default_tol(k) if tol is None else tol
    kw = k_hat_W(k, m, a, radii)
    residuals, min_z, sup_z = {}, {}, {}
    for t in t_grid:
        kz = k_hat_Z(k, m, a, t, radii)
        min_z[float(t)] = float(kz.min())
        sup_z[float(t)] = float(kz.max())
        residuals[float(t)] = verify_identity(k, m, a, t, scan)
    return DecompositionCertificate(
        a_const=a, t_grid=[float(t) for t in t_grid], identity_residual=residuals,
        min_KW=float(kw.min()), min_KZ=float(min(min_z.values())), min_KZ_per_t=min_z,
        sup_KZ_per_t=sup_z, scan_spec=dict(scan.spec), tol=tol, kernel=k.name,
        mollifier=m.name)


def decomposition_table(k, m, a, t, radii):
    """Columns ``(|w|, K^_W, K^_{W,t}, K^_{Z,t}, Delta^_t)`` for reporting."""
    radii = _nonzero(radii)
    return np.column_stack([radii, k_hat_W(k, m, a, radii), k_hat_W_t(k, m, a, t, radii),
                            k_hat_Z(k, m, a, t, radii), delta_hat(k, m, a, t, radii)])


def verify_identity(k, m, a, t, scan, kw_perturbation=None):
    """Max over the scan of ``|Delta^_t - K^_{W,t} - K^_{Z,t}|``.

    ``kw_perturbation`` (same shape as the scan) is added to ``K^_{W,t}``;
    it exists to confirm that the check detects injected faults.
    """
    radii = scan.radii if isinstance(scan, FrequencyScan) else np.asarray(scan, dtype=float)
    radii = _nonzero(radii)
    kw = k_hat_W_t(k, m, a, t, radii)
    if kw_perturbation is not None:
        kw = kw + kw_perturbation
    res = delta_hat(k, m, a, t, radii) - kw - k_hat_Z(k, m, a, t, radii)
    return float(np.max(np.abs(res)))


def covariance_at_zero(density, s_max, n=20000):
    """``C(0) = S int_0^s_max C^(s) s^{d-1} ds`` for a radial density."""
    d = density.dimension
    nodes, weights = gauss_legendre(n, 0.0, float(s_max))
    return float(sphere_area(d) * np.sum(weights * density(nodes) * nodes ** (d - 1)))


def variance_Z(k, m, a, t, n=20000):
    """Variance of the ``Z_t`` field; ``K^_{Z,t}`` lives in the unit ball."""
    return covariance_at_zero(density_Z_t(k, m, a, t), 1.0, n)


def variance_conv(k, m, eps, s_max=None, n=40000):
    """``K^rho_(eps)(0) = int |rho^(eps w)|^2 K^(w) dw``, by radial quadrature.

    The integrand decays like ``|rho^(eps s)|^2 / s`` so the range is cut
    where the mollifier transform has died out.
    """
    d = k.dimension
    s_max = s_max or 400.0 / eps
    # split at 1 where T has a kink
    total = 0.0
    for lo, hi, nn in ((0.0, 1.0, 2000), (1.0, s_max, n)):
        nodes, weights = gauss_legendre(nn, lo, hi)
        vals = (1.0 - m.one_minus_hat_sq(eps * nodes)) * script_T(k, nodes) / sphere_area(d)
        total += float(np.sum(weights * vals / nodes))
    return sphere_area(d) * total
