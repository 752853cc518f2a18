"""Poisson atomic measures with intensity ``nu(dx) x z^-(1+alpha) dz``.

``alpha = sqrt(2d)/gamma`` lies in (0, 1) in the supercritical regime. Atoms
with mass below ``z_min`` are discarded; their mean contribution
``nu(D) z_min^{1-alpha} / (1-alpha)`` can be added back as a deterministic
compensator.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import rng as rngmod
from .radial import gauss_legendre


def alpha_of(d, gamma):
    gc = np.sqrt(2.0 * d)
    if not gamma > gc:
        raise ValueError(f"gamma={gamma:g} must exceed sqrt(2d)={gc:.6g}")
    return float(gc / gamma)


def beta_constant(d, gamma):
    """``Gamma(1 - alpha) / alpha`` with ``alpha = sqrt(2d) / gamma``."""
    a = alpha_of(d, gamma)
    return float(special.gamma(1.0 - a) / a)


# --------------------------------------------------------------------------
# intensities


class LebesgueIntensity:
    """``density(x) dx`` on the box ``[lo, hi]`` (density 1 when omitted).

    The density must be bounded; ``density_max`` is estimated on a grid when
    not given and is used for rejection sampling.
    """

    def __init__(self, lo, hi, density=None, density_max=None, label=None, n_quad=64):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise ValueError("need lo < hi componentwise")
        self.d = self.lo.size
        self.density = density
        self.label = label or ("lebesgue" if density is None else "lebesgue_density")
        self.n_quad = n_quad
        self.volume = float(np.prod(self.hi - self.lo))
        if density is None:
            self.mass = self.volume
            self.density_max = 1.0
        else:
            self.mass = self.integrate(lambda x: np.ones(len(x)))
            if density_max is None:
                pts = self._tensor_nodes(24)[0]
                density_max = 1.05 * float(np.max(density(pts)))
            self.density_max = float(density_max)

    def _tensor_nodes(self, n):
        axes = [gauss_legendre(n, float(a), float(b)) for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*[x for x, _ in axes], indexing="ij")
        wmesh = np.meshgrid(*[w for _, w in axes], indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        w = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
        return pts, w

    def integrate(self, phi):
        """``int phi dnu`` by tensor Gauss-Legendre quadrature."""
        pts, w = self._tensor_nodes(self.n_quad)
        vals = np.asarray(phi(pts), dtype=float)
        if self.density is not None:
            vals = vals * self.density(pts)
        return float(np.sum(w * vals))

    def sample_locations(self, n, gen):
        if self.density is None:
            return self.lo + (self.hi - self.lo) * gen.random((n, self.d))
        out = np.empty((0, self.d))
        while out.shape[0] < n:
            m = max(2 * (n - out.shape[0]), 16)
            x = self.lo + (self.hi - self.lo) * gen.random((m, self.d))
            keep = gen.random(m) * self.density_max < self.density(x)
            out = np.vstack([out, x[keep]])
        return out[:n]

    def scaled(self, f_alpha, label=None):
        """Intensity ``f_alpha(x) nu(dx)``."""
        if self.density is None:
            dens = f_alpha
        else:
            base = self.density
            dens = lambda x: f_alpha(x) * base(x)
        return LebesgueIntensity(self.lo, self.hi, dens, label=label or self.label + "_tilted",
                                 n_quad=self.n_quad)

    def describe(self):
        return {"type": self.label, "lo": self.lo.tolist(), "hi": self.hi.tolist(),
                "mass": self.mass}


class _AliasTable:
    """Walker/Vose alias table for O(1) draws from a discrete distribution."""

    def __init__(self, p):
        p = np.asarray(p, dtype=float).ravel()
        n = p.size
        scaled = p * n / p.sum()
        prob = np.zeros(n)
        alias = np.zeros(n, dtype=np.int64)
        small = list(np.flatnonzero(scaled < 1.0))
        large = list(np.flatnonzero(scaled >= 1.0))
        while small and large:
            s, l = small.pop(), large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] = scaled[l] + scaled[s] - 1.0
            (small if scaled[l] < 1.0 else large).append(l)
        for i in small + large:
            prob[i] = 1.0
        self.prob, self.alias = prob, alias

    def draw(self, n, gen):
        idx = gen.integers(0, self.prob.size, n)
        return np.where(gen.random(n) < self.prob[idx], idx, self.alias[idx])


class GridIntensity:
    """Intensity given by a :class:`~chaoscope.gmc.GridMeasure` (cell weights)."""

    def __init__(self, measure, label="grid_measure"):
        w = np.asarray(measure.weights, dtype=float)
        if np.any(w < 0):
            raise ValueError("intensity weights must be nonnegative")
        self.measure = measure
        self.grid = measure.grid
        self.d = self.grid.dimension
        self.mass = float(w.sum())
        self.label = label
        self._alias = _AliasTable(w) if self.mass > 0 else None

    def integrate(self, phi):
        return self.measure.integrate(phi)

    def sample_locations(self, n, gen):
        if n == 0:
            return np.empty((0, self.d))
        idx = self._alias.draw(n, gen)
        sub = np.stack(np.unravel_index(idx, self.grid.shape), axis=-1)
        # grid point is the cell corner; jitter uniformly inside the cell
        return (np.asarray(self.grid.origin) + self.grid.spacing * (sub + gen.random((n, self.d))))

    def describe(self):
        return {"type": self.label, "grid": self.grid.to_dict(), "mass": self.mass,
                "resolution": self.grid.spacing}


# --------------------------------------------------------------------------
# sampling


@dataclass
class AtomicMeasure:
    locations: np.ndarray
    masses: np.ndarray
    meta: dict = field(default_factory=dict)
    intensity: object = None

    @property
    def n_atoms(self):
        return int(self.masses.size)

    @property
    def compensator(self):
        return float(self.meta.get("compensator_mass", 0.0))

    @property
    def total_mass(self):
        return float(self.masses.sum()) + self.compensator

    def integrate(self, phi):
        """``sum z_i phi(x_i)`` plus the compensator spread as ``phi dnu / nu(D)``."""
        val = float(np.sum(self.masses * phi(self.locations))) if self.n_atoms else 0.0
        if self.compensator > 0:
            val += self.compensator * self.intensity.integrate(phi) / self.intensity.mass
        return val


def mean_atom_count(nu_mass, alpha, z_min):
    return nu_mass * z_min ** (-alpha) / alpha


def compensator_mass(nu_mass, alpha, z_min):
    return nu_mass * z_min ** (1.0 - alpha) / (1.0 - alpha)


def pareto_masses(n, alpha, z_min, gen):
    """Masses with ``P(Z > z) = (z / z_min)^-alpha``."""
    return z_min * (1.0 - gen.random(n)) ** (-1.0 / alpha)


def _check_zmin(z_min):
    if not z_min > 0:
        raise ValueError("z_min must be positive")


def sample_atomic(intensity, gamma, z_min, compensate=False, rng_seed=0, keys=()):
    """One draw of the truncated Poisson atomic measure.

    Parameters
    ----------
    intensity : LebesgueIntensity or GridIntensity
    gamma : float
        Must exceed ``sqrt(2d)``.
    z_min : float
        Mass cutoff; only atoms with ``z >= z_min`` are drawn.
    compensate : bool
        Record the mean discarded mass as ``compensator_mass``.
    """
    _check_zmin(z_min)
    d = intensity.d
    a = alpha_of(d, gamma)
    gen = rngmod.stream(rng_seed, *keys, rngmod.ATOMS)
    lam = mean_atom_count(intensity.mass, a, z_min)
    n = int(gen.poisson(lam)) if lam > 0 else 0
    locs = intensity.sample_locations(n, gen) if n else np.empty((0, d))
    masses = pareto_masses(n, a, z_min, gen)
    comp = compensator_mass(intensity.mass, a, z_min) if compensate else 0.0
    meta = {"gamma": gamma, "d": d, "alpha": a, "z_min": z_min, "compensator_mass": comp,
            "intensity": intensity.describe(), "rng_seed": int(rng_seed),
            "keys": [int(k) for k in keys]}
    return AtomicMeasure(locs, masses, meta, intensity)


def sample_total_masses(nu_mass, d, gamma, z_min, n, rng_seed, compensate=True, chunk=2000,
                        keys=()):
    """Total masses of ``n`` independent truncated atomic measures.

    Only the mass of the intensity matters, so locations are skipped.
    Replica block ``b`` uses the stream ``(*keys, BLOCK, b)``.
    """
    _check_zmin(z_min)
    a = alpha_of(d, gamma)
    lam = mean_atom_count(nu_mass, a, z_min)
    comp = compensator_mass(nu_mass, a, z_min) if compensate else 0.0
    out = np.empty(n)
    for b, start in enumerate(range(0, n, chunk)):
        m = min(chunk, n - start)
        gen = rngmod.stream(rng_seed, *keys, rngmod.BLOCK, b)
        counts = gen.poisson(lam, m)
        z = pareto_masses(int(counts.sum()), a, z_min, gen)
        sums = np.zeros(m)
        owner = np.repeat(np.arange(m), counts)
        np.add.at(sums, owner, z)
        out[start:start + m] = sums + comp
    return out


def sample_integrals(intensity, gamma, z_min, n, rng_seed, phi, compensate=True, keys=()):
    """``int phi dP`` for ``n`` replicas of the truncated measure."""
    return np.array([sample_atomic(intensity, gamma, z_min, compensate, rng_seed,
                                   (*keys, rngmod.REPLICA, r)).integrate(phi) for r in range(n)])


def truncation_bias_bound(nu_mass, alpha, z_min, phi_sup=1.0, compensate=False):
    """Bound on ``|E e^{-P(phi)} - estimate|`` caused by dropping atoms below ``z_min``.

    Without compensation this is the mean dropped mass ``nu(D) sup phi
    z_min^{1-alpha}/(1-alpha)``. With the mean compensator only the
    second-order remainder ``e^r - 1`` survives, where
    ``r = nu(D) sup phi^2 z_min^{2-alpha} / (2 (2-alpha))``.
    """
    if not compensate:
        return nu_mass * phi_sup * z_min ** (1 - alpha) / (1 - alpha)
    r = nu_mass * phi_sup ** 2 * z_min ** (2 - alpha) / (2 * (2 - alpha))
    return float(np.expm1(r))


# --------------------------------------------------------------------------
# closed forms


def laplace_closed_form(intensity, phi, gamma):
    """``exp(-beta int phi^alpha dnu)``."""
    d = intensity.d
    a = alpha_of(d, gamma)

    def powered(x):
        v = np.asarray(phi(x), dtype=float)
        if np.any(v < 0):
            raise ValueError("phi must be nonnegative")
        return v ** a

    return float(np.exp(-beta_constant(d, gamma) * intensity.integrate(powered)))


def fractional_moment_closed_form(nu_mass, q, gamma, d):
    """``E[M^q] = (beta nu)^{q/alpha} Gamma(-q/alpha) / (alpha Gamma(-q))`` for ``0 < q < alpha``."""
    a = alpha_of(d, gamma)
    if not 0 < q < a:
        raise ValueError(f"q={q:g} outside (0, alpha={a:.6g}): the moment is infinite")
    b = beta_constant(d, gamma)
    return float((b * nu_mass) ** (q / a) * special.gamma(-q / a) / (a * special.gamma(-q)))


def negative_moment_closed_form(nu_mass, q, gamma, d):
    """``E[M^-q] = (beta nu)^{-q/alpha} Gamma(q/alpha) / (alpha Gamma(q))`` for ``q > 0``."""
    if not q > 0:
        raise ValueError("q must be positive")
    a = alpha_of(d, gamma)
    b = beta_constant(d, gamma)
    return float((b * nu_mass) ** (-q / a) * special.gamma(q / a) / (a * special.gamma(q)))


def kanter_stable(alpha, n, gen):
    """Exact positive ``alpha``-stable draws with ``E e^{-lam S} = e^{-lam^alpha}``."""
    u = np.pi * gen.random(n)
    e = gen.exponential(size=n)
    a_u = (np.sin(alpha * u) ** (alpha / (1 - alpha)) * np.sin((1 - alpha) * u)
           / np.sin(u) ** (1 / (1 - alpha)))
    return (a_u / e) ** ((1 - alpha) / alpha)


def exact_total_masses(nu_mass, d, gamma, n, rng_seed):
    """Untruncated total masses ``(beta nu)^{1/alpha} S_alpha`` (reference sampler)."""
    a = alpha_of(d, gamma)
    gen = rngmod.stream(rng_seed, rngmod.ATOMS, 99)
    return (beta_constant(d, gamma) * nu_mass) ** (1 / a) * kanter_stable(a, n, gen)


# --------------------------------------------------------------------------
# persistence


def save_atoms(path_csv, atoms):
    """Atoms as CSV ``x1..xd,z`` plus ``<path>.json`` holding the meta."""
    d = atoms.locations.shape[1] if atoms.locations.ndim == 2 else atoms.meta["d"]
    with open(path_csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(d)] + ["z"])
        for x, z in zip(atoms.locations, atoms.masses):
            w.writerow([repr(float(v)) for v in x] + [repr(float(z))])
    with open(str(path_csv) + ".json", "w") as fh:
        json.dump(atoms.meta, fh, sort_keys=True, indent=1)


def load_atoms(path_csv):
    with open(str(path_csv) + ".json") as fh:
        meta = json.load(fh)
    data = np.loadtxt(path_csv, delimiter=",", skiprows=1, ndmin=2)
    d = meta["d"]
    if data.size == 0:
        return AtomicMeasure(np.empty((0, d)), np.empty(0), meta)
    return AtomicMeasure(data[:, :d], data[:, d], meta)
