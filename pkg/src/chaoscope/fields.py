"""Spectral synthesis of stationary Gaussian fields on periodic grids.

A field with radial spectral density ``C^`` is drawn on the torus
``[0, L)^d`` by filtering white noise in Fourier space: with
``a_k = sqrt(N^d C^(w_k) (2 pi / L)^d)``, the field ``irfftn(rfftn(w) a)``
has covariance ``sum_k C^(w_k) (2 pi / L)^d cos(w_k . h)``, the lattice
Riemann sum of the target covariance.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as rngmod
from .spectral import (SpectralDensity, density_W_t, density_Z_t, radial_limit_at_zero,
                       spectrum_increment)

FIELD_KINDS = ("martingale_t", "conv_eps", "W_t", "Z_t", "sum", "stationary")


class NegativeDensityError(ValueError):
    """A density took a negative value on the lattice; certify first."""


@dataclass(frozen=True)
class GridSpec:
    dimension: int
    points_per_side: int
    side_length: float
    origin: tuple = None

    def __post_init__(self):
        n = self.points_per_side
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if n < 8 or n & (n - 1):
            raise ValueError(f"points_per_side must be a power of two >= 8, got {n}")
        if not self.side_length > 0:
            raise ValueError("side_length must be positive")
        if self.origin is None:
            object.__setattr__(self, "origin", (0.0,) * self.dimension)
        elif len(self.origin) != self.dimension:
            raise ValueError("origin must have one entry per dimension")

    @property
    def shape(self):
        return (self.points_per_side,) * self.dimension

    @property
    def spacing(self):
        return self.side_length / self.points_per_side

    @property
    def cell_volume(self):
        return self.spacing ** self.dimension

    @property
    def frequency_step(self):
        return 2 * np.pi / self.side_length

    def coordinates(self, axis):
        return self.origin[axis] + self.spacing * np.arange(self.points_per_side)

    def index_of(self, x):
        """Nearest grid index (wrapped) of a point."""
        x = np.asarray(x, dtype=float)
        idx = np.rint((x - np.asarray(self.origin)) / self.spacing).astype(int)
        return tuple(np.mod(idx, self.points_per_side))

    def to_dict(self):
        return {"dimension": self.dimension, "points_per_side": self.points_per_side,
                "side_length": self.side_length, "origin": list(self.origin),
                "cell_volume": self.cell_volume}

    @classmethod
    def from_dict(cls, data):
        return cls(int(data["dimension"]), int(data["points_per_side"]),
                   float(data["side_length"]), tuple(data["origin"]))


@dataclass
class GridField:
    grid: GridSpec
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def kind(self):
        return self.meta.get("kind")

    @property
    def variance(self):
        """Exact pointwise variance of the synthesised field (lattice sum)."""
        return self.meta.get("variance")

    def __add__(self, other):
        if other.grid != self.grid:
            raise ValueError("grids differ")
        return GridField(self.grid, self.values + other.values,
                         {"kind": "sum", "variance": _sum_or_none(self.variance, other.variance),
                          "parts": [self.kind, other.kind], "rng_seed": self.meta.get("rng_seed")})


def _sum_or_none(a, b):
    return None if a is None or b is None else a + b


# --------------------------------------------------------------------------
# lattice densities


def _half_lattice_sq(spec):
    """Integer squared norms ``|k|^2`` on the rfft half lattice."""
    n = spec.points_per_side
    full = np.fft.fftfreq(n, 1.0 / n)
    half = np.fft.rfftfreq(n, 1.0 / n)
    axes = [full] * (spec.dimension - 1) + [half]
    grids = np.meshgrid(*axes, indexing="ij", sparse=True)
    sq = sum(g.astype(np.int64) ** 2 for g in grids)
    return np.broadcast_to(sq, tuple(len(a) for a in axes))


def _eval_radial(density, radii):
    radii = np.asarray(radii, dtype=float)
    out = np.empty(radii.shape)
    nz = radii > 0
    if np.any(nz):
        out[nz] = density(radii[nz])
    if np.any(~nz):
        zero = density.zero_value
        out[~nz] = radial_limit_at_zero(density) if zero is None else zero
    return out


def lattice_density(spec, density, tol=1e-12):
    """Density values on the rfft half lattice of ``spec``.

    Values in ``[-tol, 0)`` are roundoff and are set to 0; anything more
    negative aborts.
    """
    if density.dimension != spec.dimension:
        raise ValueError("density and grid dimensions differ")
    sq = _half_lattice_sq(spec)
    uniq, inv = np.unique(sq, return_inverse=True)
    vals = _eval_radial(density, spec.frequency_step * np.sqrt(uniq))
    if not np.all(np.isfinite(vals)):
        raise NegativeDensityError(f"density {density.label} is not finite on the lattice")
    worst = float(vals.min())
    if worst < -tol:
        where = spec.frequency_step * np.sqrt(uniq[np.argmin(vals)])
        raise NegativeDensityError(
            f"density {density.label} is negative ({worst:.3g}) at |w|={where:.6g}")
    vals = np.maximum(vals, 0.0)
    return vals[inv.reshape(sq.shape)]


def lattice_amplitude(spec, density, tol=1e-12):
    n_tot = spec.points_per_side ** spec.dimension
    return np.sqrt(n_tot * lattice_density(spec, density, tol) * spec.frequency_step ** spec.dimension)


def lattice_covariance(spec, amplitude):
    """Exact covariance ``E[X(0) X(h)]`` of the synthesised field on all lags ``h``."""
    return np.fft.irfftn(amplitude ** 2, s=spec.shape, axes=tuple(range(spec.dimension)))


def _synthesise(spec, amplitude, gen):
    noise = gen.standard_normal(spec.shape)
    return np.fft.irfftn(np.fft.rfftn(noise) * amplitude, s=spec.shape, axes=tuple(range(spec.dimension)))


def sample_stationary(spec, density, rng_seed, keys=(), kind="stationary", amplitude=None,
                      tol=1e-12):
    """One realisation of the stationary field with spectral density ``density``.

    Parameters
    ----------
    spec : GridSpec
    density : SpectralDensity
    rng_seed : int
        Master seed; the stream is ``rng.stream(rng_seed, *keys)``.
    keys : tuple of int
        Spawn key identifying the replica/component.
    amplitude : ndarray, optional
        Precomputed ``lattice_amplitude(spec, density)`` for batch use.

    Returns
    -------
    GridField
    """
    if amplitude is None:
        amplitude = lattice_amplitude(spec, density, tol)
    values = _synthesise(spec, amplitude, rngmod.stream(rng_seed, *keys))
    var = float(np.sum(lattice_covariance(spec, amplitude).flat[0]))
    meta = {"kind": kind, "density": density.label, "params": dict(density.params),
            "rng_seed": int(rng_seed), "keys": [int(k) for k in keys], "variance": var}
    return GridField(spec, values, meta)


# --------------------------------------------------------------------------
# martingale approximation


def _check_nodes(t_nodes):
    t_nodes = [float(t) for t in t_nodes]
    if not t_nodes:
        raise ValueError("t_nodes is empty")
    if t_nodes[0] < 0:
        raise ValueError("t_nodes must start at t >= 0")
    if any(b < a for a, b in zip(t_nodes, t_nodes[1:])):
        raise ValueError("t_nodes must be nondecreasing")
    return t_nodes


class LayerCache:
    """Lattice amplitudes of scale layers, reused across replicas."""

    def __init__(self, k, spec):
        self.k, self.spec = k, spec
        self._amp = {}

    def __call__(self, t_lo, t_hi):
        key = (t_lo, t_hi)
        if key not in self._amp:
            self._amp[key] = lattice_amplitude(self.spec, spectrum_increment(self.k, t_lo, t_hi))
        return self._amp[key]


def sample_martingale_path(k, spec, t_nodes, rng_seed, keys=(), cache=None):
    """Cumulative fields ``X*_{t_1}, X*_{t_2}, ...`` from independent scale layers.

    Layer ``j`` covers ``[t_{j-1}, t_j]`` (with ``t_0 = 0``) and draws from
    its own stream ``(*keys, LAYER, j)``, so a prefix of the path does not
    depend on later nodes.
    """
    t_nodes = _check_nodes(t_nodes)
    cache = cache or LayerCache(k, spec)
    out, total, var = [], np.zeros(spec.shape), 0.0
    lo = 0.0
    for j, hi in enumerate(t_nodes):
        if hi > lo:
            amp = cache(lo, hi)
            total = total + _synthesise(spec, amp, rngmod.stream(rng_seed, *keys, rngmod.LAYER, j))
            var += float(lattice_covariance(spec, amp).flat[0])
        out.append(GridField(spec, total.copy(), {
            "kind": "martingale_t", "t": hi, "kernel": k.name, "rng_seed": int(rng_seed),
            "keys": [int(x) for x in keys], "layers": j + 1, "variance": var}))
        lo = hi
    return out


# --------------------------------------------------------------------------
# decomposition of the convolution approximation


class DecompositionSampler:
    """Samples ``(X*_{t_eps}, W_{t_eps}, Z_{t_eps})`` for one ``eps``.

    Amplitudes are computed once and shared by all replicas.
    """

    def __init__(self, k, m, cert, eps, spec):
        if not cert.valid:
            raise ValueError("certificate is not valid")
        if not 0 < eps < cert.a_const:
            raise ValueError(f"eps={eps:g} must lie in (0, a={cert.a_const:g})")
        self.k, self.m, self.cert, self.eps, self.spec = k, m, cert, eps, spec
        self.a = cert.a_const
        self.t = cert.t_eps(eps)
        tol = max(cert.tol, 1e-12)
        self.layers = LayerCache(k, spec)
        self.amp_W = lattice_amplitude(spec, density_W_t(k, m, self.a, self.t), tol)
        self.amp_Z = lattice_amplitude(spec, density_Z_t(k, m, self.a, self.t), tol)

    def __call__(self, rng_seed, keys=()):
        params = {"t": self.t, "eps": self.eps, "a": self.a, "kernel": self.k.name,
                  "mollifier": self.m.name}
        (x_t,) = sample_martingale_path(self.k, self.spec, [self.t], rng_seed, keys, self.layers)
        w = sample_stationary(self.spec, density_W_t(self.k, self.m, self.a, self.t), rng_seed,
                              (*keys, rngmod.W_FIELD), "W_t", self.amp_W)
        z = sample_stationary(self.spec, density_Z_t(self.k, self.m, self.a, self.t), rng_seed,
                              (*keys, rngmod.Z_FIELD), "Z_t", self.amp_Z)
        for f in (x_t, w, z):
            f.meta.update(params)
        total = x_t + w + z
        total.meta.update(params)
        total.meta["kind"] = "sum"
        return {"X_t": x_t, "W_t": w, "Z_t": z, "sum": total}


def sample_decomposed_conv(k, m, cert, eps, spec, rng_seed, keys=()):
    """Independent ``X*_{t_eps}``, ``W_{t_eps}``, ``Z_{t_eps}`` and their sum.

    The sum has the law of the convolution approximation at scale ``eps``
    with ``t_eps = log(a / eps)``.
    """
    return DecompositionSampler(k, m, cert, eps, spec)(rng_seed, keys)


def eps_grid(a, n):
    """Default study grid ``eps_j = a 2^-j``, ``j = 1..n``."""
    return [a * 2.0 ** (-j) for j in range(1, n + 1)]


# --------------------------------------------------------------------------
# persistence


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def save_snapshot(path, grid, values, meta, extra=None):
    """One JSON header line, then ``N^d`` little-endian float64 values (row-major)."""
    header = {"grid": grid.to_dict(), "meta": _jsonable(meta), "seed": meta.get("rng_seed")}
    if extra:
        header.update(_jsonable(extra))
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def load_snapshot(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<f8")
    grid = GridSpec.from_dict(header["grid"])
    return grid, data.reshape(grid.shape).copy(), header


def save_field(path, f, extra=None):
    save_snapshot(path, f.grid, f.values, f.meta, extra)


def load_field(path):
    grid, values, header = load_snapshot(path)
    return GridField(grid, values, header["meta"])
