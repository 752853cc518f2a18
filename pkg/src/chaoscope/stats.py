"""Monte Carlo estimators with uncertainty, and the verification studies."""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import rng as rngmod
from .kernels import chi_table


@dataclass
class EnsembleSummary:
    n: int
    values: np.ndarray
    mean: float
    se: float
    quantiles: dict
    flags: dict = field(default_factory=dict)

    @classmethod
    def from_values(cls, values, flags=None, probs=(0.05, 0.25, 0.5, 0.75, 0.95)):
        v = np.asarray(values, dtype=float)
        n = v.size
        se = float(v.std(ddof=1) / np.sqrt(n)) if n > 1 and np.ptp(v) > 0 else 0.0
        qs = {float(p): float(q) for p, q in zip(probs, np.quantile(v, probs))}
        return cls(n, v, float(v.mean()), se, qs, dict(flags or {}))

    def within(self, target, k=3.0, bias=0.0):
        return abs(self.mean - target) <= k * self.se + bias

    def to_dict(self):
        return {"n": self.n, "mean": self.mean, "se": self.se,
                "quantiles": {repr(p): q for p, q in self.quantiles.items()}, "flags": self.flags}


def mc_laplace(measure_sampler, phi, replicas, seed):
    """Summary of ``exp(-mu(phi))`` over independent draws.

    ``measure_sampler(seed, keys)`` must return an object with an
    ``integrate(phi)`` method (grid or atomic measure) and optionally an
    ``overflow`` attribute.
    """
    if replicas < 100:
        raise ValueError("need at least 100 replicas")
    vals, overflow = np.empty(replicas), 0
    for r in range(replicas):
        mu = measure_sampler(seed, (rngmod.REPLICA, r))
        vals[r] = np.exp(-mu.integrate(phi))
        overflow += int(getattr(mu, "overflow", False))
    return EnsembleSummary.from_values(vals, {"overflow": overflow})


# --------------------------------------------------------------------------
# multifractal scaling


def xi_gamma(q, gamma, d):
    """``sqrt(2d) gamma q - gamma^2 q^2 / 2``."""
    return float(np.sqrt(2 * d) * gamma * q - gamma ** 2 * q ** 2 / 2)


def atomic_scaling_exponent(q, gamma, d):
    """Moment exponent of the atomic measure with Lebesgue intensity: ``sqrt(d/2) gamma q``."""
    return float(np.sqrt(d / 2.0) * gamma * q)


@dataclass
class ScalingFit:
    scales: np.ndarray
    moments: np.ndarray
    moment_se: np.ndarray
    slope: float
    slope_se: float
    intercept: float
    residuals: np.ndarray
    target: float = None

    def matches(self, k=2.0):
        return abs(self.slope - self.target) <= k * self.slope_se

    def to_dict(self):
        return {"scales": self.scales.tolist(), "moments": self.moments.tolist(),
                "moment_se": self.moment_se.tolist(), "slope": self.slope,
                "slope_se": self.slope_se, "intercept": self.intercept,
                "residuals": self.residuals.tolist(), "target": self.target}


def fit_loglog(scales, moments, moment_se, target=None):
    """Weighted least squares of ``log E[M^q]`` on ``log r``.

    Weights come from the delta-method variance ``(se / mean)^2``; the
    slope SE is the usual WLS standard error.
    """
    x = np.log(scales)
    y = np.log(moments)
    var = np.maximum((np.asarray(moment_se) / np.asarray(moments)) ** 2, 1e-300)
    w = 1.0 / var
    X = np.column_stack([np.ones_like(x), x])
    cov = np.linalg.inv(X.T @ (w[:, None] * X))
    beta = cov @ (X.T @ (w * y))
    resid = y - X @ beta
    return ScalingFit(np.asarray(scales), np.asarray(moments), np.asarray(moment_se),
                      float(beta[1]), float(np.sqrt(cov[1, 1])), float(beta[0]), resid, target)


def multifractal_fit(measure_sampler, q, scales, replicas, seed, target=None):
    """Log-log fit of ``E[mu(rA)^q]`` against ``r``.

    ``measure_sampler(r, n, seed)`` returns ``n`` samples of the mass of
    ``rA``. Scales must span at least two dyadic octaves.
    """
    scales = np.sort(np.asarray(scales, dtype=float))
    if scales.size < 4:
        raise ValueError("need at least 4 scales")
    if scales[-1] / scales[0] < 4.0:
        raise ValueError("scales must span at least two octaves")
    if q == 0:
        ones = np.ones(scales.size)
        return ScalingFit(scales, ones, np.zeros(scales.size), 0.0, 0.0, 0.0,
                          np.zeros(scales.size), 0.0 if target is None else target)
    moments, ses = [], []
    for j, r in enumerate(scales):
        m = np.asarray(measure_sampler(r, replicas, (seed, j)), dtype=float) ** q
        moments.append(m.mean())
        ses.append(m.std(ddof=1) / np.sqrt(m.size))
    return fit_loglog(scales, np.array(moments), np.array(ses), target)


# --------------------------------------------------------------------------
# tail index


class DegenerateSampleError(ValueError):
    pass


def hill_index(samples, top_fraction=0.01):
    """Hill estimate of the tail index from the top ``top_fraction`` order statistics."""
    x = np.asarray(samples, dtype=float)
    if x.size < 1000:
        raise ValueError("need at least 1000 samples")
    if not 0 < top_fraction <= 0.05:
        raise ValueError("top_fraction must lie in (0, 0.05]")
    if np.any(x <= 0):
        raise ValueError("samples must be positive")
    k = max(int(x.size * top_fraction), 2)
    top = np.partition(x, x.size - k - 1)[x.size - k - 1:]
    top.sort()
    threshold = top[0]
    logs = np.log(top[1:] / threshold)
    if threshold <= 0 or logs.mean() <= 0:
        raise DegenerateSampleError("top order statistics are tied; no tail to estimate")
    return float(1.0 / logs.mean())


def hill_diagnostics(samples, top_fraction=0.01, target=None, rel_tol=0.1):
    """Hill estimate with its asymptotic SE ``alpha / sqrt(k)`` and flags."""
    x = np.asarray(samples, dtype=float)
    k = max(int(x.size * top_fraction), 2)
    est = hill_index(x, top_fraction)
    out = {"n": int(x.size), "k": k, "alpha_hat": est, "se": est / np.sqrt(k)}
    # near alpha = 1 the regularly varying correction decays slowly
    out["wide_band"] = bool(target is not None and target > 0.9)
    if target is not None:
        out["target"] = target
        out["rel_error"] = abs(est - target) / target
        out["within"] = out["rel_error"] <= rel_tol
    return out


def hill_drift(sampler, sizes, seed, k_top=50, rel_change=0.2):
    """Hill estimates at increasing sample sizes with a fixed number of top order statistics.

    For a power tail the estimate is stable; for a lighter tail it grows
    without bound (its reciprocal drifts to 0). ``drifting`` flags a
    monotone change larger than ``rel_change`` across the scan.
    """
    ests = []
    for j, n in enumerate(sizes):
        frac = k_top / n
        ests.append(hill_index(sampler(n, rngmod.stream(seed, rngmod.BLOCK, j)), frac))
    diffs = np.diff(ests)
    monotone = bool(np.all(diffs > 0) or np.all(diffs < 0))
    change = abs(ests[-1] - ests[0]) / abs(ests[0])
    return {"sizes": list(sizes), "k_top": k_top, "estimates": ests,
            "drifting": monotone and change > rel_change}


# --------------------------------------------------------------------------
# Kahane convexity inequality


class DominanceError(ValueError):
    pass


def _psd_factor(cov, tol=1e-10):
    cov = np.asarray(cov, dtype=float)
    if not np.allclose(cov, cov.T):
        raise ValueError("covariance must be symmetric")
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() < -tol * max(1.0, abs(vals.max())):
        raise ValueError("covariance is not positive semidefinite")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _kahane_side(cov, f, convex_eval, replicas, gen):
    A = _psd_factor(cov)
    var = np.diag(cov)
    if np.allclose(A, 0.0):
        v = np.full(replicas, float(convex_eval(np.sum(f))))
        return v
    g = gen.standard_normal((replicas, cov.shape[0])) @ A.T
    total = np.exp(g - 0.5 * var) @ f
    return convex_eval(total)


def kahane_check(cov_X, cov_Y, f, convex_eval, replicas, seed, keys=()):
    """Monte Carlo sides of ``E F(sum f e^{X - var/2}) <= E F(sum f e^{Y - var/2})``.

    Returns a dict with both sides, their SEs and ``violated`` (lhs above
    rhs by more than 3 combined SEs).
    """
    cov_X, cov_Y = np.atleast_2d(cov_X).astype(float), np.atleast_2d(cov_Y).astype(float)
    f = np.atleast_1d(np.asarray(f, dtype=float))
    if cov_X.shape != cov_Y.shape or cov_X.shape[0] != f.size:
        raise ValueError("shape mismatch")
    if np.any(cov_X > cov_Y + 1e-12):
        raise DominanceError("cov_X <= cov_Y entrywise fails")
    lhs = _kahane_side(cov_X, f, convex_eval, replicas, rngmod.stream(seed, *keys, rngmod.KAHANE, 0))
    rhs = _kahane_side(cov_Y, f, convex_eval, replicas, rngmod.stream(seed, *keys, rngmod.KAHANE, 1))
    sl = lhs.std(ddof=1) / np.sqrt(replicas)
    sr = rhs.std(ddof=1) / np.sqrt(replicas)
    band = 3.0 * float(np.hypot(sl, sr))
    return {"lhs": float(lhs.mean()), "rhs": float(rhs.mean()), "lhs_se": float(sl),
            "rhs_se": float(sr), "band": band, "violated": bool(lhs.mean() > rhs.mean() + band)}


CONVEX_FAMILY = {
    "exp_neg": lambda x: np.exp(-x),
    "square": lambda x: x ** 2,
    "neg_sqrt": lambda x: -np.sqrt(x),
    "neg_log": lambda x: -np.log(x),
    "x_log_x": lambda x: x * np.log(x),
}


def random_dominated_pair(size, gen, scale=0.6):
    """PSD pair with ``cov_Y = cov_X + B B^T``, ``B >= 0`` entrywise."""
    A = gen.normal(scale=scale, size=(size, size))
    B = np.abs(gen.normal(scale=scale, size=(size, size)))
    cov_x = A @ A.T / size
    cov_y = cov_x + B @ B.T / size
    return cov_x, cov_y


def kahane_battery(n_pairs=50, max_size=8, replicas=10_000, seed=0):
    """Run :func:`kahane_check` on random dominated pairs; returns per-pair results."""
    gen = rngmod.stream(seed, rngmod.KAHANE, 1000)
    names = sorted(CONVEX_FAMILY)
    results = []
    for i in range(n_pairs):
        size = int(gen.integers(1, max_size + 1))
        cx, cy = random_dominated_pair(size, gen)
        f = gen.uniform(0.1, 1.0, size)
        name = names[i % len(names)]
        res = kahane_check(cx, cy, f, CONVEX_FAMILY[name], replicas, seed, (i,))
        res.update(pair=i, size=size, convex=name)
        results.append(res)
    return results


# --------------------------------------------------------------------------
# truncated-kernel covariance comparison


def covariance_comparison(k, deltas, eps_target=1e-2, lags=None, st_pairs=None, bump_support=0.5):
    """Largest ``|int_s^t [K - K_delta](e^r x) dr|`` over lags and scale pairs.

    With ``v = e^r x`` the integral is ``int h(v)/v dv`` where
    ``h(v) = K(v) (1 - chi(delta v))``; it is evaluated as differences of a
    cumulative integral on a fine grid in ``v``.
    """
    deltas = [float(x) for x in deltas]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("delta list must be strictly decreasing")
    lags = np.asarray([0.25, 0.5, 1.0, 2.0, 4.0] if lags is None else lags, dtype=float)
    st_pairs = st_pairs or [(0.0, t) for t in (1.0, 2.0, 4.0, 8.0)] + [(1.0, 4.0), (2.0, 8.0)]
    chi = chi_table(k.dimension, bump_support)
    rows = []
    for delta in deltas:
        h = lambda v: k(v) * (1.0 - chi(delta * v))
        worst, where = 0.0, None
        for x in lags:
            for s, t in st_pairs:
                if t <= s or x == 0:
                    continue
                val = _log_integral(h, abs(x) * np.exp(s), abs(x) * np.exp(t))
                if abs(val) > worst:
                    worst, where = abs(val), (float(x), s, t)
        rows.append({"delta": delta, "discrepancy": worst, "argmax": where})
    disc = [r["discrepancy"] for r in rows]
    meeting = [r["delta"] for r in rows if r["discrepancy"] <= eps_target]
    return {"rows": rows, "eps_target": eps_target,
            "monotone": bool(all(b <= a for a, b in zip(disc, disc[1:]))),
            "largest_delta_meeting_target": meeting[0] if meeting else None,
            "smallest_delta_meeting_target": meeting[-1] if meeting else None,
            "attained": bool(meeting)}


def _log_integral(fn, lo, hi, panel=np.pi / 4):
    """``int_lo^hi fn(v) / v dv`` by composite 12-point Gauss-Legendre."""
    if hi <= lo:
        return 0.0
    edges = np.linspace(lo, hi, int(np.ceil((hi - lo) / panel)) + 1)
    # refine geometrically near a small lower end where 1/v varies fast
    if lo < 1.0:
        edges = np.unique(np.concatenate([np.geomspace(lo, min(hi, 1.0), 16), edges]))
    xg, wg = np.polynomial.legendre.leggauss(12)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    v = (mid[:, None] + half[:, None] * xg).ravel()
    w = (half[:, None] * wg).ravel()
    return float(np.sum(w * fn(v) / v))


def martingale_covariance(k, x, t):
    """``int_0^t K(e^r x) dr`` by adaptive quadrature (scalar oracle)."""
    val, _ = integrate.quad(lambda r: float(k(np.array([np.exp(r) * abs(x)]))[0]), 0.0, t,
                            epsabs=1e-12, epsrel=1e-10, limit=400)
    return val


# --------------------------------------------------------------------------
# supercritical tail study


def supercritical_tail_study(k, spec, gamma, t_list, replicas, seed, top_fraction=0.01,
                             atomic_samples=100_000, z_min=1e-3, threads=None):
    """Hill index of ``mu*_{gamma,t}([0,1]^d)`` per ``t``, next to the atomic ground truth.

    Grid measures use the supercritical ``t`` normalisation; the box
    ``[0,1]^d`` must lie inside the grid. Returns the per-``t`` estimates and
    whether the distance to ``alpha`` shrinks from the first to the last ``t``.
    """
    from .atomic import alpha_of, sample_total_masses
    from .fields import LayerCache, sample_martingale_path
    from .gmc import chaos_measure, log_supercritical_norm
    from .parallel import map_replicas

    d = spec.dimension
    alpha = alpha_of(d, gamma)
    t_list = sorted(float(t) for t in t_list)
    cache = LayerCache(k, spec)
    # fill the cache before threads share it
    lo = 0.0
    for t in t_list:
        if t > lo:
            cache(lo, t)
        lo = t

    def one(r):
        path = sample_martingale_path(k, spec, t_list, seed, (rngmod.REPLICA, r), cache)
        masses = []
        for f in path:
            mu = chaos_measure(f, gamma, variance=f.meta["t"],
                               log_norm=log_supercritical_norm(d, gamma, "t", f.meta["t"]))
            masses.append(mu.mass_in_box(0.0, 1.0))
        return masses

    masses = np.array(map_replicas(one, replicas, threads))
    per_t = []
    for j, t in enumerate(t_list):
        row = {"t": t, "median_mass": float(np.median(masses[:, j]))}
        if replicas >= 1000:
            row.update(hill_diagnostics(masses[:, j], top_fraction, alpha))
        per_t.append(row)
    truth = sample_total_masses(1.0, d, gamma, z_min, atomic_samples, seed, keys=(rngmod.ATOMS,))
    ground = hill_diagnostics(truth, top_fraction, alpha)
    trending = None
    if replicas >= 1000 and len(per_t) > 1:
        trending = bool(abs(per_t[-1]["alpha_hat"] - alpha) < abs(per_t[0]["alpha_hat"] - alpha))
    return {"alpha": alpha, "per_t": per_t, "atomic_ground_truth": ground, "trending": trending,
            "wide_band": bool(alpha > 0.9)}
