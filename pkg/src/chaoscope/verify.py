"""Verification suites run by ``chaoscope verify``.

Each runner returns a report dict with a list of checks and a dict of raw
per-replica arrays; a suite passes when all of its asserted checks pass.
"""

import numpy as np

from . import atomic, spectral, stats
from .kernels import make_kernel, make_mollifier


def _check(name, passed, asserted=True, **info):
    return {"name": name, "passed": bool(passed), "asserted": asserted, **info}


def build_kernel(cfg):
    kc = cfg.kernel
    if kc.kind == "ball":
        return make_kernel("ball", kc.dimension)
    if kc.kind == "table":
        return make_kernel("table", kc.dimension, path=kc.path)
    return make_kernel("truncated", kc.dimension, delta=kc.delta, bump_support=kc.bump_support)


def build_mollifier(cfg):
    mc = cfg.mollifier
    if mc.kind == "standard":
        return make_mollifier("standard", cfg.dimension, order=mc.order)
    return make_mollifier("mixture", cfg.dimension, scales=list(mc.scales),
                          weights=list(mc.weights))


def certificate_for(cfg, cache=None):
    """Admissible-constant certificate, read from / written to ``cache`` when given."""
    key = "certificate-" + cfg.hash(["kernel", "mollifier", "regime"])
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return spectral.DecompositionCertificate.from_dict(hit)
    k, m = build_kernel(cfg), build_mollifier(cfg)
    scan = spectral.frequency_scan()
    if cfg.regime.a_const == "auto":
        cert = spectral.find_admissible_a(k, m, scan)
    else:
        cert = spectral.certify(k, m, float(cfg.regime.a_const), scan)
    if cache is not None:
        cache.put(key, cert.to_dict())
    return cert


def suite_decomp(cfg, cache=None):
    cert = certificate_for(cfg, cache)
    k = build_kernel(cfg)
    worst = max(cert.identity_residual.values())
    sup = [cert.sup_KZ_per_t[t] for t in sorted(cert.sup_KZ_per_t)]
    checks = [
        _check("identity_residual", worst <= 1e-10, value=worst, threshold=1e-10),
        _check("min_KW", cert.min_KW >= -1e-12, value=cert.min_KW, threshold=-1e-12),
        _check("min_KZ", cert.min_KZ >= -1e-12, value=cert.min_KZ, threshold=-1e-12),
        _check("sup_KZ_decreasing", all(b <= a for a, b in zip(sup, sup[1:])), value=sup),
        _check("sup_KZ_ratio", sup[-1] <= 1e-2 * sup[0], value=sup[-1] / sup[0], threshold=1e-2),
    ]
    cmp = stats.covariance_comparison(k, [2.0 ** -j for j in range(0, 9)])
    checks.append(_check("truncation_monotone", cmp["monotone"] and cmp["attained"], asserted=False,
                         value=[r["discrepancy"] for r in cmp["rows"]]))
    return {"suite": "decomp", "certificate": cert.to_dict(), "truncation": cmp,
            "checks": checks}, {}


def _unit_box(d):
    return atomic.LebesgueIntensity(np.zeros(d), np.ones(d))


def suite_laplace(cfg, cache=None):
    d, gamma, s = cfg.dimension, cfg.regime.gamma, cfg.sampler
    alpha = atomic.alpha_of(d, gamma)
    nu = _unit_box(d)
    masses = atomic.sample_total_masses(nu.mass, d, gamma, s.z_min, s.replicas, cfg.seed,
                                        compensate=s.compensate)
    summ = stats.EnsembleSummary.from_values(np.exp(-masses))
    target = atomic.laplace_closed_form(nu, lambda x: np.ones(len(x)), gamma)
    bias = atomic.truncation_bias_bound(nu.mass, alpha, s.z_min, 1.0, s.compensate)
    checks = [_check("laplace_phi_one", summ.within(target, 3.0, bias), mean=summ.mean, se=summ.se,
                     target=target, bias_bound=bias)]
    # power tilt with f = 1 + x_1: both sides by simulation
    f = lambda x: 1.0 + x[:, 0]
    n_tilt = min(s.replicas, 10_000)
    lhs = np.exp(-atomic.sample_integrals(nu, gamma, s.z_min, n_tilt, cfg.seed, f, s.compensate,
                                          keys=(1,)))
    tilted = nu.scaled(lambda x: f(x) ** alpha)
    one = lambda x: np.ones(len(x))
    rhs = np.exp(-atomic.sample_integrals(tilted, gamma, s.z_min, n_tilt, cfg.seed, one,
                                          s.compensate, keys=(2,)))
    sl, sr = lhs.std(ddof=1) / np.sqrt(n_tilt), rhs.std(ddof=1) / np.sqrt(n_tilt)
    tilt_bias = 2 * atomic.truncation_bias_bound(nu.mass * 2.0, alpha, s.z_min, 2.0, s.compensate)
    checks.append(_check("power_tilt", abs(lhs.mean() - rhs.mean()) <= 3 * np.hypot(sl, sr) + tilt_bias,
                         lhs=float(lhs.mean()), rhs=float(rhs.mean()), se=float(np.hypot(sl, sr)),
                         closed_form=atomic.laplace_closed_form(tilted, one, gamma)))
    return {"suite": "laplace", "summary": summ.to_dict(), "checks": checks}, {
        "exp_neg_mass": np.exp(-masses), "tilt_lhs": lhs, "tilt_rhs": rhs}


def suite_moments(cfg, cache=None):
    d, gamma, s = cfg.dimension, cfg.regime.gamma, cfg.sampler
    alpha = atomic.alpha_of(d, gamma)
    q = min(1.0 / 3.0, alpha / 2.0)
    masses = atomic.sample_total_masses(1.0, d, gamma, s.z_min, s.replicas, cfg.seed,
                                        compensate=s.compensate)
    summ = stats.EnsembleSummary.from_values(masses ** q)
    target = atomic.fractional_moment_closed_form(1.0, q, gamma, d)
    checks = [_check("fractional_moment", summ.within(target), q=q, mean=summ.mean, se=summ.se,
                     target=target)]
    try:
        atomic.fractional_moment_closed_form(1.0, alpha, gamma, d)
        rejected = False
    except ValueError:
        rejected = True
    checks.append(_check("q_equal_alpha_rejected", rejected))
    neg = stats.EnsembleSummary.from_values(masses ** (-alpha))
    checks.append(_check("negative_moment", neg.within(
        atomic.negative_moment_closed_form(1.0, alpha, gamma, d)), asserted=False, q=alpha,
        mean=neg.mean, se=neg.se, target=atomic.negative_moment_closed_form(1.0, alpha, gamma, d)))
    return {"suite": "moments", "checks": checks}, {"mass_pow_q": masses ** q}


def suite_spectrum(cfg, cache=None):
    d, gamma, s = cfg.dimension, cfg.regime.gamma, cfg.sampler
    alpha = atomic.alpha_of(d, gamma)
    q = cfg.regime.q
    if not 0 < q < alpha:
        raise ValueError(f"regime.q={q:g} must lie in (0, alpha={alpha:.6g})")

    def sampler(r, n, key):
        # P[Leb on rA] has the law of r^{d/alpha} P[Leb on A]; scale z_min alike
        zr = s.z_min * r ** (d / alpha)
        return atomic.sample_total_masses(r ** d, d, gamma, zr, n, cfg.seed, s.compensate,
                                          keys=(int(key[1]) + 10,))

    scales = [2.0 ** -j for j in range(0, 5)]
    fit = stats.multifractal_fit(sampler, q, scales, s.replicas, cfg.seed,
                                 stats.atomic_scaling_exponent(q, gamma, d))
    checks = [_check("atomic_slope", fit.matches(2.0), slope=fit.slope, slope_se=fit.slope_se,
                     target=fit.target),
              _check("xi_gamma_reference", True, asserted=False, value=stats.xi_gamma(q, gamma, d))]
    return {"suite": "spectrum", "fit": fit.to_dict(), "checks": checks}, {}


def suite_kahane(cfg, cache=None):
    res = stats.kahane_battery(50, 8, min(cfg.sampler.replicas, 10_000), cfg.seed)
    n_viol = sum(r["violated"] for r in res)
    checks = [_check("kahane_battery", n_viol == 0, violations=n_viol, pairs=len(res))]
    return {"suite": "kahane", "pairs": res, "checks": checks}, {
        "lhs": np.array([r["lhs"] for r in res]), "rhs": np.array([r["rhs"] for r in res])}


def suite_tails(cfg, cache=None):
    d, gamma, s = cfg.dimension, cfg.regime.gamma, cfg.sampler
    alpha = atomic.alpha_of(d, gamma)
    n = max(s.replicas, 100_000)
    masses = atomic.sample_total_masses(1.0, d, gamma, max(s.z_min, 1e-3), n, cfg.seed,
                                        compensate=s.compensate)
    diag = stats.hill_diagnostics(masses, 0.01, alpha)
    checks = [_check("hill_atomic", diag["within"], **diag)]
    report = {"suite": "tails", "checks": checks}
    if s.field_replicas > 0:
        from .fields import GridSpec
        spec = GridSpec(d, cfg.grid.points_per_side, cfg.grid.side_length)
        study = stats.supercritical_tail_study(build_kernel(cfg), spec, gamma, cfg.regime.t_grid,
                                               s.field_replicas, cfg.seed, threads=s.threads)
        report["field_study"] = study
        checks.append(_check("field_tail_trend", bool(study["trending"]), asserted=False))
    return report, {"total_mass": masses}


RUNNERS = {"decomp": suite_decomp, "laplace": suite_laplace, "moments": suite_moments,
           "spectrum": suite_spectrum, "kahane": suite_kahane, "tails": suite_tails}


def suite_passed(report):
    return all(c["passed"] for c in report["checks"] if c["asserted"])
