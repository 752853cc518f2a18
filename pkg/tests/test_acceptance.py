"""Acceptance criteria, one test each, with wall-clock limits.

Each criterion prints a single ``PASS``/``FAIL`` line. Run standalone with
``python tests/test_acceptance.py`` or through pytest.
"""

import sys
import time

import numpy as np
import pytest

from chaoscope import atomic, gmc, spectral, stats
from chaoscope.fields import GridSpec, LayerCache, sample_martingale_path
from chaoscope.kernels import make_kernel, make_mollifier

SEED = 0
ONE = lambda x: np.ones(len(x))


def _ball_pair(d):
    return make_kernel("ball", d), make_mollifier("standard", d)


def criterion_1():
    scan = spectral.frequency_scan()
    worst = {}
    for d in (1, 2):
        k, m = _ball_pair(d)
        worst[d] = max(spectral.verify_identity(k, m, 0.5, t, scan) for t in spectral.DEFAULT_T_GRID)
    return all(v <= 1e-10 for v in worst.values()), f"max residual d=1 {worst[1]:.2e}, d=2 {worst[2]:.2e}"


def criterion_2():
    scan = spectral.frequency_scan()
    ok, info = True, []
    for d in (1, 2):
        k, m = _ball_pair(d)
        cert = spectral.find_admissible_a(k, m, scan)
        sup = [cert.sup_KZ_per_t[t] for t in sorted(cert.sup_KZ_per_t)]
        ok &= (cert.min_KW >= -1e-12 and cert.min_KZ >= -1e-12
               and all(b < a for a, b in zip(sup, sup[1:])) and sup[-1] <= 1e-2 * sup[0])
        info.append(f"d={d} a={cert.a_const:g} minW={cert.min_KW:.1e} minZ={cert.min_KZ:.1e} "
                    f"supZ16/supZ0={sup[-1] / sup[0]:.1e}")
    return ok, "; ".join(info)


def criterion_3():
    k = make_kernel("ball", 1)
    g = GridSpec(1, 4096, 64.0)
    t = 1.0
    lags = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0]
    idx = [int(round(h / g.spacing)) for h in lags]
    cache = LayerCache(k, g)
    est = np.empty((2000, len(lags)))
    for r in range(2000):
        v = sample_martingale_path(k, g, [t], SEED, (3, r), cache)[0].values
        # spatial average over all base points, one number per replica and lag
        est[r] = [np.mean(v * np.roll(v, -i)) for i in idx]
    mean, se = est.mean(axis=0), est.std(axis=0, ddof=1) / np.sqrt(est.shape[0])
    target = np.array([t] + [stats.martingale_covariance(k, h, t) for h in lags[1:]])
    z = np.abs(mean - target) / se
    return bool(np.all(z <= 3.0)), f"max |z| over 8 lags {z.max():.2f}, var {mean[0]:.4f} vs t={t:g}"


def criterion_4():
    z_min = 1e-4
    masses = atomic.sample_total_masses(1.0, 2, 3.0, z_min, 10_000, SEED, compensate=True)
    s = stats.EnsembleSummary.from_values(np.exp(-masses))
    nu = atomic.LebesgueIntensity([0, 0], [1, 1])
    target = atomic.laplace_closed_form(nu, ONE, 3.0)
    bias = atomic.truncation_bias_bound(1.0, 2 / 3, z_min, 1.0, compensate=True)
    return s.within(target, 3.0, bias), (f"mean {s.mean:.5f} se {s.se:.5f} target {target:.5f} "
                                         f"bias bound {bias:.1e}")


def criterion_5():
    nu = atomic.LebesgueIntensity([0, 0], [1, 1])
    f = lambda x: 1.0 + x[:, 0]
    z_min, n, alpha = 1e-3, 10_000, 2.0 / 3.0
    lhs = np.exp(-atomic.sample_integrals(nu, 3.0, z_min, n, SEED, f, True, keys=(1,)))
    tilted = nu.scaled(lambda x: f(x) ** alpha)
    rhs = np.exp(-atomic.sample_integrals(tilted, 3.0, z_min, n, SEED, ONE, True, keys=(2,)))
    se = np.hypot(lhs.std(ddof=1), rhs.std(ddof=1)) / np.sqrt(n)
    gap = abs(lhs.mean() - rhs.mean())
    return bool(gap <= 3 * se), f"lhs {lhs.mean():.5f} rhs {rhs.mean():.5f} gap/se {gap / se:.2f}"


def criterion_6():
    q = 1.0 / 3.0
    masses = atomic.sample_total_masses(1.0, 2, 3.0, 1e-4, 10_000, SEED, compensate=True)
    s = stats.EnsembleSummary.from_values(masses ** q)
    target = atomic.fractional_moment_closed_form(1.0, q, 3.0, 2)
    try:
        atomic.fractional_moment_closed_form(1.0, 2.0 / 3.0, 3.0, 2)
        rejected = False
    except ValueError:
        rejected = True
    return s.within(target) and rejected, (f"mean {s.mean:.4f} se {s.se:.4f} target {target:.4f}, "
                                           f"q=alpha rejected {rejected}")


def criterion_7():
    masses = atomic.sample_total_masses(1.0, 2, 3.0, 1e-3, 100_000, SEED, compensate=True)
    diag = stats.hill_diagnostics(masses, 0.01, 2.0 / 3.0)
    return diag["within"], f"hill {diag['alpha_hat']:.4f} rel error {diag['rel_error']:.3f}"


def criterion_8():
    res = stats.kahane_battery(50, 8, 10_000, SEED)
    viol = sum(r["violated"] for r in res)
    margin = min(r["rhs"] - r["lhs"] for r in res)
    return viol == 0, f"{viol} violations in {len(res)} pairs, min rhs-lhs {margin:.3g}"


def criterion_9():
    ok, info = True, []
    for d in (1, 2):
        rep = stats.covariance_comparison(make_kernel("ball", d), [2.0 ** -j for j in range(9)], 1e-2)
        ok &= rep["monotone"] and rep["attained"]
        info.append(f"d={d} monotone {rep['monotone']} first delta below 1e-2: "
                    f"{rep['largest_delta_meeting_target']}")
    return ok, "; ".join(info)


def criterion_10():
    k = make_kernel("ball", 1)
    g = GridSpec(1, 2048, 16.0)
    t, gamma = 3.0, 1.0
    cache = LayerCache(k, g)
    masses = np.empty(2000)
    for r in range(2000):
        (f,) = sample_martingale_path(k, g, [t], SEED, (10, r), cache)
        masses[r] = gmc.chaos_measure(f, gamma, variance=t).mass_in_box(0.0, 1.0)
    s = stats.EnsembleSummary.from_values(masses)
    return s.within(1.0), f"mean mass {s.mean:.4f} se {s.se:.4f}"


def criterion_11(replicas=100):
    d, gamma = 2, 3.0
    k = make_kernel("ball", d)
    g = GridSpec(d, 512, 1.0)
    t_grid = [2.0, 4.0, 6.0, 8.0]
    cache = LayerCache(k, g)
    frac = np.empty((replicas, len(t_grid)))
    for r in range(replicas):
        for j, f in enumerate(sample_martingale_path(k, g, t_grid, SEED, (11, r), cache)):
            t = f.meta["t"]
            mu = gmc.chaos_measure(f, gamma, variance=t, norm_mode="t",
                                   log_norm=gmc.log_supercritical_norm(d, gamma, "t", t))
            frac[r, j] = gmc.top_cells_fraction(mu, 10)
    med = np.median(frac, axis=0)
    ok = bool(np.all(np.diff(med) > 0))
    return ok, "median top-10 fraction " + ", ".join(f"t={t:g}: {m:.3g}" for t, m in zip(t_grid, med))


LIMITS = {1: 10, 2: 30, 3: 120, 4: 60, 5: 120, 6: 60, 7: 120, 8: 120, 9: 30, 10: 60, 11: 600}
CRITERIA = {n: globals()[f"criterion_{n}"] for n in LIMITS}


def run_criterion(n, emit=print):
    start = time.perf_counter()
    ok, detail = CRITERIA[n]()
    elapsed = time.perf_counter() - start
    in_time = elapsed < LIMITS[n]
    status = "PASS" if ok and in_time else "FAIL"
    emit(f"criterion {n:>2}: {status}  ({elapsed:.1f} s of {LIMITS[n]} s)  {detail}")
    return bool(ok), in_time


@pytest.mark.parametrize("n", sorted(LIMITS))
def test_criterion(n, request):
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    emit = (lambda line: reporter.write_line("\n" + line)) if reporter else print
    ok, in_time = run_criterion(n, emit)
    assert ok, f"criterion {n} failed"
    assert in_time, f"criterion {n} exceeded {LIMITS[n]} s"


if __name__ == "__main__":
    results = [run_criterion(n) for n in sorted(LIMITS)]
    sys.exit(0 if all(a and b for a, b in results) else 1)
