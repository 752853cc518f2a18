"""``chaoscope`` command line: decompose, simulate-field, measure, sample-atomic, verify, report."""

import argparse
import csv
import glob
import json
import os
import sys

import numpy as np

from . import atomic, fields, gmc, spectral, verify
from .config import SUITES, ConfigError, RunConfig, load_config, validate
from .parallel import THREADS_ENV, default_threads


class DiskCache:
    """JSON blobs under ``<out>/cache`` keyed by config hash."""

    def __init__(self, root):
        self.root = os.path.join(root, "cache")

    def _path(self, key):
        return os.path.join(self.root, key + ".json")

    def get(self, key):
        try:
            with open(self._path(key)) as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None

    def put(self, key, value):
        os.makedirs(self.root, exist_ok=True)
        with open(self._path(key), "w") as fh:
            json.dump(_clean(value), fh, sort_keys=True, indent=1)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


class Artifacts:
    """Writes JSON and CSV outputs stamped with config hash and seed."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.out = cfg.out
        self.stamp = {"config_hash": cfg.hash(), "seed": cfg.seed}

    def path(self, name):
        os.makedirs(self.out, exist_ok=True)
        return os.path.join(self.out, name)

    def json(self, name, payload):
        data = dict(_clean(payload), **self.stamp)
        with open(self.path(name), "w") as fh:
            json.dump(data, fh, sort_keys=True, indent=1)
            fh.write("\n")

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            fh.write(f"# config_hash={self.stamp['config_hash']} seed={self.stamp['seed']}\n")
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _grid(cfg):
    return fields.GridSpec(cfg.dimension, cfg.grid.points_per_side, cfg.grid.side_length)


# --------------------------------------------------------------------------
# subcommands


def cmd_decompose(cfg, args):
    art = Artifacts(cfg)
    cert = verify.certificate_for(cfg, DiskCache(cfg.out))
    art.json("certificate.json", cert.to_dict())
    k, m = verify.build_kernel(cfg), verify.build_mollifier(cfg)
    radii = np.geomspace(1e-3, 1e2, 200)
    rows = []
    for t in sorted(set([0.0, *cfg.regime.t_grid])):
        for row in spectral.decomposition_table(k, m, cert.a_const, t, radii):
            rows.append([t, *row])
    art.csv("decomposition.csv", ["t", "omega", "K_W", "K_W_t", "K_Z_t", "Delta_t"], rows)
    worst = max(cert.identity_residual.values())
    print(f"a = {cert.a_const:g}  min K_W = {cert.min_KW:.3g}  min K_Z = {cert.min_KZ:.3g}"
          f"  max identity residual = {worst:.3g}")
    return 0 if cert.valid and worst <= 1e-10 else 1


def cmd_simulate_field(cfg, args):
    art = Artifacts(cfg)
    k, spec = verify.build_kernel(cfg), _grid(cfg)
    rows = []
    if args.kind == "martingale":
        cache = fields.LayerCache(k, spec)
        for r in range(args.count):
            for f in fields.sample_martingale_path(k, spec, cfg.regime.t_grid, cfg.seed, (1, r), cache):
                name = f"field_martingale_r{r}_t{f.meta['t']:g}.bin"
                fields.save_field(art.path(name), f, art.stamp)
                rows.append([r, "martingale_t", f.meta["t"], f.variance, name])
    else:
        m = verify.build_mollifier(cfg)
        cert = verify.certificate_for(cfg, DiskCache(cfg.out))
        eps_list = cfg.regime.eps_grid or fields.eps_grid(cert.a_const, 3)
        for j, eps in enumerate(eps_list):
            sampler = fields.DecompositionSampler(k, m, cert, eps, spec)
            for r in range(args.count):
                parts = sampler(cfg.seed, (1, r, 100 + j))
                want = {"conv": "sum", "W": "W_t", "Z": "Z_t"}[args.kind]
                for key in (("X_t", "W_t", "Z_t", "sum") if args.kind == "conv" else (want,)):
                    f = parts[key]
                    name = f"field_{key}_eps{eps:.6g}_r{r}.bin"
                    fields.save_field(art.path(name), f, art.stamp)
                    rows.append([r, key, sampler.t, f.variance, name])
    art.csv("fields.csv", ["replica", "kind", "t", "variance", "file"], rows)
    print(f"wrote {len(rows)} field snapshots to {cfg.out}")
    return 0


def cmd_measure(cfg, args):
    art = Artifacts(cfg)
    k, spec = verify.build_kernel(cfg), _grid(cfg)
    d, gamma = cfg.dimension, cfg.regime.gamma
    gc = gmc.gamma_critical(d)
    if args.regime == "sub" and not gamma < gc:
        raise ConfigError([f"regime sub needs gamma < sqrt(2d) = {gc:.6g}"])
    if args.regime == "super" and not gamma > gc:
        raise ConfigError([f"regime super needs gamma > sqrt(2d) = {gc:.6g}"])
    cache = fields.LayerCache(k, spec)
    rows = []
    for r in range(args.count):
        for f in fields.sample_martingale_path(k, spec, cfg.regime.t_grid, cfg.seed, (1, r), cache):
            t = f.meta["t"]
            if args.regime == "sub":
                mu = gmc.chaos_measure(f, gamma, variance=t)
            elif args.regime == "critical":
                mu = gmc.derivative_measure(f, t)
            else:
                mu = gmc.chaos_measure(f, gamma, variance=t,
                                       log_norm=gmc.log_supercritical_norm(d, gamma, "t", t),
                                       norm_mode="t")
            name = f"measure_{args.regime}_r{r}_t{t:g}.bin"
            gmc.save_measure(art.path(name), mu, art.stamp)
            rows.append([r, t, mu.total_mass, gmc.top_cells_fraction(mu), int(mu.overflow),
                         mu.meta.get("truncated_fraction", 0.0), name])
    art.csv("measures.csv", ["replica", "t", "total_mass", "top10_fraction", "overflow",
                             "truncated_fraction", "file"], rows)
    print(f"wrote {len(rows)} measure snapshots to {cfg.out}")
    return 0


def cmd_sample_atomic(cfg, args):
    art = Artifacts(cfg)
    d, gamma, s = cfg.dimension, cfg.regime.gamma, cfg.sampler
    nu = atomic.LebesgueIntensity(np.zeros(d), np.ones(d))
    rows = []
    for r in range(args.count):
        atoms = atomic.sample_atomic(nu, gamma, s.z_min, s.compensate, cfg.seed, (1, r))
        atoms.meta.update(art.stamp)
        name = f"atoms_r{r}.csv"
        atomic.save_atoms(art.path(name), atoms)
        rows.append([r, atoms.n_atoms, atoms.total_mass, name])
    art.csv("atomic.csv", ["replica", "n_atoms", "total_mass", "file"], rows)
    print(f"wrote {len(rows)} atom lists to {cfg.out}")
    return 0


def cmd_verify(cfg, args):
    suites = args.suite or list(cfg.suites)
    if not suites:
        print("no suites requested")
        return 0
    order = [s for s in SUITES if s in suites]
    cache = DiskCache(cfg.out)
    art = Artifacts(cfg)
    failures = []
    print(f"{'suite':<10} {'check':<24} {'asserted':<9} result")
    for name in order:
        report, raw = verify.RUNNERS[name](cfg, cache)
        ok = verify.suite_passed(report)
        report["passed"] = ok
        art.json(f"verify_{name}.json", report)
        if raw:
            keys = sorted(raw)
            n = max(len(raw[k]) for k in keys)
            rows = [[i] + [raw[k][i] if i < len(raw[k]) else "" for k in keys] for i in range(n)]
            art.csv(f"verify_{name}.csv", ["replica"] + keys, rows)
        for c in report["checks"]:
            print(f"{name:<10} {c['name']:<24} {str(c['asserted']):<9} "
                  f"{'PASS' if c['passed'] else 'FAIL'}")
            if c["asserted"] and not c["passed"]:
                failures.append({"suite": name, "check": c["name"]})
    art.json("verify_summary.json", {"suites": order, "failures": failures,
                                     "passed": not failures})
    if failures:
        print(json.dumps({"failures": failures}))
    return 1 if failures else 0


def cmd_report(cfg, args):
    paths = sorted(glob.glob(os.path.join(cfg.out, "verify_*.json")))
    paths = [p for p in paths if not p.endswith("verify_summary.json")]
    if not paths:
        print(f"no reports in {cfg.out}")
        return 0
    bad = 0
    print(f"{'suite':<10} {'passed':<7} {'config_hash':<17} seed")
    for p in paths:
        with open(p) as fh:
            rep = json.load(fh)
        bad += not rep.get("passed", False)
        print(f"{rep['suite']:<10} {str(rep.get('passed')):<7} {rep['config_hash']:<17} {rep['seed']}")
        for c in rep["checks"]:
            if not c["passed"]:
                print(f"    {'FAIL' if c['asserted'] else 'note'}: {c['name']}")
    return 1 if bad else 0


COMMANDS = {"decompose": cmd_decompose, "simulate-field": cmd_simulate_field,
            "measure": cmd_measure, "sample-atomic": cmd_sample_atomic, "verify": cmd_verify,
            "report": cmd_report}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration (defaults if omitted)")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--threads", type=int,
                        help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p = argparse.ArgumentParser(prog="chaoscope", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("decompose", parents=[common], help="certify the Fourier decomposition")
    sf = sub.add_parser("simulate-field", parents=[common], help="sample field snapshots")
    sf.add_argument("--kind", choices=["martingale", "conv", "W", "Z"], default="martingale")
    sf.add_argument("--count", type=int, default=1)
    me = sub.add_parser("measure", parents=[common], help="sample chaos measures")
    me.add_argument("--regime", choices=["sub", "critical", "super"], required=True)
    me.add_argument("--count", type=int, default=1)
    sa = sub.add_parser("sample-atomic", parents=[common], help="sample atomic measures")
    sa.add_argument("--count", type=int, default=1)
    ve = sub.add_parser("verify", parents=[common], help="run verification suites")
    ve.add_argument("--suite", action="append", choices=list(SUITES))
    sub.add_parser("report", parents=[common], help="summarise verification reports")
    return p


def resolve_config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    cfg.sampler.threads = args.threads or cfg.sampler.threads or default_threads()
    if getattr(args, "suite", None):
        cfg.suites = tuple(args.suite)
    errors = validate(cfg)
    if errors:
        raise ConfigError(errors)
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(json.dumps({"config_errors": exc.violations}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
