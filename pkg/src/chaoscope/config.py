"""Run configuration: an INI document with flat sections.

Schema (defaults in brackets)::

    [kernel]     kind (ball|table|truncated) [ball]; dimension [2];
                 path (table); delta, bump_support (truncated)
    [mollifier]  kind (standard|mixture) [standard]; order [1];
                 scales, weights (mixture, comma separated)
    [grid]       points_per_side [256]; side_length [1.0]
    [regime]     gamma [3.0]; t_grid [2,4,6,8]; eps_grid []; a_const [auto]; q [0.2]
    [sampler]    replicas [1000]; z_min [1e-4]; compensate [true];
                 field_replicas [0]; threads []
    [run]        suites [] (any of decomp, laplace, moments, spectrum,
                 kahane, tails); seed [0]; out [results]
"""

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

SUITES = ("decomp", "laplace", "moments", "spectrum", "kahane", "tails")
SUPERCRITICAL_SUITES = ("laplace", "moments", "spectrum", "tails")


class ConfigError(ValueError):
    """Carries every violation found while parsing."""

    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass
class KernelConfig:
    kind: str = "ball"
    dimension: int = 2
    path: str = ""
    delta: float = 0.1
    bump_support: float = 0.5


@dataclass
class MollifierConfig:
    kind: str = "standard"
    order: int = 1
    scales: tuple = ()
    weights: tuple = ()


@dataclass
class GridConfig:
    points_per_side: int = 256
    side_length: float = 1.0


@dataclass
class RegimeConfig:
    gamma: float = 3.0
    t_grid: tuple = (2.0, 4.0, 6.0, 8.0)
    eps_grid: tuple = ()
    a_const: object = "auto"
    q: float = 0.2


@dataclass
class SamplerConfig:
    replicas: int = 1000
    z_min: float = 1e-4
    compensate: bool = True
    field_replicas: int = 0
    threads: object = None


@dataclass
class RunConfig:
    kernel: KernelConfig = field(default_factory=KernelConfig)
    mollifier: MollifierConfig = field(default_factory=MollifierConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    regime: RegimeConfig = field(default_factory=RegimeConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    suites: tuple = ()
    seed: int = 0
    out: str = "results"

    @property
    def dimension(self):
        return self.kernel.dimension

    def to_dict(self):
        return json.loads(json.dumps(asdict(self), default=str))

    def hash(self, sections=None):
        """SHA-256 of the canonical JSON of the config (or of some sections)."""
        data = self.to_dict()
        if sections is not None:
            data = {s: data[s] for s in sections}
        data.pop("out", None)
        # thread count does not change results
        data.get("sampler", {}).pop("threads", None)
        blob = json.dumps(data, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def _floats(text):
    text = text.strip()
    return tuple(float(x) for x in text.split(",") if x.strip()) if text else ()


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text):
    return int(text) if text.strip() else None


def _a_const(text):
    return "auto" if text.strip().lower() == "auto" else float(text)


_SCHEMA = {
    "kernel": (KernelConfig, {"kind": str, "dimension": int, "path": str, "delta": float,
                              "bump_support": float}),
    "mollifier": (MollifierConfig, {"kind": str, "order": int, "scales": _floats,
                                    "weights": _floats}),
    "grid": (GridConfig, {"points_per_side": int, "side_length": float}),
    "regime": (RegimeConfig, {"gamma": float, "t_grid": _floats, "eps_grid": _floats,
                              "a_const": _a_const, "q": float}),
    "sampler": (SamplerConfig, {"replicas": int, "z_min": float, "compensate": _bool,
                                "field_replicas": int, "threads": _opt_int}),
}
_RUN_KEYS = {"suites", "seed", "out"}


def parse_config(text):
    """Parse and validate a config document.

    Raises
    ------
    ConfigError
        With every violation found (unknown sections or keys, bad values,
        regime and gamma mismatch), not just the first.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    errors = []
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    parts = {}
    for sec in parser.sections():
        if sec not in _SCHEMA and sec != "run":
            errors.append(f"unknown section [{sec}]")
    for sec, (cls, keys) in _SCHEMA.items():
        values = {}
        if parser.has_section(sec):
            for key, raw in parser.items(sec):
                if key not in keys:
                    errors.append(f"unknown key {sec}.{key}")
                    continue
                try:
                    values[key] = keys[key](raw)
                except ValueError as exc:
                    errors.append(f"bad value {sec}.{key}={raw!r}: {exc}")
        parts[sec] = cls(**values)
    run = {}
    if parser.has_section("run"):
        for key, raw in parser.items("run"):
            if key not in _RUN_KEYS:
                errors.append(f"unknown key run.{key}")
            elif key == "suites":
                run["suites"] = tuple(s.strip() for s in raw.split(",") if s.strip())
            elif key == "seed":
                try:
                    run["seed"] = int(raw)
                except ValueError:
                    errors.append(f"bad value run.seed={raw!r}")
            else:
                run["out"] = raw.strip()
    cfg = RunConfig(**parts, **run)
    errors.extend(validate(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def validate(cfg):
    errors = []
    k, m, g, r, s = cfg.kernel, cfg.mollifier, cfg.grid, cfg.regime, cfg.sampler
    if k.kind not in ("ball", "table", "truncated"):
        errors.append(f"kernel.kind must be ball, table or truncated, got {k.kind!r}")
    if k.kind == "table" and not k.path:
        errors.append("kernel.path is required for a tabulated kernel")
    if k.dimension < 1:
        errors.append("kernel.dimension must be >= 1")
    if m.kind not in ("standard", "mixture"):
        errors.append(f"mollifier.kind must be standard or mixture, got {m.kind!r}")
    if m.kind == "mixture" and (not m.scales or len(m.scales) != len(m.weights)):
        errors.append("mollifier.scales and mollifier.weights must be nonempty and equal length")
    n = g.points_per_side
    if n < 8 or n & (n - 1):
        errors.append(f"grid.points_per_side must be a power of two >= 8, got {n}")
    if not g.side_length > 0:
        errors.append("grid.side_length must be positive")
    if any(b < a for a, b in zip(r.t_grid, r.t_grid[1:])) or any(t < 0 for t in r.t_grid):
        errors.append("regime.t_grid must be nondecreasing and nonnegative")
    if r.a_const != "auto" and not 0 < r.a_const < 1:
        errors.append("regime.a_const must be 'auto' or lie in (0, 1)")
    if s.replicas < 1:
        errors.append("sampler.replicas must be positive")
    if not s.z_min > 0:
        errors.append("sampler.z_min must be positive")
    unknown = [x for x in cfg.suites if x not in SUITES]
    if unknown:
        errors.append(f"unknown suites {unknown}; choose from {list(SUITES)}")
    gc = float(np.sqrt(2 * k.dimension))
    needs_super = [x for x in cfg.suites if x in SUPERCRITICAL_SUITES]
    if needs_super and not r.gamma > gc:
        errors.append(f"suites {needs_super} need gamma > sqrt(2d) = {gc:.6g}, got {r.gamma:g}")
    return errors


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
