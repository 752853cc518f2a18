"""Exponential (chaos) measures built from grid fields.

Weights are always formed in log space; logs above ``cap`` are clipped and
the measure is flagged rather than dropped.
"""

from dataclasses import dataclass, field

import numpy as np

from .fields import GridField, GridSpec, load_snapshot, save_snapshot

REGIMES = ("sub", "critical_derivative", "super_eps", "super_t")
LOG_CAP = 700.0


def gamma_critical(d):
    return float(np.sqrt(2.0 * d))


@dataclass
class GridMeasure:
    """Weights per grid cell, already multiplied by the cell volume."""

    grid: GridSpec
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def total_mass(self):
        return float(np.sum(self.weights))

    @property
    def overflow(self):
        return bool(self.meta.get("overflow", False))

    def cell_centres(self):
        """Grid point coordinates, shape ``(N^d, d)`` in row-major order."""
        axes = [self.grid.coordinates(i) for i in range(self.grid.dimension)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def box_mask(self, lo, hi):
        """Cells whose grid point lies in ``[lo, hi)`` along every axis."""
        d = self.grid.dimension
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (d,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (d,))
        masks = []
        for i in range(d):
            x = self.grid.coordinates(i)
            shape = [1] * d
            shape[i] = -1
            masks.append(((x >= lo[i]) & (x < hi[i])).reshape(shape))
        out = masks[0]
        for mk in masks[1:]:
            out = out & mk
        return np.broadcast_to(out, self.grid.shape)

    def mass_in_box(self, lo, hi):
        return float(np.sum(self.weights[self.box_mask(lo, hi)]))

    def integrate(self, phi):
        """``int phi dmu`` with ``phi`` evaluated at the grid points (vectorised over rows)."""
        vals = np.asarray(phi(self.cell_centres()), dtype=float).reshape(self.grid.shape)
        return float(np.sum(vals * self.weights))

    def restrict(self, lo, hi):
        w = np.where(self.box_mask(lo, hi), self.weights, 0.0)
        return GridMeasure(self.grid, w, dict(self.meta, restricted_to=[list(np.atleast_1d(lo)),
                                                                          list(np.atleast_1d(hi))]))


def supercritical_norm(d, gamma, mode, value):
    """Extra normalisation of the supercritical measure.

    ``eps`` mode: ``|log eps|^{3 gamma / (2 sqrt(2d))} eps^{-(gamma/sqrt2 - sqrt d)^2}``;
    ``t`` mode: ``t^{3 gamma / (2 sqrt(2d))} e^{t (gamma/sqrt2 - sqrt d)^2}``.
    """
    gc = gamma_critical(d)
    if not gamma > gc:
        raise ValueError(f"supercritical normalisation needs gamma > sqrt(2d) = {gc:.6g}")
    power = 3.0 * gamma / (2.0 * gc)
    rate = (gamma / np.sqrt(2.0) - np.sqrt(d)) ** 2
    if mode == "eps":
        if not 0 < value < 1:
            raise ValueError("eps must lie in (0, 1)")
        return float(abs(np.log(value)) ** power * value ** (-rate))
    if mode == "t":
        if not value > 0:
            raise ValueError("t must be positive")
        return float(value ** power * np.exp(value * rate))
    raise ValueError(f"unknown mode {mode!r}")


def log_supercritical_norm(d, gamma, mode, value):
    """Logarithm of :func:`supercritical_norm`, safe for large ``t``."""
    gc = gamma_critical(d)
    if not gamma > gc:
        raise ValueError(f"supercritical normalisation needs gamma > sqrt(2d) = {gc:.6g}")
    power = 3.0 * gamma / (2.0 * gc)
    rate = (gamma / np.sqrt(2.0) - np.sqrt(d)) ** 2
    if mode == "eps":
        return float(power * np.log(abs(np.log(value))) - rate * np.log(value))
    return float(power * np.log(value) + rate * value)


def _regime(gamma, d, norm_mode):
    gc = gamma_critical(d)
    if gamma > gc:
        return "super_t" if norm_mode == "t" else "super_eps"
    return "sub" if gamma < gc else "critical"


def chaos_measure(fld, gamma, variance=None, norm=1.0, log_norm=None, cap=LOG_CAP, norm_mode=None):
    """``norm * exp(gamma X - gamma^2 var / 2) * cell_volume`` at every grid point.

    Parameters
    ----------
    fld : GridField
    gamma : float
    variance : float or callable, optional
        Pointwise variance of the field. A callable receives the field.
        Defaults to the exact lattice variance stored in the field meta.
    norm : float
        Positive prefactor; ``log_norm`` overrides it when given.
    cap : float
        Largest allowed log-weight.
    """
    if variance is None:
        variance = fld.variance
        if variance is None:
            raise ValueError("field carries no variance; pass one explicitly")
    elif callable(variance):
        variance = variance(fld)
    if log_norm is None:
        if not norm > 0:
            raise ValueError("norm must be positive")
        log_norm = float(np.log(norm))
    logw = (log_norm + gamma * fld.values - 0.5 * gamma ** 2 * np.asarray(variance)
            + np.log(fld.grid.cell_volume))
    over = logw > cap
    weights = np.exp(np.minimum(logw, cap))
    meta = {"gamma": gamma, "regime": _regime(gamma, fld.grid.dimension, norm_mode),
            "log_norm": log_norm, "variance": float(np.mean(variance)),
            "field_kind": fld.kind, "overflow": bool(over.any()), "overflow_cells": int(over.sum()),
            "cap": cap, "rng_seed": fld.meta.get("rng_seed"), "t": fld.meta.get("t")}
    return GridMeasure(fld.grid, weights, meta)


def derivative_measure(fld, t, cap=LOG_CAP):
    """Derivative-martingale approximation of the critical measure.

    Weights ``(sqrt(2d) t - X) exp(sqrt(2d) X - d t) * cell_volume``; negative
    weights are set to 0 and the fraction of such cells is recorded.
    """
    if fld.kind not in (None, "martingale_t"):
        raise ValueError("derivative normalisation expects a martingale field")
    d = fld.grid.dimension
    gc = gamma_critical(d)
    pref = gc * t - fld.values
    logw = gc * fld.values - d * t + np.log(fld.grid.cell_volume)
    over = logw > cap
    raw = pref * np.exp(np.minimum(logw, cap))
    neg = raw < 0
    weights = np.where(neg, 0.0, raw)
    meta = {"gamma": gc, "regime": "critical_derivative", "t": t,
            "truncation": "negative weights set to 0",
            "truncated_fraction": float(neg.mean()),
            "truncated_mass": float(-raw[neg].sum()),
            "overflow": bool(over.any()), "overflow_cells": int(over.sum()), "cap": cap,
            "rng_seed": fld.meta.get("rng_seed")}
    return GridMeasure(fld.grid, weights, meta)


def apply_diagonal_tilt(measure, gamma, g_diag):
    """Multiply weights by ``exp((d - sqrt(d/2) gamma) g(x, x))``.

    ``g_diag`` is a callable on grid points (rows of coordinates) or a constant.
    """
    if measure.meta.get("regime") not in ("critical", "critical_derivative"):
        raise ValueError("the diagonal tilt applies to critical measures")
    d = measure.grid.dimension
    coef = d - np.sqrt(d / 2.0) * gamma
    if callable(g_diag):
        g = np.asarray(g_diag(measure.cell_centres()), dtype=float).reshape(measure.grid.shape)
    else:
        g = float(g_diag)
    weights = measure.weights * np.exp(coef * g)
    return GridMeasure(measure.grid, weights, dict(measure.meta, tilt_coefficient=float(coef)))


def top_cells_fraction(measure, n_cells=10):
    """Fraction of the total mass carried by the ``n_cells`` heaviest cells."""
    w = measure.weights.ravel()
    total = w.sum()
    if total <= 0:
        return 0.0
    top = np.partition(w, w.size - n_cells)[w.size - n_cells:]
    return float(top.sum() / total)


def save_measure(path, measure, extra=None):
    save_snapshot(path, measure.grid, measure.weights, measure.meta, extra)


def load_measure(path):
    grid, values, header = load_snapshot(path)
    return GridMeasure(grid, values, header["meta"])
