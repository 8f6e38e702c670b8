"""Maximal Lyapunov exponents, parameter maps, Poincare sections and the
output-vs-input inversion experiment."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as _k
from .dynamics import RhsKind
from .integrator import EventSpec, IntegratorConfig, integrate, system_arrays
from .model import (AtomPreparation, FieldPreparation, default_n_max,
                    prepare_initial_state)
from .util import indexed_map


@dataclass(frozen=True)
class LyapunovConfig:
    d0: float = 1e-8
    renorm_interval: float = 1.0
    t_total: float = 2e4
    t_discard: float | None = None  # default 10% of t_total
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_retries: int = 3

    def __post_init__(self):
        if not self.d0 > 0:
            raise ValueError("d0 must be positive")
        discard = self.resolved_discard()
        if not self.t_total > discard >= 0:
            raise ValueError("need t_total > t_discard >= 0")

    def resolved_discard(self):
        return 0.1 * self.t_total if self.t_discard is None else self.t_discard


def max_lyapunov(kind, init, params, config, fock_n=None):
    """Benettin two-trajectory estimate of the maximal Lyapunov exponent.

    On separation overflow between renormalizations the interval is halved
    and the run restarted, up to config.max_retries times.
    """
    y0, coef, mode, _, _ = system_arrays(kind, init, params, fock_n=fock_n)
    if mode != _k.MODE_HYBRID:
        raise ValueError("Lyapunov estimation targets the hybrid flows")
    max_step = 0.05 / math.sqrt(init.n_triples)
    renorm = config.renorm_interval
    for _ in range(config.max_retries + 1):
        lam, status = _k.lyapunov_pair(
            y0, coef, params.delta, params.alpha,
            config.rel_tol, config.abs_tol, max_step,
            config.d0, renorm, config.t_total, config.resolved_discard())
        if status == _k.STATUS_OK:
            return float(lam)
        renorm *= 0.5
    raise RuntimeError("Lyapunov estimate failed after retries "
                       f"(last renorm_interval={renorm * 2})")


@dataclass(frozen=True)
class AxisSpec:
    """One grid axis: parameter name, range and spacing."""

    name: str  # "delta" | "alpha" | "n"
    lo: float
    hi: float
    count: int
    scale: str = "linear"  # "linear" | "log"

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("axis count must be >= 1")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"bad axis scale {self.scale!r}")
        if self.name not in ("delta", "alpha", "n"):
            raise ValueError(f"unknown axis parameter {self.name!r}")

    def values(self):
        if self.count == 1:
            return np.array([self.lo], dtype=float)
        if self.scale == "log":
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)


@dataclass
class GridMap:
    """2-D scalar diagnostic over two parameter axes."""

    axes: tuple
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (self.axes[0].count, self.axes[1].count):
            raise ValueError("values shape does not match axis counts")


def lyapunov_map(axes, base_params, fieldprep, atom, x0, p0, config,
                 threads=1):
    """Lambda on a 2-D parameter grid; cells are independent computations.

    A cell that fails to integrate is recorded as NaN, never aborts the map.
    """
    ax0, ax1 = axes
    vals0 = ax0.values()
    vals1 = ax1.values()
    cells = [(i, j) for i in range(ax0.count) for j in range(ax1.count)]

    def one(idx):
        i, j = cells[idx]
        params = base_params
        fp = fieldprep
        for ax, val in ((ax0, vals0[i]), (ax1, vals1[j])):
            if ax.name == "delta":
                params = replace(params, delta=float(val))
            elif ax.name == "alpha":
                params = replace(params, alpha=float(val))
            elif ax.name == "n":
                fp = FieldPreparation.fock(int(round(val)))
        try:
            if fp.kind == "fock":
                n = max(fp.n, 1)
                params = replace(params, n_max=max(params.n_max, n))
                init = prepare_initial_state(fp, atom, x0, p0, params.n_max)
                return max_lyapunov(RhsKind.FOCK_REDUCED, init, params,
                                   config, fock_n=n)
            n_max = default_n_max(fp)
            params = replace(params, n_max=n_max)
            init = prepare_initial_state(fp, atom, x0, p0, n_max)
            return max_lyapunov(RhsKind.HYBRID_LADDER, init, params, config)
        except Exception:
            return math.nan

    flat = indexed_map(one, len(cells), threads)
    values = np.array(flat).reshape(ax0.count, ax1.count)
    meta = {"field": fieldprep.kind, "atom": atom.kind, "x0": x0, "p0": p0,
            "delta": base_params.delta, "alpha": base_params.alpha}
    return GridMap(axes=(ax0, ax1), values=values, metadata=meta)


@dataclass(frozen=True)
class SectionPoint:
    x: float  # wrapped to [-pi, pi)
    p: float
    trajectory_id: int


def poincare_section(inits, params, t_max, section=None, fock_n=None,
                     rel_tol=1e-10, abs_tol=1e-12, threads=1,
                     max_points=100_000):
    """Section points of a bundle of trajectories.

    The default surface is sum_n v_n = 0, crossed rising; identically-zero
    crossings (the resonant ballistic case) are excluded.  A custom surface
    may be supplied as an EventSpec, at the cost of the slower generic
    integration path.
    """
    kind = RhsKind.FOCK_REDUCED if fock_n else RhsKind.HYBRID_LADDER
    if section is not None:
        points = []
        cfg = IntegratorConfig(rel_tol=rel_tol, abs_tol=abs_tol, t_max=t_max)
        spec = EventSpec(g=section.g, direction=section.direction, terminal=False)
        for tid, init in enumerate(inits):
            traj = integrate(kind, init, params, cfg, events=[spec],
                             t_eval=np.array([t_max]), fock_n=fock_n)
            for hit in traj.events:
                x = math.remainder(hit.state.x, 2.0 * math.pi)
                if x >= math.pi:
                    x -= 2.0 * math.pi
                points.append(SectionPoint(x, hit.state.p, tid))
        return points

    def one(tid):
        init = inits[tid]
        y0, coef, mode, _, _ = system_arrays(kind, init, params, fock_n=fock_n)
        max_step = 0.05 / math.sqrt(init.n_triples)
        out = np.empty((max_points, 2))
        count, status = _k.poincare_points(
            y0, coef, params.delta, params.alpha, rel_tol, abs_tol,
            max_step, t_max, out, 1e-13)
        return [SectionPoint(float(out[i, 0]), float(out[i, 1]), tid)
                for i in range(count)]

    chunks = indexed_map(one, len(inits), threads)
    return [pt for chunk in chunks for pt in chunk]


def section_occupancy(points, n_bins=64, p_range=None):
    """Fraction-free box count: number of occupied cells on an n_bins grid."""
    if not points:
        return 0
    x = np.array([pt.x for pt in points])
    p = np.array([pt.p for pt in points])
    if p_range is None:
        p_range = (p.min(), p.max() + 1e-12)
    hist, _, _ = np.histogram2d(
        x, p, bins=n_bins, range=[[-math.pi, math.pi], list(p_range)])
    return int(np.count_nonzero(hist))


def zout_zin_scan(z_in_grid, params, fock_n, x0, p0, tau_obs,
                  rel_tol=1e-10, abs_tol=1e-12, threads=1):
    """Output inversion z(tau_obs) for each initial inversion z_in.

    The atom enters in the two-triple superposition state of a Fock(n) field.
    """
    z_in_grid = np.asarray(z_in_grid, dtype=float)
    if tau_obs < 0:
        raise ValueError("tau_obs must be >= 0")
    if tau_obs == 0.0:
        return z_in_grid.copy()
    fieldprep = FieldPreparation.fock(fock_n)
    n_max = max(fock_n, 1)
    max_step = 0.05 / math.sqrt(2.0)
    t_eval = np.array([float(tau_obs)])

    def one(i):
        atom = AtomPreparation.superposition(z_in_grid[i])
        init = prepare_initial_state(fieldprep, atom, x0, p0, n_max)
        y0, coef, mode, _, _ = system_arrays(
            RhsKind.FOCK_REDUCED, init, params, fock_n=fock_n)
        out = np.empty((1, y0.size))
        status = _k.integrate_samples(
            y0, coef, params.delta, params.alpha, mode, 0.0,
            rel_tol, abs_tol, max_step, 0.0, t_eval, out)
        if status != _k.STATUS_OK:
            return math.nan
        n_t = coef.size
        return float(np.sum(out[0, 2 + 2 * n_t:]))

    return np.array(indexed_map(one, len(z_in_grid), threads))
