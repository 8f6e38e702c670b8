"""Adaptive integration with dense event location and conservation checks.

The generic `integrate` entry point drives the compiled stepper one accepted
step at a time, which lets arbitrary Python event functions participate in
root bracketing.  Performance-critical sweeps (scattering scans, Lyapunov
maps, sections) bypass this layer and use the specialized kernels directly;
both paths share the same stepper arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernels as _k
from .dynamics import RhsKind, coupling_coefficients, fock_coefficients
from .model import HybridState


class IntegrationError(RuntimeError):
    """Step-size underflow or non-finite right-hand side."""


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float | None = None  # default 0.05 / sqrt(n_max + 1)
    t_max: float = 1000.0

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_step is not None and not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")

    def resolved_max_step(self, n_max):
        if self.max_step is not None:
            return self.max_step
        return 0.05 / math.sqrt(n_max + 1.0)


@dataclass(frozen=True)
class EventSpec:
    """Scalar event g(state, tau); direction one of rising/falling/any."""

    g: callable
    direction: str = "any"
    terminal: bool = False

    def __post_init__(self):
        if self.direction not in ("rising", "falling", "any"):
            raise ValueError(f"bad direction {self.direction!r}")

    def triggered(self, g0, g1):
        if g0 == 0.0:
            return False
        if self.direction == "rising":
            return g0 < 0.0 <= g1
        if self.direction == "falling":
            return g0 > 0.0 >= g1
        return (g0 < 0.0 <= g1) or (g0 > 0.0 >= g1)


@dataclass(frozen=True)
class EventHit:
    index: int
    tau: float
    state: HybridState


@dataclass
class Trajectory:
    """Sampled trajectory plus located events.

    `t`/`y` hold the caller's output grid (y rows are full flattened hybrid
    states); `sol` evaluates the piecewise cubic interpolant at any time
    inside the integrated span.
    """

    t: np.ndarray
    y: np.ndarray
    events: list = field(default_factory=list)
    termination: str = "completed"
    _mesh_t: np.ndarray | None = None
    _mesh_y: np.ndarray | None = None
    _mesh_f: np.ndarray | None = None
    _embed: callable = None
    _coef: np.ndarray | None = None

    def state(self, i):
        return self._embed(self.y[i]) if self._embed else HybridState.from_vector(self.y[i])

    def states(self):
        return [self.state(i) for i in range(len(self.t))]

    def sol(self, tau):
        """Dense evaluation on the step mesh (cubic Hermite per step)."""
        mt = self._mesh_t
        if mt is None or len(mt) < 2:
            raise ValueError("trajectory carries no interpolation mesh")
        if tau < mt[0] - 1e-12 or tau > mt[-1] + 1e-12:
            raise ValueError(f"tau={tau} outside integrated span")
        i = int(np.searchsorted(mt, tau, side="right")) - 1
        i = min(max(i, 0), len(mt) - 2)
        h = mt[i + 1] - mt[i]
        theta = 0.0 if h == 0.0 else (tau - mt[i]) / h
        yv = _hermite_vec(theta, h, self._mesh_y[i], self._mesh_y[i + 1],
                          self._mesh_f[i], self._mesh_f[i + 1])
        return self._embed(yv) if self._embed else HybridState.from_vector(yv)


def _hermite_vec(theta, h, y0, y1, f0, f1):
    t2 = theta * theta
    t3 = t2 * theta
    return ((2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + theta) * h * f0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * f1)


def system_arrays(kind, init, params, f_mode=1.0, fock_n=None):
    """Flattened initial vector, coupling array, kernel mode and embedder."""
    n_t = init.n_triples
    if kind is RhsKind.FOCK_REDUCED:
        if fock_n is None or fock_n < 1:
            raise ValueError("FOCK_REDUCED needs a photon number n >= 1")
        coef = fock_coefficients(fock_n)
        rows = init.triples[fock_n - 1:fock_n + 1]
        y0 = np.concatenate(([init.x, init.p], rows[:, 0], rows[:, 1], rows[:, 2]))
        template = init.triples.copy()

        def embed(yv):
            triples = template.copy()
            triples[fock_n - 1, 0] = yv[2]
            triples[fock_n, 0] = yv[3]
            triples[fock_n - 1, 1] = yv[4]
            triples[fock_n, 1] = yv[5]
            triples[fock_n - 1, 2] = yv[6]
            triples[fock_n, 2] = yv[7]
            return HybridState(float(yv[0]), float(yv[1]), triples)

        return y0, coef, _k.MODE_HYBRID, 0.0, embed
    coef = coupling_coefficients(n_t)
    y0 = init.to_vector()
    if kind is RhsKind.JAYNES_CUMMINGS:
        return y0, coef, _k.MODE_JC, float(f_mode), HybridState.from_vector
    if kind is RhsKind.HYBRID_LADDER:
        return y0, coef, _k.MODE_HYBRID, 0.0, HybridState.from_vector
    raise ValueError(f"unknown RhsKind {kind}")


def integrate(kind, init, params, config, events=(), t_eval=None,
              f_mode=1.0, fock_n=None):
    """Integrate one of the three systems, locating events along the way.

    Returns a Trajectory sampled on t_eval (default: 1001 points spanning
    [0, config.t_max]).  A terminal event stops the run; its hit is the last
    entry of trajectory.events.
    """
    events = list(events)
    if t_eval is None:
        t_eval = np.linspace(0.0, config.t_max, 1001)
    t_eval = np.asarray(t_eval, dtype=float)
    if len(t_eval) and np.any(np.diff(t_eval) <= 0):
        raise ValueError("t_eval must be strictly increasing")
    # without a terminal event there is no reason to integrate past the grid
    if any(ev.terminal for ev in events) or len(t_eval) == 0:
        t_bound = max(config.t_max, t_eval[-1] if len(t_eval) else 0.0)
    else:
        t_bound = t_eval[-1]
    y0, coef, mode, fconst, embed = system_arrays(kind, init, params, f_mode, fock_n)
    max_step = config.resolved_max_step(init.n_triples - 1)
    dim = len(y0)

    y = y0.copy()
    f = np.empty(dim)
    _k._rhs(y, coef, params.delta, params.alpha, mode, fconst, f)
    K = np.empty((_k.N_STAGES + 1, dim))
    y_stage = np.empty(dim)
    y_new = np.empty(dim)

    mesh_t = [0.0]
    mesh_y = [y.copy()]
    mesh_f = [f.copy()]
    g_prev = [ev.g(embed(y), 0.0) for ev in events]
    hits = []
    out = np.empty((len(t_eval), dim))
    idx = 0
    while idx < len(t_eval) and t_eval[idx] <= 0.0:
        out[idx] = y
        idx += 1

    t = 0.0
    h_abs = min(max_step, 0.01)
    termination = "completed"
    eps = np.finfo(float).eps
    while t_bound - t > 4.0 * eps * max(abs(t_bound), 1.0):
        t_old = t
        y_old = y.copy()
        f_old = f.copy()
        t, h_abs, status = _k._advance(t, y, f, h_abs, t_bound, max_step,
                                       config.rel_tol, config.abs_tol,
                                       coef, params.delta, params.alpha,
                                       mode, fconst, K, y_stage, y_new)
        if status != _k.STATUS_OK or not np.all(np.isfinite(y)):
            raise IntegrationError(f"integration failed at tau={t_old:.6g} "
                                   f"(step underflow or non-finite state)")
        h = t - t_old

        def interp(tau):
            theta = (tau - t_old) / h
            return _hermite_vec(theta, h, y_old, y, f_old, f)

        t_stop = None
        g_now = [ev.g(embed(y), t) for ev in events]
        step_hits = []
        for j, ev in enumerate(events):
            if ev.triggered(g_prev[j], g_now[j]):
                tau_star = _refine(ev, interp, embed, t_old, t)
                step_hits.append((tau_star, j))
        step_hits.sort()
        for tau_star, j in step_hits:
            if t_stop is not None and tau_star > t_stop:
                break
            hits.append(EventHit(j, tau_star, embed(interp(tau_star))))
            if events[j].terminal and t_stop is None:
                t_stop = tau_star
                termination = "terminal_event"
        g_prev = g_now

        t_fill = t if t_stop is None else t_stop
        margin = 4.0 * eps * max(abs(t_fill), 1.0)
        while idx < len(t_eval) and t_eval[idx] <= t_fill + margin:
            theta = min((t_eval[idx] - t_old) / h, 1.0)
            out[idx] = _hermite_vec(theta, h, y_old, y, f_old, f)
            idx += 1
        if t_stop is not None:
            mesh_t.append(t_stop)
            y_stop = interp(t_stop)
            mesh_y.append(y_stop)
            f_stop = np.empty(dim)
            _k._rhs(y_stop, coef, params.delta, params.alpha, mode, fconst, f_stop)
            mesh_f.append(f_stop)
            break
        mesh_t.append(t)
        mesh_y.append(y.copy())
        mesh_f.append(f.copy())

    traj = Trajectory(
        t=t_eval[:idx].copy(),
        y=out[:idx],
        events=hits,
        termination=termination,
        _mesh_t=np.array(mesh_t),
        _mesh_y=np.array(mesh_y),
        _mesh_f=np.array(mesh_f),
        _embed=embed,
        _coef=coef,
    )
    return traj


def _refine(event, interp, embed, t_lo, t_hi):
    fn = lambda tau: event.g(embed(interp(tau)), tau)
    return float(brentq(fn, t_lo, t_hi, xtol=1e-12, rtol=8.9e-16))


def locate_event(bracket, interpolant, event):
    """Root of the event function on a dense interpolant.

    interpolant maps tau to a HybridState; the bracket must straddle a sign
    change in the direction the event requires.
    """
    t_lo, t_hi = bracket
    g_lo = event.g(interpolant(t_lo), t_lo)
    g_hi = event.g(interpolant(t_hi), t_hi)
    if not event.triggered(g_lo, g_hi):
        raise ValueError("event function does not change sign across the "
                         "bracket in the required direction")
    fn = lambda tau: event.g(interpolant(tau), tau)
    return float(brentq(fn, t_lo, t_hi, xtol=1e-12, rtol=8.9e-16))


def conservation_report(traj, params):
    """Max drifts of (W, every R_n, sum R_n) along the trajectory.

    Uses the integration mesh (exact step states) when the trajectory
    carries one; interpolated sample grids would otherwise pollute the
    drift with interpolation error.
    """
    if traj._mesh_y is not None and traj._coef is not None:
        ys = traj._mesh_y
        coef = traj._coef
    else:
        ys = traj.y
        coef = coupling_coefficients((ys.shape[1] - 2) // 3) if len(ys) else None
    if len(ys) == 0:
        return 0.0, 0.0, 0.0
    n_t = len(coef)
    x = ys[:, 0]
    p = ys[:, 1]
    u = ys[:, 2:2 + n_t]
    v = ys[:, 2 + n_t:2 + 2 * n_t]
    z = ys[:, 2 + 2 * n_t:2 + 3 * n_t]
    w = 0.5 * params.alpha * p ** 2 - np.cos(x) * (u @ coef) \
        - 0.5 * params.delta * np.sum(z, axis=1)
    r = np.sqrt(u ** 2 + v ** 2 + z ** 2)
    rsum = np.sum(r, axis=1)
    dw = float(np.max(np.abs(w - w[0])))
    dr = float(np.max(np.abs(r - r[0])))
    drsum = float(np.max(np.abs(rsum - rsum[0])))
    return dw, dr, drsum
