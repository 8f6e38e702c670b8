"""Right-hand sides of the three ODE systems and the closed-form solutions
used as oracles against the numerical integration."""
from __future__ import annotations

import enum
import math

import numpy as np

from .model import HybridState


class RhsKind(enum.Enum):
    JAYNES_CUMMINGS = "jaynes_cummings"  # motionless atom, fixed mode amplitude
    HYBRID_LADDER = "hybrid_ladder"      # full Hamilton-Schroedinger ladder
    FOCK_REDUCED = "fock_reduced"        # two-triple reduction for a Fock field


def coupling_coefficients(n_triples):
    """sqrt(n+1) for the full ladder, n = 0..n_triples-1."""
    return np.sqrt(np.arange(1.0, n_triples + 1.0))


def fock_coefficients(n):
    """Couplings (sqrt(n), sqrt(n+1)) of the reduced two-triple system."""
    if n < 1:
        raise ValueError("the reduced system needs photon number n >= 1")
    return np.array([math.sqrt(n), math.sqrt(n + 1.0)])


def rhs_jc(triples, params, f):
    """Bloch-ladder derivative for a motionless atom with fixed amplitude f."""
    coef = coupling_coefficients(triples.shape[0])
    u, v, z = triples[:, 0], triples[:, 1], triples[:, 2]
    d = np.empty_like(triples)
    d[:, 0] = params.delta * v
    d[:, 1] = -params.delta * u - 2.0 * coef * f * z
    d[:, 2] = 2.0 * coef * f * v
    return d


def rhs_hybrid(state, params):
    """Derivative of the full hybrid system (standing-wave coupling cos x)."""
    coef = coupling_coefficients(state.n_triples)
    u, v, z = state.u, state.v, state.z
    cosx = math.cos(state.x)
    dtriples = np.empty_like(state.triples)
    dtriples[:, 0] = params.delta * v
    dtriples[:, 1] = -params.delta * u + 2.0 * coef * z * cosx
    dtriples[:, 2] = -2.0 * coef * v * cosx
    return HybridState(
        x=params.alpha * state.p,
        p=-math.sin(state.x) * float(np.dot(coef, u)),
        triples=dtriples,
    )


def rhs_fock(x, p, triples, params, n):
    """Derivative of the 8-dimensional reduction for a Fock(n) field.

    triples holds the two active Bloch triples (n-1, n) as a (2, 3) array.
    Returns (dx, dp, dtriples).
    """
    coef = fock_coefficients(n)
    u, v, z = triples[:, 0], triples[:, 1], triples[:, 2]
    cosx = math.cos(x)
    dtriples = np.empty_like(triples)
    dtriples[:, 0] = params.delta * v
    dtriples[:, 1] = -params.delta * u + 2.0 * coef * z * cosx
    dtriples[:, 2] = -2.0 * coef * v * cosx
    dx = params.alpha * p
    dp = -math.sin(x) * float(np.dot(coef, u))
    return dx, dp, dtriples


def rabi_frequency(n, delta, f):
    """n-photon Rabi frequency Omega_n = sqrt(delta^2 + 4(n+1) f^2)."""
    return math.sqrt(delta ** 2 + 4.0 * (n + 1.0) * f ** 2)


def jc_inversion_exact(triples0, params, f, tau):
    """Exact inversion z(tau) of the motionless system for fixed f.

    Accepts a scalar or array tau; returns matching shape.
    """
    tau = np.asarray(tau, dtype=float)
    n_t = triples0.shape[0]
    n = np.arange(n_t)
    omega = np.sqrt(params.delta ** 2 + 4.0 * (n + 1.0) * f ** 2)
    coef = np.sqrt(n + 1.0)
    u0, v0, z0 = triples0[:, 0], triples0[:, 1], triples0[:, 2]
    ot = np.multiply.outer(tau, omega)          # (..., n)
    cos_ot, sin_ot = np.cos(ot), np.sin(ot)
    term_u = u0 * 2.0 * params.delta * coef * f / omega ** 2 * (1.0 - cos_ot)
    term_v = v0 * 2.0 * coef * f / omega * sin_ot
    term_z = z0 * (params.delta ** 2 + 4.0 * (n + 1.0) * f ** 2 * cos_ot) / omega ** 2
    out = np.sum(term_u + term_v + term_z, axis=-1)
    return float(out) if out.ndim == 0 else out


def resonant_inversion_exact(z0, alpha, p0, tau):
    """Exact inversion at delta = 0 for an atom launched from x = 0.

    Valid for u_n(0) = v_n(0) = 0; z0 is the initial z ladder.  The p0 = 0
    limit reduces to the motionless resonant solution.
    """
    tau = np.asarray(tau, dtype=float)
    n = np.arange(len(z0))
    coef = 2.0 * np.sqrt(n + 1.0)
    if p0 == 0.0:
        phase = np.multiply.outer(tau, coef)
    else:
        ap = alpha * p0
        phase = np.multiply.outer(np.sin(ap * tau) / ap, coef)
    out = np.sum(z0 * np.cos(phase), axis=-1)
    return float(out) if out.ndim == 0 else out


def resonant_exit_time(p0, alpha):
    """Flight time to a detector at exact resonance (ballistic motion).

    Detectors sit at x = -pi/2 and x = 3*pi/2; the atom starts at x = 0.
    """
    if p0 == 0.0:
        raise ValueError("a resting atom never reaches a detector")
    if p0 > 0.0:
        return 1.5 * math.pi / (alpha * p0)
    return 0.5 * math.pi / (alpha * abs(p0))


def predictability_horizon(lam, delta_z, delta_z_in):
    """Time over which the output inversion stays predictable."""
    if lam <= 0.0:
        raise ValueError("lambda must be positive")
    if not delta_z > delta_z_in > 0.0:
        raise ValueError("need delta_z > delta_z_in > 0")
    return math.log(delta_z / delta_z_in) / lam
