"""Domain types, initial-state preparation and observables.

The atom-field state is a classical pair (x, p) plus a ladder of real Bloch
triples (u_n, v_n, z_n), one per photon number n.  Triple n couples the bare
states |2,n> and |1,n+1>.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TAIL_TOL = 1e-12


class TruncationError(ValueError):
    """Raised when the retained Fock ladder leaves too much probability out."""


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless control parameters of the hybrid system.

    delta : detuning (omega_a - omega_f) / Omega_0
    alpha : recoil frequency hbar k_f^2 / (m_a Omega_0)
    n_max : highest Bloch-triple index retained (ladder holds n_max + 1 triples)
    """

    delta: float
    alpha: float
    n_max: int = 1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")


@dataclass(frozen=True)
class FieldPreparation:
    """Initial cavity-field state: Fock |n>, coherent or Bose-Einstein."""

    kind: str  # "fock" | "coherent" | "bose_einstein"
    n: int = 0          # photon number, fock only
    mean: float = 0.0   # mean photon number, distribution kinds

    @classmethod
    def fock(cls, n):
        if n < 0:
            raise ValueError("Fock photon number must be >= 0")
        return cls("fock", n=n)

    @classmethod
    def coherent(cls, mean):
        if not mean > 0:
            raise ValueError("coherent mean photon number must be > 0")
        return cls("coherent", mean=float(mean))

    @classmethod
    def bose_einstein(cls, mean):
        if not mean > 0:
            raise ValueError("Bose-Einstein mean photon number must be > 0")
        return cls("bose_einstein", mean=float(mean))

    def photon_probabilities(self, n_max):
        """p_n for n = 0..n_max."""
        n = np.arange(n_max + 1)
        if self.kind == "fock":
            p = np.zeros(n_max + 1)
            if self.n <= n_max:
                p[self.n] = 1.0
            return p
        if self.kind == "coherent":
            # Poisson pmf, evaluated in log space to stay finite for large n
            logp = n * math.log(self.mean) - self.mean - [math.lgamma(k + 1) for k in n]
            return np.exp(logp)
        if self.kind == "bose_einstein":
            r = self.mean / (1.0 + self.mean)
            return r ** n / (1.0 + self.mean)
        raise ValueError(f"unknown field kind {self.kind!r}")

    def tail_probability(self, n_max):
        """Probability left above the truncation index."""
        if self.kind == "fock":
            return 0.0 if self.n <= n_max else 1.0
        if self.kind == "coherent":
            from scipy import stats
            return float(stats.poisson.sf(n_max, self.mean))
        if self.kind == "bose_einstein":
            return (self.mean / (1.0 + self.mean)) ** (n_max + 1)
        raise ValueError(f"unknown field kind {self.kind!r}")


def default_n_max(fieldprep, tol=TAIL_TOL):
    """Smallest truncation index whose tail probability is below tol."""
    if fieldprep.kind == "fock":
        return max(fieldprep.n, 1)
    n = max(2, int(fieldprep.mean))
    while fieldprep.tail_probability(n) >= tol:
        n += 1
        if n > 100_000:
            raise TruncationError("no acceptable truncation index below 100000")
    return n


@dataclass(frozen=True)
class AtomPreparation:
    """Initial electronic state: excited, or a superposition fixed by z_in."""

    kind: str  # "excited" | "superposition"
    z_in: float = 1.0

    @classmethod
    def excited(cls):
        return cls("excited", z_in=1.0)

    @classmethod
    def superposition(cls, z_in):
        if not -1.0 <= z_in <= 1.0:
            raise ValueError("z_in must lie in [-1, 1]")
        return cls("superposition", z_in=float(z_in))


@dataclass
class HybridState:
    """Classical pair (x, p) plus the Bloch-triple ladder.

    triples has shape (n_max + 1, 3) with columns (u, v, z).
    """

    x: float
    p: float
    triples: np.ndarray

    @property
    def n_triples(self):
        return self.triples.shape[0]

    @property
    def u(self):
        return self.triples[:, 0]

    @property
    def v(self):
        return self.triples[:, 1]

    @property
    def z(self):
        return self.triples[:, 2]

    def copy(self):
        return HybridState(self.x, self.p, self.triples.copy())

    def to_vector(self):
        """Flat layout [x, p, u_0..u_N, v_0..v_N, z_0..z_N]."""
        return np.concatenate(([self.x, self.p], self.u, self.v, self.z))

    @classmethod
    def from_vector(cls, y):
        n_t = (len(y) - 2) // 3
        triples = np.empty((n_t, 3))
        triples[:, 0] = y[2:2 + n_t]
        triples[:, 1] = y[2 + n_t:2 + 2 * n_t]
        triples[:, 2] = y[2 + 2 * n_t:]
        return cls(float(y[0]), float(y[1]), triples)


def bloch_from_amplitudes(a, b):
    """Real Bloch triple (u, v, z) from the amplitudes of |2,n> and |1,n+1>."""
    ab = a * np.conj(b)
    u = 2.0 * ab.real
    v = -2.0 * ab.imag
    z = abs(a) ** 2 - abs(b) ** 2
    return u, v, z


def prepare_initial_state(fieldprep, atom, x0, p0, n_max):
    """Build the hybrid initial state at (x0, p0).

    All u_n(0) = v_n(0) = 0.  Fock(n) with a superposition atom populates
    z_{n-1} = -(1 - z_in)/2 and z_n = (1 + z_in)/2; an excited atom in a
    coherent or Bose-Einstein field populates z_n with the photon
    probabilities of the field.
    """
    triples = np.zeros((n_max + 1, 3))
    if fieldprep.kind == "fock":
        n = fieldprep.n
        if n > n_max:
            raise ValueError(f"Fock({n}) needs n_max >= {n}")
        z_in = atom.z_in
        excited = (1.0 + z_in) / 2.0
        ground = (1.0 - z_in) / 2.0
        if n == 0 and ground > 0.0:
            # |1,0> has no Bloch partner: the ladder starts at triple 0
            raise ValueError("Fock(0) supports only an excited atom "
                             "(the ground amplitude would need triple -1)")
        triples[n, 2] = excited
        if n >= 1:
            triples[n - 1, 2] = -ground
    else:
        if atom.kind != "excited":
            raise ValueError("superposition atoms are only defined for Fock fields")
        pn = fieldprep.photon_probabilities(n_max)
        tail = fieldprep.tail_probability(n_max)
        if tail >= TAIL_TOL:
            raise TruncationError(
                f"truncation tail {tail:.3e} >= {TAIL_TOL:.0e} at n_max={n_max}")
        triples[:, 2] = pn
    return HybridState(float(x0), float(p0), triples)


def population_inversion(state):
    """Total inversion z = sum_n z_n."""
    return float(np.sum(state.z))


def energy_integral(state, params):
    """Conserved energy W of the hybrid flow."""
    coef = np.sqrt(np.arange(1, state.n_triples + 1))
    return float(params.alpha / 2.0 * state.p ** 2
                 - np.cos(state.x) * np.dot(coef, state.u)
                 - params.delta / 2.0 * np.sum(state.z))


def bloch_norms(state):
    """Per-triple norms R_n and their sum (conserved, equal to 1)."""
    r = np.sqrt(np.sum(state.triples ** 2, axis=1))
    return r, float(np.sum(r))
