import math

import numpy as np
import pytest

from cavitychaos.dynamics import (coupling_coefficients, fock_coefficients,
                                  jc_inversion_exact, predictability_horizon,
                                  rabi_frequency, resonant_exit_time,
                                  resonant_inversion_exact, rhs_fock,
                                  rhs_hybrid, rhs_jc)
from cavitychaos.model import HybridState, ModelParams


def random_state(rng, n_t):
    triples = rng.normal(size=(n_t, 3))
    triples /= np.linalg.norm(triples, axis=1, keepdims=True) * n_t
    return HybridState(rng.uniform(-math.pi, math.pi), rng.uniform(-50, 50),
                       triples)


def test_coefficients():
    assert np.allclose(coupling_coefficients(3), [1.0, math.sqrt(2), math.sqrt(3)])
    assert np.allclose(fock_coefficients(10), [math.sqrt(10), math.sqrt(11)])
    with pytest.raises(ValueError):
        fock_coefficients(0)


@pytest.mark.parametrize("delta", [0.0, 0.4, -1.3])
def test_tangency_per_triple(delta):
    """The flow never changes any Bloch norm: triple . d(triple) = 0."""
    rng = np.random.default_rng(11)
    params = ModelParams(delta=delta, alpha=1e-3, n_max=5)
    for _ in range(20):
        state = random_state(rng, 6)
        d = rhs_hybrid(state, params)
        dot = np.sum(state.triples * d.triples, axis=1)
        assert np.max(np.abs(dot)) < 1e-14
        dj = rhs_jc(state.triples, params, f=0.7)
        assert np.max(np.abs(np.sum(state.triples * dj, axis=1))) < 1e-14


@pytest.mark.parametrize("n", [1, 3, 10])
def test_fock_reduction_matches_full_ladder(n):
    """With only triples n-1 and n populated the 8-dim system is exact."""
    rng = np.random.default_rng(n)
    params = ModelParams(delta=0.4, alpha=1e-3, n_max=n)
    for _ in range(10):
        pair = rng.normal(size=(2, 3))
        full = np.zeros((n + 1, 3))
        full[n - 1:n + 1] = pair
        state = HybridState(rng.uniform(-3, 3), rng.uniform(-50, 50), full)
        d_full = rhs_hybrid(state, params)
        dx, dp, d_pair = rhs_fock(state.x, state.p, pair, params, n)
        assert dx == pytest.approx(d_full.x, rel=1e-15)
        assert dp == pytest.approx(d_full.p, rel=1e-14, abs=1e-15)
        assert np.allclose(d_pair, d_full.triples[n - 1:n + 1], atol=1e-15)
        assert np.all(d_full.triples[:n - 1] == 0)


def test_rabi_frequency():
    assert rabi_frequency(0, 0.0, 1.0) == pytest.approx(2.0)
    assert rabi_frequency(3, 0.3, 0.5) == pytest.approx(
        math.sqrt(0.09 + 4.0))


def test_jc_inversion_initial_value():
    rng = np.random.default_rng(3)
    triples0 = rng.normal(size=(4, 3))
    params = ModelParams(delta=0.7, alpha=1e-3, n_max=3)
    z0 = jc_inversion_exact(triples0, params, f=0.3, tau=0.0)
    assert z0 == pytest.approx(float(triples0[:, 2].sum()))


def test_jc_single_triple_oscillation():
    """One resonant triple: pure cosine at frequency 2 sqrt(n+1) f."""
    triples0 = np.zeros((3, 3))
    triples0[2, 2] = 1.0
    params = ModelParams(delta=0.0, alpha=1e-3, n_max=2)
    tau = np.linspace(0.0, 10.0, 64)
    z = jc_inversion_exact(triples0, params, f=0.5, tau=tau)
    assert np.allclose(z, np.cos(2.0 * math.sqrt(3.0) * 0.5 * tau), atol=1e-12)


def test_resonant_inversion_limits():
    z0 = np.array([0.2, 0.8])
    # p0 = 0 limit equals the motionless resonant solution with f = 1
    tau = np.linspace(0.0, 5.0, 32)
    z_rest = resonant_inversion_exact(z0, 1e-3, 0.0, tau)
    expect = 0.2 * np.cos(2.0 * tau) + 0.8 * np.cos(2.0 * math.sqrt(2) * tau)
    assert np.allclose(z_rest, expect, atol=1e-12)
    # moving atom at alpha*p0*tau = pi/2: phase argument sin(pi/2)/(alpha*p0)
    z = resonant_inversion_exact(z0, 1e-3, 50.0, math.pi / 0.1)
    expect = 0.2 * math.cos(2.0 * 20.0) + 0.8 * math.cos(2.0 * math.sqrt(2) * 20.0)
    assert z == pytest.approx(expect, abs=1e-12)


def test_resonant_exit_time():
    assert resonant_exit_time(50.0, 1e-3) == pytest.approx(1.5 * math.pi / 0.05)
    assert resonant_exit_time(-50.0, 1e-3) == pytest.approx(0.5 * math.pi / 0.05)
    with pytest.raises(ValueError):
        resonant_exit_time(0.0, 1e-3)


def test_predictability_horizon():
    assert predictability_horizon(0.05, 2.0, 1e-4) == pytest.approx(
        math.log(2e4) / 0.05)
    with pytest.raises(ValueError):
        predictability_horizon(-0.1, 2.0, 1e-4)
    with pytest.raises(ValueError):
        predictability_horizon(0.1, 1e-4, 2.0)
