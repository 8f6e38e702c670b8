import math

import numpy as np
import pytest

from cavitychaos.dynamics import resonant_exit_time
from cavitychaos.model import AtomPreparation, FieldPreparation, ModelParams
from cavitychaos.scattering import (CavityGeometry, Classification,
                                    ExitRecord, ZoomNode, classify_trajectory,
                                    exit_scan, exit_time_histogram,
                                    refine_interval, singular_mask,
                                    singularity_threshold, smooth_intervals,
                                    tail_exponent, tail_exponential,
                                    unresolved_intervals)

FOCK10 = FieldPreparation.fock(10)
EXCITED = AtomPreparation.excited()
SUPER0 = AtomPreparation.superposition(0.0)
CHAOTIC = ModelParams(delta=0.4, alpha=1e-3, n_max=10)
RESONANT = ModelParams(delta=0.0, alpha=1e-3, n_max=10)


def rec(p0, T, detector="right", m=1, trapped=False, failed=False):
    return ExitRecord(p0, T, detector, m, trapped, True, 0.0, 0.0, failed)


def test_geometry_validation():
    CavityGeometry()
    with pytest.raises(ValueError):
        CavityGeometry(x_left=0.5)
    with pytest.raises(ValueError):
        CavityGeometry(x_node=5.0)


def test_classify_trajectory():
    assert classify_trajectory(rec(10, 100.0, m=2)) == Classification("m", 2)
    assert classify_trajectory(rec(10, 2e4, "none", 0, trapped=True)) == \
        Classification("trapped")


def test_resonant_scan_matches_ballistic_times():
    grid = np.array([-25.0, 10.0, 50.0])
    records = exit_scan(grid, RESONANT, FOCK10, EXCITED, t_max=1000.0)
    for r in records:
        assert not r.trapped and not r.failed
        assert r.T == pytest.approx(resonant_exit_time(r.p0, 1e-3), abs=1e-8)
        assert r.detector == ("right" if r.p0 > 0 else "left")
        assert r.m == (1 if r.p0 > 0 else 0)
        assert r.conservation_ok


def test_scan_input_validation():
    with pytest.raises(ValueError):
        exit_scan(np.array([]), RESONANT, FOCK10, EXCITED)
    with pytest.raises(ValueError):
        exit_scan(np.array([10.0]), RESONANT, FieldPreparation.fock(0), EXCITED)
    with pytest.raises(ValueError):
        exit_scan(np.array([10.0]), RESONANT, FOCK10, EXCITED, t_max=0.0)


def test_singularity_threshold_and_mask():
    records = [rec(8.0 + i, 100.0) for i in range(20)]
    records.append(rec(30.0, 5000.0))
    thr = singularity_threshold(records)
    assert thr == 2000.0  # floor dominates 10 * median
    mask = singular_mask(records, thr)
    assert mask.sum() == 1 and mask[-1]
    records.append(rec(31.0, 2e4, "none", 0, trapped=True))
    assert singular_mask(records)[-1]


def test_unresolved_and_smooth_intervals():
    records = ([rec(float(i), 100.0, m=1) for i in range(5)]
               + [rec(5.0, 3000.0, m=2)]
               + [rec(float(i), 120.0, m=2) for i in range(6, 12)])
    unres = unresolved_intervals(records, threshold=2000.0)
    assert unres == [(4.0, 6.0)]
    smooth = smooth_intervals(records, threshold=2000.0, min_run=5)
    assert smooth == [(0.0, 4.0), (6.0, 11.0)]


def test_refine_interval_nests_children():
    node = ZoomNode(8.0, 12.0, resolution=60)
    refine_interval(node, CHAOTIC, FOCK10, SUPER0, t_max=800.0, max_depth=1,
                    max_children=2)
    assert len(node.records) == 60
    for child in node.children:
        assert node.p_lo <= child.p_lo < child.p_hi <= node.p_hi
        assert child.depth == 1 and len(child.records) == 60
    with pytest.raises(ValueError):
        refine_interval(ZoomNode(5.0, 5.0), CHAOTIC, FOCK10, SUPER0)


def test_histogram_mass_conservation():
    rng = np.random.default_rng(0)
    records = [rec(float(i), float(T)) for i, T in
               enumerate(rng.pareto(2.0, size=400) * 50 + 60)]
    records += [rec(1000.0 + i, 2e4, "none", 0, trapped=True)
                for i in range(40)]
    hist = exit_time_histogram(records, bins=30)
    assert hist.mass.sum() + hist.trapped_fraction == pytest.approx(1.0)
    assert hist.trapped_fraction >= 40 / 440
    assert np.allclose(hist.density * np.diff(hist.edges), hist.mass)
    with pytest.raises(ValueError):
        exit_time_histogram([rec(0.0, 2e4, "none", 0, trapped=True)])
    with pytest.raises(ValueError):
        exit_time_histogram(records, scale="sqrt")


def test_tail_exponent_recovers_power_law():
    # inverse-transform sample of P(T) ~ T^-3 on [100, 1e5)
    q = (np.arange(5000) + 0.5) / 5000
    T = 100.0 * (1.0 - q) ** (-1.0 / 2.0)
    records = [rec(float(i), float(t)) for i, t in enumerate(T)]
    hist = exit_time_histogram(records, bins=40, t_range=(100.0, 2e4))
    fit = tail_exponent(hist, (100.0, 5e3))
    assert fit.model == "power"
    assert fit.slope == pytest.approx(-3.0, abs=0.15)


def test_tail_exponential_recovers_decay():
    q = (np.arange(5000) + 0.5) / 5000
    T = 100.0 - 50.0 * np.log(1.0 - q)
    records = [rec(float(i), float(t)) for i, t in enumerate(T)]
    hist = exit_time_histogram(records, bins=40, scale="linear")
    fit = tail_exponential(hist, (110.0, 400.0))
    assert fit.model == "exponential"
    # log10 P slope = -1 / (50 ln 10)
    assert fit.slope == pytest.approx(-1.0 / (50.0 * math.log(10)), rel=0.1)


def test_tail_fit_needs_enough_bins():
    records = [rec(float(i), 100.0 + i) for i in range(50)]
    hist = exit_time_histogram(records, bins=10)
    with pytest.raises(ValueError):
        tail_exponent(hist, (1e6, 1e7))
