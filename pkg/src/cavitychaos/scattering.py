"""Exit-time scattering: fractal scans, hierarchical zoom, trajectory
classification and exit-time statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .dynamics import RhsKind
from .integrator import system_arrays
from .model import default_n_max, prepare_initial_state
from .util import indexed_map

CONSERVATION_WARN = 1e-6


@dataclass(frozen=True)
class CavityGeometry:
    """Two-wavelength cavity: atom injected at x = 0, detectors at the mirrors."""

    x_left: float = -math.pi / 2
    x_right: float = 3 * math.pi / 2
    x_node: float = math.pi / 2  # central standing-wave node

    def __post_init__(self):
        if not self.x_left < 0 < self.x_right:
            raise ValueError("need x_left < 0 < x_right")
        if not self.x_left < self.x_node < self.x_right:
            raise ValueError("central node must be strictly interior")


@dataclass(frozen=True)
class ExitRecord:
    p0: float
    T: float                    # exit time; t_max when trapped
    detector: str               # "left" | "right" | "none"
    m: int                      # central-node crossings
    trapped: bool
    conservation_ok: bool
    w_drift: float = 0.0
    r_drift: float = 0.0
    failed: bool = False


@dataclass(frozen=True)
class Classification:
    kind: str  # "m" | "trapped"
    m: int | None = None


def classify_trajectory(record):
    """m-trajectory when detected, trapped otherwise."""
    if record.detector == "none":
        return Classification("trapped")
    return Classification("m", record.m)


def exit_scan(p0_grid, params, fieldprep, atom, geometry=None, t_max=2e4,
              rel_tol=1e-10, abs_tol=1e-12, threads=1, x0=0.0,
              max_step=None):
    """Exit time, detector side and node-crossing count for each p0.

    Fock fields use the reduced two-triple system; distribution fields run
    the full truncated ladder.  Per-point integration failures are recorded
    and never abort the scan.
    """
    geometry = geometry or CavityGeometry()
    p0_grid = np.asarray(p0_grid, dtype=float)
    if p0_grid.size == 0:
        raise ValueError("empty p0 grid")
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    if fieldprep.kind == "fock":
        n = fieldprep.n
        if n < 1:
            raise ValueError("scattering scans need Fock n >= 1")
        n_max = n
        kind = RhsKind.FOCK_REDUCED
        fock_n = n
    else:
        n_max = default_n_max(fieldprep)
        kind = RhsKind.HYBRID_LADDER
        fock_n = None
    init0 = prepare_initial_state(fieldprep, atom, x0, 0.0, n_max)
    y0_base, coef, _, _, _ = system_arrays(kind, init0, params, fock_n=fock_n)
    if max_step is None:
        max_step = 0.05 / math.sqrt(n_max + 1.0)

    def one(i):
        y0 = y0_base.copy()
        y0[1] = p0_grid[i]
        try:
            T, side, m, w_drift, r_drift, status = _k.exit_scan_point(
                y0, coef, params.delta, params.alpha, rel_tol, abs_tol,
                max_step, geometry.x_left, geometry.x_right, geometry.x_node,
                t_max)
        except Exception:
            status = _k.STATUS_UNDERFLOW
            T, side, m, w_drift, r_drift = math.nan, -1, 0, math.nan, math.nan
        if status != _k.STATUS_OK:
            return ExitRecord(float(p0_grid[i]), math.nan, "none", 0,
                              trapped=False, conservation_ok=False,
                              failed=True)
        detector = ("left", "right")[side] if side >= 0 else "none"
        ok = max(w_drift, r_drift) <= CONSERVATION_WARN
        return ExitRecord(float(p0_grid[i]), float(T), detector, int(m),
                          trapped=(side < 0), conservation_ok=ok,
                          w_drift=float(w_drift), r_drift=float(r_drift))

    return indexed_map(one, p0_grid.size, threads)


def singularity_threshold(records, floor=2000.0, factor=10.0):
    """T above max(factor * local median, floor) counts as singular."""
    detected = [r.T for r in records if not r.trapped and not r.failed]
    if not detected:
        return floor
    return max(factor * float(np.median(detected)), floor)


def singular_mask(records, threshold=None):
    """Per-point flag: trapped, failed, or exit time above the threshold."""
    threshold = threshold if threshold is not None else singularity_threshold(records)
    return np.array([r.trapped or r.failed or r.T > threshold
                     for r in records])


def unresolved_intervals(records, threshold=None):
    """(p_lo, p_hi) spans where neighbouring points differ in node count or
    detector side, or contain singular exit times."""
    sing = singular_mask(records, threshold)
    flagged = np.zeros(len(records) - 1, dtype=bool)
    for i in range(len(records) - 1):
        a, b = records[i], records[i + 1]
        flagged[i] = (sing[i] or sing[i + 1] or a.m != b.m
                      or a.detector != b.detector)
    intervals = []
    i = 0
    while i < len(flagged):
        if flagged[i]:
            j = i
            while j + 1 < len(flagged) and flagged[j + 1]:
                j += 1
            intervals.append((records[i].p0, records[j + 1].p0))
            i = j + 1
        else:
            i += 1
    return intervals


def smooth_intervals(records, threshold=None, min_run=5):
    """Maximal runs of non-singular points with uniform (m, detector)."""
    sing = singular_mask(records, threshold)
    runs = []
    i = 0
    n = len(records)
    while i < n:
        if sing[i]:
            i += 1
            continue
        j = i
        while (j + 1 < n and not sing[j + 1]
               and records[j + 1].m == records[i].m
               and records[j + 1].detector == records[i].detector):
            j += 1
        if j - i + 1 >= min_run:
            runs.append((records[i].p0, records[j].p0))
        i = j + 1
    return runs


@dataclass
class ZoomNode:
    """One level of the hierarchical zoom into the exit-time function."""

    p_lo: float
    p_hi: float
    resolution: int = 2000
    depth: int = 0
    records: list = None
    unresolved: list = field(default_factory=list)
    children: list = field(default_factory=list)


def refine_interval(node, params, fieldprep, atom, geometry=None, t_max=2e4,
                    max_depth=1, max_children=4, rel_tol=1e-10,
                    abs_tol=1e-12, threads=1, max_step=None):
    """Scan a momentum interval and recurse into its unresolved children.

    Children nest inside the parent interval; recursion descends into at
    most max_children of the widest unresolved spans per level.
    """
    if not node.p_lo < node.p_hi:
        raise ValueError("invalid zoom interval")
    grid = np.linspace(node.p_lo, node.p_hi, node.resolution)
    node.records = exit_scan(grid, params, fieldprep, atom, geometry, t_max,
                             rel_tol, abs_tol, threads, max_step=max_step)
    node.unresolved = unresolved_intervals(node.records)
    if node.depth < max_depth and node.unresolved:
        widest = sorted(node.unresolved, key=lambda iv: iv[1] - iv[0],
                        reverse=True)[:max_children]
        for lo, hi in sorted(widest):
            if hi <= lo:
                continue
            child = ZoomNode(lo, hi, node.resolution, node.depth + 1)
            refine_interval(child, params, fieldprep, atom, geometry, t_max,
                            max_depth, max_children, rel_tol, abs_tol,
                            threads, max_step=max_step)
            node.children.append(child)
    return node


@dataclass
class ExitTimeHistogram:
    """Normalized exit-time distribution; trapped mass kept separate."""

    edges: np.ndarray
    counts: np.ndarray
    mass: np.ndarray      # fraction of all records per bin
    density: np.ndarray   # mass / bin width
    trapped_fraction: float
    n_records: int

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def exit_time_histogram(records, bins=60, scale="log", t_range=None):
    """Histogram of detected exit times.

    Trapped and failed records are excluded from the PDF mass but counted in
    the normalization, so bin mass plus trapped fraction sums to one.
    """
    detected = np.array([r.T for r in records if not r.trapped and not r.failed])
    if detected.size == 0:
        raise ValueError("histogram needs at least one detected record")
    n_total = len(records)
    if t_range is None:
        t_range = (detected.min(), detected.max())
    lo, hi = t_range
    if hi <= lo:
        hi = lo * (1 + 1e-12) + 1e-12
    if scale == "log":
        edges = np.geomspace(max(lo, 1e-12), hi, bins + 1)
    elif scale == "linear":
        edges = np.linspace(lo, hi, bins + 1)
    else:
        raise ValueError(f"bad bin scale {scale!r}")
    counts, _ = np.histogram(detected, bins=edges)
    outside = detected.size - counts.sum()
    mass = counts / n_total
    density = mass / np.diff(edges)
    trapped_fraction = (n_total - detected.size + outside) / n_total
    return ExitTimeHistogram(edges=edges, counts=counts, mass=mass,
                             density=density,
                             trapped_fraction=float(trapped_fraction),
                             n_records=n_total)


@dataclass(frozen=True)
class TailFit:
    slope: float       # exponent gamma for the power law, decay rate for exp
    intercept: float
    residual: float    # sum of squared residuals of log10(P)
    n_bins: int
    model: str         # "power" | "exponential"


def _tail_points(hist, fit_range):
    t_lo, t_hi = fit_range
    centers = hist.centers
    keep = (centers >= t_lo) & (centers <= t_hi) & (hist.density > 0)
    return centers[keep], hist.density[keep]


def tail_exponent(hist, fit_range, min_bins=5):
    """Power-law exponent of the PDF tail: slope of log P vs log T."""
    t, p = _tail_points(hist, fit_range)
    if t.size < min_bins:
        raise ValueError(f"only {t.size} non-empty bins in range, "
                         f"need >= {min_bins}")
    coeffs, res, *_ = np.polyfit(np.log10(t), np.log10(p), 1, full=True)
    residual = float(res[0]) if res.size else 0.0
    return TailFit(float(coeffs[0]), float(coeffs[1]), residual, t.size,
                   "power")


def tail_exponential(hist, fit_range, min_bins=5):
    """Exponential-decay fit of the PDF tail: slope of log P vs T."""
    t, p = _tail_points(hist, fit_range)
    if t.size < min_bins:
        raise ValueError(f"only {t.size} non-empty bins in range, "
                         f"need >= {min_bins}")
    coeffs, res, *_ = np.polyfit(t, np.log10(p), 1, full=True)
    residual = float(res[0]) if res.size else 0.0
    return TailFit(float(coeffs[0]), float(coeffs[1]), residual, t.size,
                   "exponential")
