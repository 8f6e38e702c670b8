"""Chaotic dynamics of a two-level atom with quantized recoil in the
standing-wave field of a single-mode cavity.

The package integrates the coupled Bloch-ladder / center-of-mass equations
and reproduces the standard chaos diagnostics: Rabi collapse-revival series,
maximal Lyapunov maps, Poincare sections, fractal exit-time scans and
exit-time statistics.
"""

__version__ = "0.1.0"

from .model import (AtomPreparation, FieldPreparation, HybridState,
                    ModelParams, TruncationError, bloch_from_amplitudes,
                    bloch_norms, default_n_max, energy_integral,
                    population_inversion, prepare_initial_state)
from .dynamics import (RhsKind, coupling_coefficients, fock_coefficients,
                       jc_inversion_exact, predictability_horizon,
                       rabi_frequency, resonant_exit_time,
                       resonant_inversion_exact, rhs_fock, rhs_hybrid, rhs_jc)
from .integrator import (EventHit, EventSpec, IntegrationError,
                         IntegratorConfig, Trajectory, conservation_report,
                         integrate, locate_event)
from .chaos import (AxisSpec, GridMap, LyapunovConfig, SectionPoint,
                    lyapunov_map, max_lyapunov, poincare_section,
                    section_occupancy, zout_zin_scan)
from .scattering import (CavityGeometry, Classification, ExitRecord,
                         ExitTimeHistogram, TailFit, ZoomNode,
                         classify_trajectory, exit_scan, exit_time_histogram,
                         refine_interval, singular_mask,
                         singularity_threshold, smooth_intervals,
                         tail_exponent, tail_exponential,
                         unresolved_intervals)
from .io import (config_hash, read_exit_records_csv, read_json,
                 read_table_csv, write_records, write_table_csv)
