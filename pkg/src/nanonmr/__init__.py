"""Magnetic-field autocorrelation functions and experiment design for
nuclei diffusing in a confined cylindrical nano-NMR sample."""

__version__ = "0.1.0"

from .geometry import (CylinderGeometry, InvalidGeometryError, Y20_NORM,
                       b_rms_squared, dipole_kernel, form_factor, make_geometry)
from .numerics import (AccuracyError, QuadratureSpec, RootScanSpec, ScanError,
                       integrate_nd, scan_roots)
from .freediff import g_free, g_free_long_asymptote
from .series import CorrelationSeries, log_time_grid
from .sticky import (UndefinedRatioError, bulk_density, equal_time_amplitude,
                     g_sticky, g_sticky_bulk, optimal_geometry, plateau_ideal,
                     plateau_ratio, plateau_sticky, sticky_series)
from .evaporating import (EvapEigenSpectrum, EvapModeTable, SimpleModelParams,
                          build_mode_table, evaluate_propagator,
                          evaporating_series, g_evaporating, g_simple_model,
                          mode_dominance, solve_beta, solve_eta,
                          survival_fraction, tau_dominant_approx)
from .estimation import (FisherRatios, FisherSetup, FitFailureError, FitResult,
                         estimate_diffusion, fisher_direct, fisher_evap_closed,
                         fisher_ratios, fit_simple_model, measure_crossing,
                         signal_probability, volume_time)
from .montecarlo import MCConfig, MCResult, simulate_correlation
