"""
Causality characterization and delay extraction for tabulated frequency
responses using causal Fourier continuations.
"""

__version__ = "0.1.0"

from .spectrum import (RescaledGrid, SampledResponse, rescale_and_symmetrize,
                       unscale_delay)
from .continuation import (CausalContinuation, ContinuationConfig, ErrorSample,
                           SvdError, SvdInfo, SweepSolver, assemble_system,
                           bound_constants, build_continuation, error_budget,
                           evaluate_continuation, reconstruction_error,
                           truncated_svd_solve)
from .delay import (AllFailed, DegenerateFit, DelayEstimate, ErrorCurve,
                    NoTransition, QuadraticFit, WindowPolicy, apply_phase_shift,
                    critical_time, estimate_delay, extrapolate_to_threshold,
                    fit_growth_region, sweep_delay)
from .synth import (FourPoleParams, NoiseSpec, RlgcParams, add_sine_noise,
                    dawson, dawson_response, four_pole, rlgc_s11,
                    sample, stripline_closed_form_delay)
from .ingest import (Network, ParseError, Report, parse_csv, parse_touchstone,
                     select_element, write_outputs, write_touchstone)
