"""Numerical laboratory for a trace-form metric flow on flat complex tori.

Constant positive Hermitian pairs (omega, chi0) on T^{2n} drive the scalar
evolution d(phi)/dt = c - Lambda_{chi_phi} omega / n.  The package bundles
the pointwise spectral conditions controlling convergence, wedge-product
oracles, the energy functionals the flow descends, an RK4 integrator with
monitors, a Newton solver for the critical equation, exact rational cone
arithmetic on surface intersection lattices, and deterministic randomized
property suites.

Set JFLOW_THREADS before launching to cap the BLAS thread pool; the value is
copied into the usual thread-count variables here, which works as long as
this package is imported before numpy is.
"""

import os as _os

if "JFLOW_THREADS" in _os.environ:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                 "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS",
                 "VECLIB_MAXIMUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["JFLOW_THREADS"])

from .hermitian import (BOUNDARY_TOL, ConditionReport, HermitianForm,
                        RelativeSpectrum, ShapeError, SingularFormError,
                        check_condition, condition_margin, cone_form_positive,
                        relative_spectrum, trace_pair, wedge_oracle)
from .torus import (MetricField, PotentialField, TorusGrid, class_constant_c,
                    complex_hessian_of, cosine_mode, field_mean,
                    integrate_top, load_field, metric_field, save_field)
from .functionals import (PathSpec, eval_I, eval_IE_JE, eval_J, eval_Jhat,
                          eval_entropy, eval_mabuchi, fit_properness,
                          flow_functional_bundle, ie_second_form,
                          path_independence_gap, volume_of)
from .flow import (CSV_COLUMNS, SINGULARITY_NOTE, FlowSetup, FlowState,
                   MonitorRecord, NumericalFailureError, RunResult,
                   blowup_monitor, dt_control, monitor_max_principle,
                   refinement_shrink, run, step, write_series_csv)
from .critical import NewtonReport, NewtonSettings, newton_solve
from .cone import (BUILTIN_LATTICES, ConeError, Curve, DivisorSearchReport,
                   LatticeError, NakaiReport, SurfaceLattice, builtin_lattice,
                   class_condition, divisor_search, intersect,
                   lattice_from_dict, load_lattice, nakai_test, signature,
                   verify_certificate)
from .sampling import (make_rng, random_admissible_potential,
                       random_positive_pair, report_digest,
                       run_property_suites)

__version__ = "0.1.0"

__all__ = [
    "BOUNDARY_TOL", "BUILTIN_LATTICES", "CSV_COLUMNS", "ConditionReport",
    "ConeError", "Curve", "DivisorSearchReport", "FlowSetup", "FlowState",
    "HermitianForm", "LatticeError", "MetricField", "MonitorRecord",
    "NakaiReport", "NewtonReport", "NewtonSettings", "NumericalFailureError",
    "PathSpec", "PotentialField", "RelativeSpectrum", "RunResult",
    "SINGULARITY_NOTE", "ShapeError", "SingularFormError", "SurfaceLattice",
    "TorusGrid", "blowup_monitor", "builtin_lattice", "check_condition",
    "class_condition", "class_constant_c", "complex_hessian_of",
    "condition_margin", "cone_form_positive", "cosine_mode", "divisor_search",
    "dt_control", "eval_I", "eval_IE_JE", "eval_J", "eval_Jhat",
    "eval_entropy", "eval_mabuchi", "field_mean", "fit_properness",
    "flow_functional_bundle", "ie_second_form", "integrate_top", "intersect",
    "lattice_from_dict", "load_field", "load_lattice", "make_rng",
    "metric_field", "monitor_max_principle", "nakai_test", "newton_solve",
    "path_independence_gap", "random_admissible_potential",
    "random_positive_pair", "refinement_shrink", "relative_spectrum",
    "report_digest", "run", "run_property_suites", "save_field", "signature",
    "step", "trace_pair", "verify_certificate", "volume_of", "wedge_oracle",
    "write_series_csv",
]
