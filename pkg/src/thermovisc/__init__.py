"""Finite-difference solver and diagnostics for a regularized thermoviscoelastic system."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .model import (CoefficientSpec, InitialData, RegularizedProblem, ValidationReport, eval_f, eval_gamma,
                    make_initial_data, mollify, regularize, validate_spec)
from .operators import (Grid, OperatorSet, SpatialDictionary, build_operators, default_neumann_dictionary,
                        dual_norm_w22, dual_pairing_w1lambda, lp_spacetime_norm)
from .solver import LedgerRow, RunConfig, State, Trajectory, blowup_guard, energy, run, step
from .diagnostics import (MonitorSeries, TestFunction, TimeProfile, estimate_monitors, interpolation_check,
                          max_dictionary_residual, steklov_average, steklov_distance, steklov_identity_check,
                          weak_residual_momentum, weak_residual_temperature)
from .sweep import (SweepPlan, SweepReport, acceptance_eps_plan, acceptance_refinement_plan, fit_order,
                    run_eps_sweep, run_refinement_sweep, run_sweep)
