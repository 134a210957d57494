"""Weak standing shock profiles of semilinear relaxation systems.

Typical use::

    from relaxshock import jin_xin_model, build_reduced, hugoniot_endstates
    from relaxshock import ns_profile, fixed_point_solve

    model = jin_xin_model(a=1.0)
    red = build_reduced(model)
    ends = hugoniot_endstates(red, model, 0.1)
    prof = ns_profile(red, model, ends)
    sol = fixed_point_solve(model, red, prof)
"""

from .chapman_enskog import (NSProfile, ReducedSystem, build_reduced, ns_profile,
                             residual_Rv, v_ns)
from .errors import RelaxShockError
from .linearized import (LinearizedOperator, apply_right_inverse, assemble,
                         ce_right_inverse_fluid, energy_diagnostic, macro_micro,
                         phase_vector, slow_fast_split, viscosity_sweep)
from .model import (EndStates, RelaxationModel, broadwell_model, custom_model,
                    equilibrium_residual, equilibrium_spectrum_margin,
                    hugoniot_endstates, jin_xin_model)
from .numerics import BACKEND, BandedLU, BandedSystem, solve_banded
from .solver import (SolveResult, SolverOptions, epsilon_sweep, fixed_point_solve,
                     nonlinear_residual, nonlinear_term, verify_theorem_bounds)
from .spaces import GridFunction, NormSpec, decay_rate_fit, weighted_norm
from .stability import assemble_L, profile_conditions, spectrum_check
from .structure import (check_assumption_2_4, check_gnl, check_symmetrizer,
                        find_kawashima_K, genuine_coupling_check,
                        hyperbolicity_strip_check, structure_report)

__version__ = "0.1.0"
