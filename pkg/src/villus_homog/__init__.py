"""Pulsed bolus transport and homogenized absorption in a villous intestine.

Pipelines: ODE averaging of peristaltic pulses (:mod:`.ode`), villous cell
geometry (:mod:`.geometry`), homogenized coefficients and the cell problem
(:mod:`.homogenize`, :mod:`.cell`), the 1-d limit solver (:mod:`.macro`) and
the eps-scale verifier (:mod:`.micro`).
"""

__version__ = "0.1.0"

from .errors import (AssumptionViolationError, ConfigError, InvalidGridError, InvalidInitialConditionError,
                     InvalidParameterError, InvalidProfileError, SingularGeometryError, SolverFailureError,
                     StepSizeError, UnsupportedGeometryError, VillusHomogError)
from .families import FunctionSpec, michaelis_menten
from .geometry import (PeriodCellMeasures, VillusProfile, bump_profile, cell_measures, cosine_profile,
                       flat_profile, outward_normal, surface_average, volume_average)
from .models import (AbsorptionModel, KineticsModel, PulseModel, VelocityField, absorption_from_specs,
                     check_velocity, eval_michaelis_menten, eval_pulse_force, stream_velocity)
from .ode import (BolusTrajectory, ConvergenceTable, average_force, averaged_force, convergence_study,
                  integrate_averaged, integrate_oscillatory)
from .homogenize import (CellProblemData, HomogenizedCoefficients, check_solvability, homogenized_coefficients,
                         lambda_from_compatibility, theta_surface)
from .cell import CorrectorField, solve_cell_problem
from .macro import AxialFields, AxialGrid, InflowSignals, mass_budget, solve_macro, step_upwind
from .micro import MicroFields, MicroGrid, compare_micro_macro, cross_section_average, solve_micro
from .config import ExperimentConfig, emit_config, parse_config
