"""Singular infinite-horizon LQ problems with decaying disturbances.

The singular problem is regularized by a small penalty ``eps**2`` on the
singular control coordinates (partial cheap control).  Its exact solution
and the zero-order asymptotics in ``eps`` give the infimum of the singular
cost and feedback sequences that attain it in the limit.
"""

from .exceptions import *  # noqa: F401,F403
from .problem_model import (ExpSignal, RawProblem, Oocp, AssumptionCheck, AssumptionReport,
                            validate_raw, validate_reduced, validate_oocp)
from .linalg_core import solve_are, spectral_abscissa, spd_sqrt, expm
from .feedback import AffineFeedback
from .state_transform import TransformData, build_transform, transform_problem, lift_control
from .cheap_solver import CheapSolution, solve_pccp, cheap_feedback, regularized_weight
from .reduced_solver import (ReducedSolution, solve_reduced, reduced_feedback,
                             minimizing_feedback_1, minimizing_feedback_2)
from .simulation import (Trajectory, simulate, evaluate_cost, asymptotic_reference,
                         reduced_cost_integral, transition_decay_probe)
from .sweep import SweepReport, run_sweep
from .problem_file import load_problem, parse_problem, dump_problem, save_problem
from .examples import tracking_problem, tracking_from_nominal, random_raw_problem, random_oocp

__version__ = "0.1.0"
