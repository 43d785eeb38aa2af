"""Greedy independent sets on configuration-model random graphs.

Exact simulation, fluid limits, Hamiltonians of the one-step increment,
their Legendre duals, Hamilton trajectories and large-deviation rates of the
independent-set size.
"""
__version__ = "0.1.0"

from .errors import (ContractViolation, GreedyLDPError, HamiltonianDomainError, Infeasible,
                     InvalidInput, LeftStateSpace, NumericalFailure, OutOfRange, SingularityError)
from .model import (Covector, DegreeDistribution, DegreeSequence, MacroState, Velocity,
                    initial_macrostate, make_regular, validate_in_E)
from .dynamics import ChainState, RunResult, run_to_absorption, sample_Z, step_cascade, step_exact
from .hamiltonian import H, H_regular, grad_alpha, grad_x, hessian_alpha
from .legendre import cost_general, cost_regular
from .odeflow import (Trajectory, fluid_limit, hamilton_path, hamilton_path_regular,
                      jamming_constant, stopping_time_regular)
from .deviations import (RateCurve, alpha0_for_time, deviation_rate, optimize_over_set_general,
                         rate_curve_regular)
from .montecarlo import EnsembleResult, ensemble, exact_distribution_tiny, tail_probability
