"""Time-bin MPS simulator for a pulsed two-level emitter coupled to a
semi-infinite waveguide with mirror-induced time-delayed feedback.

Computes individual photon-number probabilities p(n) of the emitted field
and their control by the round-trip delay and feedback phase.
"""

from .evolve import (CutoffOverflowError, SimulationGrid, Trajectory, build_grid,
                     run_simulation, step)
from .model import (NumericalParams, PhysicalParams, StepOperators, assemble_u,
                    build_m_fb, build_m_tls, build_step_operators, dump_operators,
                    pulse_envelope)
from .mps_core import (EXACT, SYSTEM_LABEL, PreconditionError, TimeBinState,
                       TruncationPolicy, apply_gate, expectation_local,
                       expectation_mpo, init_vacuum, move_center, swap_adjacent)
from .observables import (CorrelationSet, NestedSumGuardError, NormalizedStats,
                          PhotonStats, ResidualExcitationError, bin_occupations,
                          closure_error, factorial_moments,
                          nested_sum_correlations, normalize_against_baseline,
                          photon_probabilities, residual_excitation,
                          vacuum_probability)
from .oracles import (DdeSolution, analytic_feedback_population, dde_integrate,
                      markov_counting_distribution, markov_counting_pn,
                      phase_robustness, piecewise_feedback_population,
                      rabi_final_population)

__version__ = "0.1.0"
