"""Fuel-optimal control of linear systems with discrete input sets.

The admissible inputs are a finite set (coast, saturated axis burns, and
optional extra points inside the 1-norm ball). Minimum-fuel steering over
such a set is combinatorial, but relaxing the input to the convex hull and
minimizing the integrated 1-norm yields a linear program whose optimum
provably lands back on the finite set at almost every instant. This
package builds that LP from a continuous-time plant, solves it with a
deterministic interior-point method, certifies the discreteness of the
result, and cross-checks small instances against exhaustive enumeration.
"""

__version__ = "0.1.0"

from .errors import ValidationError
from .linsys import (
    AugmentedSystem,
    ControllabilityReport,
    DiscretizedSystem,
    LtiSystem,
    augment,
    controllability_rank,
    matrix_exponential,
    zoh_discretize,
)
from .inputset import (
    AugmentedExtremeSet,
    CrossPolytope,
    DiscreteInputSet,
    InputSetReport,
    augmented_extreme_points,
    distance_to_set,
    hull_extreme_points,
    project_to_set,
    validate,
)
from .transcription import (
    StandardFormProgram,
    TranscribedProblem,
    VariableLayout,
    extract_solution,
    transcribe,
)
from .lpsolve import (
    Certificate,
    KktReport,
    LpResult,
    LpStatus,
    SolverOptions,
    dump_program,
    kkt_report,
    solve_lp,
)
from .analysis import (
    BangBangCertificate,
    DiscretenessReport,
    Solution,
    discreteness_report,
    hands_off_measure,
    propagate,
    verify_bang_bang,
)
from .oracle import (
    LosslessnessReport,
    OracleConfig,
    OracleResult,
    enumerate_optimal,
    verify_losslessness,
)
from .harness import (
    MonteCarloConfig,
    ProblemSpec,
    RendezvousScenario,
    RunReport,
    cw_system,
    rendezvous_input_set,
    rendezvous_problem,
    run_montecarlo,
    run_solve,
    run_sweep,
)
