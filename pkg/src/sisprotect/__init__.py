"""Closed-loop protection of a networked SIS-type epidemic.

The epidemic spreads over a graph in discrete time: susceptible nodes
catch infection from infected neighbors through independent per-edge
coin flips, infected nodes recover through an absorbing stage chain.
Each step a controller picks a set of susceptible nodes to protect by
exactly minimizing a submodular trade-off between the immediate cost of
protection and the expected future contact cost, via the
minimum-norm-point algorithm.
"""

from .controller import ControllerConfig, StepRecord, TrajectoryRecord, run_closed_loop, select_protection
from .dynamics import (
    EMPTY_PROTECTION,
    EpidemicState,
    ProtectionSet,
    infected_set,
    is_extinct,
    rollout_trajectory,
    step,
    susceptible_set,
)
from .errors import AbsorptionError, ParameterError, ParseError, SolverError
from .experiments import DEFAULT_MU_GRID, SweepSpec, percentile_bands, run_sweep
from .instance import (
    Graph,
    Instance,
    InstanceSpec,
    SpreadParams,
    build_er_graph,
    build_instance,
    loads_instance,
    dumps_instance,
    read_instance,
    sample_params,
    write_instance,
)
from .objective import (
    ObjectiveContext,
    build_context,
    ground_set,
    node_duration,
    normalized_set_function,
    objective_h,
    rollout_cost_exact,
    rollout_cost_mc,
    stage_cost,
)
from .phase_type import (
    CURRENT_INFECTED,
    NEWLY_INFECTED,
    DurationDistribution,
    PhaseTypeChain,
    absorption_pmf,
    expected_abs_diff,
    from_pmf,
    survival,
)
from .sfm import (
    MinNormResult,
    SetFunction,
    brute_force_min,
    check_submodular,
    greedy_vertex,
    min_norm_point,
)

__version__ = "0.1.0"
