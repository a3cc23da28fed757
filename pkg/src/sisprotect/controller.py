"""Closed-loop protection controller.

At each decision step the controller builds the exact objective for the
current state, minimizes it over subsets of the ground set with the
minimum-norm-point solver, applies the minimal minimizer as the
protection set, and advances the epidemic one step.  With mu = 1 the
objective reduces to the non-negative immediate cost, whose minimal
minimizer is always the empty set, so the loop coincides with the
uncontrolled process draw for draw.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dynamics import (
    EMPTY_PROTECTION,
    EpidemicState,
    ProtectionSet,
    is_extinct,
    step,
)
from .errors import ParameterError
from .instance import Instance
from .objective import boundary_weights, build_context, ground_set, normalized_set_function, objective_h
from .rng import stream
from .sfm import min_norm_point

__all__ = [
    "ControllerConfig",
    "StepRecord",
    "TrajectoryRecord",
    "select_protection",
    "run_closed_loop",
]

TERMINAL_EXTINCT = "extinct"
TERMINAL_MAX_STEPS = "max_steps"


@dataclass(frozen=True)
class ControllerConfig:
    """Knobs of one closed-loop run.

    ``mu`` trades immediate protection cost against expected future
    contact cost; ``solver_tol`` is the minimum-norm-point tolerance;
    ``tail_tol`` bounds per-edge truncation error of the exact rollout
    cost; ``max_steps`` caps the number of recorded decision steps.
    """

    mu: float
    solver_tol: float = 1e-9
    tail_tol: float = 1e-12
    max_steps: int = 200

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ParameterError("mu must lie in [0, 1]")
        if self.solver_tol <= 0 or self.tail_tol <= 0:
            raise ParameterError("tolerances must be positive")
        if self.max_steps < 1:
            raise ParameterError("max_steps must be at least 1")


@dataclass(frozen=True)
class StepRecord:
    """One decision step of a run.

    ``protect_all_cost`` is the immediate cost of protecting the whole
    ground set, the comparator for realized savings; ``objective`` is
    h of the chosen set.  The final record of an extinct run has zero
    in every field except ``t``."""

    t: int
    infected: int
    protected: int
    stage_cost: float
    protect_all_cost: float
    objective: float
    solver_iterations: int


@dataclass(frozen=True)
class TrajectoryRecord:
    steps: tuple[StepRecord, ...]
    terminal: str
    states: tuple[EpidemicState, ...] = ()


def select_protection(
    state: EpidemicState, instance: Instance, config: ControllerConfig
) -> tuple[ProtectionSet, float, int]:
    """Minimize h over the ground set; returns (set, h value, solver majors).

    The minimal minimizer is applied: among all exact minimizers it
    protects the fewest nodes.
    """
    ground = ground_set(state, instance.graph)
    ctx = build_context(state, instance, config.mu, config.tail_tol)
    if not ground:
        return EMPTY_PROTECTION, objective_h(EMPTY_PROTECTION, ctx), 0
    f = normalized_set_function(ctx)
    result = min_norm_point(f, tol=config.solver_tol)
    chosen = ProtectionSet.of(result.minimal_minimizer)
    return chosen, objective_h(chosen, ctx), result.iterations


def run_closed_loop(
    instance: Instance,
    config: ControllerConfig,
    seed: int,
    protect_none: bool = False,
    collect_states: bool = False,
) -> TrajectoryRecord:
    """Run the controlled epidemic from the instance's initial state.

    Per-step randomness comes from independent streams addressed by
    ``(seed, t)``, so two runs with the same seed see identical draws
    regardless of policy.  ``protect_none`` forces the empty protection
    set everywhere (the uncontrolled baseline).  Records one row per
    visited state; on extinction the final row is all zeros, and a run
    still alive after ``max_steps`` rows stops with terminal
    "max_steps".
    """
    state = EpidemicState(instance.init_codes)
    records: list[StepRecord] = []
    states: list[EpidemicState] = [state] if collect_states else []
    t = 0
    terminal = TERMINAL_MAX_STEPS
    while True:
        if is_extinct(state):
            records.append(StepRecord(t, 0, 0, 0.0, 0.0, 0.0, 0))
            terminal = TERMINAL_EXTINCT
            break
        if t >= config.max_steps:
            break
        if protect_none:
            chosen, h_val, iters = EMPTY_PROTECTION, 0.0, 0
        else:
            chosen, h_val, iters = select_protection(state, instance, config)
        w = boundary_weights(state, instance)
        records.append(
            StepRecord(
                t=t,
                infected=state.infected_count(),
                protected=len(chosen),
                stage_cost=float(w[chosen.as_array()].sum()) if len(chosen) else 0.0,
                protect_all_cost=float(w.sum()),
                objective=h_val,
                solver_iterations=iters,
            )
        )
        state = step(state, chosen, instance, stream(seed, t))
        if collect_states:
            states.append(state)
        t += 1
    return TrajectoryRecord(tuple(records), terminal, tuple(states))
