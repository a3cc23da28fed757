"""Randomized self-verification suites.

Each suite re-derives a structural guarantee of the implementation on
freshly sampled inputs and reports pass/fail with a worst observed
slack.  The suites double as the engine behind the ``verify`` CLI
subcommand; their instance factories are also reused by the test suite.

A fault-injection path (negating the rollout term of the objective)
exists to prove the submodularity suite can actually fail; it is only
reachable through ``negate_future=True``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import EpidemicState
from .errors import ParameterError
from .instance import Instance, build_er_graph, sample_params
from .objective import build_context, normalized_set_function
from .phase_type import PhaseTypeChain, from_pmf
from .rng import stream
from .sfm import SetFunction, brute_force_min, check_submodular, min_norm_point

__all__ = [
    "SuiteResult",
    "VerifyReport",
    "random_chain",
    "random_instance",
    "random_state",
    "xor_pair_function",
    "suite_pair_submodularity",
    "suite_objective_submodularity",
    "suite_solver_exactness",
    "run_verify",
]

MU_GRID = (0.0, 0.25, 0.5, 0.85, 1.0)


@dataclass(frozen=True)
class SuiteResult:
    name: str
    checked: int
    failures: int
    worst_slack: float
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.failures == 0


@dataclass(frozen=True)
class VerifyReport:
    suites: tuple[SuiteResult, ...]

    @property
    def ok(self) -> bool:
        return all(s.ok for s in self.suites)


def xor_pair_function(a, b, flag_a: int, flag_b: int, ground=None) -> SetFunction:
    """Normalized set function whose raw value is
    XOR(flag_a * [a not in W], flag_b * [b not in W]).

    ``a`` and ``b`` may coincide, and the ground set may contain extra
    elements that never change the value; both cases are part of the
    guarantee being verified.  Normalization subtracts the raw
    empty-set value, which shifts every value equally and so preserves
    submodularity.
    """
    if flag_a not in (0, 1) or flag_b not in (0, 1):
        raise ParameterError("flags must be 0 or 1")
    elements = tuple(ground) if ground is not None else ((a,) if a == b else (a, b))
    if a not in elements or b not in elements:
        raise ParameterError("ground set must contain both named elements")

    def raw(subset: frozenset) -> float:
        va = flag_a * (0 if a in subset else 1)
        vb = flag_b * (0 if b in subset else 1)
        return float(va ^ vb)

    base = raw(frozenset())
    return SetFunction(elements=elements, evaluate=lambda s: raw(s) - base)


def random_chain(rng: np.random.Generator, max_p: int = 6, kind: str = "mixed") -> PhaseTypeChain:
    """Random recovery chain with certain absorption.

    ``hazard`` chains come from a random pmf on a bounded support (so
    absorption time is bounded); ``dense`` chains are substochastic
    with uniform entries scaled to row sums at most 0.9.
    """
    if kind == "mixed":
        kind = "hazard" if rng.random() < 0.5 else "dense"
    p = int(rng.integers(1, max_p + 1))
    if kind == "hazard":
        masses = rng.random(p) + 0.05
        return from_pmf(masses / masses.sum())
    if kind != "dense":
        raise ParameterError(f"unknown chain kind {kind!r}")
    m = rng.random((p, p))
    scale = rng.uniform(0.3, 0.9, size=p)
    m = m / m.sum(axis=1, keepdims=True) * scale[:, None]
    return PhaseTypeChain(m)


def random_instance(
    rng: np.random.Generator,
    n_max: int = 12,
    max_p: int = 6,
    chain_kind: str = "mixed",
    edge_prob: float | None = None,
    cost_support=(1.0, 2.0, 3.0),
) -> Instance:
    """Random connected-ish instance for randomized suites."""
    n = int(rng.integers(2, n_max + 1))
    prob = float(edge_prob) if edge_prob is not None else float(rng.uniform(0.25, 0.7))
    graph = build_er_graph(n, prob, rng)
    params = sample_params(graph, tuple(cost_support), rng)
    chain = random_chain(rng, max_p=max_p, kind=chain_kind)
    codes = np.zeros(n, dtype=np.int64)
    return Instance(graph, params, chain, codes, seed=0)


def random_state(rng: np.random.Generator, instance: Instance, infected_frac: float = 0.4) -> EpidemicState:
    """Random state with roughly ``infected_frac`` infected nodes in
    random stages; guaranteed at least one infected node."""
    n = instance.n
    codes = np.where(
        rng.random(n) < infected_frac,
        rng.integers(1, instance.chain.p + 1, size=n),
        0,
    ).astype(np.int64)
    if not codes.any():
        codes[int(rng.integers(n))] = 1
    return EpidemicState(codes)


def suite_pair_submodularity(seed: int = 0) -> SuiteResult:
    """All four flag patterns of the XOR building block are submodular,
    with coincident and distinct named elements, on ground sets of size
    2 through 6; exhaustively checked."""
    checked = 0
    failures = 0
    for size in range(2, 7):
        ground = tuple(f"e{k}" for k in range(size))
        for fa in (0, 1):
            for fb in (0, 1):
                for b in (ground[0], ground[1]):
                    f = xor_pair_function(ground[0], b, fa, fb, ground=ground)
                    report = check_submodular(f, mode="exhaustive")
                    checked += report.checked
                    failures += len(report.violations)
    return SuiteResult("pair-submodularity", checked, failures, 0.0)


def suite_objective_submodularity(
    instances: int = 20,
    seed: int = 0,
    negate_future: bool = False,
    slack: float = 1e-9,
    ground_cap: int = 10,
    n_max: int = 12,
) -> SuiteResult:
    """The exact objective is submodular on randomized instances, all
    mu on the grid, exhaustively over the ground set."""
    rng = stream(seed, 17)
    checked = 0
    failures = 0
    worst = 0.0
    done = 0
    while done < instances:
        inst = random_instance(rng, n_max=n_max)
        state = random_state(rng, inst)
        ctx = build_context(state, inst, mu=0.5)
        if not ctx.ground or len(ctx.ground) > ground_cap:
            continue
        done += 1
        for mu in MU_GRID:
            ctx = build_context(state, inst, mu=mu)
            f = normalized_set_function(ctx, negate_future=negate_future)
            report = check_submodular(f, mode="exhaustive", slack=slack)
            checked += report.checked
            failures += len(report.violations)
            if report.violations:
                worst = max(worst, max(v.amount for v in report.violations))
    return SuiteResult(
        "objective-submodularity", checked, failures, worst,
        detail="rollout term negated" if negate_future else "",
    )


def suite_solver_exactness(
    instances: int = 25,
    seed: int = 0,
    ground_cap: int = 12,
    tol: float = 1e-6,
) -> SuiteResult:
    """min_norm_point agrees with brute force on random submodular
    functions, including normalized objectives."""
    rng = stream(seed, 23)
    checked = 0
    failures = 0
    worst = 0.0
    done = 0
    while done < instances:
        inst = random_instance(rng, n_max=10)
        state = random_state(rng, inst)
        mu = float(rng.choice(MU_GRID))
        ctx = build_context(state, inst, mu=mu)
        if not ctx.ground or len(ctx.ground) > ground_cap:
            continue
        done += 1
        f = normalized_set_function(ctx)
        result = min_norm_point(f)
        best_val, _ = brute_force_min(f)
        gap = abs(result.min_value - best_val)
        worst = max(worst, gap)
        checked += 1
        if gap > tol:
            failures += 1
    return SuiteResult("solver-exactness", checked, failures, worst)


def run_verify(level: str = "quick", seed: int = 0) -> VerifyReport:
    """Run the suites; ``full`` uses more and larger random instances."""
    if level == "quick":
        suites = (
            suite_pair_submodularity(seed),
            suite_objective_submodularity(instances=8, seed=seed, ground_cap=8, n_max=10),
            suite_solver_exactness(instances=10, seed=seed, ground_cap=10),
        )
    elif level == "full":
        suites = (
            suite_pair_submodularity(seed),
            suite_objective_submodularity(instances=30, seed=seed),
            suite_solver_exactness(instances=40, seed=seed),
        )
    else:
        raise ParameterError(f"unknown level {level!r}")
    return VerifyReport(suites)
