"""Protection objective: immediate contact cost plus expected rollout cost.

For state X and candidate protection set P the controller scores

    h(P) = mu * C(P) + (1 - mu) * Q(P)

where C charges, for every protected susceptible node, the costs of its
edges to infected neighbors, and Q is the expected total contact cost of
the rollout that applies P now and protects everyone afterwards.

Under that rollout each node i is infected during exactly the relative
times 1..T_i, where T_i is a phase-type duration determined by node i's
current compartment and protection status, and the T_i are mutually
independent.  An edge {i, j} therefore pays its cost for E|T_i - T_j|
steps in expectation, which makes Q a sum of closed-form pairwise terms
and h evaluable exactly.

Per decision step the module builds an ObjectiveContext: the ground set
(susceptible nodes with infected neighbors, the only nodes whose
protection matters), per-edge tables of the four possible Q
contributions (each endpoint protected or not), and the constant
contribution of edges the decision cannot touch.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from .dynamics import (
    SUSCEPTIBLE,
    EpidemicState,
    ProtectionSet,
    infection_probability,
    rollout_ensemble_costs,
)
from .errors import ParameterError
from .instance import Graph, Instance
from .phase_type import DurationDistribution, expected_abs_diff
from .sfm import SetFunction

__all__ = [
    "ground_set",
    "stage_cost",
    "boundary_weights",
    "node_duration",
    "rollout_cost_exact",
    "rollout_cost_mc",
    "ObjectiveContext",
    "build_context",
    "objective_h",
    "normalized_set_function",
]


def ground_set(state: EpidemicState, graph: Graph) -> tuple[int, ...]:
    """Susceptible nodes with at least one infected neighbor, ascending.

    Only these nodes' protection changes the objective: infected nodes
    cannot be shielded from what already happened and interior
    susceptibles face no exposure this step.
    """
    if state.n != graph.n:
        raise ParameterError("state size does not match graph")
    infected = state.codes != SUSCEPTIBLE
    out = []
    for i in np.flatnonzero(~infected):
        nb = graph.neighbors(int(i))
        if nb.size and infected[nb].any():
            out.append(int(i))
    return tuple(out)


def boundary_weights(state: EpidemicState, instance: Instance) -> np.ndarray:
    """w_i = total cost of node i's edges to infected neighbors, for
    susceptible i; zero elsewhere."""
    indptr, nbr, _, cost, _ = instance.adjacency
    w = np.zeros(instance.n)
    if nbr.size == 0:
        return w
    infected_mask = state.codes != SUSCEPTIBLE
    contrib = np.where(infected_mask[nbr], cost, 0.0)
    sums = np.add.reduceat(contrib, np.minimum(indptr[:-1], nbr.size - 1))
    w = np.where(indptr[:-1] < indptr[1:], sums, 0.0)
    w[infected_mask] = 0.0
    return w


def stage_cost(protect: ProtectionSet, state: EpidemicState, instance: Instance) -> float:
    """C(P): summed costs of infected-neighbor edges of protected
    susceptible nodes."""
    if not protect.members:
        return 0.0
    w = boundary_weights(state, instance)
    ids = protect.as_array()
    if ids.size and (ids.min() < 0 or ids.max() >= instance.n):
        raise ParameterError("protection set contains unknown nodes")
    return float(w[ids].sum())


def node_duration(
    i: int,
    state: EpidemicState,
    protect: ProtectionSet,
    instance: Instance,
) -> DurationDistribution:
    """Law of node i's infected span (relative times 1..T_i) under the
    rollout that applies ``protect`` now and shields everyone after."""
    chain = instance.chain
    code = int(state.codes[i])
    if code != SUSCEPTIBLE:
        return DurationDistribution.currently_infected(chain, code)
    if i in protect:
        return DurationDistribution.point_mass_at_zero(chain)
    prob = float(infection_probability(state, instance)[i])
    if prob == 0.0:
        return DurationDistribution.point_mass_at_zero(chain)
    return DurationDistribution.possibly_newly_infected(chain, prob)


def rollout_cost_exact(
    protect: ProtectionSet,
    state: EpidemicState,
    instance: Instance,
    tail_tol: float = 1e-12,
) -> float:
    """Q(P) as the exact sum of per-edge E|T_i - T_j| terms.

    Straightforward reference implementation; the solver path goes
    through build_context instead.
    """
    total = 0.0
    dists: dict[int, DurationDistribution] = {}

    def dist(i: int) -> DurationDistribution:
        if i not in dists:
            dists[i] = node_duration(i, state, protect, instance)
        return dists[i]

    for k, (i, j) in enumerate(instance.graph.edges):
        c = float(instance.params.cost[k])
        if c == 0.0:
            continue
        total += c * expected_abs_diff(dist(i), dist(j), tail_tol)
    return total


def rollout_cost_mc(
    protect: ProtectionSet,
    state: EpidemicState,
    instance: Instance,
    n_samples: int,
    seed: int,
) -> tuple[float, float]:
    """Monte Carlo estimate of Q(P): (mean, standard error)."""
    costs = rollout_ensemble_costs(state, protect, instance, n_samples, seed)
    mean = float(costs.mean())
    se = float(costs.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else float("inf")
    return mean, se


@dataclass(frozen=True)
class ObjectiveContext:
    """Everything needed to evaluate h at one decision step.

    ``tables[k]`` holds edge k's four possible Q contributions indexed
    by 2*(i protected) + (j protected); entries repeat where an
    endpoint's protection is irrelevant.  ``constant_q`` collects edges
    with no ground endpoint.  Ground positions: ``position[node]`` is
    the node's index in ``ground`` or -1.
    """

    instance: Instance
    state: EpidemicState
    mu: float
    tail_tol: float
    ground: tuple[int, ...]
    position: np.ndarray
    weights: np.ndarray          # stage weight per ground position
    edge_i: np.ndarray           # relevant edges: endpoint node ids
    edge_j: np.ndarray
    pos_i: np.ndarray            # ground positions of endpoints, -1 if none
    pos_j: np.ndarray
    tables: np.ndarray           # (n_relevant, 4) cost-scaled Q entries
    constant_q: float

    def member_vector(self, protect: Iterable[int]) -> np.ndarray:
        """Bool vector over ground positions for a protection set."""
        member = np.zeros(len(self.ground) + 1, dtype=bool)
        for i in protect:
            i = int(i)
            if 0 <= i < self.instance.n and self.position[i] >= 0:
                member[self.position[i]] = True
        return member


def build_context(
    state: EpidemicState,
    instance: Instance,
    mu: float,
    tail_tol: float = 1e-12,
) -> ObjectiveContext:
    """Precompute the per-edge decomposition of h for one state."""
    if not 0.0 <= mu <= 1.0:
        raise ParameterError("mu must lie in [0, 1]")
    if tail_tol <= 0:
        raise ParameterError("tail_tol must be positive")
    if state.n != instance.n:
        raise ParameterError("state size does not match instance")

    chain = instance.chain
    p = chain.p
    m_t = chain.transition
    codes = state.codes
    n = instance.n

    ground = ground_set(state, instance.graph)
    position = np.full(n, -1, dtype=np.int64)
    for k, i in enumerate(ground):
        position[i] = k
    weights = boundary_weights(state, instance)[list(ground)] if ground else np.empty(0)

    probs = infection_probability(state, instance)

    # Truncated survival rows S_i(t), t = 1..T, per node that can be
    # infected during the rollout.  T grows until every used start's
    # exact remaining tail drops below tail_tol.
    g = chain.expected_steps
    used_stages = set(int(c) for c in codes if c > 0)
    rows_pow = [np.ones(p)]         # M^t @ 1
    tails_pow = [g.copy()]          # M^t @ g
    t = 0
    need = 1.0
    while need >= tail_tol * 0.5:
        rows_pow.append(m_t @ rows_pow[-1])
        tails_pow.append(m_t @ tails_pow[-1])
        t += 1
        need = 0.0
        for k in used_stages:
            need = max(need, tails_pow[t][k - 1])
        if ground:
            # Newly infected: S(t) = p_i * (M^(t-1) 1)_1, tail index lags.
            need = max(need, tails_pow[t - 1][0] if t >= 1 else g[0])
        if t > 10_000_000:
            raise ParameterError("duration tails failed to contract")
    horizon = t
    u = np.stack(rows_pow[1 : horizon + 1], axis=1) if horizon else np.empty((p, 0))

    surv = np.zeros((n, horizon))
    inf_ids = np.flatnonzero(codes > 0)
    if inf_ids.size:
        surv[inf_ids] = u[codes[inf_ids] - 1]
    catch_ids = np.flatnonzero((codes == SUSCEPTIBLE) & (probs > 0))
    if catch_ids.size and horizon:
        new_row = np.concatenate([[1.0], u[0, : horizon - 1]])
        surv[catch_ids] = probs[catch_ids, None] * new_row[None, :]

    sums = surv.sum(axis=1)

    if instance.graph.m:
        ei = instance.graph.edge_array[:, 0]
        ej = instance.graph.edge_array[:, 1]
        cost = instance.params.cost
        dots = np.einsum("et,et->e", surv[ei], surv[ej])
        base = cost * (sums[ei] + sums[ej] - 2.0 * dots)
        relevant = (position[ei] >= 0) | (position[ej] >= 0)
        constant_q = float(base[~relevant].sum())
        ri, rj = ei[relevant], ej[relevant]
        rcost = cost[relevant]
        rdots = dots[relevant]
        si, sj = sums[ri], sums[rj]
        gi = (position[ri] >= 0).astype(float)
        gj = (position[rj] >= 0).astype(float)
        tables = np.empty((ri.size, 4))
        for bit_i in (0, 1):
            for bit_j in (0, 1):
                fi = 1.0 - bit_i * gi
                fj = 1.0 - bit_j * gj
                tables[:, 2 * bit_i + bit_j] = rcost * (si * fi + sj * fj - 2.0 * rdots * fi * fj)
        pos_i = position[ri]
        pos_j = position[rj]
    else:
        constant_q = 0.0
        ri = rj = pos_i = pos_j = np.empty(0, np.int64)
        tables = np.empty((0, 4))

    return ObjectiveContext(
        instance=instance,
        state=state,
        mu=mu,
        tail_tol=tail_tol,
        ground=ground,
        position=position,
        weights=np.asarray(weights, dtype=float),
        edge_i=ri,
        edge_j=rj,
        pos_i=pos_i,
        pos_j=pos_j,
        tables=tables,
        constant_q=float(constant_q),
    )


def _q_from_membership(ctx: ObjectiveContext, member: np.ndarray) -> float:
    # member has a trailing False so position -1 reads as unprotected.
    si = member[ctx.pos_i].astype(np.int64)
    sj = member[ctx.pos_j].astype(np.int64)
    return ctx.constant_q + float(ctx.tables[np.arange(ctx.tables.shape[0]), 2 * si + sj].sum())


def objective_h(protect: ProtectionSet | Iterable[int], ctx: ObjectiveContext) -> float:
    """h(P) = mu*C(P) + (1-mu)*Q(P), exact."""
    ids = protect.members if isinstance(protect, ProtectionSet) else protect
    member = ctx.member_vector(ids)
    c_val = float(ctx.weights[member[:-1]].sum()) if ctx.ground else 0.0
    # Protected nodes outside the ground set add nothing to C or Q.
    q_val = _q_from_membership(ctx, member)
    return ctx.mu * c_val + (1.0 - ctx.mu) * q_val


def normalized_set_function(ctx: ObjectiveContext, negate_future: bool = False) -> SetFunction:
    """g(P) = h(P) - h(empty) over the ground set, for the minimizer.

    ``negate_future`` flips the sign of the rollout term; it exists only
    as a fault-injection hook for verification suites and must stay
    False in production paths.
    """
    sign = -1.0 if negate_future else 1.0
    future = 1.0 - ctx.mu
    empty = np.zeros(len(ctx.ground) + 1, dtype=bool)
    q_empty = _q_from_membership(ctx, empty)
    n_edges = ctx.tables.shape[0]
    rows = np.arange(n_edges)

    def evaluate(subset: frozenset) -> float:
        member = np.zeros(len(ctx.ground) + 1, dtype=bool)
        for el in subset:
            member[ctx.position[el]] = True
        si = member[ctx.pos_i].astype(np.int64)
        sj = member[ctx.pos_j].astype(np.int64)
        q = ctx.constant_q + float(ctx.tables[rows, 2 * si + sj].sum())
        c = float(ctx.weights[member[:-1]].sum())
        return ctx.mu * c + sign * future * (q - q_empty)

    def prefix_marginals(order: np.ndarray) -> np.ndarray:
        g = len(ctx.ground)
        rank = np.empty(g + 1, dtype=np.int64)
        rank[order] = np.arange(g)
        rank[g] = g  # position -1 reads as "never protected"
        ri = rank[ctx.pos_i]
        rj = rank[ctx.pos_j]
        first = np.minimum(ri, rj)
        second = np.maximum(ri, rj)
        # Entering the prefix first flips one endpoint, entering second
        # flips the other; deltas read straight off the 4-entry table.
        i_first = ri <= rj
        tab = ctx.tables
        d_first = np.where(i_first, tab[rows, 2] - tab[rows, 0], tab[rows, 1] - tab[rows, 0])
        d_second = np.where(i_first, tab[rows, 3] - tab[rows, 2], tab[rows, 3] - tab[rows, 1])
        marg = np.zeros(g)
        ok1 = first < g
        ok2 = second < g
        if n_edges:
            marg += np.bincount(first[ok1], weights=d_first[ok1], minlength=g)
            marg += np.bincount(second[ok2], weights=d_second[ok2], minlength=g)
        marg *= sign * future
        marg += ctx.mu * ctx.weights[order]
        return marg

    return SetFunction(
        elements=ctx.ground,
        evaluate=evaluate,
        prefix_marginals=prefix_marginals,
    )
