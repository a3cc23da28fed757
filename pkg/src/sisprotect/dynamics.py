"""Synchronous epidemic dynamics with protection.

State codes: 0 is susceptible, ``k`` in ``1..p`` is infection stage
``k``.  One step reads the whole time-t state and writes time t+1:

* A susceptible node with at least one infected neighbor draws one
  uniform variate per infected neighbor (ascending neighbor id) and
  compares it to the edge's transmission probability; any success makes
  the node newly infected in stage 1 unless the node is protected.
  Protected nodes consume the same draws, so protection changes
  outcomes, never randomness (common random numbers across policies).
* An infected node draws one uniform variate and moves through its
  recovery row's categorical buckets, recovering on the leftover mass.
* Susceptible nodes with no infected neighbor draw nothing.

Draws are consumed in ascending node id.  The all-susceptible state is
absorbing and consumes no randomness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import AbsorptionError, ParameterError
from .instance import Instance
from .rng import stream

__all__ = [
    "SUSCEPTIBLE",
    "EMPTY_PROTECTION",
    "EpidemicState",
    "ProtectionSet",
    "step",
    "susceptible_set",
    "infected_set",
    "is_extinct",
    "infection_probability",
    "rollout_trajectory",
    "rollout_ensemble_costs",
]

SUSCEPTIBLE = 0


@dataclass(frozen=True, eq=False)
class EpidemicState:
    """Compartment codes for every node at one time step."""

    codes: np.ndarray

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int64)
        if codes.ndim != 1 or codes.size == 0:
            raise ParameterError("state codes must be a non-empty 1-d array")
        if (codes < 0).any():
            raise ParameterError("state codes must be non-negative")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @classmethod
    def all_susceptible(cls, n: int) -> "EpidemicState":
        return cls(np.zeros(n, dtype=np.int64))

    @classmethod
    def with_infected(cls, n: int, infected: Iterable[int], stage: int = 1) -> "EpidemicState":
        codes = np.zeros(n, dtype=np.int64)
        codes[list(infected)] = stage
        return cls(codes)

    @property
    def n(self) -> int:
        return self.codes.size

    def infected_count(self) -> int:
        return int(np.count_nonzero(self.codes))

    def __eq__(self, other):
        if not isinstance(other, EpidemicState):
            return NotImplemented
        return np.array_equal(self.codes, other.codes)

    __hash__ = None


@dataclass(frozen=True)
class ProtectionSet:
    """Set of node ids whose susceptible members cannot be infected."""

    members: frozenset[int] = field(default_factory=frozenset)

    @classmethod
    def of(cls, ids: Iterable[int]) -> "ProtectionSet":
        return cls(frozenset(int(i) for i in ids))

    def __contains__(self, i) -> bool:
        return i in self.members

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(sorted(self.members))

    def as_array(self) -> np.ndarray:
        return np.fromiter(self.members, dtype=np.int64, count=len(self.members))


EMPTY_PROTECTION = ProtectionSet()


def susceptible_set(state: EpidemicState) -> np.ndarray:
    """Susceptible node ids, ascending."""
    return np.flatnonzero(state.codes == SUSCEPTIBLE)


def infected_set(state: EpidemicState) -> np.ndarray:
    """Infected node ids, ascending."""
    return np.flatnonzero(state.codes != SUSCEPTIBLE)


def is_extinct(state: EpidemicState) -> bool:
    return not state.codes.any()


def _segment_reduce(op, values: np.ndarray, indptr: np.ndarray, empty):
    """Per-segment reduction tolerating empty (including trailing) segments."""
    n_seg = indptr.size - 1
    if values.size == 0:
        return np.full(n_seg, empty, dtype=values.dtype if values.dtype != bool else np.int64)
    starts = np.minimum(indptr[:-1], values.size - 1)
    out = op.reduceat(values, starts)
    return np.where(indptr[:-1] < indptr[1:], out, empty)


def _validate(state: EpidemicState, protect: ProtectionSet, instance: Instance) -> None:
    if state.n != instance.n:
        raise ParameterError("state size does not match instance")
    if state.codes.max(initial=0) > instance.chain.p:
        raise ParameterError("state stage exceeds chain size")
    if protect.members and (min(protect.members) < 0 or max(protect.members) >= instance.n):
        raise ParameterError("protection set contains unknown nodes")


def step(
    state: EpidemicState,
    protect: ProtectionSet,
    instance: Instance,
    rng: np.random.Generator,
) -> EpidemicState:
    """One synchronous transition of the protected epidemic."""
    _validate(state, protect, instance)
    codes = state.codes
    infected_mask = codes != SUSCEPTIBLE
    if not infected_mask.any():
        return state

    indptr, nbr, beta, _, _ = instance.adjacency
    n = instance.n
    susc_mask = ~infected_mask

    # Number of infected neighbors per node.
    inf_nbr = infected_mask[nbr].astype(np.int64) if nbr.size else np.empty(0, np.int64)
    inf_deg = _segment_reduce(np.add, inf_nbr, indptr, 0)

    # Draw layout: ascending node id, one slot per infected neighbor for
    # boundary susceptibles, one recovery slot for infected nodes.
    draws = np.where(infected_mask, 1, inf_deg)
    offsets = np.concatenate([[0], np.cumsum(draws)])
    u = rng.random(int(offsets[-1]))

    new_codes = codes.copy()

    boundary = np.flatnonzero(susc_mask & (inf_deg > 0))
    if boundary.size:
        counts = inf_deg[boundary]
        # CSR slots belonging to (susceptible node, infected neighbor)
        # pairs, already ordered by (node, neighbor) ascending.
        slot_mask = (inf_nbr > 0) & susc_mask.repeat(np.diff(indptr))
        bvals = beta[slot_mask]
        seg_starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        upos = np.repeat(offsets[boundary], counts) + (np.arange(bvals.size) - np.repeat(seg_starts, counts))
        hits = u[upos] < bvals
        node_hit = np.logical_or.reduceat(hits, seg_starts)
        unprotected = ~np.isin(boundary, protect.as_array())
        new_codes[boundary[node_hit & unprotected]] = 1

    # Recoveries: one categorical draw per infected node over its row;
    # the leftover bucket past the row sum is recovery.
    infected_ids = np.flatnonzero(infected_mask)
    cums = np.cumsum(instance.chain.transition, axis=1)
    uinf = u[offsets[infected_ids]]
    nxt = (uinf[:, None] >= cums[codes[infected_ids] - 1]).sum(axis=1) + 1
    new_codes[infected_ids] = np.where(nxt > instance.chain.p, SUSCEPTIBLE, nxt)

    return EpidemicState(new_codes)


def infection_probability(state: EpidemicState, instance: Instance) -> np.ndarray:
    """Per-node probability of infection this step if left unprotected.

    For susceptible node i this is 1 - prod over infected neighbors j of
    (1 - beta_ij); zero for infected nodes and interior susceptibles.
    """
    indptr, nbr, beta, _, _ = instance.adjacency
    if nbr.size == 0:
        return np.zeros(instance.n)
    infected_mask = state.codes != SUSCEPTIBLE
    miss = np.where(infected_mask[nbr], 1.0 - beta, 1.0)
    probs = 1.0 - _segment_reduce(np.multiply, miss, indptr, 1.0)
    probs[infected_mask] = 0.0
    return np.clip(probs, 0.0, 1.0)


def rollout_trajectory(
    state: EpidemicState,
    protect: ProtectionSet,
    instance: Instance,
    seed: int,
    max_t: int = 1_000_000,
) -> list[EpidemicState]:
    """States of one rollout path: apply ``protect`` for the first step,
    protect every susceptible node afterwards, stop at extinction or
    ``max_t``.  Index into the returned list is relative time."""
    states = [state]
    current = state
    t = 0
    while not is_extinct(current) and t < max_t:
        policy = protect if t == 0 else ProtectionSet.of(susceptible_set(current).tolist())
        current = step(current, policy, instance, stream(seed, t))
        states.append(current)
        t += 1
    return states


def rollout_ensemble_costs(
    state: EpidemicState,
    protect: ProtectionSet,
    instance: Instance,
    n_samples: int,
    seed: int,
) -> np.ndarray:
    """Total rollout contact cost for ``n_samples`` independent paths.

    The rollout applies ``protect`` on the first transition and shields
    every susceptible node afterwards, so past the first step only
    recoveries happen.  A path's cost sums, over relative times tau >= 1
    and edges, the edge cost whenever exactly one endpoint is infected.

    Infection draws are aggregated per node (equal in law to per-edge
    draws) and paths advance in lockstep, so this matches repeated
    single-path rollouts in distribution, not draw for draw.
    """
    _validate(state, protect, instance)
    if n_samples < 1:
        raise ParameterError("n_samples must be at least 1")
    instance.chain.expected_steps  # absorption certainty up front
    rng = stream(seed)
    n = instance.n
    p = instance.chain.p
    codes0 = state.codes

    codes = np.broadcast_to(codes0, (n_samples, n)).copy()

    # First transition: aggregated infection draws for unprotected
    # boundary susceptibles, then chain moves for the initially infected.
    probs = infection_probability(state, instance)
    can_catch = (codes0 == SUSCEPTIBLE) & (probs > 0)
    if protect.members:
        can_catch[protect.as_array()] = False
    catchable = np.flatnonzero(can_catch)
    if catchable.size:
        hit = rng.random((n_samples, catchable.size)) < probs[catchable]
        codes[:, catchable] = hit.astype(np.int64)

    cums = np.cumsum(instance.chain.transition, axis=1)
    init_inf = np.flatnonzero(codes0 != SUSCEPTIBLE)
    if init_inf.size:
        uu = rng.random((n_samples, init_inf.size))
        row_cums = cums[codes0[init_inf] - 1]
        nxt = (uu[:, :, None] >= row_cums[None, :, :]).sum(axis=2) + 1
        codes[:, init_inf] = np.where(nxt > p, SUSCEPTIBLE, nxt)

    if instance.graph.m:
        ei = instance.graph.edge_array[:, 0]
        ej = instance.graph.edge_array[:, 1]
    else:
        ei = ej = np.empty(0, np.int64)
    cost = instance.params.cost

    totals = np.zeros(n_samples)
    active = np.arange(n_samples)
    for _ in range(10_000_000):
        inf = codes != SUSCEPTIBLE
        if ei.size:
            mism = inf[:, ei] ^ inf[:, ej]
            totals[active] += mism @ cost
        alive = inf.any(axis=1)
        if not alive.any():
            return totals
        codes = codes[alive]
        active = active[alive]
        idx = np.nonzero(codes != SUSCEPTIBLE)
        uu = rng.random(idx[0].size)
        nxt = (uu[:, None] >= cums[codes[idx] - 1]).sum(axis=1) + 1
        codes[idx] = np.where(nxt > p, SUSCEPTIBLE, nxt)
    raise AbsorptionError("rollout failed to reach extinction")
