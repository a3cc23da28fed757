"""Recovery durations as absorbing Markov chains.

An infected node walks through stages ``I_1..I_p`` according to a
substochastic transition matrix; the missing row mass is the per-step
probability of absorbing into the recovered (susceptible) state.  The
number of steps until absorption is the node's remaining infection
duration, a discrete phase-type random variable.

The closed-loop objective needs two distributional quantities:

* ``survival``: tail probabilities P(T > t) for a single duration, and
* ``expected_abs_diff``: E|T_1 - T_2| for two independent durations,

where a duration is either the remaining time of a currently infected
node (one chain step happens before the first tail is evaluated) or the
total time of a possibly newly infected node (with some probability the
node is never infected and its duration is zero).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import AbsorptionError, ParameterError

__all__ = [
    "CURRENT_INFECTED",
    "NEWLY_INFECTED",
    "PhaseTypeChain",
    "DurationDistribution",
    "from_pmf",
    "absorption_pmf",
    "survival",
    "expected_abs_diff",
]

ATOL = 1e-12

# Offset conventions for a duration observed at a reference time step.
# current_infected: the node is already in some stage; its first tail
#   value P(T > 1) is evaluated after one further chain step.
# newly_infected: the node may enter stage 1 on the next step; P(T > 1)
#   is the entry probability itself (the node is still infected one
#   step after entering).
CURRENT_INFECTED = "current_infected"
NEWLY_INFECTED = "newly_infected"


@dataclass(frozen=True, eq=False)
class PhaseTypeChain:
    """Substochastic chain on infection stages with certain absorption.

    ``transition[k, l]`` is the one-step probability of moving from
    stage ``k+1`` to stage ``l+1``; the row deficit
    ``1 - transition[k].sum()`` is the probability of recovering from
    stage ``k+1``.
    """

    transition: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.transition, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ParameterError("transition matrix must be square and non-empty")
        if not np.isfinite(m).all() or (m < -ATOL).any():
            raise ParameterError("transition probabilities must be finite and non-negative")
        if (m.sum(axis=1) > 1.0 + ATOL).any():
            raise ParameterError("transition row sums must not exceed 1")
        m = np.clip(m, 0.0, None)
        m.setflags(write=False)
        object.__setattr__(self, "transition", m)

    @property
    def p(self) -> int:
        """Number of infection stages."""
        return self.transition.shape[0]

    @cached_property
    def absorb(self) -> np.ndarray:
        """Per-stage one-step recovery probabilities."""
        a = np.clip(1.0 - self.transition.sum(axis=1), 0.0, 1.0)
        a.setflags(write=False)
        return a

    @cached_property
    def expected_steps(self) -> np.ndarray:
        """Expected steps to absorption from each stage.

        Raises AbsorptionError when absorption is not certain; for a
        substochastic matrix that is exactly the case where I - M is
        singular or its inverse is not non-negative.
        """
        m = self.transition
        eye = np.eye(self.p)
        try:
            g = np.linalg.solve(eye - m, np.ones(self.p))
        except np.linalg.LinAlgError:
            raise AbsorptionError("recovery chain never absorbs from some stage") from None
        if not np.isfinite(g).all() or (g < 1.0 - 1e-6).any() or g.max() > 1e12:
            raise AbsorptionError("recovery chain never absorbs from some stage")
        g.setflags(write=False)
        return g

    def __eq__(self, other):
        if not isinstance(other, PhaseTypeChain):
            return NotImplemented
        return np.array_equal(self.transition, other.transition)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DurationDistribution:
    """Law of one node's infection duration, as seen by the objective.

    T counts the relative time steps 1..T during which the node is
    infected under the rollout.  With probability ``1 - alpha.sum()``
    the duration is zero; otherwise the chain starts in a stage drawn
    from ``alpha`` and

    * ``CURRENT_INFECTED``: P(T > t) = alpha @ M^(t+1) @ 1
      (the node is mid-infection now; one transition happens before
      relative time 1, so T is the remaining absorption time minus one)
    * ``NEWLY_INFECTED``:   P(T > t) = alpha @ M^t @ 1
      (the node enters stage 1 on the first transition and counts as
      infected at relative time 1, so T is the full absorption time).

    Protected or interior susceptible nodes use the point mass at zero
    (``alpha`` all zeros).
    """

    chain: PhaseTypeChain
    alpha: np.ndarray
    offset: str

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        if a.shape != (self.chain.p,):
            raise ParameterError("alpha must have one entry per stage")
        if not np.isfinite(a).all() or (a < -ATOL).any():
            raise ParameterError("alpha entries must be finite and non-negative")
        if a.sum() > 1.0 + ATOL:
            raise ParameterError("alpha must have total mass at most 1")
        if self.offset not in (CURRENT_INFECTED, NEWLY_INFECTED):
            raise ParameterError(f"unknown offset {self.offset!r}")
        a = np.clip(a, 0.0, None)
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def weight(self) -> float:
        """Mass of the point at zero."""
        return max(0.0, 1.0 - float(self.alpha.sum()))

    @classmethod
    def point_mass_at_zero(cls, chain: PhaseTypeChain) -> "DurationDistribution":
        return cls(chain, np.zeros(chain.p), CURRENT_INFECTED)

    @classmethod
    def currently_infected(cls, chain: PhaseTypeChain, stage: int) -> "DurationDistribution":
        """Remaining duration of a node now in 1-based ``stage``."""
        if not 1 <= stage <= chain.p:
            raise ParameterError(f"stage {stage} outside 1..{chain.p}")
        alpha = np.zeros(chain.p)
        alpha[stage - 1] = 1.0
        return cls(chain, alpha, CURRENT_INFECTED)

    @classmethod
    def possibly_newly_infected(cls, chain: PhaseTypeChain, prob: float) -> "DurationDistribution":
        """Total duration of a node that enters stage 1 with ``prob``."""
        if not 0.0 <= prob <= 1.0 + ATOL:
            raise ParameterError("infection probability must lie in [0, 1]")
        alpha = np.zeros(chain.p)
        alpha[0] = min(prob, 1.0)
        return cls(chain, alpha, NEWLY_INFECTED)

    def __eq__(self, other):
        if not isinstance(other, DurationDistribution):
            return NotImplemented
        return (
            self.chain == other.chain
            and np.array_equal(self.alpha, other.alpha)
            and self.offset == other.offset
        )

    __hash__ = None


def from_pmf(pmf) -> PhaseTypeChain:
    """Linear chain whose absorption time from stage 1 has law ``pmf``.

    ``pmf[t-1]`` is the desired probability of absorbing exactly at step
    ``t``.  Stage ``k`` absorbs with the hazard rate
    ``pmf[k-1] / sum(pmf[k-1:])`` and otherwise moves to stage ``k+1``,
    which reproduces the target law exactly.
    """
    masses = np.asarray(pmf, dtype=float)
    if masses.ndim != 1 or masses.size == 0:
        raise ParameterError("pmf must be a non-empty 1-d sequence")
    if not np.isfinite(masses).all() or (masses < 0).any():
        raise ParameterError("pmf masses must be finite and non-negative")
    total = masses.sum()
    if total <= 0:
        raise ParameterError("pmf must have positive total mass")
    if abs(total - 1.0) > 1e-9:
        raise ParameterError("pmf must sum to 1")
    support = np.flatnonzero(masses)
    m = int(support[-1]) + 1
    masses = masses[:m]
    tails = np.cumsum(masses[::-1])[::-1]
    hazards = masses / tails
    transition = np.zeros((m, m))
    for k in range(m - 1):
        transition[k, k + 1] = 1.0 - hazards[k]
    return PhaseTypeChain(transition)


def absorption_pmf(chain: PhaseTypeChain, start: int, horizon: int) -> np.ndarray:
    """P(absorb exactly at step t) for t = 1..horizon from 1-based ``start``."""
    if not 1 <= start <= chain.p:
        raise ParameterError(f"start stage {start} outside 1..{chain.p}")
    if horizon < 1:
        raise ParameterError("horizon must be at least 1")
    out = np.empty(horizon)
    v = np.zeros(chain.p)
    v[start - 1] = 1.0
    for t in range(horizon):
        out[t] = v @ chain.absorb
        v = v @ chain.transition
    return out


def survival(dist: DurationDistribution, t: int) -> float:
    """P(T > t) for integer t >= 0, equivalently the probability the
    node is still infected at relative time t + 1."""
    if t < 0:
        raise ParameterError("t must be non-negative")
    steps = t + 1 if dist.offset == CURRENT_INFECTED else t
    w = dist.alpha
    for _ in range(steps):
        w = w @ dist.chain.transition
    return float(w.sum())


def _tail_vector(chain: PhaseTypeChain) -> np.ndarray:
    # expected_steps doubles as the exact remaining-tail weight:
    # sum_{s>t} P(T > s) = w_t @ M @ (I - M)^{-1} @ 1 for w_t = alpha M^{t-off}.
    return chain.expected_steps


def expected_abs_diff(
    d1: DurationDistribution, d2: DurationDistribution, tail_tol: float = 1e-12
) -> float:
    """E|T_1 - T_2| for independent durations ``d1`` and ``d2``.

    |T_1 - T_2| counts the time steps where exactly one of the two
    nodes is infected, so with S_i(t) = P(T_i >= t),

        E|T_1 - T_2| = sum_{t>=1} [S_1(t) + S_2(t) - 2 S_1(t) S_2(t)].

    The sum is truncated once the exact remaining tails
    sum_{s>t} S_i(s), computed in closed form from the chains, add up
    to less than ``tail_tol``; each omitted summand lies in
    [0, S_1 + S_2], so the truncation error stays below ``tail_tol``.
    """
    if tail_tol <= 0:
        raise ParameterError("tail_tol must be positive")
    g1 = _tail_vector(d1.chain)
    g2 = _tail_vector(d2.chain)
    m1, m2 = d1.chain.transition, d2.chain.transition

    # State weights at t = 1: S(1) = P(T >= 1) is alpha @ 1 for a new
    # infection and alpha @ M @ 1 for one already in progress.
    w1 = d1.alpha if d1.offset == NEWLY_INFECTED else d1.alpha @ m1
    w2 = d2.alpha if d2.offset == NEWLY_INFECTED else d2.alpha @ m2

    total = 0.0
    max_iter = 10_000_000
    for _ in range(max_iter):
        s1 = w1.sum()
        s2 = w2.sum()
        total += s1 + s2 - 2.0 * s1 * s2
        w1 = w1 @ m1
        w2 = w2 @ m2
        if w1 @ g1 + w2 @ g2 < tail_tol:
            return float(total)
    raise AbsorptionError("duration tails failed to contract")
