"""Exact minimization of submodular set functions.

The minimizer is the classic minimum-norm-point scheme: find the point
of least Euclidean norm in the base polytope via Wolfe's algorithm,
then read the minimizers off the sign pattern of that point.  The only
access to the function is through greedy linear minimization over the
base polytope, so callers supply an evaluation oracle (and optionally a
fast prefix-marginal oracle) over a fixed ground tuple.

Also here: brute-force minimization and submodularity checking, used as
independent oracles by the test suite and the verification command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError, SolverError

__all__ = [
    "SetFunction",
    "MinNormResult",
    "Violation",
    "SubmodularityReport",
    "greedy_vertex",
    "min_norm_point",
    "brute_force_min",
    "check_submodular",
]


@dataclass(frozen=True)
class SetFunction:
    """A set function over an ordered ground tuple.

    ``evaluate`` must be deterministic, finite, and normalized so that
    ``evaluate(frozenset()) == 0``.  ``prefix_marginals``, if given,
    must return, for a permutation of ground positions, the marginal
    values f(prefix + element) - f(prefix) in permutation order; it is a
    performance hook and must agree with ``evaluate``.
    """

    elements: tuple
    evaluate: Callable[[frozenset], float]
    prefix_marginals: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        elements = tuple(self.elements)
        if len(set(elements)) != len(elements):
            raise ParameterError("ground elements must be distinct")
        object.__setattr__(self, "elements", elements)

    @property
    def size(self) -> int:
        return len(self.elements)

    def value(self, subset) -> float:
        return float(self.evaluate(frozenset(subset)))


@dataclass(frozen=True)
class MinNormResult:
    """Output of min_norm_point.

    ``x`` is the minimum-norm base-polytope point aligned with the
    ground tuple.  ``minimal_minimizer``/``maximal_minimizer`` are the
    inclusion-extremes of the minimizing family; ``certified_gap`` is
    f(minimal_minimizer) minus the lower bound sum(min(x, 0)), a
    non-negative certificate of exactness when it is ~0.
    """

    x: np.ndarray
    min_value: float
    minimal_minimizer: frozenset
    maximal_minimizer: frozenset
    iterations: int
    certified_gap: float


@dataclass(frozen=True)
class Violation:
    """One witnessed failure of the diminishing-returns inequality."""

    element: object
    smaller: frozenset
    larger: frozenset
    amount: float


@dataclass(frozen=True)
class SubmodularityReport:
    checked: int
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def greedy_vertex(f: SetFunction, order: Sequence) -> np.ndarray:
    """Base-polytope vertex of the greedy order: component k (aligned
    with ``f.elements``) is the marginal value of ``order[k]`` on top of
    the prefix before it."""
    g = f.size
    if len(order) != g:
        raise ParameterError("order must be a permutation of the ground set")
    index = {el: k for k, el in enumerate(f.elements)}
    try:
        positions = np.array([index[el] for el in order], dtype=np.int64)
    except KeyError as e:
        raise ParameterError(f"order contains unknown element {e.args[0]!r}") from None
    if np.unique(positions).size != g:
        raise ParameterError("order must visit every element exactly once")

    x = np.empty(g)
    if f.prefix_marginals is not None:
        x[positions] = f.prefix_marginals(positions)
        return x
    prev = 0.0
    prefix = []
    for k, el in enumerate(order):
        prefix.append(el)
        val = float(f.evaluate(frozenset(prefix)))
        x[positions[k]] = val - prev
        prev = val
    return x


def _affine_minimizer(vertices: np.ndarray) -> np.ndarray:
    """Coefficients of the min-norm point of the affine hull of rows."""
    m = vertices.shape[0]
    gram = vertices @ vertices.T
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = gram
    kkt[:m, m] = 1.0
    kkt[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    try:
        sol = np.linalg.solve(kkt, rhs)
        if not np.isfinite(sol).all():
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:m]


_DROP_TOL = 1e-12


def min_norm_point(
    f: SetFunction,
    tol: float = 1e-9,
    max_major: int | None = None,
    initial_order: Sequence | None = None,
) -> MinNormResult:
    """Exact submodular minimization via the minimum-norm point.

    Wolfe's algorithm over the base polytope: alternate a greedy linear
    minimization oracle (ties in the sort broken by ascending ground
    position, stable) with affine minimizations over the current
    vertex set, dropping vertices whose convex coefficient falls below
    1e-12.  Terminates when the duality check
    <x, q> >= <x, x> - eps holds with eps the larger of tol^2 and the
    float resolution of the two inner products (so large problems stop
    at their actual numerical floor), when the oracle returns a vertex
    already kept, or when a full major cycle no longer moves x (the
    two guards protect against floating-point stalls near optimality).

    Raises SolverError carrying the best result if the major-cycle cap
    (default 100 * size^2) is exceeded.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    g = f.size
    if g == 0:
        empty = frozenset()
        return MinNormResult(np.empty(0), 0.0, empty, empty, 0, 0.0)
    cap = max_major if max_major is not None else 100 * g * g

    order0 = tuple(initial_order) if initial_order is not None else f.elements
    x = greedy_vertex(f, order0)
    vertices = x.reshape(1, g).copy()
    lam = np.ones(1)

    majors = 0
    while True:
        if majors >= cap:
            result = _finalize(f, x, majors, tol)
            raise SolverError(
                f"no convergence within {cap} major cycles "
                f"(certified gap {result.certified_gap:.3e})",
                result=result,
            )
        majors += 1

        # Greedy LMO: ascending x, stable so equal components follow
        # ground order.
        order_pos = np.argsort(x, kind="stable")
        q = np.empty(g)
        if f.prefix_marginals is not None:
            q[order_pos] = f.prefix_marginals(order_pos)
        else:
            q = greedy_vertex(f, tuple(f.elements[k] for k in order_pos))

        xx = float(x @ x)
        xq = float(x @ q)
        # with ties in the ground weights the oracle can cycle through
        # vertices forever once the gap is below float resolution
        floor = 64.0 * np.finfo(np.float64).eps * (1.0 + abs(xx) + abs(xq))
        if xq >= xx - max(tol * tol, floor):
            break
        # Oracle returned a vertex already in the active set: at the
        # numerical floor, no descent direction remains.
        if np.any(np.all(np.abs(vertices - q) <= 1e-12 * (1.0 + np.abs(q)), axis=1)):
            break

        vertices = np.vstack([vertices, q])
        lam = np.append(lam, 0.0)

        while True:  # minor cycle
            coeffs = _affine_minimizer(vertices)
            if coeffs.min() > _DROP_TOL:
                lam = coeffs
                break
            neg = coeffs < _DROP_TOL
            denom = lam - coeffs
            ratios = np.full(lam.size, np.inf)
            ok = neg & (denom > 0)
            ratios[ok] = lam[ok] / denom[ok]
            theta = float(np.clip(ratios.min(), 0.0, 1.0))
            lam = (1.0 - theta) * lam + theta * coeffs
            lam[lam < _DROP_TOL] = 0.0
            keep = lam > 0.0
            if not keep.any():
                keep[int(np.argmax(coeffs))] = True
                lam[keep] = 1.0
            vertices = vertices[keep]
            lam = lam[keep]
            lam = lam / lam.sum()
            if vertices.shape[0] == 1:
                break

        x_new = lam @ vertices
        if float(np.max(np.abs(x_new - x))) <= 1e-14 * max(1.0, float(np.max(np.abs(x)))):
            x = x_new
            break
        x = x_new

    return _finalize(f, x, majors, tol)


def _finalize(f: SetFunction, x: np.ndarray, majors: int, tol: float) -> MinNormResult:
    minimal = frozenset(f.elements[k] for k in np.flatnonzero(x < -tol))
    maximal = frozenset(f.elements[k] for k in np.flatnonzero(x <= tol))
    value = float(f.evaluate(minimal))
    lower = float(np.minimum(x, 0.0).sum())
    return MinNormResult(
        x=x,
        min_value=value,
        minimal_minimizer=minimal,
        maximal_minimizer=maximal,
        iterations=majors,
        certified_gap=value - lower,
    )


def brute_force_min(f: SetFunction) -> tuple[float, frozenset]:
    """Exhaustive minimization; ties prefer smaller then lexicographically
    earlier subsets.  Guarded to grounds of at most 24 elements."""
    g = f.size
    if g > 24:
        raise ParameterError("brute force limited to 24 elements")
    elements = f.elements
    index = {el: k for k, el in enumerate(elements)}
    best_val = math.inf
    best_key = None
    best_set = frozenset()
    for mask in range(1 << g):
        subset = frozenset(elements[k] for k in range(g) if mask >> k & 1)
        val = float(f.evaluate(subset))
        key = (len(subset), tuple(sorted(index[el] for el in subset)))
        if val < best_val or (val == best_val and key < best_key):
            best_val, best_key, best_set = val, key, subset
    return best_val, best_set


def _compressed_tables(values: np.ndarray, g: int, z: int) -> tuple[np.ndarray, np.ndarray]:
    """Value tables over masks without element z: (F[mask], F[mask + z])."""
    sub = np.arange(1 << (g - 1), dtype=np.int64)
    low = sub & ((1 << z) - 1)
    expanded = ((sub >> z) << (z + 1)) | low
    return values[expanded], values[expanded | (1 << z)]


def check_submodular(
    f: SetFunction,
    mode: str = "exhaustive",
    trials: int = 10_000,
    seed: int = 0,
    slack: float = 0.0,
) -> SubmodularityReport:
    """Check the diminishing-returns inequality
    f(Y + z) - f(Y) >= f(Z + z) - f(Z) for Y subset of Z, z outside Z.

    ``exhaustive`` enumerates every triple (ground capped at 12
    elements); ``sampled`` draws ``trials`` random triples.  Marginal
    comparisons use ``slack`` as an absolute tolerance.  Violations are
    reported as witnessed triples with their violation amount.
    """
    g = f.size
    elements = f.elements
    if mode not in ("exhaustive", "sampled"):
        raise ParameterError(f"unknown mode {mode!r}")

    if mode == "sampled":
        rng = np.random.default_rng(seed)
        violations = []
        checked = 0
        if g < 1:
            return SubmodularityReport(0, ())
        for _ in range(trials):
            z = int(rng.integers(g))
            others = [k for k in range(g) if k != z]
            z_mask = rng.random(g - 1) < 0.5 if g > 1 else np.empty(0, bool)
            zset = [others[k] for k in np.flatnonzero(z_mask)]
            if zset:
                y_keep = rng.random(len(zset)) < 0.5
                yset = [el for el, keep in zip(zset, y_keep) if keep]
            else:
                yset = []
            sy = frozenset(elements[k] for k in yset)
            sz = frozenset(elements[k] for k in zset)
            el = elements[z]
            m_small = f.evaluate(sy | {el}) - f.evaluate(sy)
            m_large = f.evaluate(sz | {el}) - f.evaluate(sz)
            checked += 1
            if m_large > m_small + slack:
                violations.append(Violation(el, sy, sz, float(m_large - m_small)))
        return SubmodularityReport(checked, tuple(violations))

    if g > 12:
        raise ParameterError("exhaustive check limited to 12 elements")
    if g == 0:
        return SubmodularityReport(0, ())

    values = np.empty(1 << g)
    for mask in range(1 << g):
        values[mask] = f.evaluate(frozenset(elements[k] for k in range(g) if mask >> k & 1))

    checked = sum(
        math.comb(g, k) * ((1 << k) - 1) * (g - k) for k in range(g + 1)
    )
    violations = []
    half = 1 << (g - 1)
    for z in range(g):
        f0, f1 = _compressed_tables(values, g, z)
        marg = f1 - f0
        # Subset-min of marginals over the lattice without z, then the
        # min over proper subsets of each mask.
        inc = marg.copy()
        all_masks = np.arange(half)
        for b in range(g - 1):
            bit = 1 << b
            idx = np.flatnonzero(all_masks & bit)
            inc[idx] = np.minimum(inc[idx], inc[idx ^ bit])
        proper = np.full(half, np.inf)
        for b in range(g - 1):
            bit = 1 << b
            idx = np.flatnonzero(all_masks & bit)
            proper[idx] = np.minimum(proper[idx], inc[idx ^ bit])
        bad = np.flatnonzero(marg > proper + slack)
        if bad.size == 0:
            continue
        others = [k for k in range(g) if k != z]
        for cmask in bad:
            zset = frozenset(elements[others[b]] for b in range(g - 1) if cmask >> b & 1)
            amount_ref = marg[cmask]
            sub = int(cmask)
            # Enumerate proper submasks to witness every violating pair.
            y = (cmask - 1) & cmask
            while True:
                if amount_ref > marg[y] + slack:
                    yset = frozenset(elements[others[b]] for b in range(g - 1) if y >> b & 1)
                    violations.append(
                        Violation(elements[z], yset, zset, float(amount_ref - marg[y]))
                    )
                if y == 0:
                    break
                y = (y - 1) & cmask
    return SubmodularityReport(checked, tuple(violations))
