"""Submodular minimization tests.

The solver is validated against exhaustive minimization on random
submodular functions of several families; the checker is validated on
known-submodular and known-violating functions.
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sisprotect.errors import ParameterError, SolverError
from sisprotect.sfm import (
    MinNormResult,
    SetFunction,
    brute_force_min,
    check_submodular,
    greedy_vertex,
    min_norm_point,
)
from sisprotect.verify import xor_pair_function


def cut_function(n, edges, weights):
    """Weighted graph cut: a classic submodular function, f(empty) = 0."""

    def evaluate(subset):
        total = 0.0
        for (i, j), w in zip(edges, weights):
            if (i in subset) != (j in subset):
                total += w
        return total

    return SetFunction(elements=tuple(range(n)), evaluate=evaluate)


def cut_minus_modular(n, edges, weights, bias):
    """Cut minus a modular term: submodular with nontrivial minimizers."""
    base = cut_function(n, edges, weights)

    def evaluate(subset):
        return base.evaluate(subset) - sum(bias[i] for i in subset)

    return SetFunction(elements=tuple(range(n)), evaluate=evaluate)


def random_cut_instance(rng, n):
    pairs = list(itertools.combinations(range(n), 2))
    keep = [p for p in pairs if rng.random() < 0.5]
    weights = rng.uniform(0.1, 2.0, size=len(keep))
    bias = rng.uniform(0.0, 2.0, size=n)
    return cut_minus_modular(n, keep, weights, bias)


def concave_cardinality(n, rng):
    """f(S) = phi(|S|) - slope*|S| for concave phi: submodular."""
    increments = np.sort(rng.uniform(0.0, 1.0, size=n))[::-1]
    phi = np.concatenate([[0.0], np.cumsum(increments)])
    slope = rng.uniform(0.2, 0.8)

    def evaluate(subset):
        k = len(subset)
        return float(phi[k] - slope * k)

    return SetFunction(elements=tuple(range(n)), evaluate=evaluate)


class TestGreedyVertex:
    def test_xor_flags_one_one(self):
        f = xor_pair_function("a", "b", 1, 1)
        x = greedy_vertex(f, ("a", "b"))
        assert x.tolist() == [1.0, -1.0]
        x = greedy_vertex(f, ("b", "a"))
        assert x.tolist() == [-1.0, 1.0]

    def test_marginals_telescope(self):
        rng = np.random.default_rng(0)
        f = random_cut_instance(rng, 6)
        order = tuple(rng.permutation(6).tolist())
        x = greedy_vertex(f, order)
        assert x.sum() == pytest.approx(f.evaluate(frozenset(range(6))), abs=1e-12)
        running = []
        prev = 0.0
        for el in order:
            running.append(el)
            val = f.evaluate(frozenset(running))
            assert x[el] == pytest.approx(val - prev, abs=1e-12)
            prev = val

    def test_rejects_non_permutation(self):
        f = xor_pair_function("a", "b", 1, 0)
        with pytest.raises(ParameterError):
            greedy_vertex(f, ("a",))
        with pytest.raises(ParameterError):
            greedy_vertex(f, ("a", "a"))
        with pytest.raises(ParameterError):
            greedy_vertex(f, ("a", "c"))


class TestBruteForce:
    def test_tie_break_smallest_then_earliest(self):
        f = SetFunction(elements=(0, 1), evaluate=lambda s: 0.0)
        val, best = brute_force_min(f)
        assert val == 0.0 and best == frozenset()

    def test_large_ground_guarded(self):
        f = SetFunction(elements=tuple(range(25)), evaluate=lambda s: 0.0)
        with pytest.raises(ParameterError):
            brute_force_min(f)


class TestMinNormPoint:
    def test_empty_ground(self):
        f = SetFunction(elements=(), evaluate=lambda s: 0.0)
        res = min_norm_point(f)
        assert res.min_value == 0.0 and res.minimal_minimizer == frozenset()

    def test_xor_one_one_minimizers(self):
        f = xor_pair_function("a", "b", 1, 1)
        res = min_norm_point(f)
        assert res.min_value == pytest.approx(0.0, abs=1e-12)
        assert res.minimal_minimizer == frozenset()
        assert res.maximal_minimizer == frozenset({"a", "b"})
        assert np.allclose(res.x, [0.0, 0.0], atol=1e-12)

    def test_all_xor_flag_patterns(self):
        for fa, fb in itertools.product((0, 1), repeat=2):
            f = xor_pair_function("a", "b", fa, fb)
            res = min_norm_point(f)
            want, _ = brute_force_min(f)
            assert res.min_value == pytest.approx(want, abs=1e-9)
            assert f.evaluate(res.minimal_minimizer) == pytest.approx(want, abs=1e-9)
            assert f.evaluate(res.maximal_minimizer) == pytest.approx(want, abs=1e-9)

    def test_modular_function(self):
        w = np.array([1.5, -2.0, 0.5, -0.25, 3.0])

        def evaluate(s):
            return float(sum(w[i] for i in s))

        f = SetFunction(elements=tuple(range(5)), evaluate=evaluate)
        res = min_norm_point(f)
        assert res.minimal_minimizer == frozenset({1, 3})
        assert res.maximal_minimizer == frozenset({1, 3})
        assert res.min_value == pytest.approx(-2.25, abs=1e-12)

    @given(st.integers(0, 2**32 - 1), st.integers(2, 9))
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force_on_cuts(self, seed, n):
        rng = np.random.default_rng(seed)
        f = random_cut_instance(rng, n)
        res = min_norm_point(f)
        want, _ = brute_force_min(f)
        assert res.min_value <= want + 1e-6
        assert res.min_value >= want - 1e-6
        assert res.certified_gap >= -1e-12

    @given(st.integers(0, 2**32 - 1), st.integers(2, 10))
    @settings(max_examples=30, deadline=None)
    def test_matches_brute_force_on_concave(self, seed, n):
        rng = np.random.default_rng(seed)
        f = concave_cardinality(n, rng)
        res = min_norm_point(f)
        want, _ = brute_force_min(f)
        assert abs(res.min_value - want) <= 1e-6

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_minimal_and_maximal_bracket_minimizers(self, seed):
        rng = np.random.default_rng(seed)
        f = random_cut_instance(rng, 6)
        res = min_norm_point(f)
        want, _ = brute_force_min(f)
        # Both named minimizers achieve the optimum, and every other
        # optimal set sits between them.
        assert f.evaluate(res.minimal_minimizer) == pytest.approx(want, abs=1e-6)
        assert f.evaluate(res.maximal_minimizer) == pytest.approx(want, abs=1e-6)
        for mask in range(1 << 6):
            subset = frozenset(k for k in range(6) if mask >> k & 1)
            if f.evaluate(subset) <= want + 1e-9:
                assert res.minimal_minimizer <= subset <= res.maximal_minimizer

    def test_iteration_cap_raises_with_best(self):
        rng = np.random.default_rng(1)
        f = random_cut_instance(rng, 7)
        with pytest.raises(SolverError) as err:
            min_norm_point(f, max_major=1)
        assert isinstance(err.value.result, MinNormResult)


class TestCheckSubmodular:
    def test_cut_functions_pass(self):
        # Float evaluation leaves ~1e-16 noise on exactly-equal
        # marginals, hence the small slack.
        rng = np.random.default_rng(5)
        for _ in range(10):
            f = random_cut_instance(rng, 5)
            assert check_submodular(f, mode="exhaustive", slack=1e-9).ok

    def test_xor_pairs_pass(self):
        for fa, fb in itertools.product((0, 1), repeat=2):
            report = check_submodular(xor_pair_function("a", "b", fa, fb))
            assert report.ok
            assert report.checked == 2  # two triples on two elements

    def test_detects_supermodular_violation(self):
        # f(W) = -1 exactly on singletons is not submodular:
        # adding b to {a} gains +1 but adding b to {} loses 1.
        def evaluate(s):
            return -1.0 if len(s) == 1 else 0.0

        f = SetFunction(elements=("a", "b"), evaluate=evaluate)
        report = check_submodular(f, mode="exhaustive")
        assert not report.ok
        v = report.violations[0]
        assert v.amount == pytest.approx(2.0)
        assert v.smaller == frozenset() and len(v.larger) == 1

    def test_sampled_mode_detects_too(self):
        def evaluate(s):
            return -1.0 if len(s) == 1 else 0.0

        f = SetFunction(elements=("a", "b"), evaluate=evaluate)
        report = check_submodular(f, mode="sampled", trials=300, seed=3)
        assert not report.ok

    def test_sampled_mode_passes_submodular(self):
        rng = np.random.default_rng(8)
        f = random_cut_instance(rng, 8)
        assert check_submodular(f, mode="sampled", trials=2000, seed=1, slack=1e-9).ok

    def test_exhaustive_guard(self):
        f = SetFunction(elements=tuple(range(13)), evaluate=lambda s: 0.0)
        with pytest.raises(ParameterError):
            check_submodular(f, mode="exhaustive")

    def test_triple_count(self):
        # Ground size 3: sum over |Z| of C(3,k) (2^k - 1) (3 - k) = 15.
        f = SetFunction(elements=(0, 1, 2), evaluate=lambda s: 0.0)
        assert check_submodular(f).checked == 15

    def test_slack_tolerates_noise(self):
        def evaluate(s):
            return -1e-12 if len(s) == 1 else 0.0

        f = SetFunction(elements=("a", "b"), evaluate=evaluate)
        assert not check_submodular(f, slack=0.0).ok
        assert check_submodular(f, slack=1e-9).ok
