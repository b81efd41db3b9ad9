"""Exact-enumeration oracle: the case-conditional mean of the weighted
contrast is zero precisely when the risk surface is additive."""

import numpy as np
import pytest

from addint import (
    DiscretePopulation,
    brute_force_expectation,
    case_expectation,
    independent_binary_population,
    prevalence,
)
from addint.errors import ScenarioError


def centered_product(pi1, pi2):
    return lambda a1, a2, x: (a1 - pi1) * (a2 - pi2)


class TestWorkedBinaryCell:
    def test_null_interaction_gives_exact_zero(self):
        pop = independent_binary_population(0.5, 0.5, lambda a1, a2: 0.01 + 0.0 * a1 * a2)
        val = brute_force_expectation(pop, centered_product(0.5, 0.5))
        assert abs(val[0]) < 1e-15

    def test_positive_interaction_worked_value(self):
        pop = independent_binary_population(0.5, 0.5, lambda a1, a2: 0.01 + 0.1 * a1 * a2)
        assert prevalence(pop) == pytest.approx(0.035, abs=1e-15)
        val = brute_force_expectation(pop, centered_product(0.5, 0.5))
        assert val[0] == pytest.approx(0.1 * 0.0625 / 0.035, abs=1e-12)
        assert val[0] == pytest.approx(0.178571, abs=1e-6)


class TestProductMomentIdentity:
    """E{U | D=1} * Pr(D=1) = b3 * pi1 (1-pi1) * pi2 (1-pi2) for independent
    binary exposures, whatever the main effects."""

    @pytest.mark.parametrize("seed", range(10))
    def test_identity_with_random_main_effects(self, seed):
        rng = np.random.default_rng(seed)
        pi1, pi2 = rng.uniform(0.15, 0.85, size=2)
        b0 = rng.uniform(0.005, 0.05)
        b1, b2 = rng.uniform(0.0, 0.08, size=2)
        b3 = rng.uniform(-0.5, 1.5) * 0.05

        def risk(a1, a2):
            return b0 + b1 * a1 + b2 * a2 + b3 * a1 * a2

        pop = independent_binary_population(pi1, pi2, risk)
        value = case_expectation(pop, centered_product(pi1, pi2))
        expected = b3 * pi1 * (1 - pi1) * pi2 * (1 - pi2) / prevalence(pop)
        assert value == pytest.approx(expected, abs=1e-12)

    def test_zero_iff_no_interaction(self):
        pop_null = independent_binary_population(0.3, 0.6, lambda a1, a2: 0.02 + 0.01 * a1 + 0.03 * a2)
        assert abs(case_expectation(pop_null, centered_product(0.3, 0.6))) < 1e-15
        pop_alt = independent_binary_population(
            0.3, 0.6, lambda a1, a2: 0.02 + 0.01 * a1 + 0.03 * a2 + 0.004 * a1 * a2
        )
        assert case_expectation(pop_alt, centered_product(0.3, 0.6)) > 1e-4


def _random_population(rng, with_interaction):
    """Random supports, dependent exposures, covariate with two levels,
    additive (or not) risk built from main-effect tables."""
    l1 = rng.integers(2, 4)
    l2 = rng.integers(2, 5)
    a1_levels = np.arange(l1, dtype=float)
    a2_levels = np.arange(l2, dtype=float)
    x_levels = np.array([0.0, 1.0])
    x_pmf = rng.dirichlet(np.ones(2))
    joint = rng.uniform(0.2, 1.0, size=(2, l1, l2))
    joint /= joint.sum(axis=(1, 2), keepdims=True)
    risk = np.empty((2, l1, l2))
    b3 = np.zeros((2, l1, l2))
    if with_interaction:
        b3[:, 1:, 1:] = rng.uniform(0.01, 0.05, size=(2, l1 - 1, l2 - 1))
    for q in range(2):
        b4 = rng.uniform(0.01, 0.05)
        b1 = np.concatenate([[0.0], rng.uniform(0.0, 0.05, size=l1 - 1)])
        b2 = np.concatenate([[0.0], rng.uniform(0.0, 0.05, size=l2 - 1)])
        risk[q] = b4 + b1[:, None] + b2[None, :] + b3[q]
    pop = DiscretePopulation(
        a1_levels=a1_levels,
        a2_levels=a2_levels,
        x_levels=x_levels,
        x_pmf=x_pmf,
        joint_pmf=joint,
        risk=risk,
    )
    return pop, b3


class TestAdditiveNullCharacterization:
    """Random discrete populations with dependent exposures: the contrast
    expectation vanishes for every g under the additive null, and the
    self-contrast g* = interaction table is strictly positive otherwise."""

    @pytest.mark.parametrize("seed", range(20))
    def test_null_vanishes_for_random_tabulated_g(self, seed):
        rng = np.random.default_rng(seed)
        pop, _ = _random_population(rng, with_interaction=False)
        g = rng.normal(size=(len(pop.a1_levels), len(pop.a2_levels)))
        vals = brute_force_expectation(pop, g)
        assert np.max(np.abs(vals)) < 1e-10

    @pytest.mark.parametrize("seed", range(20))
    def test_alternative_detected_by_self_contrast(self, seed):
        rng = np.random.default_rng(1000 + seed)
        pop, b3 = _random_population(rng, with_interaction=True)

        def g_star(a1, a2, x):
            q = int(x)
            return b3[q, int(a1), int(a2)]

        vals = brute_force_expectation(pop, g_star)
        assert np.all(vals > 1e-10)


def test_dependent_binary_with_tilt_and_main_effects_is_null():
    # dependent binary exposures (odds ratio 3), nonzero main effects, no
    # interaction: the tilted contrast still has exact zero case mean
    joint = np.array([[0.35, 0.15], [0.15, 0.35 * 3 * 0.15 / 0.35]])
    joint = joint / joint.sum()
    risk = 0.01 + 0.02 * np.array([[0.0, 0.0], [1.0, 1.0]]) + 0.03 * np.array([[0.0, 1.0], [0.0, 1.0]])
    pop = DiscretePopulation(
        a1_levels=np.array([0.0, 1.0]),
        a2_levels=np.array([0.0, 1.0]),
        x_levels=np.array([0.0]),
        x_pmf=np.array([1.0]),
        joint_pmf=joint[None, :, :],
        risk=risk[None, :, :],
    )
    g = np.array([[0.0, 0.0], [0.0, 1.0]])  # plain product contrast
    assert abs(brute_force_expectation(pop, g)[0]) < 1e-14


def test_population_validation():
    with pytest.raises(ScenarioError):
        DiscretePopulation(
            a1_levels=np.array([1.0, 2.0]),  # missing reference 0
            a2_levels=np.array([0.0, 1.0]),
            x_levels=np.array([0.0]),
            x_pmf=np.array([1.0]),
            joint_pmf=np.full((1, 2, 2), 0.25),
            risk=np.full((1, 2, 2), 0.01),
        )
    with pytest.raises(ScenarioError):
        DiscretePopulation(
            a1_levels=np.array([0.0, 1.0]),
            a2_levels=np.array([0.0, 1.0]),
            x_levels=np.array([0.0]),
            x_pmf=np.array([1.0]),
            joint_pmf=np.array([[[0.5, 0.5], [0.0, 0.0]]]),  # empty cells
            risk=np.full((1, 2, 2), 0.01),
        )
