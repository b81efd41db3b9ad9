"""Exact enumeration over fully specified discrete populations.

Used as the independent oracle for the equivalence between "no additive
interaction" and "zero case-conditional mean of the weighted contrast":
given the complete joint law (covariate distribution, exposure joint law
per covariate level, risk table), the conditional expectation of the
weighted contrast among cases is computed as an exact finite sum with the
true odds-ratio function and true baseline densities, no estimation
involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ScenarioError


@dataclass(frozen=True)
class DiscretePopulation:
    """Complete discrete population.

    a1_levels / a2_levels are the exposure supports and must contain the
    reference value 0. joint_pmf[q, i, j] is the exposure joint law at
    covariate level q (each slice sums to 1); risk[q, i, j] is the disease
    probability; x_pmf the covariate law.
    """

    a1_levels: np.ndarray
    a2_levels: np.ndarray
    x_levels: np.ndarray
    x_pmf: np.ndarray
    joint_pmf: np.ndarray
    risk: np.ndarray

    def __post_init__(self):
        for name in ("a1_levels", "a2_levels", "x_levels", "x_pmf", "joint_pmf", "risk"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)
        nq, l1, l2 = len(self.x_levels), len(self.a1_levels), len(self.a2_levels)
        if self.joint_pmf.shape != (nq, l1, l2) or self.risk.shape != (nq, l1, l2):
            raise ScenarioError("joint_pmf and risk must have shape (n_x, n_a1, n_a2)")
        if 0.0 not in self.a1_levels or 0.0 not in self.a2_levels:
            raise ScenarioError("exposure supports must contain the reference value 0")
        if np.any(self.joint_pmf <= 0.0):
            raise ScenarioError(
                "joint exposure law must be strictly positive (odds-ratio function undefined "
                "on empty cells)"
            )
        if not np.allclose(self.joint_pmf.sum(axis=(1, 2)), 1.0, atol=1e-12):
            raise ScenarioError("each joint_pmf slice must sum to 1")
        if np.abs(self.x_pmf.sum() - 1.0) > 1e-12 or np.any(self.x_pmf < 0):
            raise ScenarioError("x_pmf must be a probability vector")
        if np.any(self.risk <= 0.0) or np.any(self.risk >= 1.0):
            raise ScenarioError("risk table must lie strictly inside (0, 1)")

    @property
    def ref1(self) -> int:
        return int(np.flatnonzero(self.a1_levels == 0.0)[0])

    @property
    def ref2(self) -> int:
        return int(np.flatnonzero(self.a2_levels == 0.0)[0])


def independent_binary_population(
    pi1: float, pi2: float, risk_fn
) -> DiscretePopulation:
    """Binary-binary population with independent exposures and risk
    risk_fn(a1, a2), no covariates."""
    levels = np.array([0.0, 1.0])
    joint = np.empty((1, 2, 2))
    risk = np.empty((1, 2, 2))
    for i, a1 in enumerate(levels):
        for j, a2 in enumerate(levels):
            joint[0, i, j] = (pi1 if a1 else 1 - pi1) * (pi2 if a2 else 1 - pi2)
            risk[0, i, j] = risk_fn(a1, a2)
    return DiscretePopulation(
        a1_levels=levels,
        a2_levels=levels,
        x_levels=np.array([0.0]),
        x_pmf=np.array([1.0]),
        joint_pmf=joint,
        risk=risk,
    )


def _g_table(pop: DiscretePopulation, g, x_value: float) -> np.ndarray:
    if callable(g):
        table = np.empty((len(pop.a1_levels), len(pop.a2_levels)))
        for i, a1 in enumerate(pop.a1_levels):
            for j, a2 in enumerate(pop.a2_levels):
                table[i, j] = g(a1, a2, x_value)
        return table
    table = np.asarray(g, dtype=np.float64)
    if table.shape != (len(pop.a1_levels), len(pop.a2_levels)):
        raise ConfigurationError(
            f"g table shape {table.shape} does not match the supports "
            f"({len(pop.a1_levels)}, {len(pop.a2_levels)})"
        )
    return table


def odds_ratio_table(pop: DiscretePopulation, q: int) -> np.ndarray:
    """Generalized odds-ratio function at covariate level q, exactly
    joint(i,j) * joint(ref,ref) / (joint(ref,j) * joint(i,ref))."""
    joint = pop.joint_pmf[q]
    r1, r2 = pop.ref1, pop.ref2
    return joint * joint[r1, r2] / (joint[r1, :][None, :] * joint[:, r2][:, None])


def baseline_densities(pop: DiscretePopulation, q: int) -> tuple[np.ndarray, np.ndarray]:
    """True baseline densities f(a1 | a2 = 0, x) and f(a2 | a1 = 0, x)."""
    joint = pop.joint_pmf[q]
    f1 = joint[:, pop.ref2] / joint[:, pop.ref2].sum()
    f2 = joint[pop.ref1, :] / joint[pop.ref1, :].sum()
    return f1, f2


def weighted_contrast_table(pop: DiscretePopulation, g, q: int) -> np.ndarray:
    """The weighted contrast w(a1, a2, x, 1; g) over the exposure grid at
    covariate level q: the inverse odds-ratio function times the g table
    minus its three baseline-density subtraction sums."""
    table = _g_table(pop, g, float(pop.x_levels[q]))
    f1, f2 = baseline_densities(pop, q)
    orr = odds_ratio_table(pop, q)
    corr1 = (table * f2[None, :]).sum(axis=1)
    corr2 = (table * f1[:, None]).sum(axis=0)
    corr3 = float(f1 @ table @ f2)
    return (table - corr1[:, None] - corr2[None, :] + corr3) / orr


def brute_force_expectation(pop: DiscretePopulation, g) -> np.ndarray:
    """Exact E{ W(g) | D = 1, x } for every covariate level, by finite
    enumeration of the factorized joint law. Test oracle; no estimation."""
    out = np.empty(len(pop.x_levels))
    for q in range(len(pop.x_levels)):
        w = weighted_contrast_table(pop, g, q)
        mu = pop.risk[q]
        joint = pop.joint_pmf[q]
        out[q] = float((w * mu * joint).sum() / (mu * joint).sum())
    return out


def case_expectation(pop: DiscretePopulation, g) -> float:
    """Exact unconditional E{ W(g) | D = 1 } across covariate levels."""
    num = 0.0
    den = 0.0
    for q in range(len(pop.x_levels)):
        w = weighted_contrast_table(pop, g, q)
        mu = pop.risk[q]
        joint = pop.joint_pmf[q]
        num += pop.x_pmf[q] * float((w * mu * joint).sum())
        den += pop.x_pmf[q] * float((mu * joint).sum())
    return num / den


def prevalence(pop: DiscretePopulation) -> float:
    """Exact Pr(D = 1)."""
    return float(np.sum(pop.x_pmf[:, None, None] * pop.risk * pop.joint_pmf))
