"""Generative models and Monte Carlo experiment orchestration.

Binary-binary scenarios are sampled exactly retrospectively: the four
case-cell and four control-cell probabilities are computed in closed form
and the fixed case/control quotas drawn multinomially, with no rejection
loop. The continuous additive-null scenario (used to demonstrate how the
standard logistic relative-excess-risk test breaks with a continuous
exposure) has no closed retrospective law and uses batched rejection
sampling from the prospective model until the quotas fill.

Randomness: every replicate owns a counter-based Philox stream derived as
SeedSequence(seed, spawn_key=(cell_index, replicate_index)), so any cell or
replicate can be reproduced in isolation and results are bit-identical
regardless of thread count or scheduling.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset, ExposureKind, make_dataset
from .errors import ConfigurationError, InfeasibleReriError, ScenarioError
from .nuisance import ModelPlan
from .pipeline import run_interaction_test
from .reri import reri_test

TESTS = ("u", "u-ind", "prosp")

_BINARY = ExposureKind("binary")
_CONTINUOUS = ExposureKind("continuous")


def expit(z):
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=np.float64)))


def logit(p):
    p = np.asarray(p, dtype=np.float64)
    return np.log(p / (1.0 - p))


def stream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic counter-based stream for (seed, *key)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def alpha3_from_reri(alpha0: float, alpha1: float, alpha2: float, reri: float) -> float:
    """Product-term coefficient that yields the requested excess-risk value
    under the binary-binary logistic outcome model:

        alpha3 = logit[(reri - 1) expit(a0) + expit(a0 + a1) + expit(a0 + a2)]
                 - a0 - a1 - a2
    """
    inner = (
        (reri - 1.0) * float(expit(alpha0))
        + float(expit(alpha0 + alpha1))
        + float(expit(alpha0 + alpha2))
    )
    if not (0.0 < inner < 1.0):
        raise InfeasibleReriError(
            f"no interaction coefficient reaches RERI={reri:g} at these main effects "
            f"(inner probability {inner:g} outside (0, 1))"
        )
    return float(logit(inner) - alpha0 - alpha1 - alpha2)


def reri_from_alphas(alpha0: float, alpha1: float, alpha2: float, alpha3: float) -> float:
    """Excess-risk value implied by the four outcome coefficients."""
    r11 = float(expit(alpha0 + alpha1 + alpha2 + alpha3))
    r10 = float(expit(alpha0 + alpha1))
    r01 = float(expit(alpha0 + alpha2))
    r00 = float(expit(alpha0))
    return (r11 - r10 - r01) / r00 + 1.0


@dataclass(frozen=True)
class Scenario:
    """One generative cell.

    kind 'binary-binary': logistic outcome model on two independent (or
    odds-ratio-tilted) binary exposures; exactly one of alpha3 /
    target_reri must be given.

    kind 'continuous-null-failure': additive risk
    mu(a1, a2) = r1(a1) + r2(a2) - r0 built from logistic components
    r1 = expit(logit(base_risk) + slope_a1 * a1), a1 standard normal
    clipped to [-a1_clip, a1_clip], r2 = expit(logit(base_risk) +
    slope_a2 * a2), a2 Bernoulli(p_e). The additive null holds exactly by
    construction; the risk must stay inside (0, 1) over the whole clip box.
    """

    name: str = "cell"
    kind: str = "binary-binary"
    p_g: float = 0.5
    p_e: float = 0.2
    alpha0: float = float(logit(0.01))
    alpha1: float = 0.0
    alpha2: float = 0.0
    alpha3: float | None = None
    target_reri: float | None = None
    exposure_log_or: float = 0.0
    n_cases: int = 4000
    n_controls: int = 4000
    base_risk: float = 0.002
    slope_a1: float = 1.8
    slope_a2: float = 1.4
    a1_clip: float = 3.0

    def __post_init__(self):
        if self.kind not in ("binary-binary", "continuous-null-failure"):
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        if self.n_cases < 1 or self.n_controls < 1:
            raise ScenarioError("need positive case and control quotas")
        if not (0.0 < self.p_e < 1.0):
            raise ScenarioError("p_e must lie in (0, 1)")
        if self.kind == "binary-binary":
            if not (0.0 < self.p_g < 1.0):
                raise ScenarioError("p_g must lie in (0, 1)")
            if (self.alpha3 is None) == (self.target_reri is None):
                raise ScenarioError("give exactly one of alpha3 / target_reri")
        else:
            if not (0.0 < self.base_risk < 1.0):
                raise ScenarioError("base_risk must lie in (0, 1)")
            lo = float(expit(logit(self.base_risk) - self.slope_a1 * self.a1_clip))
            hi = (
                float(expit(logit(self.base_risk) + self.slope_a1 * self.a1_clip))
                + float(expit(logit(self.base_risk) + self.slope_a2))
                - self.base_risk
            )
            if lo <= 0.0 or hi >= 1.0:
                raise ScenarioError(
                    f"additive risk leaves (0, 1) over the clip box (range [{lo:g}, {hi:g}])"
                )

    def resolved_alpha3(self) -> float:
        if self.alpha3 is not None:
            return self.alpha3
        return alpha3_from_reri(self.alpha0, self.alpha1, self.alpha2, self.target_reri)

    def reri(self) -> float:
        if self.target_reri is not None:
            return self.target_reri
        return reri_from_alphas(self.alpha0, self.alpha1, self.alpha2, self.alpha3)


_CELLS = ((0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0))


def binary_cell_probabilities(sc: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Exact retrospective cell laws (Pr(a1,a2|case), Pr(a1,a2|control))
    over the cell order (0,0), (0,1), (1,0), (1,1)."""
    a3 = sc.resolved_alpha3()
    f = np.empty(4)
    mu = np.empty(4)
    for i, (g, e) in enumerate(_CELLS):
        f[i] = (
            (sc.p_g if g else 1 - sc.p_g)
            * (sc.p_e if e else 1 - sc.p_e)
            * math.exp(sc.exposure_log_or * g * e)
        )
        mu[i] = float(expit(sc.alpha0 + sc.alpha1 * g + sc.alpha2 * e + a3 * g * e))
    f = f / f.sum()
    case_mass = mu * f
    ctrl_mass = (1.0 - mu) * f
    if case_mass.sum() <= 0.0 or ctrl_mass.sum() <= 0.0:
        raise ScenarioError("case or control mass is zero; quotas are unreachable")
    return case_mass / case_mass.sum(), ctrl_mass / ctrl_mass.sum()


def _generate_binary(sc: Scenario, rng: np.random.Generator) -> Dataset:
    pcase, pctrl = binary_cell_probabilities(sc)
    n_case_cells = rng.multinomial(sc.n_cases, pcase)
    n_ctrl_cells = rng.multinomial(sc.n_controls, pctrl)
    cells = np.array(_CELLS)
    reps = np.concatenate([n_case_cells, n_ctrl_cells])
    grid = np.vstack([cells, cells])
    a1 = np.repeat(grid[:, 0], reps)
    a2 = np.repeat(grid[:, 1], reps)
    d = np.repeat(np.array([1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]), reps)
    return make_dataset(d, a1, a2, _BINARY, _BINARY)


def failure_risk(sc: Scenario, a1: np.ndarray, a2: np.ndarray) -> np.ndarray:
    """Additive risk surface of the continuous-null scenario."""
    c0 = float(logit(sc.base_risk))
    return expit(c0 + sc.slope_a1 * a1) + expit(c0 + sc.slope_a2 * a2) - sc.base_risk


def _generate_failure(sc: Scenario, rng: np.random.Generator) -> Dataset:
    need_cases, need_controls = sc.n_cases, sc.n_controls
    case_rows, ctrl_rows = [], []
    drawn = 0
    cap = 5000 * (sc.n_cases + sc.n_controls)
    batch = 50000
    while need_cases > 0 or need_controls > 0:
        if drawn > cap:
            raise ScenarioError(
                f"case/control quotas unreachable after {drawn} prospective draws"
            )
        a1 = np.clip(rng.standard_normal(batch), -sc.a1_clip, sc.a1_clip)
        a2 = (rng.random(batch) < sc.p_e).astype(np.float64)
        mu = failure_risk(sc, a1, a2)
        dd = rng.random(batch) < mu
        drawn += batch
        if need_cases > 0:
            take = np.flatnonzero(dd)[:need_cases]
            case_rows.append(np.column_stack([a1[take], a2[take]]))
            need_cases -= take.size
        if need_controls > 0:
            take = np.flatnonzero(~dd)[:need_controls]
            ctrl_rows.append(np.column_stack([a1[take], a2[take]]))
            need_controls -= take.size
    ca = np.concatenate(case_rows)
    co = np.concatenate(ctrl_rows)
    d = np.concatenate([np.ones(sc.n_cases), np.zeros(sc.n_controls)])
    return make_dataset(
        d,
        np.concatenate([ca[:, 0], co[:, 0]]),
        np.concatenate([ca[:, 1], co[:, 1]]),
        _CONTINUOUS,
        _BINARY,
    )


def generate_case_control(sc: Scenario, rng: np.random.Generator | int) -> Dataset:
    """Draw one case-control dataset. ``rng`` is a Generator or an integer
    seed (turned into a dedicated stream)."""
    if isinstance(rng, (int, np.integer)):
        rng = stream(int(rng))
    if sc.kind == "binary-binary":
        return _generate_binary(sc, rng)
    return _generate_failure(sc, rng)


# ---------------------------------------------------------------------------
# Power / type-1-error experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerRow:
    cell: str
    p_g: float
    p_e: float
    alpha1: float
    alpha2: float
    reri: float
    test: str
    reps: int
    rejections: int
    failures: int
    flagged: bool

    @property
    def rate(self) -> float:
        n_ok = self.reps - self.failures
        return self.rejections / n_ok if n_ok else float("nan")

    @property
    def mc_se(self) -> float:
        n_ok = self.reps - self.failures
        if n_ok == 0:
            return float("nan")
        r = self.rate
        return math.sqrt(max(r * (1.0 - r), 0.0) / n_ok)


@dataclass(frozen=True)
class PowerTable:
    rows: tuple[PowerRow, ...]
    reps: int
    seed: int
    alpha: float

    def rate(self, cell: str, test: str) -> float:
        for row in self.rows:
            if row.cell == cell and row.test == test:
                return row.rate
        raise KeyError(f"no row for cell={cell!r} test={test!r}")

    def to_csv(self, path) -> None:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            [
                "cell",
                "p_g",
                "p_e",
                "alpha1",
                "alpha2",
                "reri",
                "test",
                "reps",
                "rejections",
                "rate",
                "mc_se",
                "failures",
                "flagged",
            ]
        )
        for row in self.rows:
            writer.writerow(
                [
                    row.cell,
                    repr(row.p_g),
                    repr(row.p_e),
                    repr(row.alpha1),
                    repr(row.alpha2),
                    repr(row.reri),
                    row.test,
                    row.reps,
                    row.rejections,
                    repr(row.rate),
                    repr(row.mc_se),
                    row.failures,
                    int(row.flagged),
                ]
            )
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "reps": self.reps,
            "seed": self.seed,
            "alpha": self.alpha,
            "cells": [
                {
                    "cell": r.cell,
                    "p_g": r.p_g,
                    "p_e": r.p_e,
                    "alpha1": r.alpha1,
                    "alpha2": r.alpha2,
                    "reri": r.reri,
                    "test": r.test,
                    "reps": r.reps,
                    "rejections": r.rejections,
                    "rate": r.rate,
                    "mc_se": r.mc_se,
                    "failures": r.failures,
                    "flagged": r.flagged,
                }
                for r in self.rows
            ],
        }


def _pvalue_for_test(ds: Dataset, test: str) -> float:
    if test == "u":
        return run_interaction_test(ds, ModelPlan(independence=False)).p_value
    if test == "u-ind":
        return run_interaction_test(ds, ModelPlan(independence=True)).p_value
    if test == "prosp":
        return reri_test(ds).p_value
    raise ConfigurationError(f"unknown test {test!r}; choose from {TESTS}")


def run_power_experiment(
    grid: list[Scenario],
    tests: tuple[str, ...] = TESTS,
    reps: int = 2000,
    seed: int = 0,
    alpha: float = 0.05,
    threads: int | None = None,
) -> PowerTable:
    """Rejection rates at the given level for every grid cell and test.

    Per-replicate failures are dropped and counted; a cell-test row with
    more than 1% failures is flagged. Replicate streams derive from
    (seed, cell_index, replicate_index), so the table is identical for any
    thread count."""
    if reps < 100:
        raise ConfigurationError("power experiments need at least 100 replicates")
    for t in tests:
        if t not in TESTS:
            raise ConfigurationError(f"unknown test {t!r}; choose from {TESTS}")
    rows: list[PowerRow] = []
    for ci, sc in enumerate(grid):
        results = np.full((reps, len(tests)), np.nan)

        def one(r: int, ci: int = ci, sc: Scenario = sc, results: np.ndarray = results) -> None:
            ds = generate_case_control(sc, stream(seed, ci, r))
            for ti, test in enumerate(tests):
                try:
                    results[r, ti] = _pvalue_for_test(ds, test)
                except Exception:
                    results[r, ti] = np.nan

        if threads and threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(one, range(reps)))
        else:
            for r in range(reps):
                one(r)

        for ti, test in enumerate(tests):
            col = results[:, ti]
            failures = int(np.sum(~np.isfinite(col)))
            rejections = int(np.sum(col < alpha))
            rows.append(
                PowerRow(
                    cell=sc.name,
                    p_g=sc.p_g,
                    p_e=sc.p_e,
                    alpha1=sc.alpha1,
                    alpha2=sc.alpha2,
                    reri=sc.reri() if sc.kind == "binary-binary" else 0.0,
                    test=test,
                    reps=reps,
                    rejections=rejections,
                    failures=failures,
                    flagged=failures > 0.01 * reps,
                )
            )
    return PowerTable(rows=tuple(rows), reps=reps, seed=seed, alpha=alpha)


# ---------------------------------------------------------------------------
# Continuous-exposure failure demonstration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FailureReport:
    scenario: Scenario
    reps: int
    seed: int
    alpha: float
    dichotomized: bool
    sizes: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "reri-failure-demonstration",
            "reps": self.reps,
            "seed": self.seed,
            "alpha": self.alpha,
            "dichotomized": self.dichotomized,
            "scenario": {
                "base_risk": self.scenario.base_risk,
                "slope_a1": self.scenario.slope_a1,
                "slope_a2": self.scenario.slope_a2,
                "p_e": self.scenario.p_e,
                "a1_clip": self.scenario.a1_clip,
                "n_cases": self.scenario.n_cases,
                "n_controls": self.scenario.n_controls,
            },
            "sizes": self.sizes,
        }


def default_failure_scenario() -> Scenario:
    return Scenario(name="reri-failure", kind="continuous-null-failure")


def _dichotomize(ds: Dataset) -> Dataset:
    return make_dataset(ds.d, (ds.a1 > 0.0).astype(np.float64), ds.a2, _BINARY, _BINARY)


def run_reri_failure_experiment(
    config: Scenario | None = None,
    reps: int = 2000,
    seed: int = 0,
    alpha: float = 0.05,
    dichotomize: bool = False,
    threads: int | None = None,
) -> FailureReport:
    """Empirical size of the standard-model excess-risk test and of the
    exposure-model test on the continuous additive-null scenario. With
    ``dichotomize`` the continuous exposure is thresholded at 0 first, which
    restores the saturated binary setting where both tests are valid."""
    sc = default_failure_scenario() if config is None else config
    if sc.kind != "continuous-null-failure":
        raise ScenarioError("failure experiment requires a continuous-null-failure scenario")
    results = np.full((reps, 2), np.nan)

    def one(r: int) -> None:
        ds = generate_case_control(sc, stream(seed, 0, r))
        if dichotomize:
            ds = _dichotomize(ds)
        try:
            results[r, 0] = reri_test(ds, allow_nonbinary=True).p_value
        except Exception:
            results[r, 0] = np.nan
        try:
            results[r, 1] = run_interaction_test(ds, ModelPlan(independence=True)).p_value
        except Exception:
            results[r, 1] = np.nan

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(reps)))
    else:
        for r in range(reps):
            one(r)

    sizes = {}
    for ti, test in enumerate(("standard-reri", "exposure-model")):
        col = results[:, ti]
        failures = int(np.sum(~np.isfinite(col)))
        n_ok = reps - failures
        rate = float(np.sum(col < alpha) / n_ok) if n_ok else float("nan")
        sizes[test] = {
            "size": rate,
            "mc_se": math.sqrt(max(rate * (1 - rate), 0.0) / n_ok) if n_ok else float("nan"),
            "failures": failures,
        }
    return FailureReport(
        scenario=sc, reps=reps, seed=seed, alpha=alpha, dichotomized=dichotomize, sizes=sizes
    )


# ---------------------------------------------------------------------------
# Grid files
# ---------------------------------------------------------------------------


def load_grid(path) -> list[Scenario]:
    """Read scenarios from an INI-style grid file: one section per cell,
    plain ``key = value`` float entries. Convenience keys: baseline_risk
    (sets alpha0 = logit of it) and rr1 / rr2 (set alpha1 / alpha2 = log of
    them); otherwise give alpha0/alpha1/alpha2, and exactly one of alpha3 /
    target_reri."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read grid file {path}")
    grid = []
    for section in parser.sections():
        entries = dict(parser.items(section))
        kwargs: dict = {"name": section}
        kind = entries.pop("kind", "binary-binary")
        kwargs["kind"] = kind
        if "baseline_risk" in entries:
            kwargs["alpha0"] = float(logit(float(entries.pop("baseline_risk"))))
        if "rr1" in entries:
            kwargs["alpha1"] = math.log(float(entries.pop("rr1")))
        if "rr2" in entries:
            kwargs["alpha2"] = math.log(float(entries.pop("rr2")))
        for key, value in entries.items():
            if key in ("n_cases", "n_controls"):
                kwargs[key] = int(value)
            elif key in (
                "p_g",
                "p_e",
                "alpha0",
                "alpha1",
                "alpha2",
                "alpha3",
                "target_reri",
                "exposure_log_or",
                "base_risk",
                "slope_a1",
                "slope_a2",
                "a1_clip",
            ):
                kwargs[key] = float(value)
            else:
                raise ConfigurationError(f"grid cell [{section}]: unknown key {key!r}")
        try:
            grid.append(Scenario(**kwargs))
        except ScenarioError as exc:
            raise ScenarioError(f"grid cell [{section}]: {exc}") from None
    if not grid:
        raise ConfigurationError(f"grid file {path} defines no cells")
    return grid


def table1_grid(p_g: float) -> list[Scenario]:
    """The nine-cell null grid at a given variant frequency: main effects
    over log(0.7), log(1.2), log(2), environment frequency 0.2, baseline
    risk 0.01, zero excess risk, 4000 cases and 4000 controls."""
    effects = [math.log(0.7), math.log(1.2), math.log(2.0)]
    grid = []
    for i, a1 in enumerate(effects):
        for j, a2 in enumerate(effects):
            grid.append(
                Scenario(
                    name=f"pg{p_g:g}-a1_{i}-a2_{j}",
                    p_g=p_g,
                    p_e=0.2,
                    alpha0=float(logit(0.01)),
                    alpha1=a1,
                    alpha2=a2,
                    target_reri=0.0,
                )
            )
    return grid


def power_grid(p_g: float, alpha1: float, alpha2: float, reris: tuple[float, ...]) -> list[Scenario]:
    """One main-effect cell swept over excess-risk values."""
    return [
        Scenario(
            name=f"pg{p_g:g}-reri{r:g}",
            p_g=p_g,
            p_e=0.2,
            alpha0=float(logit(0.01)),
            alpha1=alpha1,
            alpha2=alpha2,
            target_reri=r,
        )
        for r in reris
    ]
