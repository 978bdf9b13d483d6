"""Synthetic-data benchmarks for the convergence-rate theory.

A rate experiment runs the recursion over growing sample prefixes,
measures distance to the KL-projection target at geometric checkpoints,
and fits log-log slopes of the median error across seeds against the
theoretical references -(1 - 1/(2 gamma)) for the mixing-vector error
and twice that for the KL contrast.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import Population, kl_oracle_fstar
from .engine import FiniteMixture, MixingVector, SupportSet, WeightSchedule, pr_run
from .errors import DomainError
from .kernels import Family, Kernel

DEFAULT_CHECKPOINTS = tuple(int(round(10 ** e)) for e in (2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0))


def simulate(model: FiniteMixture, n: int, seed: int) -> np.ndarray:
    """n i.i.d. draws from a finite mixture, deterministic per seed."""
    if n < 1:
        raise DomainError("n must be at least 1")
    rng = np.random.default_rng(seed)
    comps = rng.choice(len(model.support), size=n, p=model.mixing.weights)
    return model.kernel.draw(rng, model.support.points[comps])


@dataclass(frozen=True)
class Scenario:
    """A data model paired with the support the recursion fits."""

    name: str
    model: FiniteMixture
    fit_support: SupportSet
    report_only: bool = False


def _mixture(family: Family, points, weights, scale: float = 1.0) -> FiniteMixture:
    kernel = Kernel(family, scale)
    support = SupportSet(points)
    return FiniteMixture(kernel=kernel, mixing=MixingVector(support, weights))


def misspecified_scenario_suite() -> list[Scenario]:
    """The standard benchmark scenarios.

    (a) well-specified Gaussian with interior truth, (b) a Poisson
    mixture fitted on a grid missing a true component (interior
    KL projection, positive divergence floor), and (c) a fitted grid
    strictly containing the truth, so the projection sits on the simplex
    boundary and rate assertions are skipped.
    """
    return [
        Scenario(
            name="well-specified-gaussian",
            model=_mixture(Family.GAUSSIAN, [0.0, 3.0, 6.0], [0.5, 0.3, 0.2]),
            fit_support=SupportSet([0.0, 3.0, 6.0]),
        ),
        Scenario(
            name="misspecified-poisson",
            model=_mixture(Family.POISSON, [1.0, 5.0], [0.6, 0.4]),
            fit_support=SupportSet([1.0, 4.0, 6.0]),
        ),
        Scenario(
            name="boundary-poisson",
            model=_mixture(Family.POISSON, [1.0, 5.0], [0.6, 0.4]),
            fit_support=SupportSet([1.0, 3.0, 5.0]),
            report_only=True,
        ),
    ]


def scenario_by_name(name: str) -> Scenario:
    for sc in misspecified_scenario_suite():
        if sc.name == name:
            return sc
    raise DomainError(f"unknown scenario {name!r}")


@dataclass(frozen=True)
class RateExperiment:
    """Configuration of one rate study."""

    scenario: Scenario
    gammas: tuple = (0.6, 0.9)
    checkpoints: tuple = DEFAULT_CHECKPOINTS
    n_seeds: int = 20
    base_seed: int = 1000
    slope_min_n: int = 1000

    def __post_init__(self):
        cps = tuple(int(c) for c in self.checkpoints)
        if len(cps) < 5:
            raise DomainError("need at least 5 checkpoints for slope fitting")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise DomainError("checkpoints must be strictly increasing")
        object.__setattr__(self, "checkpoints", cps)
        if sum(n >= self.slope_min_n for n in cps) < 2:
            raise DomainError("slope window must contain at least 2 checkpoints")


@dataclass(frozen=True)
class GammaSummary:
    gamma: float
    checkpoints: tuple
    median_err_f: np.ndarray
    median_err_l1: np.ndarray
    median_kl: np.ndarray
    slope_f: float
    slope_f_stderr: float
    slope_l1: float
    slope_kl: float

    @property
    def reference_slope_f(self) -> float:
        return -(1.0 - 1.0 / (2.0 * self.gamma))

    @property
    def reference_slope_kl(self) -> float:
        return 2.0 * self.reference_slope_f


@dataclass(frozen=True)
class RateReport:
    scenario: Scenario
    fstar: MixingVector
    kstar: float
    interior: bool
    summaries: list[GammaSummary]
    cells: list[dict] = field(default_factory=list)

    def summary_for(self, gamma: float) -> GammaSummary:
        for s in self.summaries:
            if abs(s.gamma - gamma) < 1e-12:
                return s
        raise KeyError(gamma)

    def cell_fieldnames(self) -> list[str]:
        return ["scenario", "gamma", "seed", "n", "err_f", "err_l1", "kl_contrast"]


def _fit_slope(ns: np.ndarray, med: np.ndarray) -> tuple[float, float]:
    x = np.log(ns.astype(float))
    y = np.log(med)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, _, _ = np.linalg.lstsq(A, y, rcond=None)
    dof = len(x) - 2
    if dof > 0 and res.size:
        sigma2 = float(res[0]) / dof
        cov00 = sigma2 * np.linalg.inv(A.T @ A)[0, 0]
        stderr = float(np.sqrt(cov00))
    else:
        stderr = float("nan")
    return float(coef[0]), stderr


def rate_experiment(cfg: RateExperiment) -> RateReport:
    """Run the study and fit slopes on the n >= slope_min_n window."""
    sc = cfg.scenario
    kernel = sc.model.kernel  # fitted family matches the model family in every scenario
    pop = Population(sc.model, sc.fit_support, kernel)
    oracle = kl_oracle_fstar(sc.model, sc.fit_support, kernel, pop=pop)
    fstar = oracle.fstar.weights
    cps = np.asarray(cfg.checkpoints)
    n_max = int(cps[-1])
    cells: list[dict] = []
    summaries: list[GammaSummary] = []
    for gamma in cfg.gammas:
        schedule = WeightSchedule(gamma)
        err_f = np.empty((cfg.n_seeds, len(cps)))
        err_l1 = np.empty_like(err_f)
        kl = np.empty_like(err_f)
        for j in range(cfg.n_seeds):
            seed = cfg.base_seed + j
            data = simulate(sc.model, n_max, seed)
            trace = pr_run(data, kernel, sc.fit_support, schedule, snapshot_at=cps)
            F = np.stack([trace.snapshots[int(c)] for c in cps], axis=1)
            err_f[j] = np.linalg.norm(F - fstar[:, None], axis=0)
            err_l1[j] = pop.l1_between(F, np.repeat(fstar[:, None], len(cps), axis=1))
            kl[j] = pop.kl(F) - oracle.kstar
            for c, ef, el, ek in zip(cps, err_f[j], err_l1[j], kl[j]):
                cells.append({
                    "scenario": sc.name, "gamma": gamma, "seed": seed, "n": int(c),
                    "err_f": ef, "err_l1": el, "kl_contrast": ek,
                })
        med_f = np.median(err_f, axis=0)
        med_l1 = np.median(err_l1, axis=0)
        med_kl = np.maximum(np.median(kl, axis=0), 1e-300)
        window = cps >= cfg.slope_min_n
        slope_f, stderr = _fit_slope(cps[window], med_f[window])
        slope_l1, _ = _fit_slope(cps[window], med_l1[window])
        slope_kl, _ = _fit_slope(cps[window], med_kl[window])
        summaries.append(GammaSummary(
            gamma=gamma, checkpoints=cfg.checkpoints,
            median_err_f=med_f, median_err_l1=med_l1, median_kl=med_kl,
            slope_f=slope_f, slope_f_stderr=stderr,
            slope_l1=slope_l1, slope_kl=slope_kl,
        ))
    return RateReport(
        scenario=sc, fstar=oracle.fstar, kstar=oracle.kstar,
        interior=oracle.interior, summaries=summaries, cells=cells,
    )
