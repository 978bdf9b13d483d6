"""Unknown-support estimation by subset search over a finite grid.

The fit quality of a candidate support U is scored by the prequential
objective L_n(U) = -sum_i log m_{i-1,U}(Y_i) from a single sequential
pass.  The unknown true density contributes the same additive constant
to every subset, so minimizing L_n over subsets is equivalent to
minimizing the KL-divergence estimate and never requires evaluating the
true density.  Small grids are minimized exhaustively; larger ones by
simulated annealing over the subset hypercube.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import (FiniteMixture, MixingVector, PRTrace, SupportSet,
                     WeightSchedule, _core, pr_run)
from .errors import ConfigError, DegenerateDataError, DomainError
from .kernels import Kernel

EXHAUSTIVE_MAX_GRID = 20


@dataclass(frozen=True)
class GridSpec:
    """A finite candidate grid inside a compact interval."""

    points: np.ndarray
    lower: float
    upper: float

    def __post_init__(self):
        pts = np.unique(np.asarray(self.points, dtype=float).ravel())
        if len(pts) < 2:
            raise DomainError("a candidate grid needs at least 2 points")
        if pts[0] < self.lower or pts[-1] > self.upper:
            raise DomainError("grid points must lie within [lower, upper]")
        object.__setattr__(self, "points", pts)
        self.points.setflags(write=False)

    def __len__(self) -> int:
        return len(self.points)

    @classmethod
    def from_points(cls, points) -> "GridSpec":
        pts = np.asarray(points, dtype=float)
        return cls(points=pts, lower=float(pts.min()), upper=float(pts.max()))

    @classmethod
    def from_string(cls, spec: str, include=()) -> "GridSpec":
        """Parse "lower:upper:step" (endpoints included) plus forced points.

        The step must evenly divide the range; points are generated by
        linspace so both endpoints are exact.
        """
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid spec {spec!r} is not of the form lower:upper:step")
        try:
            lo, hi, step = (float(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(f"grid spec {spec!r} has non-numeric fields") from exc
        if not (hi > lo and step > 0):
            raise ConfigError(f"grid spec {spec!r} needs upper > lower and step > 0")
        count = (hi - lo) / step
        if abs(count - round(count)) > 1e-2:
            raise ConfigError(f"step {step} does not evenly divide [{lo}, {hi}]")
        pts = np.linspace(lo, hi, int(round(count)) + 1)
        if len(include):
            pts = np.union1d(pts, np.asarray(include, dtype=float))
        return cls(points=pts, lower=float(min(lo, pts.min())), upper=float(max(hi, pts.max())))


@dataclass(frozen=True)
class SubsetObjective:
    """The prequential score of one candidate support."""

    support: SupportSet
    value: float
    trace: PRTrace | None
    feasible: bool

    @property
    def final(self) -> MixingVector | None:
        return self.trace.final if self.trace is not None else None


@dataclass(frozen=True)
class AnnealConfig:
    """Simulated-annealing settings for the subset search.

    ``t0=None`` sets the initial temperature from the interquartile range
    of the objective over 20 random subsets.  ``max_evals`` caps the
    number of distinct subsets scored (each costs one full pass).
    """

    t0: float | None = None
    rho: float = 0.95
    steps_per_temp: int = 50
    max_evals: int = 5000
    seed: int = 0
    init: str = "full"
    t_min: float = 1e-9
    memoize: bool = True

    def __post_init__(self):
        if self.t0 is not None and not self.t0 > 0:
            raise ConfigError("t0 must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError("cooling ratio rho must lie in (0, 1)")
        if self.steps_per_temp < 1 or self.max_evals < 1:
            raise ConfigError("steps_per_temp and max_evals must be positive")
        if self.init not in ("full", "random"):
            raise ConfigError(f"unknown initial subset rule {self.init!r}")


@dataclass(frozen=True)
class SelectionResult:
    best: SupportSet
    best_value: float
    n_evaluations: int
    table: list | None = None          # exhaustive: [(points tuple, value)], ranked
    anneal_trace: list | None = None   # annealing: per-proposal rows
    capped: bool = False


# ---------------------------------------------------------------------------
# objective evaluation
# ---------------------------------------------------------------------------


def objective(data, kernel: Kernel, subset, schedule: WeightSchedule) -> SubsetObjective:
    """Score one candidate support; infeasible subsets score +inf."""
    support = subset if isinstance(subset, SupportSet) else SupportSet(subset)
    try:
        trace = pr_run(data, kernel, support, schedule)
    except DegenerateDataError:
        return SubsetObjective(support=support, value=math.inf, trace=None, feasible=False)
    return SubsetObjective(support=support, value=trace.neg_log_score, trace=trace, feasible=True)


class _GridEvaluator:
    """Scores column subsets of a precomputed log-density matrix."""

    def __init__(self, data, kernel: Kernel, points: np.ndarray, schedule: WeightSchedule):
        data = kernel.validate_observations(np.asarray(data, dtype=float).ravel())
        if data.size == 0:
            raise DomainError("data must be nonempty")
        self.points = points
        self.logp = np.ascontiguousarray(kernel.log_density(data, points))
        self.gains = schedule.gains(len(data))
        self.cache: dict[tuple, float] = {}
        self.n_evaluations = 0

    def raw_value(self, cols: tuple) -> float:
        logp = np.ascontiguousarray(self.logp[:, list(cols)])
        f0 = np.full(len(cols), 1.0 / len(cols))
        _, logpred, _, status = _core(logp, self.gains, f0, False)
        self.n_evaluations += 1
        return math.inf if status else -float(logpred.sum())

    def value(self, cols: tuple, memoize: bool = True) -> float:
        if memoize and cols in self.cache:
            return self.cache[cols]
        val = self.raw_value(cols)
        if memoize:
            self.cache[cols] = val
        return val

    def rank_key(self, cols: tuple, value: float) -> tuple:
        return (value, len(cols), tuple(self.points[list(cols)]))


def _as_points(grid) -> np.ndarray:
    if isinstance(grid, GridSpec):
        return grid.points
    if isinstance(grid, SupportSet):
        return grid.points
    return SupportSet(grid).points


# ---------------------------------------------------------------------------
# selectors
# ---------------------------------------------------------------------------


def exhaustive_select(data, kernel: Kernel, grid, schedule: WeightSchedule) -> SelectionResult:
    """Score every nonempty subset of the grid and return the minimizer.

    Ties break toward smaller subsets, then lexicographically.  Refuses
    grids beyond 20 points; use :func:`anneal_select` there.
    """
    points = _as_points(grid)
    g = len(points)
    if g > EXHAUSTIVE_MAX_GRID:
        raise ConfigError(
            f"exhaustive search over {g} grid points would need 2^{g}-1 passes; "
            "use anneal_select for grids this large")
    ev = _GridEvaluator(data, kernel, points, schedule)
    ranked = []
    for mask in range(1, 2 ** g):
        cols = tuple(i for i in range(g) if mask >> i & 1)
        ranked.append(ev.rank_key(cols, ev.value(cols)))
    ranked.sort()
    table = [(key[2], key[0]) for key in ranked]
    best_points = ranked[0][2]
    return SelectionResult(
        best=SupportSet(best_points),
        best_value=ranked[0][0],
        n_evaluations=ev.n_evaluations,
        table=table,
    )


def _initial_state(cfg: AnnealConfig, g: int, rng: np.random.Generator) -> tuple:
    if cfg.init == "full":
        return tuple(range(g))
    mask = rng.random(g) < 0.5
    if not mask.any():
        mask[rng.integers(g)] = True
    return tuple(np.flatnonzero(mask))


def _default_t0(ev: _GridEvaluator, g: int, rng: np.random.Generator,
                memoize: bool) -> float:
    vals = []
    for _ in range(20):
        mask = rng.random(g) < 0.5
        if not mask.any():
            mask[rng.integers(g)] = True
        vals.append(ev.value(tuple(np.flatnonzero(mask)), memoize))
    finite = [v for v in vals if math.isfinite(v)]
    if not finite:
        return 1.0
    q75, q25 = np.percentile(finite, [75, 25])
    return max(float(q75 - q25), 1e-9)


def anneal_select(data, kernel: Kernel, grid, schedule: WeightSchedule,
                  cfg: AnnealConfig | None = None) -> SelectionResult:
    """Simulated annealing over nonempty subsets of the grid.

    State is a subset; a proposal toggles one uniformly chosen grid point
    (redrawn if it would empty the subset) and is accepted with
    probability min{1, exp(-dL/T)} under geometric cooling.  Subsets are
    memoized so repeat visits cost nothing.  Deterministic given
    ``cfg.seed``; returns the best subset ever visited.
    """
    cfg = cfg or AnnealConfig()
    points = _as_points(grid)
    g = len(points)
    rng = np.random.default_rng(cfg.seed)
    ev = _GridEvaluator(data, kernel, points, schedule)

    current = _initial_state(cfg, g, rng)
    current_val = ev.value(current, cfg.memoize)
    best_key = ev.rank_key(current, current_val)
    temperature = cfg.t0 if cfg.t0 is not None else _default_t0(ev, g, rng, cfg.memoize)

    trace: list[dict] = []
    proposals = 0
    capped = False
    while temperature > cfg.t_min:
        for _ in range(cfg.steps_per_temp):
            if ev.n_evaluations >= cfg.max_evals:
                capped = True
                break
            proposals += 1
            while True:
                j = int(rng.integers(g))
                if not (len(current) == 1 and current[0] == j):
                    break
            state = set(current)
            state.symmetric_difference_update((j,))
            candidate = tuple(sorted(state))
            candidate_val = ev.value(candidate, cfg.memoize)
            delta = candidate_val - current_val
            if delta <= 0:
                accept = True
            elif math.isinf(delta):
                accept = False
            else:
                accept = rng.random() < math.exp(-delta / temperature)
            if accept:
                current, current_val = candidate, candidate_val
                key = ev.rank_key(current, current_val)
                if key < best_key:
                    best_key = key
            trace.append({
                "proposal": proposals,
                "temperature": temperature,
                "candidate_size": len(candidate),
                "candidate_value": candidate_val,
                "accepted": accept,
                "current_value": current_val,
                "best_value": best_key[0],
                "evaluations": ev.n_evaluations,
            })
        if capped:
            break
        temperature *= cfg.rho
    return SelectionResult(
        best=SupportSet(best_key[2]),
        best_value=best_key[0],
        n_evaluations=ev.n_evaluations,
        anneal_trace=trace,
        capped=capped,
    )


def refit(data, kernel: Kernel, support: SupportSet,
          schedule: WeightSchedule) -> tuple[MixingVector, FiniteMixture]:
    """Final pass on the selected support, for reporting."""
    trace = pr_run(data, kernel, support, schedule)
    return trace.final, FiniteMixture(kernel=kernel, mixing=trace.final)


def support_distance(u1, u2) -> int:
    """Cardinality of the symmetric difference of two supports."""
    a = set(np.asarray(_as_points(u1)).tolist())
    b = set(np.asarray(_as_points(u2)).tolist())
    return len(a.symmetric_difference(b))
