"""The sequential mixing-distribution recursion and its supporting types.

One pass over a data stream updates a probability vector over a finite
support: with gain w and incoming observation y,

    f'(u) = (1 - w) f(u) + w * p(y|u) f(u) / m_f(y),

where m_f is the current mixture density.  The update is multiplicative,
so zero weights stay zero and results depend on the data order.  The hot
loop is jitted with numba (pure-python fallback with identical arithmetic
when numba is unavailable).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateDataError, DomainError
from .kernels import LOG_DENSITY_FLOOR, Kernel


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


class SupportSet:
    """An ordered finite set of candidate component locations."""

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.asarray(points, dtype=float).ravel()
        if pts.size == 0:
            raise DomainError("support must contain at least one point")
        pts = np.sort(pts)
        if pts.size > 1 and np.any(np.diff(pts) <= 0):
            raise DomainError("support points must be distinct")
        self.points = pts
        self.points.setflags(write=False)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __eq__(self, other) -> bool:
        return isinstance(other, SupportSet) and np.array_equal(self.points, other.points)

    def __hash__(self) -> int:
        return hash(self.points.tobytes())

    def __repr__(self) -> str:
        return f"SupportSet({list(self.points)})"


SIMPLEX_TOL = 1e-12


class MixingVector:
    """A probability vector over a :class:`SupportSet`."""

    __slots__ = ("support", "weights")

    def __init__(self, support: SupportSet, weights):
        w = np.asarray(weights, dtype=float).ravel()
        if len(w) != len(support):
            raise DomainError("weights and support have different lengths")
        if np.any(w < 0):
            raise DomainError("mixing weights must be nonnegative")
        if abs(w.sum() - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"mixing weights sum to {w.sum()!r}, not 1")
        self.support = support
        self.weights = w
        self.weights.setflags(write=False)

    @classmethod
    def uniform(cls, support: SupportSet) -> "MixingVector":
        return cls(support, np.full(len(support), 1.0 / len(support)))

    @classmethod
    def point_mass(cls, support: SupportSet, at: float) -> "MixingVector":
        w = (support.points == at).astype(float)
        if w.sum() != 1.0:
            raise DomainError(f"{at} is not a support point")
        return cls(support, w)

    def __len__(self) -> int:
        return len(self.weights)

    def __repr__(self) -> str:
        pairs = ", ".join(f"{u:g}: {w:.4g}" for u, w in zip(self.support.points, self.weights))
        return f"MixingVector({{{pairs}}})"


class WeightSchedule:
    """Polynomially decaying gains w_i = (i + 1)^(-gamma), gamma in (1/2, 1)."""

    __slots__ = ("gamma",)

    def __init__(self, gamma: float = 0.9):
        if not 0.5 < gamma < 1.0:
            raise DomainError(f"gamma must lie strictly in (0.5, 1), got {gamma}")
        self.gamma = float(gamma)

    def gain(self, i: int) -> float:
        if i < 1:
            raise DomainError("step index starts at 1")
        return (i + 1.0) ** (-self.gamma)

    def gains(self, n: int) -> np.ndarray:
        return (np.arange(1, n + 1) + 1.0) ** (-self.gamma)

    @property
    def epsilon(self) -> float:
        # smallest summability margin the schedule grants, plus headroom
        return 1.0 / self.gamma - 1.0 + 0.01

    @property
    def delta(self) -> float:
        return (1.0 - self.epsilon) / 2.0

    def __repr__(self) -> str:
        return f"WeightSchedule(gamma={self.gamma})"


@dataclass
class PRTrace:
    """Record of one full pass: predictive log densities and the result."""

    log_predictive: np.ndarray
    final: MixingVector
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    path: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.log_predictive)

    @property
    def neg_log_score(self) -> float:
        """-sum_i log m_{i-1}(Y_i), the prequential score of the pass."""
        return -float(self.log_predictive.sum())


@dataclass(frozen=True)
class FiniteMixture:
    """A concrete mixture density sum_u p(y|u) f(u) usable as a data model."""

    kernel: Kernel
    mixing: MixingVector

    @property
    def support(self) -> SupportSet:
        return self.mixing.support

    def log_density(self, y):
        return mixture_log_density(self.mixing, self.kernel, y)

    def density(self, y):
        return np.exp(self.log_density(y))


# ---------------------------------------------------------------------------
# single-step operations
# ---------------------------------------------------------------------------


def mixture_log_density(f: MixingVector, kernel: Kernel, y):
    """log sum_u p(y|u) f(u) via log-sum-exp; -inf when all mass vanishes."""
    logp = kernel.log_density(np.atleast_1d(y), f.support.points)
    with np.errstate(divide="ignore"):
        out = logsumexp(logp, axis=1, b=f.weights[None, :])
    return float(out[0]) if np.ndim(y) == 0 else out


def update_direction(f: MixingVector, kernel: Kernel, y: float) -> np.ndarray:
    """The per-observation increment direction f(u){p(y|u)/m_f(y) - 1}."""
    logp = np.ravel(kernel.log_density(y, f.support.points))
    logm = mixture_log_density(f, kernel, y)
    if logm < LOG_DENSITY_FLOOR:
        raise DegenerateDataError(step=0, value=y)
    w = f.weights
    ratio = np.where(w > 0, np.exp(logp - logm), 0.0)
    return np.where(w > 0, w * (ratio - 1.0), 0.0)


def pr_step(f: MixingVector, kernel: Kernel, y: float, gain: float,
            renormalize: bool = True) -> MixingVector:
    """One recursion update with the given gain in (0, 1)."""
    if not 0.0 < gain < 1.0:
        raise DomainError(f"gain must lie in (0, 1), got {gain}")
    logp = np.ravel(kernel.log_density(y, f.support.points))
    logm = mixture_log_density(f, kernel, y)
    if logm < LOG_DENSITY_FLOOR:
        raise DegenerateDataError(step=0, value=y)
    w = f.weights
    ratio = np.where(w > 0, np.exp(logp - logm), 0.0)
    new = (1.0 - gain) * w + gain * w * ratio
    if renormalize:
        new = new / new.sum()
    return MixingVector(f.support, new)


# ---------------------------------------------------------------------------
# full-pass core (jitted when numba is available)
# ---------------------------------------------------------------------------


def _core_py(logp, gains, f0, keep_path):
    n, s = logp.shape
    f = f0.copy()
    logpred = np.empty(n)
    path = np.empty((n + 1 if keep_path else 1, s))
    path[0] = f
    for i in range(n):
        amax = -np.inf
        for u in range(s):
            if f[u] > 0.0 and logp[i, u] > amax:
                amax = logp[i, u]
        if amax == -np.inf:
            return f, logpred, path, i + 1
        acc = 0.0
        for u in range(s):
            if f[u] > 0.0:
                acc += f[u] * np.exp(logp[i, u] - amax)
        logm = amax + np.log(acc)
        if logm < LOG_DENSITY_FLOOR:
            return f, logpred, path, i + 1
        logpred[i] = logm
        w = gains[i]
        tot = 0.0
        for u in range(s):
            if f[u] > 0.0:
                f[u] = (1.0 - w) * f[u] + w * f[u] * np.exp(logp[i, u] - logm)
            tot += f[u]
        for u in range(s):
            f[u] /= tot
        if keep_path:
            path[i + 1] = f
    return f, logpred, path, 0


try:
    from numba import njit

    _core = njit(cache=True)(_core_py)
except ImportError:  # pragma: no cover - numba is a declared dependency
    _core = _core_py


# ---------------------------------------------------------------------------
# full-pass drivers
# ---------------------------------------------------------------------------


def pr_run(data, kernel: Kernel, support: SupportSet, schedule: WeightSchedule,
           f0: MixingVector | None = None, snapshot_at=(), keep_path: bool = False) -> PRTrace:
    """One sequential pass over ``data`` in the given order.

    ``snapshot_at`` requests copies of the mixing vector after the listed
    numbers of observations (0 gives the initial vector).  Deterministic
    for fixed inputs; raises :class:`DegenerateDataError` with the step
    index when an observation has no mass under the current mixture.
    """
    data = kernel.validate_observations(np.asarray(data, dtype=float).ravel())
    if data.size == 0:
        raise DomainError("data must be nonempty")
    if f0 is None:
        f0 = MixingVector.uniform(support)
    elif f0.support != support:
        raise DomainError("f0 is indexed by a different support")
    snapshot_at = sorted(set(int(i) for i in snapshot_at))
    if snapshot_at and (snapshot_at[0] < 0 or snapshot_at[-1] > len(data)):
        raise DomainError("snapshot indices must lie in [0, n]")
    want_path = keep_path or bool(snapshot_at)

    logp = np.ascontiguousarray(kernel.log_density(data, support.points))
    gains = schedule.gains(len(data))
    f, logpred, path, status = _core(logp, gains, f0.weights.copy(), want_path)
    if status:
        raise DegenerateDataError(step=status, value=data[status - 1])
    snapshots = {i: path[i].copy() for i in snapshot_at}
    return PRTrace(
        log_predictive=logpred,
        final=MixingVector(support, f),
        snapshots=snapshots,
        path=path if keep_path else None,
    )


def pr_run_averaged(data, kernel: Kernel, support: SupportSet, schedule: WeightSchedule,
                    f0: MixingVector | None = None, n_permutations: int = 1,
                    seed: int = 0) -> MixingVector:
    """Average the final mixing vector over random data orderings.

    The first pass always uses the data order as given, so
    ``n_permutations=1`` reproduces :func:`pr_run` exactly.
    """
    if n_permutations < 1:
        raise DomainError("n_permutations must be at least 1")
    data = np.asarray(data, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    acc = np.zeros(len(support))
    for j in range(n_permutations):
        ordered = data if j == 0 else data[rng.permutation(len(data))]
        acc += pr_run(ordered, kernel, support, schedule, f0=f0).final.weights
    return MixingVector(support, acc / n_permutations)
