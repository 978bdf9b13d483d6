"""Component density families for mixture models.

Two families are provided: Gaussian location kernels with a fixed scale,
and Poisson kernels indexed by their mean.  All evaluation is done in log
space so that mixtures over wide grids (where individual component masses
underflow) remain computable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson as _poisson

from .errors import DomainError

LOG_TWO_PI = math.log(2.0 * math.pi)

# Predictive log densities below this are treated as zero mass.
LOG_DENSITY_FLOOR = math.log(1e-300)


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    POISSON = "poisson"


class ObservationSpace(str, Enum):
    REAL_LINE = "real-line"
    NONNEGATIVE_INTEGERS = "nonnegative-integers"


@dataclass(frozen=True)
class Kernel:
    """A parametric component family p(y | u).

    ``scale`` is the standard deviation of the Gaussian family and is
    ignored for the Poisson family (whose single index u is its mean).
    """

    family: Family
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.GAUSSIAN and not self.scale > 0:
            raise DomainError(f"Gaussian scale must be positive, got {self.scale}")

    @property
    def observation_space(self) -> ObservationSpace:
        if self.family is Family.GAUSSIAN:
            return ObservationSpace.REAL_LINE
        return ObservationSpace.NONNEGATIVE_INTEGERS

    # ---- domain checks -------------------------------------------------

    def validate_observations(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.size and not np.all(np.isfinite(y)):
            raise DomainError("observations must be finite")
        if self.family is Family.POISSON:
            if y.size and (np.any(y < 0) or np.any(y != np.floor(y))):
                raise DomainError("Poisson observations must be nonnegative integers")
        return y

    def validate_points(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.size and not np.all(np.isfinite(u)):
            raise DomainError("support points must be finite")
        if self.family is Family.POISSON and u.size and np.any(u < 0):
            raise DomainError("Poisson support points must be nonnegative")
        return u

    # ---- evaluation ----------------------------------------------------

    def log_density(self, y, u):
        """log p(y | u), broadcasting observations against support points.

        Scalar inputs give a float; array inputs give an (n_obs, n_points)
        matrix.  The Poisson point u = 0 is an atom at y = 0, so
        log p(0 | 0) = 0 and log p(y | 0) = -inf for y > 0.
        """
        scalar = np.ndim(y) == 0 and np.ndim(u) == 0
        y = self.validate_observations(np.atleast_1d(y))[:, None]
        u = self.validate_points(np.atleast_1d(u))[None, :]
        if self.family is Family.GAUSSIAN:
            z = (y - u) / self.scale
            out = -0.5 * z * z - math.log(self.scale) - 0.5 * LOG_TWO_PI
        else:
            out = np.full(np.broadcast_shapes(y.shape, u.shape), -np.inf)
            pos = np.broadcast_to(u > 0, out.shape)
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = y * np.log(u) - u - gammaln(y + 1.0)
            out = np.where(pos, vals, out)
            out = np.where(~pos & (y == 0), 0.0, out)
        return float(out[0, 0]) if scalar else out

    def density(self, y, u):
        """p(y | u); see :meth:`log_density`."""
        return np.exp(self.log_density(y, u))

    def draw(self, rng: np.random.Generator, centers) -> np.ndarray:
        """One observation per entry of ``centers``."""
        centers = self.validate_points(centers)
        if self.family is Family.GAUSSIAN:
            return rng.normal(centers, self.scale)
        return rng.poisson(centers).astype(float)


def _poisson_ratio_moment(u1: float, u2: float, u3: float, tail: float = 1e-13) -> float:
    """sum_y {p(y|u1)/p(y|u2)}^2 p(y|u3) by truncated summation (u2 > 0)."""
    lam_eff = u3 * (u1 / u2) ** 2
    cap = int(_poisson.isf(tail, max(lam_eff, u3, 1.0))) + 10
    y = np.arange(cap + 1, dtype=float)
    log_r = (y * (math.log(u1) - math.log(u2)) + (u2 - u1)) if u1 > 0 else None
    if u1 == 0:
        # ratio is e^{u2} at y = 0 and zero elsewhere
        return math.exp(2.0 * u2 - u3)
    log_p3 = y * math.log(u3) - u3 - gammaln(y + 1.0) if u3 > 0 else None
    if u3 == 0:
        return math.exp(2.0 * (u2 - u1))  # only y = 0 contributes
    return float(np.sum(np.exp(2.0 * log_r + log_p3)))


def _gaussian_ratio_moment_log(u1: float, u2: float, u3: float, sigma: float) -> float:
    """log of the ratio moment for equal-scale Gaussians (closed form).

    With p(.|u) = N(u, sigma^2) the integrand exp{2(u1-u2)y/s^2 + (u2^2-u1^2)/s^2}
    N(y; u3, sigma^2) integrates to exp{(u2^2-u1^2 + 2(u1-u2)u3 + 2(u1-u2)^2)/s^2}.
    """
    s2 = sigma * sigma
    d = u1 - u2
    return (u2 * u2 - u1 * u1 + 2.0 * d * u3 + 2.0 * d * d) / s2


def check_lr_bound(kernel: Kernel, points, tail: float = 1e-13) -> float:
    """Worst-case squared likelihood-ratio moment over a grid.

    Returns max over (u1, u2, u3) in the grid cubed of
    int {p(y|u1)/p(y|u2)}^2 p(y|u3) dy, or ``inf`` when it overflows.
    Poisson triples with u2 = 0 (and u1 != 0) are excluded: the ratio is
    undefined off the zero atom there.
    """
    pts = kernel.validate_points(points)
    if pts.size == 0:
        raise DomainError("grid must be nonempty")
    best_log = -np.inf
    for u1 in pts:
        for u2 in pts:
            if u1 == u2:
                best_log = max(best_log, 0.0)  # ratio is identically 1
                continue
            if kernel.family is Family.POISSON and u2 == 0:
                continue
            for u3 in pts:
                if kernel.family is Family.GAUSSIAN:
                    val = _gaussian_ratio_moment_log(u1, u2, u3, kernel.scale)
                else:
                    val = math.log(_poisson_ratio_moment(u1, u2, u3, tail))
                best_log = max(best_log, val)
    with np.errstate(over="ignore"):
        return float(np.exp(best_log))
