import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import quad
from scipy.stats import norm, poisson

from prmix.errors import DomainError
from prmix.kernels import Family, Kernel, ObservationSpace, check_lr_bound
from prmix.quadrature import build_grid, normalization_error


@pytest.fixture(scope="module")
def gauss():
    return Kernel(Family.GAUSSIAN, 1.0)


@pytest.fixture(scope="module")
def pois():
    return Kernel(Family.POISSON)


# ---- spot values -----------------------------------------------------------


def test_gaussian_log_density_at_mode(gauss):
    assert_allclose(gauss.log_density(0.0, 0.0), math.log(1.0 / math.sqrt(2 * math.pi)),
                    rtol=0, atol=1e-15)
    assert_allclose(gauss.log_density(0.0, 0.0), -0.9189385, atol=1e-7)


def test_poisson_log_density_values(pois):
    assert pois.log_density(0.0, 1.0) == -1.0
    # hand evaluation of the mass function at (y=3, u=2)
    expected = math.log(math.exp(-2.0) * 2.0 ** 3 / math.factorial(3))
    assert_allclose(pois.log_density(3.0, 2.0), expected, rtol=1e-14)
    assert_allclose(pois.log_density(3.0, 2.0), -1.7123179, atol=1e-7)


def test_poisson_zero_point_is_atom(pois):
    assert pois.log_density(0.0, 0.0) == 0.0
    assert pois.log_density(1.0, 0.0) == -np.inf
    assert pois.log_density(7.0, 0.0) == -np.inf


def test_matrix_shape_and_log_consistency(gauss, pois):
    y = np.array([0.0, 1.0, 3.0])
    u = np.array([0.0, 2.0])
    for k in (gauss, pois):
        logp = k.log_density(y, u)
        assert logp.shape == (3, 2)
        dens = k.density(y, u)
        mask = dens > 1e-300
        assert_allclose(np.exp(logp[mask]), dens[mask], rtol=1e-12)


def test_against_scipy_reference(gauss, pois):
    y = np.linspace(-3, 8, 23)
    u = np.array([0.0, 1.5, 4.0])
    assert_allclose(gauss.log_density(y, u), norm.logpdf(y[:, None], u[None, :]), rtol=1e-12)
    yc = np.arange(0, 15, dtype=float)
    uc = np.array([0.5, 2.0, 9.0])
    assert_allclose(pois.log_density(yc, uc), poisson.logpmf(yc[:, None], uc[None, :]),
                    rtol=1e-12)


# ---- domain validation -----------------------------------------------------


def test_domain_errors(gauss, pois):
    with pytest.raises(DomainError):
        pois.log_density(-1.0, 2.0)
    with pytest.raises(DomainError):
        pois.log_density(1.5, 2.0)
    with pytest.raises(DomainError):
        pois.log_density(2.0, -1.0)
    with pytest.raises(DomainError):
        gauss.log_density(np.inf, 0.0)
    with pytest.raises(DomainError):
        Kernel(Family.GAUSSIAN, 0.0)
    with pytest.raises(DomainError):
        Kernel(Family.GAUSSIAN, -2.0)


def test_observation_space(gauss, pois):
    assert gauss.observation_space is ObservationSpace.REAL_LINE
    assert pois.observation_space is ObservationSpace.NONNEGATIVE_INTEGERS


# ---- normalization and continuity -----------------------------------------


def test_normalization_on_grids(gauss, pois):
    for kernel, points in ((gauss, [-2.0, 0.0, 3.0, 6.5]), (pois, [0.0, 0.5, 1.0, 5.0, 27.0])):
        grid = build_grid(kernel, points)
        assert normalization_error(kernel, points, grid) < 1e-10


def test_continuity_in_u(gauss, pois):
    # finite-difference probes: small moves in u make small density moves
    for kernel, ys, us in ((gauss, [0.0, 1.7], [0.0, 2.0]), (pois, [0.0, 3.0], [0.5, 4.0])):
        for y in ys:
            for u in us:
                base = kernel.density(y, u)
                for h in (1e-4, 1e-6):
                    assert abs(kernel.density(y, u + h) - base) < 10 * math.sqrt(h)


# ---- likelihood-ratio moment bound -----------------------------------------


def test_lr_bound_singleton_is_one(gauss, pois):
    assert_allclose(check_lr_bound(gauss, [2.5]), 1.0, rtol=1e-12)
    assert_allclose(check_lr_bound(pois, [3.0]), 1.0, rtol=1e-12)
    assert_allclose(check_lr_bound(pois, [0.0]), 1.0, rtol=1e-12)


def test_lr_bound_poisson_grid_vs_truncated_sum(pois):
    # independent oracle: direct truncated summation over y = 0..200
    def term(u1, u2, u3):
        y = np.arange(201)
        logr = poisson.logpmf(y, u1) - poisson.logpmf(y, u2)
        return float(np.sum(np.exp(2 * logr + poisson.logpmf(y, u3))))

    grid = [1.0, 2.0]
    expected = max(term(a, b, c) for a in grid for b in grid for c in grid)
    got = check_lr_bound(pois, grid)
    assert_allclose(got, expected, rtol=1e-10)
    assert_allclose(got, math.exp(4.0), rtol=1e-10)
    assert math.isfinite(got)


def test_lr_bound_gaussian_grid_vs_quadrature(gauss):
    # independent oracle: adaptive quadrature over [-12, 13]
    def term(u1, u2, u3):
        def ig(y):
            return (norm.pdf(y, u1) / norm.pdf(y, u2)) ** 2 * norm.pdf(y, u3)
        val, _ = quad(ig, -12, 13, limit=200)
        return val

    grid = [0.0, 1.0]
    expected = max(term(a, b, c) for a in grid for b in grid for c in grid)
    got = check_lr_bound(gauss, grid)
    assert_allclose(got, expected, rtol=1e-8)
    assert_allclose(got, math.exp(3.0), rtol=1e-12)


def test_lr_bound_finite_where_theory_says_so(gauss, pois):
    # Poisson grids bounded away from zero, and any fixed-scale Gaussian grid
    assert math.isfinite(check_lr_bound(pois, [0.5, 1.0, 2.0, 5.0]))
    assert math.isfinite(check_lr_bound(gauss, [0.0, 1.0, 2.0, 3.0]))
    # zero-atom pairings are excluded from the Poisson max rather than breaking it
    assert math.isfinite(check_lr_bound(pois, [0.0, 1.0, 2.0]))


def test_lr_bound_overflows_to_inf_for_extreme_gaussian_grids(gauss):
    assert check_lr_bound(gauss, [0.0, 50.0]) == math.inf


def test_lr_bound_empty_grid_rejected(gauss):
    with pytest.raises(DomainError):
        check_lr_bound(gauss, [])
