import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from prmix.engine import (FiniteMixture, MixingVector, SupportSet,
                          WeightSchedule, _core, _core_py, mixture_log_density,
                          pr_run, pr_run_averaged, pr_step, update_direction)
from prmix.errors import DegenerateDataError, DomainError
from prmix.kernels import Family, Kernel

GAUSS = Kernel(Family.GAUSSIAN, 1.0)
POIS = Kernel(Family.POISSON)


# ---- domain types ----------------------------------------------------------


def test_support_set_sorted_unique():
    s = SupportSet([3.0, 1.0, 2.0])
    assert list(s.points) == [1.0, 2.0, 3.0]
    with pytest.raises(DomainError):
        SupportSet([1.0, 1.0])
    with pytest.raises(DomainError):
        SupportSet([])


def test_mixing_vector_validation():
    s = SupportSet([1.0, 2.0])
    MixingVector(s, [0.5, 0.5])
    with pytest.raises(DomainError):
        MixingVector(s, [0.6, 0.6])
    with pytest.raises(DomainError):
        MixingVector(s, [1.5, -0.5])
    u = MixingVector.uniform(s)
    assert_allclose(u.weights, [0.5, 0.5])


def test_weight_schedule_domain():
    for bad in (0.5, 1.0, 0.3, 1.2):
        with pytest.raises(DomainError):
            WeightSchedule(bad)
    sched = WeightSchedule(0.9)
    assert sched.gain(1) == 2.0 ** -0.9
    assert_allclose(sched.gains(3), [(i + 1.0) ** -0.9 for i in (1, 2, 3)])
    # summability margin exists and the induced rate exponent is valid
    assert sched.epsilon > 1.0 / sched.gamma - 1.0
    assert 0.0 < sched.delta < 0.5


# ---- mixture log density ---------------------------------------------------


def test_mixture_log_density_point_mass():
    s = SupportSet([1.0, 2.0])
    f = MixingVector.point_mass(s, 2.0)
    assert_allclose(mixture_log_density(f, POIS, 3.0), POIS.log_density(3.0, 2.0), rtol=1e-14)


def test_mixture_log_density_hand_value():
    s = SupportSet([1.0, 2.0])
    f = MixingVector(s, [0.5, 0.5])
    m = 0.5 * math.exp(-1.0) + 0.5 * math.exp(-2.0)
    got = mixture_log_density(f, POIS, 0.0)
    assert_allclose(got, math.log(m), rtol=1e-14)
    assert_allclose(got, -1.3798805, atol=1e-4)  # published rounding of log(0.2516074)


def test_mixture_log_density_equal_kernels_is_constant():
    # symmetric points around y: equal component densities
    s = SupportSet([-1.0, 1.0])
    for w in ([0.5, 0.5], [0.9, 0.1], [0.2, 0.8]):
        f = MixingVector(s, w)
        assert_allclose(mixture_log_density(f, GAUSS, 0.0), GAUSS.log_density(0.0, 1.0),
                        rtol=1e-12)


def test_mixture_log_density_all_vanishing_is_minus_inf():
    s = SupportSet([0.0])
    f = MixingVector(s, [1.0])
    assert mixture_log_density(f, POIS, 3.0) == -np.inf


# ---- single step -----------------------------------------------------------


def test_pr_step_singleton_support_is_fixed_point():
    s = SupportSet([2.0])
    f = MixingVector(s, [1.0])
    out = pr_step(f, POIS, 1.0, 0.3)
    assert_allclose(out.weights, [1.0])


def test_pr_step_equal_kernel_observation_is_identity():
    s = SupportSet([-1.0, 1.0])
    f = MixingVector(s, [0.3, 0.7])
    out = pr_step(f, GAUSS, 0.0, 0.25)
    assert_allclose(out.weights, f.weights, rtol=1e-15)


def test_pr_step_hand_value():
    s = SupportSet([1.0, 2.0])
    f = MixingVector(s, [0.5, 0.5])
    out = pr_step(f, POIS, 0.0, 0.5)
    m = 0.5 * math.exp(-1.0) + 0.5 * math.exp(-2.0)
    expected = 0.25 + 0.5 * (0.5 * math.exp(-1.0)) / m
    assert_allclose(out.weights, [expected, 1.0 - expected], rtol=1e-13)
    assert_allclose(out.weights, [0.6155300, 0.3844700], atol=1e-5)


def test_pr_step_gain_domain():
    s = SupportSet([1.0, 2.0])
    f = MixingVector.uniform(s)
    for bad in (0.0, 1.0, -0.1, 1.1):
        with pytest.raises(DomainError):
            pr_step(f, POIS, 0.0, bad)


def test_pr_step_degenerate_observation():
    s = SupportSet([0.0])
    f = MixingVector(s, [1.0])
    with pytest.raises(DegenerateDataError):
        pr_step(f, POIS, 5.0, 0.5)


def test_simplex_preservation_property():
    rng = np.random.default_rng(7)
    s = SupportSet([0.0, 1.5, 4.0, 9.0])
    for _ in range(200):
        f = MixingVector(s, rng.dirichlet(np.ones(4)))
        y = float(rng.integers(0, 12))
        gain = float(rng.uniform(0.01, 0.99))
        raw = pr_step(f, POIS, y, gain, renormalize=False)
        assert np.all(raw.weights >= 0)
        assert abs(raw.weights.sum() - 1.0) < 1e-12


def test_vertex_is_fixed_point():
    s = SupportSet([1.0, 2.0, 5.0])
    f = MixingVector.point_mass(s, 2.0)
    out = pr_step(f, POIS, 4.0, 0.7)
    assert_allclose(out.weights, f.weights, atol=1e-15)
    phi = update_direction(f, POIS, 4.0)
    assert_allclose(phi, np.zeros(3), atol=1e-15)


def test_zero_stays_zero():
    s = SupportSet([1.0, 2.0, 5.0])
    f = MixingVector(s, [0.5, 0.0, 0.5])
    out = f
    for y in (0.0, 2.0, 6.0, 1.0):
        out = pr_step(out, POIS, y, 0.4)
        assert out.weights[1] == 0.0


def test_update_forms_agree():
    rng = np.random.default_rng(21)
    s = SupportSet([-1.0, 0.5, 2.0])
    for _ in range(100):
        f = MixingVector(s, rng.dirichlet(np.ones(3)))
        y = float(rng.normal(0.5, 2.0))
        gain = float(rng.uniform(0.05, 0.95))
        convex = pr_step(f, GAUSS, y, gain, renormalize=False).weights
        additive = f.weights + gain * update_direction(f, GAUSS, y)
        assert np.abs(convex - additive).max() < 1e-14


# ---- full pass -------------------------------------------------------------


def test_pr_run_single_observation_matches_pr_step():
    s = SupportSet([1.0, 2.0])
    sched = WeightSchedule(0.9)
    trace = pr_run([0.0], POIS, s, sched)
    stepped = pr_step(MixingVector.uniform(s), POIS, 0.0, sched.gain(1))
    assert_allclose(trace.final.weights, stepped.weights, rtol=1e-14)
    assert len(trace) == 1


def test_pr_run_trace_shapes_and_snapshots():
    data = np.array([0.0, 1.0, 2.0, 1.0, 0.0])
    s = SupportSet([1.0, 2.0])
    trace = pr_run(data, POIS, s, WeightSchedule(0.8), snapshot_at=[0, 3, 5], keep_path=True)
    assert len(trace) == 5
    assert set(trace.snapshots) == {0, 3, 5}
    assert_allclose(trace.snapshots[0], [0.5, 0.5])
    assert trace.path.shape == (6, 2)
    assert_allclose(trace.path[3], trace.snapshots[3])
    assert_allclose(trace.path[5], trace.final.weights)


def test_pr_run_deterministic():
    data = np.random.default_rng(3).poisson(2.0, size=200).astype(float)
    s = SupportSet([1.0, 2.0, 4.0])
    a = pr_run(data, POIS, s, WeightSchedule(0.9))
    b = pr_run(data, POIS, s, WeightSchedule(0.9))
    assert np.array_equal(a.final.weights, b.final.weights)
    assert np.array_equal(a.log_predictive, b.log_predictive)


def test_pr_run_constant_stream_concentrates():
    # repeated y = 2 drives mass monotonically onto the best-fitting point
    s = SupportSet([1.0, 2.0, 5.0])
    trace = pr_run(np.full(500, 2.0), POIS, s, WeightSchedule(0.9), keep_path=True)
    best = trace.path[:, 1]
    assert np.all(np.diff(best) > 0)
    assert trace.final.weights[1] > 0.9


def test_pr_run_degenerate_error_carries_step():
    s = SupportSet([0.0])
    with pytest.raises(DegenerateDataError) as exc:
        pr_run([0.0, 0.0, 3.0], POIS, s, WeightSchedule(0.9))
    assert exc.value.step == 3
    assert exc.value.value == 3.0


def test_pr_run_order_dependence_and_common_limit(scenario_a, oracle_a):
    from prmix.bench import simulate
    data = simulate(scenario_a.model, 5000, seed=11)
    sched = WeightSchedule(0.9)
    s = scenario_a.fit_support
    k = scenario_a.model.kernel
    fwd = pr_run(data, k, s, sched)
    rev = pr_run(data[::-1], k, s, sched)
    assert not np.array_equal(fwd.final.weights, rev.final.weights)
    fstar = oracle_a.fstar.weights
    assert np.linalg.norm(fwd.final.weights - fstar) < 0.1
    assert np.linalg.norm(rev.final.weights - fstar) < 0.1


def test_consistency_median_error_shrinks(scenario_a, oracle_a):
    from prmix.bench import simulate
    sched = WeightSchedule(0.9)
    k = scenario_a.model.kernel
    fstar = oracle_a.fstar.weights
    checkpoints = [100, 1000, 10000]
    errs = {n: [] for n in checkpoints}
    for seed in range(9):
        data = simulate(scenario_a.model, checkpoints[-1], seed=500 + seed)
        trace = pr_run(data, k, scenario_a.fit_support, sched, snapshot_at=checkpoints)
        for n in checkpoints:
            errs[n].append(np.linalg.norm(trace.snapshots[n] - fstar))
    medians = [np.median(errs[n]) for n in checkpoints]
    assert medians[0] > medians[1] > medians[2]


def test_python_and_jitted_cores_agree():
    rng = np.random.default_rng(5)
    logp = rng.normal(size=(300, 4))
    gains = (np.arange(1, 301) + 1.0) ** -0.7
    f0 = np.full(4, 0.25)
    f_jit, lp_jit, _, st_jit = _core(logp, gains, f0.copy(), False)
    f_py, lp_py, _, st_py = _core_py(logp, gains, f0.copy(), False)
    assert st_jit == st_py == 0
    assert_allclose(f_jit, f_py, rtol=1e-13)
    assert_allclose(lp_jit, lp_py, rtol=1e-13)


# ---- permutation averaging -------------------------------------------------


def test_averaged_single_permutation_reproduces_run():
    data = np.random.default_rng(9).poisson(2.0, 300).astype(float)
    s = SupportSet([1.0, 2.0, 4.0])
    sched = WeightSchedule(0.9)
    single = pr_run(data, POIS, s, sched).final.weights
    avg = pr_run_averaged(data, POIS, s, sched, n_permutations=1, seed=42).weights
    assert np.array_equal(single, avg)


def test_averaged_stays_on_simplex_and_is_deterministic():
    data = np.random.default_rng(10).poisson(3.0, 200).astype(float)
    s = SupportSet([1.0, 3.0, 6.0])
    sched = WeightSchedule(0.9)
    a = pr_run_averaged(data, POIS, s, sched, n_permutations=7, seed=1)
    b = pr_run_averaged(data, POIS, s, sched, n_permutations=7, seed=1)
    assert np.array_equal(a.weights, b.weights)
    assert abs(a.weights.sum() - 1.0) < 1e-12
    assert np.all(a.weights >= 0)


def test_averaging_reduces_seed_to_seed_spread(scenario_a):
    from prmix.bench import simulate
    sched = WeightSchedule(0.9)
    k = scenario_a.model.kernel
    s = scenario_a.fit_support
    singles, averaged = [], []
    for seed in range(20):
        data = simulate(scenario_a.model, 400, seed=900 + seed)
        singles.append(pr_run(data, k, s, sched).final.weights)
        averaged.append(pr_run_averaged(data, k, s, sched, n_permutations=10,
                                        seed=seed).weights)
    var_single = np.var(np.array(singles), axis=0).sum()
    var_avg = np.var(np.array(averaged), axis=0).sum()
    assert var_avg < var_single


def test_finite_mixture_density_handle():
    s = SupportSet([1.0, 5.0])
    mix = FiniteMixture(kernel=POIS, mixing=MixingVector(s, [0.6, 0.4]))
    y = np.arange(0, 20, dtype=float)
    direct = 0.6 * np.exp(POIS.log_density(y, 1.0)) + 0.4 * np.exp(POIS.log_density(y, 5.0))
    assert_allclose(mix.density(y), direct.ravel(), rtol=1e-12)
    assert_allclose(np.exp(mix.log_density(3.0)), mix.density(3.0), rtol=1e-12)
