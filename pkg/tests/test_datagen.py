import numpy as np
import pytest
from hypothesis import given, strategies as st

from mtdlms.datagen import (RngPolicy, SampleStream, TimeVaryingTruth, as_schedule,
                            feasible_vector, growing_perturbation_rule, perturb_truth,
                            sample_step, tracking_schedule)
from mtdlms.experiments import build_validation_scenario, flow, fig2_constraints
from mtdlms.experiments.validation import SIGMA_GRID
from mtdlms.network import GroundTruth


def small_truth(sigma_z2=(0.1, 0.2)):
    R0 = np.array([[1.0, 0.3], [0.3, 0.5]])
    return GroundTruth((np.array([1.0, -1.0]), np.array([0.5])), (R0, np.eye(1) * 2.0),
                       sigma_z2)


def test_noiseless_zero_model_gives_zero_observations():
    truth = GroundTruth((np.zeros(2), np.zeros(3)), (np.eye(2), np.eye(3)), [0.0, 0.0])
    x, d = SampleStream(truth, RngPolicy(5), runs=3).block(0, 50)
    assert x.shape == (3, 50, 5) and d.shape == (3, 50, 2)
    assert not np.any(d)


def test_regressor_moments_over_a_million_draws():
    truth = small_truth()
    n = 1_000_000
    x, d = SampleStream(truth, RngPolicy(11)).block(0, n)
    x = x[0]
    R = np.zeros((3, 3))
    R[:2, :2] = truth.R_x[0]
    R[2, 2] = 2.0
    sd = np.sqrt(np.diag(R))
    assert np.all(np.abs(x.mean(axis=0)) < 4 * sd / np.sqrt(n))
    for k, sl in enumerate([slice(0, 2), slice(2, 3)]):
        C = x[:, sl].T @ x[:, sl] / n
        assert np.linalg.norm(C - truth.R_x[k]) / np.linalg.norm(truth.R_x[k]) < 0.01
    # the observation noise has the requested variance
    resid = d[0, :, 0] - x[:, :2] @ truth.w_o[0]
    assert resid.var() == pytest.approx(0.1, rel=0.01)


def test_streams_are_counter_keyed():
    truth = small_truth()
    pol = RngPolicy(123, chunk_size=64)
    full = SampleStream(truth, pol, runs=4).block(0, 200)
    part = SampleStream(truth, pol, runs=2, first_run=2).block(0, 200)
    assert np.array_equal(full[0][2:], part[0]) and np.array_equal(full[1][2:], part[1])
    # blocks straddling chunk boundaries equal the concatenation of smaller blocks
    s = SampleStream(truth, pol, runs=4)
    pieces = [s.block(i, 50) for i in range(0, 200, 50)]
    assert np.array_equal(np.concatenate([p[0] for p in pieces], axis=1), full[0])
    one = sample_step(truth, pol.for_run(1), 130)
    assert np.array_equal(one.x, full[0][1, 130]) and np.array_equal(one.d, full[1][1, 130])


def test_different_seeds_differ():
    truth = small_truth()
    a = SampleStream(truth, RngPolicy(1)).block(0, 10)[0]
    b = SampleStream(truth, RngPolicy(2)).block(0, 10)[0]
    assert not np.array_equal(a, b)


def test_fixed_regressors_are_not_redrawn():
    truth = GroundTruth((np.array([1.0, 2.0]),), (), [0.0], regressors=(np.array([0.5, -1.0]),))
    x, d = SampleStream(truth, RngPolicy(0), runs=2).block(0, 5)
    assert np.all(x == np.array([0.5, -1.0]))
    assert np.allclose(d, -1.5)


def test_zero_sigma_leaves_truth_untouched():
    truth = small_truth()
    assert perturb_truth(truth, 0.0, np.random.default_rng(0)) is truth


def test_perturbation_variance():
    n = 10_000
    base = GroundTruth(tuple(np.zeros(1) for _ in range(n)), tuple(np.eye(1) for _ in range(n)),
                       np.zeros(n))
    rng = np.random.default_rng(4)
    sigma = 0.3
    u = np.concatenate([np.concatenate(perturb_truth(base, sigma, rng).w_o) for _ in range(10)])
    assert u.var() == pytest.approx(sigma ** 2, rel=0.03)


def test_sigma_grid():
    assert SIGMA_GRID == (0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0)


@given(st.integers(0, 10_000))
def test_feasible_vector_satisfies_constraints(seed):
    cs = fig2_constraints()
    w = np.concatenate(feasible_vector(cs, np.random.default_rng(seed)))
    assert np.abs(cs.residual(w)).max() < 1e-12


def test_schedules():
    truth = small_truth()
    assert as_schedule(truth).starts == (0,)
    assert tracking_schedule(truth, []).truths == (truth,)
    sc = build_validation_scenario(seed=0)
    rules = growing_perturbation_rule(sc.truth, [0.1, 0.2, 0.5])
    sched = tracking_schedule(sc.truth, [(500 * (j + 1), r) for j, r in enumerate(rules)])
    assert sched.starts == (0, 500, 1000, 1500)
    assert sched.segment(499) == 0 and sched.segment(500) == 1 and sched.segment(10 ** 6) == 3
    assert [(a, b) for a, b, _ in sched.pieces(400, 1100)] == [(400, 500), (500, 1000),
                                                               (1000, 1100)]
    fs = flow.build_flow_scenario(seed=0)
    schedule, _ = flow.tracking_flow(fs, seed=0)
    assert schedule.starts == (0, 45000)
    with pytest.raises(ValueError):
        TimeVaryingTruth((0, 0), (truth, truth))


def test_schedule_changes_the_stream_only_after_the_change():
    truth = small_truth()
    other = truth.replace(w_o=(np.zeros(2), np.zeros(1)))
    sched = TimeVaryingTruth((0, 30), (truth, other))
    a = SampleStream(truth, RngPolicy(0)).block(0, 60)
    b = SampleStream(sched, RngPolicy(0)).block(0, 60)
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1][:, :30], b[1][:, :30])
    assert not np.array_equal(a[1][:, 30:], b[1][:, 30:])
