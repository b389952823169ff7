import numpy as np
import pytest

from mtdlms import network as net
from mtdlms.algorithms import (Estimator, check_divergence, diffusion_apc_step, initial_state,
                               kernels, leaky_adapt_step, nc_lms_step)
from mtdlms.curves import to_db
from mtdlms.datagen import RngPolicy, SampleStream
from mtdlms.ensemble import simulate
from mtdlms.errors import DivergenceError, UnsupportedConfiguration
from mtdlms.experiments import build_validation_scenario
from mtdlms.theory import error_model, steady_state_msd

from conftest import chain_scenario
from oracles import hand_apc_step


def run(est, truth, w0, steps, seed=0, runs=1):
    x, d = SampleStream(truth, RngPolicy(seed), runs).block(0, steps)
    st = est.init(w0, runs)
    out = []
    for t in range(steps):
        est.step(st, x[:, t], d[:, t])
        out.append(est.extended(st).copy())
    return np.array(out)


def noiseless(sc):
    return sc.with_truth(sc.truth.replace(sigma_z2=np.zeros(sc.truth.num_agents)))


@pytest.mark.parametrize("variant", ["nc", "clms", "apc", "cpc", "reduced"])
def test_perfect_model_fixed_point(validation, variant):
    sc = noiseless(validation)
    est = Estimator(variant, sc.expanded, 0.025)
    traj = run(est, sc.truth, sc.w_o, 20)
    assert np.abs(traj - sc.w_e_o).max() < 1e-12


def test_nc_single_scalar_step():
    st = initial_state(None, np.zeros(1), 1, 0.1, level="agent")
    x, d = np.array([[2.0]]), np.array([[3.0]])
    nc_lms_step(st, x, d, np.array([0]))
    assert st.w[0, 0] == pytest.approx(0.1 * 2.0 * 3.0)


def test_nc_steady_state_matches_theory(validation):
    est = Estimator("nc", validation.expanded, 0.025)
    res = simulate(validation.expanded, validation.truth, [est], 20, 10_000, seed=3)[0]
    sim = res.msd_o[-1000:].mean()
    theory = steady_state_msd(error_model("nc", validation.truth, validation.expanded, 0.025))
    assert abs(to_db(sim) - to_db(theory)) < 1.0


def test_clms_iterates_are_feasible(validation_imperfect):
    sc = validation_imperfect
    est = Estimator("clms", sc.expanded, 0.025)
    traj = run(est, sc.truth, np.zeros(sc.expanded.constraints.offsets[-1]), 50, runs=3)
    agent = sc.expanded.cluster_average(traj)
    D, b = sc.constraints.stacked()
    assert np.abs(agent @ D.T + b).max() < 1e-12


def test_clms_fixed_point_at_w_star_under_perfect_model(validation):
    sc = noiseless(validation)
    est = Estimator("clms", sc.expanded, 0.05)
    traj = run(est, sc.truth, sc.w_star, 1)
    assert np.abs(traj[0] - sc.w_e_star).max() < 1e-12


def test_cpc_final_step_is_projection(validation_imperfect):
    sc = validation_imperfect
    ex = sc.expanded
    traj = run(Estimator("cpc", ex, 0.025), sc.truth, np.zeros(len(sc.w_o)), 30, runs=2)
    assert np.abs(traj @ ex.D_e.T + ex.b).max() < 1e-12


def test_apc_matches_hand_oracle():
    # two scalar agents with w_1 = w_2: one sub-node each
    one = np.ones((1, 1))
    cs = net.ConstraintSet((1, 1), (net.Constraint((0, 1), (one, -one), np.zeros(1)),))
    ex = net.expand_network(net.NetworkTopology.from_constraints(cs), cs)
    st = initial_state(ex, np.array([0.4, -0.2]), 1, 0.1)
    x, d = np.array([[1.5, -0.5]]), np.array([[0.7, 0.3]])
    diffusion_apc_step(st, x, d, ex)
    ref = hand_apc_step(0.4, -0.2, 1.5, -0.5, 0.7, 0.3, 0.1)
    assert np.allclose(st.w[0], ref, rtol=0, atol=1e-15)
    # frozen value of the scripted oracle
    assert np.allclose(st.w[0], [0.1025, 0.1025], rtol=0, atol=1e-15)


@pytest.mark.parametrize("seed", [0, 1])
def test_apc_equals_reduced(seed):
    sc = build_validation_scenario(seed=seed, sigma=0.2)
    ex = sc.expanded
    w0 = np.zeros(len(sc.w_o))
    a = run(Estimator("apc", ex, 0.025), sc.truth, w0, 300, seed=seed, runs=2)
    b = run(Estimator("reduced", ex, 0.025), sc.truth, w0, 300, seed=seed, runs=2)
    assert np.abs(a - b).max() < 1e-12


def test_reduced_with_single_memberships_is_projected_lms():
    eye = np.eye(2)
    cons = (net.Constraint((0, 1), (eye, -eye), np.zeros(2)),
            net.Constraint((2, 3), (eye, 2 * eye), np.ones(2)))
    cs = net.ConstraintSet((2,) * 4, cons)
    ex = net.expand_network(net.NetworkTopology.from_constraints(cs), cs)
    truth = net.GroundTruth(tuple(np.full(2, v) for v in (0.1, 0.3, -0.2, 0.4)),
                            tuple(np.eye(2) for _ in range(4)), np.full(4, 0.05))
    a = run(Estimator("reduced", ex, 0.05), truth, np.zeros(8), 100)
    b = run(Estimator("clms", ex, 0.05), truth, np.zeros(8), 100)
    assert np.abs(a - b).max() < 1e-12


def test_message_counters(validation):
    ex = validation.expanded
    K = kernels(ex)
    expected_apc = sum(len(c.members) * (len(c.members) - 1) for c in ex.constraints)
    partners = [set() for _ in range(ex.num_agents)]
    for c in ex.constraints:
        for k in c.members:
            partners[k] |= set(c.members) - {k}
    assert K.messages_subnode == expected_apc
    assert K.messages_reduced == sum(map(len, partners))
    st_a = Estimator("apc", ex, 0.025).init(np.zeros(30), 1)
    st_r = Estimator("reduced", ex, 0.025).init(np.zeros(30), 1)
    x, d = SampleStream(validation.truth, RngPolicy(0)).block(0, 3)
    for t in range(3):
        Estimator("apc", ex, 0.025).step(st_a, x[:, t], d[:, t])
        Estimator("reduced", ex, 0.025).step(st_r, x[:, t], d[:, t])
    assert st_a.messages == 3 * expected_apc and st_r.messages == 3 * K.messages_reduced


def test_leaky_adapt():
    # one scalar agent in one constraint (c = 1)
    cs = net.ConstraintSet((1,), (net.Constraint((0,), (np.ones((1, 1)),), np.zeros(1)),))
    ex = net.expand_network(net.NetworkTopology.from_constraints(cs), cs)
    st = initial_state(ex, np.array([2.0]), 1, 0.5)
    s = np.array([[0.0]])
    psi0 = leaky_adapt_step(st, s, ex, eta=0.0)
    assert psi0[0, 0] == pytest.approx(2.0 + 0.5 * (0.0 - 2.0))
    # mu eta / 2 = 1 removes the w term entirely: psi = mu (s - w)
    st = initial_state(ex, np.array([2.0]), 1, 0.5)
    psi = leaky_adapt_step(st, np.array([[1.0]]), ex, eta=4.0)
    assert psi[0, 0] == pytest.approx(0.5 * (1.0 - 2.0))


def test_divergence_guard():
    st = initial_state(None, np.array([1e13]), 1, 0.1, level="agent")
    with pytest.raises(DivergenceError):
        check_divergence(st)
    st.w[0, 0] = np.nan
    with pytest.raises(DivergenceError):
        check_divergence(st)


def test_large_step_size_diverges_in_simulation():
    sc = chain_scenario()
    with pytest.raises(DivergenceError):
        simulate(sc.expanded, sc.truth, [Estimator("apc", sc.expanded, 5.0)], 2, 2000, seed=0)


def test_estimator_validation(validation):
    with pytest.raises(ValueError):
        Estimator("bogus", validation.expanded, 0.1)
    ex = validation.expanded
    weights = [np.full(len(c), 1.0 / len(c)) for c in ex.weights]
    combiners = [np.eye(len(c)) for c in ex.weights]
    ex2 = net.expand_network(ex.topology, ex.constraints, weights, combiners)
    with pytest.raises(UnsupportedConfiguration):
        Estimator("reduced", ex2, 0.1)
