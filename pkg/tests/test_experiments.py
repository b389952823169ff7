import numpy as np
import pytest

from mtdlms import network as net
from mtdlms.algorithms import Estimator
from mtdlms.ensemble import simulate
from mtdlms.errors import ScenarioError
from mtdlms.experiments import build_poisson_scenario, build_validation_scenario, flow
from mtdlms.experiments.metrics import (burn_in, constraint_violation, fit_slope,
                                        steady_state_estimate)
from mtdlms.experiments.poisson import f_true, stencil_residual
from mtdlms.experiments.validation import COEFFS, SIGMA_X2_RANGE, SIGMA_Z2_RANGE
from mtdlms.theory import error_model, steady_state_msd


# -- flow ------------------------------------------------------------------------------


def test_two_node_flow_by_hand():
    fs = flow.build_flow_scenario(arcs=[(0, 1)], sources=[1.5, -1.5], sigma_z2=[0.1, 0.1],
                                  eta=1e-10)
    assert fs.num_agents == 2 and len(fs.scenario.constraints) == 1
    assert np.allclose(flow.flow_oracle(fs), [1.5], rtol=0, atol=1e-9)
    # agent 1 holds +f, agent 2 holds -f
    assert np.allclose(flow.oracle_agent_vector(fs), [1.5, -1.5], atol=1e-9)


def test_bundled_topology_counts():
    arcs, sink = flow.load_arcs()
    assert len(arcs) == 15 and sink == 10
    fs = flow.build_flow_scenario(seed=0)
    assert fs.num_agents == 10
    into_sink = sum(h == sink for _, h in arcs)
    assert len(fs.scenario.constraints) == 15 - into_sink
    # every agent's regressor is the all-ones vector of its incident arcs
    for x, inc in zip(fs.scenario.truth.regressors, fs.incidence):
        assert np.array_equal(x, np.ones(len(inc)))
    assert np.all((fs.sources >= 0) & (fs.sources <= 3))
    assert np.all((fs.sigma_z2 >= 0.1) & (fs.sigma_z2 <= 0.14))


def test_flow_sign_convention():
    fs = flow.build_flow_scenario(seed=0)
    E = fs.arc_matrix()
    for j, (t, h) in enumerate(fs.arcs):
        col = E[:, j]
        assert np.sum(col == 1) == 1
        assert np.sum(col == -1) == (1 if h < fs.num_agents else 0)
    f = np.arange(1.0, 16.0)
    assert np.allclose(fs.flows(E @ f), f)


def test_flow_oracle_matches_constrained_optimum():
    fs = flow.build_flow_scenario(seed=3)
    w = net.constrained_optimum(fs.scenario.truth, fs.scenario.constraints)
    assert np.allclose(w, flow.oracle_agent_vector(fs), rtol=0, atol=1e-9)
    assert np.abs(fs.scenario.constraints.residual(w)).max() < 1e-12


def test_arc_file_round_trip(tmp_path):
    arcs, sink = flow.load_arcs()
    p = tmp_path / "arcs.txt"
    flow.write_arcs(arcs, p, sink)
    assert flow.load_arcs(p) == (arcs, sink)
    p.write_text("1 2\n2 x\n")
    with pytest.raises((ScenarioError, ValueError)):
        flow.load_arcs(p)
    p.write_text("1 1\n")
    with pytest.raises(ScenarioError, match="invalid arc"):
        flow.load_arcs(p)
    with pytest.raises(ScenarioError, match="sink"):
        flow.build_flow_scenario(arcs=[(0, 1), (1, 2)], sink=0)


def test_regenerated_sources_keep_the_network():
    fs = flow.build_flow_scenario(seed=0)
    sched, fs2 = flow.tracking_flow(fs, seed=0)
    assert fs2.scenario.expanded is fs.scenario.expanded
    assert np.array_equal(fs2.sigma_z2, fs.sigma_z2)
    assert not np.array_equal(fs2.sources, fs.sources)
    assert sched.starts == (0, flow.CHANGE_POINT)


# -- Poisson ---------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def grid():
    return build_poisson_scenario(n=9)


def test_poisson_interior_cells(grid):
    n, h = grid.n, grid.delta
    assert h == pytest.approx(1.0 / 8)
    for k in range(2, n - 2):
        for l in range(2, n - 2):
            i = grid.sensor_index[(k, l)]
            assert grid.entries[i] == ((k, l), (k - 1, l), (k, l - 1), (k, l + 1), (k + 1, l))
            assert np.array_equal(grid.regressors[i] * h ** 2, [-4, 1, 1, 1, 1])
            assert grid.offsets[i] == 0.0


def test_poisson_corner_and_edge_offsets(grid):
    n, h = grid.n, grid.delta
    F = grid.true_field()
    i = grid.sensor_index[(1, 1)]
    assert grid.entries[i] == ((1, 1), (1, 2), (2, 1))
    assert np.array_equal(grid.regressors[i] * h ** 2, [-4, 1, 1])
    assert grid.offsets[i] * h ** 2 == pytest.approx(F[1, 0] + F[0, 1], rel=1e-14)
    i = grid.sensor_index[(n - 2, n - 2)]
    assert grid.offsets[i] * h ** 2 == pytest.approx(F[n - 1, n - 2] + F[n - 2, n - 1],
                                                     rel=1e-14)
    i = grid.sensor_index[(1, 4)]
    assert len(grid.entries[i]) == 4
    assert grid.offsets[i] * h ** 2 == pytest.approx(F[0, 4], rel=1e-14)


def test_poisson_subnode_counts(grid):
    ex = grid.scenario.expanded
    for i, (k, l) in enumerate(grid.sensors):
        neighbors = sum((k + dk, l + dl) in grid.sensor_index
                        for dk, dl in ((-1, 0), (1, 0), (0, -1), (0, 1)))
        assert ex.cluster_sizes[i] == neighbors


def test_true_field_satisfies_shared_entry_constraints(grid):
    F = grid.true_field()
    w = np.concatenate([[F[p] for p in ent] for ent in grid.entries])
    assert np.abs(grid.scenario.constraints.residual(w)).max() < 1e-14
    # the stencil with the true field gives the observations
    for x, ent, v, g in zip(grid.regressors, grid.entries, grid.offsets, grid.g):
        assert x @ [F[p] for p in ent] + v == pytest.approx(g, abs=1e-10)
    assert np.allclose(grid.field(w), F, rtol=0, atol=1e-15)


def test_generating_vectors_reproduce_the_data(grid):
    for x, w, v, g in zip(grid.regressors, grid.scenario.truth.w_o, grid.offsets, grid.g):
        assert x @ w == pytest.approx(g - v, abs=1e-10)


def test_discrete_solution(grid):
    D = grid.discrete_solution()
    h = grid.delta
    lap = (D[:-2, 1:-1] + D[2:, 1:-1] + D[1:-1, :-2] + D[1:-1, 2:] - 4 * D[1:-1, 1:-1]) / h ** 2
    assert np.allclose(lap.ravel(), grid.g, rtol=0, atol=1e-9)
    # the analytic field is a cubic, so the stencil is exact on it
    assert np.allclose(D, grid.true_field(), rtol=0, atol=1e-12)


def test_discrete_solution_equals_constrained_optimum(grid):
    sc = grid.scenario
    w = net.constrained_optimum(sc.truth, sc.constraints)
    assert np.allclose(grid.field(w), grid.discrete_solution(), rtol=0, atol=1e-9)


def test_stencil_residual_of_a_quartic():
    f = lambda x, y: x ** 4 + y ** 4
    g = lambda x, y: 12 * x ** 2 + 12 * y ** 2
    r = [stencil_residual(n, f, g) for n in (9, 17, 33)]
    h = [1.0 / (n - 1) for n in (9, 17, 33)]
    assert fit_slope(h, r) == pytest.approx(2.0, abs=0.05)
    assert stencil_residual(9) < 1e-10


def test_poisson_grid_size_check():
    with pytest.raises(ValueError):
        build_poisson_scenario(n=3)
    assert f_true(1.0, 0.3) == 0.0


# -- metrics ------------------------------------------------------------------------------------


def test_violation_of_feasible_agreeing_vector_is_zero(validation):
    w_e = validation.w_e_o
    v = constraint_violation(w_e, validation.expanded)
    assert v.total < 1e-24 and v.original < 1e-24 and v.agreement < 1e-24


def test_violation_split(validation_imperfect):
    sc = validation_imperfect
    ex = sc.expanded
    res = simulate(ex, sc.truth, [Estimator("cpc", ex, 0.025)], 4, 300, seed=1)[0]
    v = constraint_violation(res.final, ex)
    assert v.original < 1e-24
    assert v.total == pytest.approx(v.agreement)
    w = np.random.default_rng(0).normal(size=ex.size)
    v = constraint_violation(w, ex)
    assert v.total == pytest.approx(np.sum((ex.D_prime @ w + ex.b_prime) ** 2), rel=1e-12)


def test_burn_in_and_steady_state():
    assert burn_in(np.full(3000, 0.01)) == 0
    c = 0.01 + np.exp(-np.arange(5000) / 100.0)
    b = burn_in(c)
    assert 500 < b < 3000
    est, start, settled = steady_state_estimate(c)
    assert settled and start >= b and est == pytest.approx(0.01, rel=1e-3)
    est, _, settled = steady_state_estimate(np.exp(-np.arange(2000) / 1e3))
    assert not settled
    assert fit_slope([1, 10, 100], [3, 300, 30000]) == pytest.approx(2.0)


# -- validation scenario ----------------------------------------------------------------------------


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_validation_scenario_structure(seed):
    sc = build_validation_scenario(seed=seed)
    cs = sc.constraints
    assert len(cs) == 9 and cs.dims == (2,) * 15
    for c in cs:
        assert float(c.offset[0]) in COEFFS and np.all(c.offset == c.offset[0])
        for B in c.blocks:
            assert B[0, 0] in COEFFS and np.array_equal(B, B[0, 0] * np.eye(2))
    s2 = np.array([R[0, 0] for R in sc.truth.R_x])
    assert np.all((s2 >= SIGMA_X2_RANGE[0]) & (s2 <= SIGMA_X2_RANGE[1]))
    assert np.all((sc.truth.sigma_z2 >= SIGMA_Z2_RANGE[0]) &
                  (sc.truth.sigma_z2 <= SIGMA_Z2_RANGE[1]))
    assert np.abs(cs.residual(sc.w_o)).max() < 1e-12
    assert sc.expanded.size <= 64


def test_non_diagonal_blocks():
    sc = build_validation_scenario(seed=0, sigma_D2=0.01)
    B = sc.constraints[0].blocks[0]
    assert B[0, 1] != 0.0
    D, _ = sc.constraints.stacked()
    assert np.linalg.matrix_rank(D) == D.shape[0]


def test_cooperation_beats_noncooperative_lms(validation):
    sc = validation
    z = {v: steady_state_msd(error_model(v, sc.truth, sc.expanded, 0.025))
         for v in ("apc", "cpc", "nc")}
    assert z["apc"] < z["nc"] and z["cpc"] < z["nc"]
