import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mtdlms import network as net
from mtdlms.datagen import feasible_vector
from mtdlms.experiments import build_validation_scenario

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def chain_scenario(dims=(2, 2, 2), sigma_x2=(1.0, 0.8, 1.2), sigma_z2=(0.05, 0.02, 0.03),
                   w_o=None, leak=0.0):
    """Three agents on a line, constraints ``w_0 - w_1 = 0`` and ``w_1 + w_2 - 1 = 0``."""
    m = dims[0]
    eye = np.eye(m)
    cons = (net.Constraint((0, 1), (eye, -eye), np.zeros(m)),
            net.Constraint((1, 2), (eye, eye), -np.ones(m)))
    cs = net.ConstraintSet(dims, cons)
    ex = net.expand_network(net.NetworkTopology.from_constraints(cs), cs)
    if w_o is None:
        w_o = (np.full(m, 0.3), np.full(m, 0.3), np.full(m, 0.7))
    truth = net.GroundTruth(w_o, tuple(s * np.eye(m) for s in sigma_x2), sigma_z2, leak=leak)
    return net.Scenario(ex, truth, "chain")


def single_membership_scenario(sigma=0.3, seed=0):
    """Four agents in two disjoint pair constraints, so every ``j_k = 1``.

    The truth is feasible when ``sigma = 0`` and perturbed by ``N(0, sigma^2)`` otherwise.
    """
    eye = np.eye(2)
    cons = (net.Constraint((0, 1), (eye, -eye), np.zeros(2)),
            net.Constraint((2, 3), (eye, 2 * eye), np.ones(2)))
    cs = net.ConstraintSet((2,) * 4, cons)
    ex = net.expand_network(net.NetworkTopology.from_constraints(cs), cs)
    rng = np.random.default_rng(seed)
    w = tuple(a + rng.normal(size=2) * sigma for a in feasible_vector(cs, rng))
    truth = net.GroundTruth(w, tuple(np.diag(rng.uniform(0.5, 1.5, 2)) for _ in range(4)),
                            rng.uniform(0.01, 0.1, 4))
    return net.Scenario(ex, truth, "pairs")


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def validation():
    return build_validation_scenario(seed=0)


@pytest.fixture(scope="session")
def validation_imperfect():
    return build_validation_scenario(seed=0, sigma=0.5)


@pytest.fixture
def chain():
    return chain_scenario()
