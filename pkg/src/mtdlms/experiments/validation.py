"""Randomized model-validation scenario: 15 agents, 2-D tasks, 9 constraints.

Constraint ``p`` reads ``sum_{l in I_p} d_pl w_l + b_p 1 = 0`` with integer
coefficients ``d_pl, b_p`` drawn from ``{-3, -2, -1, 1, 2, 3}``. Each
constraint involves 2 or 3 agents and every agent is involved in at least
one, which keeps the extended vector at ``M_e <= 64`` so the exact
fourth-order moment matrix stays tractable.
"""

from __future__ import annotations

import numpy as np

from ..datagen import RngPolicy, feasible_vector, perturb_truth
from ..errors import RankDeficientError, ScenarioError
from ..network import (Constraint, ConstraintSet, GroundTruth, NetworkTopology, Scenario,
                       expand_network)

COEFFS = np.array([-3, -2, -1, 1, 2, 3], dtype=float)
DEFAULT_MU = 0.025
SIGMA_GRID = (0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0)
SIGMA_X2_RANGE = (0.5, 1.5)
SIGMA_Z2_RANGE = (0.01, 0.1)


def _memberships(rng, n_agents, n_constraints, sizes=(2, 3), max_total=None, attempts=10_000):
    """Random member lists covering every agent."""
    if n_constraints * max(sizes) < n_agents:
        raise ScenarioError(f"{n_constraints} constraints of sizes {sizes} cannot cover "
                            f"{n_agents} agents")
    for _ in range(attempts):
        sz = rng.choice(sizes, size=n_constraints)
        total = int(sz.sum())
        if total < n_agents or (max_total is not None and total > max_total):
            continue
        slots = [[] for _ in range(n_constraints)]
        order = rng.permutation(n_agents)
        # cover every agent first, then fill the free slots
        for i, k in enumerate(order):
            slots[i % n_constraints].append(int(k))
        if any(len(s) > z for s, z in zip(slots, sz)):
            continue
        for s, z in zip(slots, sz):
            pool = [k for k in range(n_agents) if k not in s]
            extra = rng.choice(pool, size=z - len(s), replace=False)
            s.extend(int(k) for k in extra)
        return [tuple(sorted(s)) for s in slots]
    raise ScenarioError("could not draw constraint memberships covering every agent")


def random_constraints(rng, n_agents=15, dim=2, n_constraints=9, sigma_D2=0.0,
                       sizes=(2, 3), max_total=32, retries=100) -> ConstraintSet:
    """Constraint family ``sum d_pl w_l + b_p 1 = 0``, resampled until full row rank.

    ``sigma_D2 > 0`` adds i.i.d. ``N(0, sigma_D2)`` entries to every block, so
    ``D_pl = d_pl I + Delta_pl`` is no longer diagonal.
    """
    for _ in range(retries):
        members = _memberships(rng, n_agents, n_constraints, sizes, max_total)
        cons = []
        for mem in members:
            d = rng.choice(COEFFS, size=len(mem))
            blocks = []
            for dl in d:
                Dl = dl * np.eye(dim)
                if sigma_D2 > 0:
                    Dl = Dl + np.sqrt(sigma_D2) * rng.standard_normal((dim, dim))
                blocks.append(Dl)
            b = rng.choice(COEFFS) * np.ones(dim)
            cons.append(Constraint(mem, tuple(blocks), b))
        try:
            cs = ConstraintSet((dim,) * n_agents, tuple(cons))
            D, _ = cs.stacked()
            s = np.linalg.svd(D, compute_uv=False)
            # more rows than unknowns can never have full row rank
            if s.size < D.shape[0] or s[-1] <= 1e-8 * s[0]:
                raise RankDeficientError(int(np.sum(s > 1e-8 * s[0])), D.shape[0])
            return cs
        except (RankDeficientError, ScenarioError):
            continue
    raise ScenarioError("could not draw a full-row-rank constraint set")


def build_validation_scenario(seed: int = 0, sigma: float = 0.0, n_agents: int = 15,
                              dim: int = 2, n_constraints: int = 9, sigma_D2: float = 0.0,
                              weights=None, combiners=None) -> Scenario:
    """Perfect-model truth ``w^o`` in the feasible set, then perturbed by ``N(0, sigma^2)``.

    Variances are drawn as ``sigma_x^2 ~ U(0.5, 1.5)``, ``sigma_z^2 ~ U(0.01, 0.1)``
    and ``R_x,k = sigma_x,k^2 I``.
    """
    pol = RngPolicy(seed)
    rng = pol.auxiliary(10)
    cs = random_constraints(rng, n_agents, dim, n_constraints, sigma_D2)
    sx2 = rng.uniform(*SIGMA_X2_RANGE, size=n_agents)
    sz2 = rng.uniform(*SIGMA_Z2_RANGE, size=n_agents)
    w = feasible_vector(cs, rng)
    truth = GroundTruth(w, tuple(s * np.eye(dim) for s in sx2), sz2)
    truth = perturb_truth(truth, sigma, pol.auxiliary(11))
    ex = expand_network(NetworkTopology.from_constraints(cs), cs, weights, combiners)
    return Scenario(ex, truth, name=f"validation-{seed}")


def fig2_constraints() -> ConstraintSet:
    """Small illustrative family: agent 3 is a member of three constraints.

    Constraint 0 couples agents 0 and 1, constraint 1 agents 0 and 3,
    constraint 2 agents 2 and 3, constraint 3 agents 3, 4 and 5.
    """
    one = np.ones((1, 1))
    cons = (Constraint((0, 1), (one, -one), np.zeros(1)),
            Constraint((0, 3), (one, -one), np.zeros(1)),
            Constraint((2, 3), (one, one), np.ones(1)),
            Constraint((3, 4, 5), (one, one, -2 * one), np.zeros(1)))
    return ConstraintSet((1,) * 6, cons)
