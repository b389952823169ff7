"""Minimum-cost network flow estimated from noisy source measurements.

Agent ``k`` estimates the flows on its incident arcs, ``w_k``, with leaving
flows signed ``+`` and entering flows signed ``-``, so that conservation
reads ``s_k = 1^T w_k``. Each arc between two agents is shared, which gives
one antisymmetry constraint ``[w_k]_f + [w_l]_f = 0`` per such arc. Arcs into
the sink belong to a single agent and carry no constraint.

The optimization target adds a quadratic flow cost ``(eta/2)|w_k|^2`` to
every local cost, which turns the adaptation step into leaky LMS.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from ..datagen import RngPolicy, TimeVaryingTruth
from ..errors import ScenarioError
from ..network import (Constraint, ConstraintSet, GroundTruth, NetworkTopology, Scenario,
                       expand_network)

DEFAULT_MU = 0.2
DEFAULT_ETA = 0.002
CHANGE_POINT = 45_000
SOURCE_RANGE = (0.0, 3.0)
NOISE_RANGE = (0.1, 0.14)


def load_arcs(path=None):
    """Read ``tail head`` pairs (1-based) and an optional ``# sink <node>`` line.

    Returns ``(arcs, sink)`` with 0-based node indices; ``sink`` is ``None``
    when no sink is declared. Without ``path`` the bundled topology is read.
    """
    if path is None:
        text = resources.files("mtdlms.experiments").joinpath(
            "data/flow_topology.txt").read_text()
    else:
        text = Path(path).read_text()
    arcs, sink = [], None
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "sink":
                sink = int(parts[1]) - 1
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ScenarioError(f"line {ln}: expected 'tail head', got {raw!r}")
        t, h = int(parts[0]), int(parts[1])
        if t < 1 or h < 1 or t == h:
            raise ScenarioError(f"line {ln}: invalid arc {t} -> {h}")
        arcs.append((t - 1, h - 1))
    if not arcs:
        raise ScenarioError("topology has no arcs")
    return arcs, sink


def write_arcs(arcs, path, sink=None):
    lines = [] if sink is None else [f"# sink {sink + 1}"]
    lines += [f"{t + 1} {h + 1}" for t, h in arcs]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True, eq=False)
class FlowScenario:
    """A flow network, its measurement model and the estimation scenario."""

    arcs: tuple[tuple[int, int], ...]
    sink: int | None
    sources: np.ndarray
    sigma_z2: np.ndarray
    eta: float
    scenario: Scenario

    @property
    def num_agents(self) -> int:
        return self.sources.size

    @cached_property
    def incidence(self) -> tuple[tuple[tuple[int, float], ...], ...]:
        """Per agent, ``(arc, sign)`` pairs in arc order (``+1`` leaving, ``-1`` entering)."""
        return _incidence(self.arcs, self.num_agents)

    def arc_matrix(self) -> np.ndarray:
        """``E`` with ``w = E f``: maps arc flows to the stacked agent vectors."""
        rows = []
        for inc in self.incidence:
            for j, sgn in inc:
                e = np.zeros(len(self.arcs))
                e[j] = sgn
                rows.append(e)
        return np.array(rows)

    def node_incidence(self) -> np.ndarray:
        """``A`` with ``(A f)_k = 1^T w_k``: net flow leaving agent ``k``."""
        A = np.zeros((self.num_agents, len(self.arcs)))
        for k, inc in enumerate(self.incidence):
            for j, sgn in inc:
                A[k, j] = sgn
        return A

    def flows(self, w) -> np.ndarray:
        """Arc flows from stacked agent estimates, averaging the two copies of shared arcs."""
        E = self.arc_matrix()
        w = np.asarray(w, dtype=float)
        return (w @ E) / np.sum(E * E, axis=0)

    def with_sources(self, sources) -> "FlowScenario":
        return _assemble(self.arcs, self.sink, np.asarray(sources, float), self.sigma_z2,
                         self.eta, self.scenario.expanded)


def _incidence(arcs, n_agents):
    inc = [[] for _ in range(n_agents)]
    for j, (t, h) in enumerate(arcs):
        if t < n_agents:
            inc[t].append((j, 1.0))
        if h < n_agents:
            inc[h].append((j, -1.0))
    return tuple(tuple(x) for x in inc)


def _flow_truth(inc, sources, sigma_z2, eta):
    regs = tuple(np.ones(len(x)) for x in inc)
    w = tuple(s / len(x) * np.ones(len(x)) for s, x in zip(sources, inc))
    return GroundTruth(w, (), sigma_z2, regressors=regs, leak=eta)


def _assemble(arcs, sink, sources, sigma_z2, eta, expanded=None):
    n = sources.size
    inc = _incidence(arcs, n)
    truth = _flow_truth(inc, sources, sigma_z2, eta)
    if expanded is None:
        dims = tuple(len(x) for x in inc)
        pos = [{j: i for i, (j, _) in enumerate(x)} for x in inc]
        cons = []
        for j, (t, h) in enumerate(arcs):
            if t >= n or h >= n:
                continue
            members = tuple(sorted((t, h)))
            blocks = []
            for k in members:
                e = np.zeros((1, dims[k]))
                e[0, pos[k][j]] = 1.0
                blocks.append(e)
            cons.append(Constraint(members, tuple(blocks), np.zeros(1)))
        cs = ConstraintSet(dims, tuple(cons))
        expanded = expand_network(NetworkTopology.from_constraints(cs), cs)
    sc = Scenario(expanded, truth, name="flow")
    return FlowScenario(tuple(arcs), sink, sources, sigma_z2, float(eta), sc)


def build_flow_scenario(arcs=None, seed: int = 0, eta: float = DEFAULT_ETA, sink=None,
                        sources=None, sigma_z2=None) -> FlowScenario:
    """Flow scenario on ``arcs`` (default: the bundled topology).

    Agents are the nodes other than the sink; the sink must carry the
    highest index. Sources ``s_k ~ U(0, 3)`` and noise variances
    ``sigma_z^2 ~ U(0.1, 0.14)`` are drawn unless given.
    """
    if arcs is None:
        arcs, sink = load_arcs()
    arcs = [tuple(int(v) for v in a) for a in arcs]
    nodes = 1 + max(max(a) for a in arcs)
    if sink is not None and sink != nodes - 1:
        raise ScenarioError("the sink must be the highest-numbered node")
    n = nodes - 1 if sink is not None else nodes
    rng = RngPolicy(seed).auxiliary(20)
    s = rng.uniform(*SOURCE_RANGE, size=n) if sources is None else np.asarray(sources, float)
    sz = rng.uniform(*NOISE_RANGE, size=n) if sigma_z2 is None else np.asarray(sigma_z2, float)
    if s.size != n or sz.size != n:
        raise ScenarioError(f"expected {n} sources and noise variances")
    return _assemble(arcs, sink, s, sz, eta)


def regenerate_sources(fs: FlowScenario, seed: int, index: int = 1) -> FlowScenario:
    """Same network with fresh sources ``s_k ~ U(0, 3)``; noise variances are kept."""
    rng = RngPolicy(seed).auxiliary(21, index)
    return fs.with_sources(rng.uniform(*SOURCE_RANGE, size=fs.num_agents))


def tracking_flow(fs: FlowScenario, seed: int, change_at: int = CHANGE_POINT):
    """``(schedule, second scenario)`` with sources regenerated at ``change_at``."""
    fs2 = regenerate_sources(fs, seed)
    return TimeVaryingTruth((0, change_at), (fs.scenario.truth, fs2.scenario.truth)), fs2


def flow_oracle(fs: FlowScenario) -> np.ndarray:
    """Optimal arc flows of the regularized problem, solved in flow space.

    Minimizes ``|s - A f|^2 + (eta/2) f^T diag(n_j) f`` where ``n_j`` is the
    number of agents holding arc ``j``.
    """
    A = fs.node_incidence()
    nj = np.sum(A != 0, axis=0)
    K = A.T @ A + 0.5 * fs.eta * np.diag(nj)
    return np.linalg.solve(K, A.T @ fs.sources)


def oracle_agent_vector(fs: FlowScenario) -> np.ndarray:
    return fs.arc_matrix() @ flow_oracle(fs)
