"""Agent network, local linear equality constraints and the sub-node expansion.

Agents are indexed ``0 .. N-1``. Agent ``k`` owns a parameter vector of size
``dims[k]``. Constraint ``p`` reads

    sum_{l in members_p} D_pl w_l + b_p = 0

Each agent involved in ``j_k`` constraints is expanded into ``j_k`` virtual
sub-nodes, one per constraint, ordered by agent index and then by ascending
constraint index. Every block matrix on the extended vector ``w_e`` follows
that ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg as sla
from scipy.linalg import lapack

from .errors import RankDeficientError, ScenarioError

RANK_RTOL = 1e-10
STOCHASTIC_ATOL = 1e-10


def _checked_cho_factor(G, constraint=None):
    """Cholesky factor of a Gram matrix ``D D^T`` with a numerical rank check.

    A pivoted Cholesky pass decides the rank: pivots below ``1e-10`` times the
    largest diagonal entry are treated as zero.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    dmax = float(np.max(np.diag(G))) if n else 0.0
    if n == 0:
        return None
    if dmax <= 0.0:
        raise RankDeficientError(0, n, constraint=constraint)
    _, _, rank, info = lapack.dpstrf(G, tol=RANK_RTOL * dmax)
    if info < 0:
        raise ValueError("invalid Gram matrix passed to pivoted Cholesky")
    if rank < n:
        raise RankDeficientError(int(rank), n, constraint=constraint)
    return sla.cho_factor(G, lower=True)


def build_projector(D, b, constraint=None):
    """Projector onto the affine set ``{y : D y + b = 0}``.

    Parameters
    ----------
    D : (L, n) array_like
        Full row-rank constraint matrix. ``L = 0`` is allowed and gives the
        identity projector.
    b : (L,) array_like
        Constraint offset.

    Returns
    -------
    P : (n, n) ndarray
        ``I - D^T (D D^T)^{-1} D``, symmetric and idempotent.
    f : (n,) ndarray
        ``D^T (D D^T)^{-1} b``, so that the projection of ``y`` is ``P y - f``.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim == 1:
        D = D[None, :]
    b = np.asarray(b, dtype=float).reshape(-1)
    L, n = D.shape
    if b.shape[0] != L:
        raise ValueError(f"offset has {b.shape[0]} entries, expected {L}")
    if L == 0:
        return np.eye(n), np.zeros(n)
    cho = _checked_cho_factor(D @ D.T, constraint=constraint)
    QD = sla.cho_solve(cho, D)
    P = np.eye(n) - D.T @ QD
    P = 0.5 * (P + P.T)
    f = QD.T @ b
    return P, f


def project(P, f, y):
    """Apply the affine projection ``P y - f``."""
    return P @ y - f


@dataclass(frozen=True, eq=False)
class Constraint:
    """One block constraint ``sum_l D_pl w_l + b_p = 0``."""

    members: tuple[int, ...]
    blocks: tuple[np.ndarray, ...]
    offset: np.ndarray

    def __post_init__(self):
        members = tuple(int(m) for m in self.members)
        blocks = tuple(np.atleast_2d(np.asarray(B, dtype=float)) for B in self.blocks)
        offset = np.asarray(self.offset, dtype=float).reshape(-1)
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "offset", offset)

    @property
    def rows(self) -> int:
        return self.offset.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """The ``1 x i_p`` block row ``[D_pl]_{l in members}`` as a dense matrix."""
        if not self.blocks:
            return np.zeros((self.rows, 0))
        return np.hstack(self.blocks)


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """The ``P`` constraints of a network with agent dimensions ``dims``."""

    dims: tuple[int, ...]
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(m) for m in self.dims))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        self.validate()

    def __len__(self):
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def __getitem__(self, p):
        return self.constraints[p]

    @property
    def num_agents(self) -> int:
        return len(self.dims)

    def validate(self):
        N = self.num_agents
        for p, con in enumerate(self.constraints):
            if len(con.members) != len(con.blocks):
                raise ScenarioError("members and blocks differ in length", constraint=p)
            if len(set(con.members)) != len(con.members):
                raise ScenarioError("duplicate agent membership", constraint=p)
            for k, B in zip(con.members, con.blocks):
                if not 0 <= k < N:
                    raise ScenarioError(f"agent index {k} out of range", constraint=p)
                if B.shape != (con.rows, self.dims[k]):
                    raise ScenarioError(
                        f"block for agent {k} has shape {B.shape}, "
                        f"expected {(con.rows, self.dims[k])}",
                        constraint=p,
                    )

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.dims)]).astype(int)

    @cached_property
    def memberships(self) -> tuple[tuple[int, ...], ...]:
        """Constraint indices containing each agent, in ascending order."""
        out = [[] for _ in range(self.num_agents)]
        for p, con in enumerate(self.constraints):
            for k in con.members:
                out[k].append(p)
        return tuple(tuple(x) for x in out)

    def stacked(self):
        """Dense ``(D, b)`` of the whole network, zero blocks outside each ``I_p``."""
        off = self.offsets
        rows = [con.rows for con in self.constraints]
        D = np.zeros((sum(rows), off[-1]))
        r = 0
        for con in self.constraints:
            for k, B in zip(con.members, con.blocks):
                D[r:r + con.rows, off[k]:off[k + 1]] = B
            r += con.rows
        b = np.concatenate([con.offset for con in self.constraints]) if rows else np.zeros(0)
        return D, b

    def residual(self, w) -> np.ndarray:
        D, b = self.stacked()
        return D @ np.asarray(w, dtype=float) + b


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    """Agent dimensions and (undirected) neighborhoods. ``k`` is always in ``N_k``."""

    dims: tuple[int, ...]
    neighbors: tuple[frozenset, ...]

    def __post_init__(self):
        dims = tuple(int(m) for m in self.dims)
        nbrs = tuple(frozenset(int(x) for x in s) | {k} for k, s in enumerate(self.neighbors))
        if len(nbrs) != len(dims):
            raise ScenarioError("neighbors and dims differ in length")
        if any(m < 1 for m in dims):
            raise ScenarioError("every agent needs a parameter dimension >= 1")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "neighbors", nbrs)

    @property
    def num_agents(self) -> int:
        return len(self.dims)

    @classmethod
    def from_constraints(cls, constraints: ConstraintSet, extra_edges=()):
        """Smallest topology satisfying the locality assumption, plus ``extra_edges``."""
        nbrs = [set() for _ in constraints.dims]
        for con in constraints:
            for k in con.members:
                nbrs[k].update(con.members)
        for a, b in extra_edges:
            nbrs[a].add(b)
            nbrs[b].add(a)
        return cls(constraints.dims, tuple(frozenset(s) for s in nbrs))


class SubNode(NamedTuple):
    agent: int
    constraint: int
    index: int  # m, position inside the agent's cluster


@dataclass(frozen=True, eq=False)
class ExpandedNetwork:
    """Sub-node expansion of a constrained network and its derived operators.

    Built by :func:`expand_network`; do not construct directly.
    """

    topology: NetworkTopology
    constraints: ConstraintSet
    subnodes: tuple[SubNode, ...]
    weights: tuple[np.ndarray, ...]
    combiners: tuple[np.ndarray, ...]
    local_projectors: tuple[tuple[np.ndarray, np.ndarray], ...] = field(repr=False)

    @property
    def num_agents(self) -> int:
        return self.topology.num_agents

    @property
    def dims(self) -> tuple[int, ...]:
        return self.topology.dims

    @cached_property
    def cluster_sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.weights], dtype=int)

    @property
    def num_subnodes(self) -> int:
        return len(self.subnodes)

    @cached_property
    def subnode_dims(self) -> np.ndarray:
        return np.array([self.dims[s.agent] for s in self.subnodes], dtype=int)

    @cached_property
    def subnode_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.subnode_dims)]).astype(int)

    @property
    def size(self) -> int:
        """``M_e``, the length of the extended vector."""
        return int(self.subnode_offsets[-1])

    @cached_property
    def subnode_weights(self) -> np.ndarray:
        return np.array([self.weights[s.agent][s.index] for s in self.subnodes])

    @cached_property
    def clusters(self) -> tuple[tuple[int, ...], ...]:
        """Sub-node indices of each agent's cluster ``C_k``."""
        out = [[] for _ in range(self.num_agents)]
        for i, s in enumerate(self.subnodes):
            out[s.agent].append(i)
        return tuple(tuple(x) for x in out)

    @cached_property
    def constraint_subnodes(self) -> tuple[tuple[int, ...], ...]:
        """``I_{e,p}``: sub-nodes of constraint ``p`` in the constraint's member order."""
        lookup = {(s.agent, s.constraint): i for i, s in enumerate(self.subnodes)}
        return tuple(
            tuple(lookup[(k, p)] for k in con.members)
            for p, con in enumerate(self.constraints)
        )

    def slice(self, subnode: int) -> slice:
        off = self.subnode_offsets
        return slice(off[subnode], off[subnode + 1])

    def coords(self, subnodes: Sequence[int]) -> np.ndarray:
        """Flat coordinates in ``w_e`` of a list of sub-nodes, concatenated."""
        off = self.subnode_offsets
        if len(subnodes) == 0:
            return np.zeros(0, dtype=int)
        return np.concatenate([np.arange(off[i], off[i + 1]) for i in subnodes])

    @cached_property
    def agent_coord(self) -> np.ndarray:
        """For each coordinate of ``w_e``, the matching coordinate of the agent vector ``w``."""
        aoff = self.constraints.offsets
        return np.concatenate(
            [np.arange(aoff[s.agent], aoff[s.agent + 1]) for s in self.subnodes]
        ).astype(int)

    @cached_property
    def subnode_of_coord(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_subnodes), self.subnode_dims)

    # -- block operators ---------------------------------------------------

    @cached_property
    def D_e(self) -> np.ndarray:
        """``P x N_e`` block matrix of the original constraints on sub-nodes."""
        rows = [con.rows for con in self.constraints]
        D = np.zeros((sum(rows), self.size))
        r = 0
        for p, con in enumerate(self.constraints):
            for s, B in zip(self.constraint_subnodes[p], con.blocks):
                D[r:r + con.rows, self.slice(s)] = B
            r += con.rows
        return D

    @cached_property
    def b(self) -> np.ndarray:
        if not len(self.constraints):
            return np.zeros(0)
        return np.concatenate([con.offset for con in self.constraints])

    @cached_property
    def H(self) -> np.ndarray:
        """Agreement constraints ``w_{k_m} - w_{k_{m+1}} = 0`` inside every cluster."""
        blocks = []
        for k, cl in enumerate(self.clusters):
            Mk = self.dims[k]
            for a, b in zip(cl[:-1], cl[1:]):
                row = np.zeros((Mk, self.size))
                row[:, self.slice(a)] = np.eye(Mk)
                row[:, self.slice(b)] = -np.eye(Mk)
                blocks.append(row)
        if not blocks:
            return np.zeros((0, self.size))
        return np.vstack(blocks)

    @cached_property
    def D_prime(self) -> np.ndarray:
        return np.vstack([self.D_e, self.H])

    @cached_property
    def b_prime(self) -> np.ndarray:
        return np.concatenate([self.b, np.zeros(self.H.shape[0])])

    @cached_property
    def combination_matrix(self) -> np.ndarray:
        """``A = diag{A_k kron I_{M_k}}`` on ``w_e``."""
        return sla.block_diag(
            *[np.kron(A, np.eye(m)) for A, m in zip(self.combiners, self.dims)]
        )

    @cached_property
    def projector(self) -> tuple[np.ndarray, np.ndarray]:
        """``(P_e, f_e)`` assembled block by block."""
        return blockwise_projector(self)

    def replicate(self, w) -> np.ndarray:
        """``col{1_{j_k} kron w_k}``: copy each agent block into its sub-nodes."""
        return np.asarray(w, dtype=float)[..., self.agent_coord]

    def cluster_average(self, w_e) -> np.ndarray:
        """Agent vector whose blocks are the plain average of each cluster's copies."""
        w_e = np.asarray(w_e, dtype=float)
        out = np.zeros(w_e.shape[:-1] + (self.constraints.offsets[-1],))
        np.add.at(out, (..., self.agent_coord), w_e)
        counts = np.zeros(self.constraints.offsets[-1])
        np.add.at(counts, self.agent_coord, 1.0)
        return out / counts

    def uniform(self) -> bool:
        """True when every ``c_{k_m} = 1/j_k`` and every ``A_k`` is the uniform full matrix."""
        for c, A in zip(self.weights, self.combiners):
            j = len(c)
            if not np.allclose(c, 1.0 / j, rtol=0, atol=1e-14):
                return False
            if not np.allclose(A, 1.0 / j, rtol=0, atol=1e-14):
                return False
        return True


def expand_network(topology, constraints, weights=None, combiners=None,
                   allow_unconstrained=False) -> ExpandedNetwork:
    """Expand every agent into one virtual sub-node per constraint it is involved in.

    Parameters
    ----------
    topology : NetworkTopology
    constraints : ConstraintSet
    weights : sequence of array_like, optional
        Per-agent vectors ``c_k`` (positive, summing to one). Default ``1/j_k``.
    combiners : sequence of array_like, optional
        Per-agent ``j_k x j_k`` doubly stochastic matrices ``A_k`` with entry
        ``[A_k][n, m] = a_{k_n, k_m}``. Default uniform ``1/j_k``.
    allow_unconstrained : bool
        Give agents that appear in no constraint an empty (zero-row)
        constraint instead of rejecting the network.
    """
    if topology.dims != constraints.dims:
        raise ScenarioError("topology and constraint set disagree on agent dimensions")
    N = topology.num_agents
    cons = list(constraints.constraints)
    idle = [k for k in range(N) if not constraints.memberships[k]]
    if idle:
        if not allow_unconstrained:
            raise ScenarioError(f"agents {idle} are not involved in any constraint")
        for k in idle:
            cons.append(Constraint((k,), (np.zeros((0, topology.dims[k])),), np.zeros(0)))
        constraints = ConstraintSet(constraints.dims, tuple(cons))

    for p, con in enumerate(constraints):
        for k in con.members:
            missing = set(con.members) - topology.neighbors[k]
            if missing:
                raise ScenarioError(
                    f"agent {k} cannot reach members {sorted(missing)}", constraint=p
                )

    D, _ = constraints.stacked()
    if D.shape[0]:
        _checked_cho_factor(D @ D.T)

    subnodes = tuple(
        SubNode(k, p, m)
        for k in range(N)
        for m, p in enumerate(constraints.memberships[k])
    )
    sizes = [len(constraints.memberships[k]) for k in range(N)]

    if weights is None:
        weights = [np.full(j, 1.0 / j) for j in sizes]
    weights = tuple(np.asarray(c, dtype=float).reshape(-1) for c in weights)
    for k, (c, j) in enumerate(zip(weights, sizes)):
        if c.shape != (j,):
            raise ScenarioError(f"agent {k}: expected {j} weights, got {c.shape[0]}")
        if np.any(c <= 0) or abs(c.sum() - 1.0) > STOCHASTIC_ATOL:
            raise ScenarioError(f"agent {k}: weights must be positive and sum to one")

    if combiners is None:
        combiners = [np.full((j, j), 1.0 / j) for j in sizes]
    combiners = tuple(np.atleast_2d(np.asarray(A, dtype=float)) for A in combiners)
    for k, (A, j) in enumerate(zip(combiners, sizes)):
        if A.shape != (j, j):
            raise ScenarioError(f"agent {k}: combiner must be {j}x{j}, got {A.shape}")
        if (np.any(A < 0)
                or np.max(np.abs(A.sum(axis=0) - 1)) > STOCHASTIC_ATOL
                or np.max(np.abs(A.sum(axis=1) - 1)) > STOCHASTIC_ATOL):
            raise ScenarioError(f"agent {k}: combiner is not doubly stochastic")

    local = tuple(
        build_projector(con.matrix, con.offset, constraint=p)
        for p, con in enumerate(constraints)
    )
    return ExpandedNetwork(topology, constraints, subnodes, weights, combiners, local)


def blockwise_projector(expanded: ExpandedNetwork):
    """Assemble ``P_e`` and ``f_e`` block by block.

    ``D_e D_e^T`` is block diagonal with blocks ``D_p D_p^T`` because each
    sub-node belongs to exactly one constraint, so the ``(k_m, l_n)`` block of
    ``P_e`` is ``delta I - D_{p,k_m}^T (D_p D_p^T)^{-1} D_{p,l_n}`` when both
    sub-nodes sit in constraint ``p`` and zero otherwise.
    """
    Me = expanded.size
    P = np.eye(Me)
    f = np.zeros(Me)
    for p, con in enumerate(expanded.constraints):
        if con.rows == 0:
            continue
        cho = _checked_cho_factor(sum(B @ B.T for B in con.blocks), constraint=p)
        members = expanded.constraint_subnodes[p]
        QB = [sla.cho_solve(cho, B) for B in con.blocks]
        Qb = sla.cho_solve(cho, con.offset)
        for s, Bs, QBs in zip(members, con.blocks, QB):
            f[expanded.slice(s)] = Bs.T @ Qb
            for t, QBt in zip(members, QB):
                P[expanded.slice(s), expanded.slice(t)] -= Bs.T @ QBt
    P = 0.5 * (P + P.T)
    return P, f


def local_projection_rows(expanded: ExpandedNetwork, p: int):
    """Cached ``([P_p], [f_p])`` of constraint ``p`` in ``I_{e,p}`` order."""
    return expanded.local_projectors[p]


# -- ground truth and closed-form optima -------------------------------------


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Per-agent data model ``d_k(i) = x_k(i)^T w_k + z_k(i)``.

    Parameters
    ----------
    w_o : sequence of (M_k,) arrays
        Model vectors generating the observations.
    R_x : sequence of (M_k, M_k) arrays
        Regressor covariances ``E x_k x_k^T``.
    sigma_z2 : (N,) array_like
        Observation noise variances.
    regressors : sequence of (M_k,) arrays, optional
        Fixed (deterministic) regressors. When given, ``R_x = x x^T`` and the
        regressors are not redrawn. Otherwise ``x_k(i) ~ N(0, R_x)``.
    leak : float
        Weight ``eta`` of the ``(eta/2)|w_k|^2`` regularizer in each local cost.
    """

    w_o: tuple[np.ndarray, ...]
    R_x: tuple[np.ndarray, ...]
    sigma_z2: np.ndarray
    regressors: tuple[np.ndarray, ...] | None = None
    leak: float = 0.0

    def __post_init__(self):
        w_o = tuple(np.asarray(w, dtype=float).reshape(-1) for w in self.w_o)
        if self.regressors is not None:
            regs = tuple(np.asarray(x, dtype=float).reshape(-1) for x in self.regressors)
            R_x = tuple(np.outer(x, x) for x in regs)
            object.__setattr__(self, "regressors", regs)
        else:
            R_x = tuple(np.atleast_2d(np.asarray(R, dtype=float)) for R in self.R_x)
        s2 = np.asarray(self.sigma_z2, dtype=float).reshape(-1)
        if not (len(w_o) == len(R_x) == s2.shape[0]):
            raise ScenarioError("w_o, R_x and sigma_z2 must list the same agents")
        for k, (w, R) in enumerate(zip(w_o, R_x)):
            if R.shape != (w.shape[0], w.shape[0]):
                raise ScenarioError(f"agent {k}: R_x shape {R.shape} does not match w_o")
            if not np.allclose(R, R.T, rtol=0, atol=1e-12 * max(1.0, np.abs(R).max())):
                raise ScenarioError(f"agent {k}: R_x is not symmetric")
        if np.any(s2 < 0):
            raise ScenarioError("noise variances must be nonnegative")
        if self.leak < 0:
            raise ScenarioError("leak must be nonnegative")
        object.__setattr__(self, "w_o", w_o)
        object.__setattr__(self, "R_x", R_x)
        object.__setattr__(self, "sigma_z2", s2)
        if self.regressors is None:
            for k, R in enumerate(R_x):
                try:
                    np.linalg.cholesky(R)
                except np.linalg.LinAlgError:
                    raise ScenarioError(f"agent {k}: R_x is not positive definite") from None

    @property
    def num_agents(self) -> int:
        return len(self.w_o)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w in self.w_o)

    @property
    def gaussian(self) -> bool:
        return self.regressors is None

    @cached_property
    def chol(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linalg.cholesky(R) for R in self.R_x) if self.gaussian else ()

    @cached_property
    def curvature(self) -> tuple[np.ndarray, ...]:
        """Local Hessians (halved): ``R_x,k + (eta/2) I``."""
        return tuple(R + 0.5 * self.leak * np.eye(R.shape[0]) for R in self.R_x)

    @cached_property
    def w_local(self) -> tuple[np.ndarray, ...]:
        """Minimizers of the local costs. Equal to ``w_o`` without leak."""
        if self.leak == 0.0:
            return self.w_o
        return tuple(np.linalg.solve(H, R @ w)
                     for H, R, w in zip(self.curvature, self.R_x, self.w_o))

    @property
    def r_dx(self) -> tuple[np.ndarray, ...]:
        return tuple(R @ w for R, w in zip(self.R_x, self.w_o))

    @property
    def sigma_d2(self) -> np.ndarray:
        return np.array([w @ R @ w for w, R in zip(self.w_o, self.R_x)]) + self.sigma_z2

    def stacked_w(self) -> np.ndarray:
        return np.concatenate(self.w_local)

    def R_x_block(self) -> np.ndarray:
        return sla.block_diag(*self.R_x)

    def curvature_block(self) -> np.ndarray:
        return sla.block_diag(*self.curvature)

    def R_x_e(self, expanded: ExpandedNetwork) -> np.ndarray:
        """``diag{C_k kron R_x,k}`` on the extended vector."""
        return sla.block_diag(*[np.kron(np.diag(c), R)
                                for c, R in zip(expanded.weights, self.R_x)])

    def curvature_e(self, expanded: ExpandedNetwork) -> np.ndarray:
        return sla.block_diag(*[np.kron(np.diag(c), H)
                                for c, H in zip(expanded.weights, self.curvature)])

    def replace(self, **changes) -> "GroundTruth":
        fields = dict(w_o=self.w_o, R_x=self.R_x, sigma_z2=self.sigma_z2,
                      regressors=self.regressors, leak=self.leak)
        fields.update(changes)
        return GroundTruth(**fields)


def closed_form_w_star(truth: GroundTruth, constraints: ConstraintSet) -> np.ndarray:
    """Constrained optimum ``w* = w - H^{-1} D^T (D H^{-1} D^T)^{-1} (D w + b)``.

    ``H`` is the block-diagonal local curvature (``R_x`` without leak) and
    ``w`` the stack of local minimizers. ``H`` must be positive definite; use
    :func:`constrained_optimum` for singular local costs.
    """
    D, b = constraints.stacked()
    w_o = truth.stacked_w()
    if D.shape[0] == 0:
        return w_o
    H = truth.curvature_block()
    try:
        Hcho = sla.cho_factor(H, lower=True)
    except np.linalg.LinAlgError:
        raise ScenarioError("local curvature is singular; closed form unavailable") from None
    HiDt = sla.cho_solve(Hcho, D.T)
    cho = _checked_cho_factor(D @ HiDt)
    return w_o - HiDt @ sla.cho_solve(cho, D @ w_o + b)


def solve_equality_qp(Q, c, A, b):
    """Minimize ``w^T Q w - 2 c^T w`` subject to ``A w = b`` through the KKT system."""
    Q = np.asarray(Q, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n, m = Q.shape[0], A.shape[0]
    K = np.block([[2 * Q, A.T], [A, np.zeros((m, m))]])
    rhs = np.concatenate([2 * np.asarray(c, dtype=float), np.asarray(b, dtype=float)])
    sol = np.linalg.solve(K, rhs)
    return sol[:n]


def constrained_optimum(truth: GroundTruth, constraints: ConstraintSet) -> np.ndarray:
    """``w*`` through the closed form when possible, otherwise through the KKT system."""
    try:
        return closed_form_w_star(truth, constraints)
    except ScenarioError as exc:
        if isinstance(exc, RankDeficientError):
            raise
    D, b = constraints.stacked()
    H = truth.curvature_block()
    return solve_equality_qp(H, H @ truth.stacked_w(), D, -b)


def closed_form_w_star_extended(truth: GroundTruth, expanded: ExpandedNetwork,
                                rtol=1e-8) -> np.ndarray:
    """Optimum of the sub-node problem through the extended closed form.

    The result is checked against the replication of the agent-level optimum;
    a mismatch beyond ``rtol`` raises ``ArithmeticError``.
    """
    w_o = expanded.replicate(truth.stacked_w())
    He = truth.curvature_e(expanded)
    Dp, bp = expanded.D_prime, expanded.b_prime
    try:
        Hcho = sla.cho_factor(He, lower=True)
    except np.linalg.LinAlgError:
        raise ScenarioError("local curvature is singular; closed form unavailable") from None
    HiDt = sla.cho_solve(Hcho, Dp.T)
    cho = _checked_cho_factor(Dp @ HiDt)
    w_e = w_o - HiDt @ sla.cho_solve(cho, Dp @ w_o + bp)
    replicated = expanded.replicate(closed_form_w_star(truth, expanded.constraints))
    scale = max(1.0, float(np.linalg.norm(replicated)))
    if np.linalg.norm(w_e - replicated) > rtol * scale:
        raise ArithmeticError("extended optimum disagrees with the replicated optimum")
    return w_e


@dataclass(frozen=True, eq=False)
class Scenario:
    """A constrained network together with its data model."""

    expanded: ExpandedNetwork
    truth: GroundTruth
    name: str = "scenario"

    def __post_init__(self):
        if self.truth.dims != self.expanded.dims:
            raise ScenarioError("ground truth dimensions do not match the network")

    @property
    def constraints(self) -> ConstraintSet:
        return self.expanded.constraints

    @property
    def topology(self) -> NetworkTopology:
        return self.expanded.topology

    @cached_property
    def w_star(self) -> np.ndarray:
        return constrained_optimum(self.truth, self.constraints)

    @cached_property
    def w_o(self) -> np.ndarray:
        return self.truth.stacked_w()

    @property
    def w_e_o(self) -> np.ndarray:
        return self.expanded.replicate(self.w_o)

    @property
    def w_e_star(self) -> np.ndarray:
        return self.expanded.replicate(self.w_star)

    @property
    def w_e_delta(self) -> np.ndarray:
        return self.w_e_o - self.w_e_star

    def with_truth(self, truth: GroundTruth) -> "Scenario":
        return Scenario(self.expanded, truth, self.name)
