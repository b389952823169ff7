"""Online estimators: non-cooperative LMS, centralized CLMS and the multitask diffusion family.

Every step function is batched: estimates carry a leading run axis, so
``state.w`` has shape ``(runs, M_e)`` for sub-node algorithms and
``(runs, M)`` for agent-level ones. Samples come as ``x`` of shape
``(runs, M)`` (stacked agent regressors) and ``d`` of shape ``(runs, N)``.
All agents update synchronously.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import DivergenceError, UnsupportedConfiguration
from .network import ExpandedNetwork

DIVERGENCE_LIMIT = 1e12

VARIANTS = ("nc", "clms", "apc", "cpc", "reduced")


@dataclass
class AlgorithmState:
    """Mutable per-run estimates plus the intermediates of the last step."""

    w: np.ndarray
    mu: float
    leak: float = 0.0
    psi: np.ndarray | None = None
    phi: np.ndarray | None = None
    iteration: int = 0
    messages: int = 0

    @property
    def runs(self) -> int:
        return self.w.shape[0]


def initial_state(expanded: ExpandedNetwork | None, w0, runs: int, mu: float,
                  leak: float = 0.0, level: str = "subnode") -> AlgorithmState:
    """State with every copy ``w_{k_m}(0)`` equal to the agent value ``w_k(0)``."""
    w0 = np.asarray(w0, dtype=float)
    if level == "subnode":
        w0 = expanded.replicate(w0)
    w = np.broadcast_to(w0, (runs,) + w0.shape[-1:]).copy()
    return AlgorithmState(w=w, mu=float(mu), leak=float(leak))


# -- cached structure of an expanded network ---------------------------------


class _Kernels:
    """Index tables and stacked operators used by the batched diffusion steps."""

    def __init__(self, ex: ExpandedNetwork):
        self.agent_coord = ex.agent_coord
        self.subnode_of_coord = ex.subnode_of_coord
        self.seg_starts = ex.subnode_offsets[:-1]
        self.subnode_agent = np.array([s.agent for s in ex.subnodes], dtype=int)
        self.c_coord = ex.subnode_weights[self.subnode_of_coord]

        # projection groups: constraints sharing the same local size M_p
        groups = {}
        for p, members in enumerate(ex.constraint_subnodes):
            coords = ex.coords(members)
            groups.setdefault(coords.size, []).append(p)
        self.proj_groups = []
        for size, ps in groups.items():
            idx = np.stack([ex.coords(ex.constraint_subnodes[p]) for p in ps])
            Pst = np.stack([ex.local_projectors[p][0] for p in ps])
            fst = np.stack([ex.local_projectors[p][1] for p in ps])
            self.proj_groups.append((idx, Pst, fst))

        # combination groups: clusters sharing (j_k, M_k)
        groups = {}
        for k, cl in enumerate(ex.clusters):
            groups.setdefault((len(cl), ex.dims[k]), []).append(k)
        self.comb_groups = []
        for (j, m), ks in groups.items():
            idx = np.stack([ex.coords(ex.clusters[k]).reshape(j, m) for k in ks])
            Ast = np.stack([ex.combiners[k] for k in ks])
            self.comb_groups.append((idx, Ast))

        # agent offsets and reduced-variant operators
        aoff = ex.constraints.offsets
        self.agent_starts = aoff[:-1]
        self.agent_of_coord = np.repeat(np.arange(ex.num_agents), np.diff(aoff))
        j = ex.cluster_sizes.astype(float)
        self.inv_j_agent_coord = (1.0 / j)[self.agent_of_coord]
        M, Me = aoff[-1], ex.size
        weights = (1.0 / j)[self.subnode_agent][self.subnode_of_coord]
        avg = sparse.csr_matrix((weights, (self.agent_coord, np.arange(Me))), shape=(M, Me))
        self.average_T = avg.T.tocsr()

        # message bookkeeping (vectors exchanged between distinct agents per iteration)
        cons = ex.constraints
        self.messages_subnode = sum(len(c.members) * (len(c.members) - 1) for c in cons)
        partners = [set() for _ in range(ex.num_agents)]
        for c in cons:
            for k in c.members:
                partners[k].update(set(c.members) - {k})
        self.messages_reduced = sum(len(s) for s in partners)


_KERNELS: "weakref.WeakKeyDictionary[ExpandedNetwork, _Kernels]" = weakref.WeakKeyDictionary()


def kernels(expanded: ExpandedNetwork) -> _Kernels:
    k = _KERNELS.get(expanded)
    if k is None:
        k = _Kernels(expanded)
        _KERNELS[expanded] = k
    return k


# -- building blocks ---------------------------------------------------------


def _agent_errors(x, d, w, starts):
    """``d_k - x_k^T w_k`` for stacked agent vectors."""
    return d - np.add.reduceat(x * w, starts, axis=-1)


def adapt_subnodes(w, x, d, expanded, mu, leak=0.0):
    """``psi_{k_m} = w_{k_m} + mu c_{k_m} x_k (d_k - x_k^T w_{k_m}) - (mu/2) c_{k_m} eta w_{k_m}``."""
    K = kernels(expanded)
    xs = x[..., K.agent_coord]
    e = d[..., K.subnode_agent] - np.add.reduceat(xs * w, K.seg_starts, axis=-1)
    psi = w + (mu * K.c_coord) * xs * e[..., K.subnode_of_coord]
    if leak:
        psi -= (0.5 * mu * leak) * K.c_coord * w
    return psi


def project_constraints(psi, expanded):
    """``phi_{k_m} = [P_p]_{k_m,.} col{psi_{l_n}} - [f_p]_{k_m}``, reading only ``I_{e,p}``."""
    K = kernels(expanded)
    phi = np.empty_like(psi)
    for idx, Pst, fst in K.proj_groups:
        local = psi[..., idx]
        phi[..., idx] = np.einsum("gij,...gj->...gi", Pst, local) - fst
    return phi


def combine_clusters(phi, expanded):
    """``w_{k_m} = sum_n a_{k_n,k_m} phi_{k_n}``, reading only the cluster ``C_k``."""
    K = kernels(expanded)
    out = np.empty_like(phi)
    for idx, Ast in K.comb_groups:
        out[..., idx] = np.einsum("gnm,...gnd->...gmd", Ast, phi[..., idx])
    return out


# -- the estimators ------------------------------------------------------------


def nc_lms_step(state: AlgorithmState, x, d, starts) -> AlgorithmState:
    """Stand-alone LMS at every agent. ``starts`` are the agent offsets in ``w``."""
    w = state.w
    e = _agent_errors(x, d, w, starts)
    reps = np.diff(np.append(starts, w.shape[-1]))
    psi = w + state.mu * x * np.repeat(e, reps, axis=-1)
    if state.leak:
        psi -= 0.5 * state.mu * state.leak * w
    state.psi = psi
    state.w = psi
    state.iteration += 1
    return state


def clms_step(state: AlgorithmState, x, d, P, f, starts) -> AlgorithmState:
    """Centralized CLMS ``w <- P (w + mu X (d - X^T w)) - f``."""
    if x.shape[-1] != P.shape[0] or state.w.shape[-1] != P.shape[0]:
        raise ValueError(f"dimension mismatch: regressors {x.shape[-1]}, "
                         f"estimates {state.w.shape[-1]}, projector {P.shape[0]}")
    w = state.w
    e = _agent_errors(x, d, w, starts)
    reps = np.diff(np.append(starts, w.shape[-1]))
    psi = w + state.mu * x * np.repeat(e, reps, axis=-1)
    if state.leak:
        psi -= 0.5 * state.mu * state.leak * w
    state.psi = psi
    state.w = psi @ P.T - f
    state.iteration += 1
    return state


def diffusion_apc_step(state: AlgorithmState, x, d, expanded) -> AlgorithmState:
    """Adapt, project on each local constraint, then combine inside every cluster."""
    state.psi = adapt_subnodes(state.w, x, d, expanded, state.mu, state.leak)
    state.phi = project_constraints(state.psi, expanded)
    state.w = combine_clusters(state.phi, expanded)
    state.iteration += 1
    state.messages += kernels(expanded).messages_subnode
    return state


def diffusion_cpc_step(state: AlgorithmState, x, d, expanded) -> AlgorithmState:
    """Adapt, combine inside every cluster, then project on each local constraint."""
    state.psi = adapt_subnodes(state.w, x, d, expanded, state.mu, state.leak)
    state.phi = combine_clusters(state.psi, expanded)
    state.w = project_constraints(state.phi, expanded)
    state.iteration += 1
    state.messages += kernels(expanded).messages_subnode
    return state


def diffusion_reduced_step(state: AlgorithmState, x, d, expanded) -> AlgorithmState:
    """One estimate per agent: adapt with ``mu/j_k``, project per constraint, average.

    Valid for uniform weights ``1/j_k`` and uniform fully connected combiners.
    """
    if not expanded.uniform():
        raise UnsupportedConfiguration(
            "the reduced update needs c = 1/j_k and uniform fully connected combiners")
    K = kernels(expanded)
    w = state.w
    e = _agent_errors(x, d, w, K.agent_starts)
    psi = w + (state.mu * K.inv_j_agent_coord) * x * e[..., K.agent_of_coord]
    if state.leak:
        psi -= (0.5 * state.mu * state.leak) * K.inv_j_agent_coord * w
    state.psi = psi
    state.phi = project_constraints(psi[..., K.agent_coord], expanded)
    state.w = np.asarray(state.phi.reshape(-1, state.phi.shape[-1]) @ K.average_T).reshape(w.shape)
    state.iteration += 1
    state.messages += K.messages_reduced
    return state


def leaky_adapt_step(state: AlgorithmState, s, expanded, eta, x=None):
    """Leaky adaptation with all-ones regressors (flow model); returns ``psi``.

    ``psi_{k_m} = w_{k_m} + mu c_{k_m} 1 (s_k - 1^T w_{k_m}) - (mu/2) c_{k_m} eta w_{k_m}``.
    Pass ``x`` to use other regressors.
    """
    if x is None:
        x = np.ones(state.w.shape[:-1] + (expanded.constraints.offsets[-1],))
    return adapt_subnodes(state.w, x, s, expanded, state.mu, eta)


def check_divergence(state: AlgorithmState, limit: float = DIVERGENCE_LIMIT):
    """Raise :class:`DivergenceError` when an estimate is non-finite or beyond ``limit``."""
    peak = np.max(np.abs(state.w))
    if not np.isfinite(peak) or peak > limit:
        raise DivergenceError(state.iteration, float(peak) if np.isfinite(peak) else np.inf)


# -- a uniform front end used by the ensemble runner --------------------------


@dataclass
class Estimator:
    """Bind one algorithm variant to a scenario so the runner can step it blindly."""

    variant: str
    expanded: ExpandedNetwork
    mu: float
    leak: float = 0.0
    _P: np.ndarray | None = field(default=None, repr=False)
    _f: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown algorithm {self.variant!r}; choose from {VARIANTS}")
        if self.variant == "reduced" and not self.expanded.uniform():
            raise UnsupportedConfiguration(
                "reduced variant needs uniform weights and combiners")
        if self.variant == "clms":
            from .network import build_projector
            D, b = self.expanded.constraints.stacked()
            self._P, self._f = build_projector(D, b)

    @property
    def level(self) -> str:
        return "subnode" if self.variant in ("apc", "cpc") else "agent"

    @property
    def label(self) -> str:
        return {"nc": "nc-lms", "clms": "clms", "apc": "diffusion-apc",
                "cpc": "diffusion-cpc", "reduced": "diffusion-reduced"}[self.variant]

    def init(self, w0, runs: int) -> AlgorithmState:
        return initial_state(self.expanded, w0, runs, self.mu, self.leak, self.level)

    def step(self, state, x, d):
        ex = self.expanded
        starts = ex.constraints.offsets[:-1]
        if self.variant == "apc":
            return diffusion_apc_step(state, x, d, ex)
        if self.variant == "cpc":
            return diffusion_cpc_step(state, x, d, ex)
        if self.variant == "reduced":
            return diffusion_reduced_step(state, x, d, ex)
        if self.variant == "clms":
            return clms_step(state, x, d, self._P, self._f, starts)
        return nc_lms_step(state, x, d, starts)

    def extended(self, state) -> np.ndarray:
        """Estimates laid out on the sub-node vector ``w_e`` (agent values replicated)."""
        if self.level == "subnode":
            return state.w
        return state.w[..., self.expanded.agent_coord]
