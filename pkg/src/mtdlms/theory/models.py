"""Linear error models of the constrained LMS family.

Every algorithm in the package obeys, in terms of the error
``w~(i) = w^o_e - w_e(i)`` with respect to the local optima,

    w~(i+1) = B(i) w~(i) - mu g(i) + r
    B(i)    = L (I - mu (R_e(i) + (eta/2) C_e))
    g(i)    = L p_zx,e(i)
    r       = (I - L) w^o_e + q

with one pair ``(L, q)`` per variant:

=================  ===============  ==================
variant            L                q
=================  ===============  ==================
apc (reduced)      A^T P_e          A^T f_e
cpc                P_e A^T          f_e
centralized CLMS   P                f
non-cooperative    I                0
=================  ===============  ==================

For the centralized and non-cooperative variants the error vector is the
agent-level vector ``w~`` (one block per agent, unit weight).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg as sla

from ..errors import UnsupportedConfiguration
from ..network import ExpandedNetwork, GroundTruth, build_projector, constrained_optimum
from .blockops import block_kron, bvec, commutation_blocks, require_stable, spectral_radius

F_MAX_SIZE = 64


@dataclass(frozen=True, eq=False)
class Layout:
    """Block structure of an error vector: one block per sub-node (or per agent)."""

    block_agent: np.ndarray
    block_weight: np.ndarray
    block_dims: tuple[int, ...]
    num_agents: int

    @classmethod
    def subnodes(cls, ex: ExpandedNetwork) -> "Layout":
        return cls(np.array([s.agent for s in ex.subnodes]), ex.subnode_weights.copy(),
                   tuple(int(m) for m in ex.subnode_dims), ex.num_agents)

    @classmethod
    def agents(cls, dims) -> "Layout":
        n = len(dims)
        return cls(np.arange(n), np.ones(n), tuple(int(m) for m in dims), n)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.block_dims)]).astype(int)

    @property
    def size(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def agent_blocks(self) -> tuple[np.ndarray, ...]:
        return tuple(np.flatnonzero(self.block_agent == k) for k in range(self.num_agents))

    @cached_property
    def agent_coords(self) -> tuple[np.ndarray, ...]:
        """Coordinates of every agent's blocks (contiguous in both layouts)."""
        off = self.offsets
        return tuple(np.concatenate([np.arange(off[b], off[b + 1]) for b in blocks])
                     for blocks in self.agent_blocks)

    @cached_property
    def coord_weight(self) -> np.ndarray:
        return np.repeat(self.block_weight, self.block_dims)

    def cluster_sizes(self) -> np.ndarray:
        return np.array([len(b) for b in self.agent_blocks])

    def network_metric(self) -> np.ndarray:
        """``(1/N) diag{(1/j_k) I}``: the network MSD weighting."""
        j = self.cluster_sizes()[self.block_agent]
        return np.diag(np.repeat(1.0 / (self.num_agents * j), self.block_dims))

    def replicate(self, w) -> np.ndarray:
        """Lay agent vectors ``w`` (stacked) onto the blocks."""
        aoff = np.concatenate([[0], np.cumsum([self.block_dims[b[0]] for b in self.agent_blocks])])
        idx = np.concatenate([np.arange(aoff[k], aoff[k + 1])
                              for k in self.block_agent])
        return np.asarray(w, dtype=float)[..., idx]


@dataclass(frozen=True, eq=False)
class LinearErrorModel:
    """Coefficients of the error recursion of one algorithm on one scenario."""

    variant: str
    layout: Layout
    L: np.ndarray
    q: np.ndarray
    mu: float
    truth: GroundTruth
    w_o_e: np.ndarray
    w_star_e: np.ndarray
    leak: float = 0.0

    @property
    def size(self) -> int:
        return self.layout.size

    @property
    def gaussian(self) -> bool:
        return self.truth.gaussian

    @cached_property
    def R_e(self) -> np.ndarray:
        """``diag{C_k kron R_x,k}`` on the layout."""
        lay = self.layout
        blocks = [lay.block_weight[b] * self.truth.R_x[lay.block_agent[b]]
                  for b in range(len(lay.block_dims))]
        return sla.block_diag(*blocks)

    @cached_property
    def H_e(self) -> np.ndarray:
        return self.R_e + 0.5 * self.leak * np.diag(self.layout.coord_weight)

    @cached_property
    def X_bar(self) -> np.ndarray:
        return np.eye(self.size) - self.mu * self.H_e

    @cached_property
    def B(self) -> np.ndarray:
        return self.L @ self.X_bar

    @cached_property
    def r(self) -> np.ndarray:
        return self.w_o_e - self.L @ self.w_o_e + self.q

    @cached_property
    def w_delta(self) -> np.ndarray:
        return self.w_o_e - self.w_star_e

    @cached_property
    def r_prime(self) -> np.ndarray:
        return self.L @ (self.H_e @ self.w_delta)

    @cached_property
    def noise_moment(self) -> np.ndarray:
        """``diag{c_k c_k^T kron sigma_z,k^2 R_x,k}`` (before ``L``)."""
        lay = self.layout
        S = np.zeros((self.size, self.size))
        for k, coords in enumerate(lay.agent_coords):
            c = lay.block_weight[lay.agent_blocks[k]]
            S[np.ix_(coords, coords)] = np.kron(np.outer(c, c),
                                                self.truth.sigma_z2[k] * self.truth.R_x[k])
        return S

    @cached_property
    def G(self) -> np.ndarray:
        G = self.L @ self.noise_moment @ self.L.T
        return 0.5 * (G + G.T)

    @cached_property
    def rho_B(self) -> float:
        return spectral_radius(self.B)

    def network_metric(self) -> np.ndarray:
        return self.layout.network_metric()

    @cached_property
    def variance(self) -> "VarianceModel":
        """Default (exact) variance model, shared by repeated steady-state queries."""
        return VarianceModel(self)

    # -- fourth-order moment of the regressors ---------------------------------

    def excess(self, T) -> np.ndarray:
        """``E[R_e(i) T R_e(i)] - R_e T R_e`` for zero-mean Gaussian regressors.

        Only blocks inside one agent's cluster are affected; block ``(k_m, k_n)``
        becomes ``c_m c_n (R T_mn^T R + R tr(R T_mn))``. Zero for fixed regressors.
        """
        out = np.zeros_like(T)
        if not self.gaussian:
            return out
        lay = self.layout
        for k, coords in enumerate(lay.agent_coords):
            blocks = lay.agent_blocks[k]
            j = len(blocks)
            m = lay.block_dims[blocks[0]]
            R = self.truth.R_x[k]
            c = lay.block_weight[blocks]
            T4 = T[np.ix_(coords, coords)].reshape(j, m, j, m)
            t1 = np.einsum("ac,mdnc,db->manb", R, T4, R)
            tr = np.einsum("cd,mdnc->mn", R, T4)
            t2 = np.einsum("ab,mn->manb", R, tr)
            cc = np.outer(c, c)[:, None, :, None]
            out[np.ix_(coords, coords)] = (cc * (t1 + t2)).reshape(j * m, j * m)
        return out

    def second_moment_step(self, W) -> np.ndarray:
        """``E[B(i) W B(i)^T]``."""
        Xb = self.X_bar
        inner = Xb @ W @ Xb + self.mu ** 2 * self.excess(W)
        return self.L @ inner @ self.L.T

    def weight_step(self, Sigma) -> np.ndarray:
        """``E[B(i)^T Sigma B(i)]``, i.e. ``unbvec(F bvec(Sigma))``."""
        T = self.L.T @ Sigma @ self.L
        Xb = self.X_bar
        return Xb @ T @ Xb + self.mu ** 2 * self.excess(T)


# -- model construction ---------------------------------------------------------


def _subnode_model(variant, expanded, truth, mu, leak, w_star=None) -> LinearErrorModel:
    if leak and truth.gaussian:
        raise UnsupportedConfiguration(
            "leaky adaptation is modeled for deterministic regressors only")
    P, f = expanded.projector
    A = expanded.combination_matrix
    if variant in ("apc", "reduced"):
        L, q = A.T @ P, A.T @ f
    elif variant == "cpc":
        L, q = P @ A.T, f
    else:
        raise ValueError(variant)
    if w_star is None:
        w_star = constrained_optimum(truth, expanded.constraints)
    lay = Layout.subnodes(expanded)
    return LinearErrorModel(variant, lay, L, q, float(mu), truth,
                            expanded.replicate(truth.stacked_w()),
                            expanded.replicate(w_star), float(leak))


def _agent_model(variant, constraints, truth, mu, leak, w_star=None) -> LinearErrorModel:
    if leak and truth.gaussian:
        raise UnsupportedConfiguration(
            "leaky adaptation is modeled for deterministic regressors only")
    M = int(sum(truth.dims))
    if variant == "clms":
        D, b = constraints.stacked()
        L, q = build_projector(D, b)
    elif variant == "nc":
        L, q = np.eye(M), np.zeros(M)
    else:
        raise ValueError(variant)
    if w_star is None:
        w_star = constrained_optimum(truth, constraints)
    return LinearErrorModel(variant, Layout.agents(truth.dims), L, q, float(mu), truth,
                            truth.stacked_w(), np.asarray(w_star, dtype=float), float(leak))


def error_model(variant: str, truth: GroundTruth, expanded: ExpandedNetwork, mu: float,
                leak: float | None = None, w_star=None) -> LinearErrorModel:
    """Linear error model of ``variant`` in ``{apc, cpc, reduced, clms, nc}``.

    ``leak`` defaults to the regularizer weight carried by ``truth``.
    """
    leak = truth.leak if leak is None else leak
    if variant in ("apc", "cpc", "reduced"):
        if variant == "reduced" and not expanded.uniform():
            raise UnsupportedConfiguration("reduced variant needs uniform weights")
        return _subnode_model(variant, expanded, truth, mu, leak, w_star)
    return _agent_model(variant, expanded.constraints, truth, mu, leak, w_star)


@dataclass(frozen=True, eq=False)
class MeanModel:
    """Mean recursion ``E w~(i+1) = B E w~(i) + r`` and its limits."""

    model: LinearErrorModel

    @property
    def B(self):
        return self.model.B

    @property
    def r(self):
        return self.model.r

    @property
    def r_prime(self):
        return self.model.r_prime

    def _solve(self, rhs):
        require_stable(self.model.rho_B, "mean recursion matrix B")
        return np.linalg.solve(np.eye(self.model.size) - self.B, rhs)

    @cached_property
    def bias_o(self) -> np.ndarray:
        """``(I - B)^{-1} r``: asymptotic mean error w.r.t. ``w^o_e``."""
        return self._solve(self.r)

    @cached_property
    def bias_star(self) -> np.ndarray:
        """``-mu (I - B)^{-1} r'``: asymptotic mean error w.r.t. ``w^*_e``."""
        return -self.model.mu * self._solve(self.r_prime)


@dataclass(frozen=True, eq=False)
class VarianceModel:
    """Second-order quantities of the error recursion.

    ``F`` is built on first access: the Gaussian closed form when the
    regressors are Gaussian (``kind="exact"``), or ``B^T kron_b B^T``
    (``kind="approx"``, exact for fixed regressors).
    """

    model: LinearErrorModel
    kind: str = "exact"

    @property
    def G(self):
        return self.model.G

    @cached_property
    def F(self) -> np.ndarray:
        if self.kind == "approx" or not self.model.gaussian:
            return build_F_approx(self.model)
        if self.kind == "literal":
            return build_F_exact(self.model, form="literal")
        return build_F_exact(self.model)

    @cached_property
    def rho_F(self) -> float:
        return _rho_large(self.F)


def _rho_large(F) -> float:
    """Spectral radius of a (possibly large) dense operator."""
    n = F.shape[0]
    if n <= 512:
        return float(np.max(np.abs(np.linalg.eigvals(F))))
    from scipy.sparse.linalg import eigs
    v0 = np.random.default_rng(1).standard_normal(n)
    vals = eigs(F, k=1, which="LM", v0=v0, return_eigenvectors=False, tol=1e-12)
    return float(np.abs(vals[0]))


def competing_models(which: str, truth: GroundTruth, expanded: ExpandedNetwork, mu: float,
                     leak: float | None = None, kind: str = "exact"):
    """``(MeanModel, VarianceModel)`` of a competing algorithm.

    ``which`` is ``"centralized_clms"``, ``"nc_lms"`` or ``"cpc_diffusion"``;
    the short names ``clms``, ``nc``, ``cpc`` and ``apc`` are accepted too.
    """
    alias = {"centralized_clms": "clms", "nc_lms": "nc", "cpc_diffusion": "cpc",
             "apc_diffusion": "apc"}
    m = error_model(alias.get(which, which), truth, expanded, mu, leak)
    return MeanModel(m), VarianceModel(m, kind)


# -- the F matrix ------------------------------------------------------------------


def _check_F_size(model):
    if model.size > F_MAX_SIZE:
        raise UnsupportedConfiguration(
            f"F has {model.size ** 2} rows (M_e = {model.size} > {F_MAX_SIZE}); "
            "use the Lyapunov route for fixed regressors or Monte Carlo otherwise")


def build_F_approx(model: LinearErrorModel) -> np.ndarray:
    """``F = B^T kron_b B^T``: small-step approximation, exact for fixed regressors."""
    _check_F_size(model)
    Bt = model.B.T
    return block_kron(Bt, Bt, model.layout.block_dims)


def build_F_exact(model: LinearErrorModel, form: str = "isserlis") -> np.ndarray:
    """``F = E{B^T(i) kron_b B^T(i)}`` for zero-mean Gaussian regressors, uniform ``M_k``.

        F = B^T kron_b B^T
            + mu^2 sum_k [ (S_k^T (I kron R_k)) kron_b (S_k (I kron R_k)) Pi
                         + (S_k^T kron_b S_k (I kron R_k)) (I kron vec(I) vec(R_k)^T) ]
              (L^T kron_b L^T)

    ``Pi`` transposes each ``M_0 x M_0`` block in place. With ``form="literal"``
    it is dropped, which reproduces the fourth-moment identity as stated for
    symmetric arguments only; that is exact when every block of
    ``L^T Sigma L`` inside a cluster is symmetric (``M_0 = 1`` or ``j_k = 1``
    on symmetric ``Sigma``) but not in general.

    Fixed regressors have no fourth-order excess, so ``B^T kron_b B^T`` is returned.
    """
    _check_F_size(model)
    F0 = build_F_approx(model)
    if not model.gaussian:
        return F0
    lay = model.layout
    dims = set(lay.block_dims)
    if len(dims) != 1:
        raise UnsupportedConfiguration(
            "closed-form F needs a common parameter size M_k; use F_approx or Monte Carlo")
    if form not in ("isserlis", "literal"):
        raise ValueError(form)
    m0 = dims.pop()
    Ne = len(lay.block_dims)
    bd = lay.block_dims
    vec_i = np.eye(m0).reshape(-1, order="F")
    Lt = model.L.T
    KL = block_kron(Lt, Lt, bd)
    F = F0.copy()
    # S_k vanishes outside cluster k, so both terms of agent k live on the
    # block pairs (a, b) with a, b in the cluster: evaluate them there.
    for k in range(lay.num_agents):
        blk = np.flatnonzero(lay.block_agent == k)
        j = blk.size
        sub_bd = (m0,) * j
        rows = ((blk[None, :] * Ne + blk[:, None]).T.ravel()[:, None] * m0 * m0
                + np.arange(m0 * m0)[None, :]).ravel()
        Rk = model.truth.R_x[k]
        coords = np.concatenate([lay.offsets[b] + np.arange(m0) for b in blk])
        S = np.diag(lay.coord_weight[coords])
        IR = np.kron(np.eye(j), Rk)
        SIR = S @ IR
        term = block_kron(S.T @ IR, SIR, sub_bd)
        if form == "isserlis":
            term = term[:, commutation_blocks(sub_bd)]
        M2 = block_kron(S.T, SIR, sub_bd)
        # right-multiplication by I kron vec(I) vec(R_k)^T, block by block
        n = j * j * m0 * m0
        folded = M2.reshape(n, j * j, m0 * m0) @ vec_i
        term = term + (folded[:, :, None] * Rk.reshape(-1, order="F")[None, None, :]).reshape(n, n)
        F[rows] += model.mu ** 2 * term @ KL[rows]
    return F


def build_F_operator(model: LinearErrorModel) -> np.ndarray:
    """``F`` assembled column by column from :meth:`LinearErrorModel.weight_step`."""
    _check_F_size(model)
    bd = model.layout.block_dims
    Me = model.size
    from .blockops import unbvec
    F = np.empty((Me * Me, Me * Me))
    eye = np.eye(Me * Me)
    for col in range(Me * Me):
        F[:, col] = bvec(model.weight_step(unbvec(eye[col], bd)), bd)
    return F


def monte_carlo_F(model: LinearErrorModel, samples: int, rng: np.random.Generator,
                  batch: int = 2000):
    """Sample mean and standard error of ``B^T(i) kron_b B^T(i)`` over regressor draws."""
    _check_F_size(model)
    lay = model.layout
    bd = lay.block_dims
    from .blockops import bvec_index
    idx = bvec_index(bd)
    Me = model.size
    total = np.zeros((Me * Me, Me * Me))
    total_sq = np.zeros_like(total)
    done = 0
    chols = [np.linalg.cholesky(R) for R in model.truth.R_x]
    leak_diag = 0.5 * model.leak * lay.coord_weight
    while done < samples:
        n = min(batch, samples - done)
        Rbatch = np.zeros((n, Me, Me))
        for k, coords in enumerate(lay.agent_coords):
            m = model.truth.dims[k]
            x = rng.standard_normal((n, m)) @ chols[k].T
            xx = np.einsum("ni,nj->nij", x, x)
            c = lay.block_weight[lay.agent_blocks[k]]
            Rbatch[:, coords[:, None], coords[None, :]] = np.einsum(
                "ab,nij->naibj", np.diag(c), xx).reshape(n, len(c) * m, len(c) * m)
        X = np.eye(Me) - model.mu * (Rbatch + np.diag(leak_diag))
        Bi = np.einsum("ij,njk->nik", model.L, X)
        Bt = np.transpose(Bi, (0, 2, 1))
        K = np.einsum("nab,ncd->nacbd", Bt, Bt).reshape(n, Me * Me, Me * Me)
        K = K[:, idx][:, :, idx]
        total += K.sum(axis=0)
        total_sq += np.einsum("nij,nij->ij", K, K)
        done += n
    mean = total / samples
    var = np.maximum(total_sq / samples - mean ** 2, 0.0)
    return mean, np.sqrt(var / samples)
