"""Mean and mean-square learning curves predicted by the error models.

Three independent routes give the transient weighted MSD:

``"gamma"``
    the accumulated recursion
    ``zeta(i+1) = zeta(i) + |w~(0)|^2_{(F-I) F^i sigma} + bvec(Y(i))^T sigma + Gamma(i) sigma``
    with ``Gamma(i+1) = Gamma(i) F + bvec(Y(i))^T (F - I)``;
``"direct"``
    the plain recursion ``omega(i+1) = F^T omega(i) + bvec(Y(i))`` on
    ``omega(i) = bvec(E w~(i) w~(i)^T)``;
``"moment"``
    the same second-moment recursion evaluated matrix-free,
    ``W(i+1) = E[B(i) W(i) B(i)^T] + mu^2 G + r r^T + B m(i) r^T + r m(i)^T B^T``.

The first two need ``F`` (``M_e <= 64``); the third costs ``O(M_e^3)`` per
iteration and works at any size.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np
from scipy import linalg as sla
from scipy.sparse.linalg import LinearOperator, gmres

from ..curves import LearningCurve
from ..errors import UnstableModelError
from .blockops import bvec, require_stable, spectral_radius
from .models import LinearErrorModel, MeanModel, VarianceModel, error_model


def network_metric(model: LinearErrorModel) -> np.ndarray:
    """``Sigma = (1/N) diag{(1/j_k) I}``: average over agents of the cluster-averaged MSD."""
    return model.layout.network_metric()


def initial_error(model: LinearErrorModel, w0=None) -> np.ndarray:
    """``w~(0) = w^o_e - w_e(0)``; ``w0`` is a stacked agent vector (default zero)."""
    if w0 is None:
        return model.w_o_e.copy()
    w0 = np.asarray(w0, dtype=float)
    if w0.size != model.size:
        w0 = model.layout.replicate(w0)
    return model.w_o_e - w0


def mean_curve(mean: MeanModel, w_tilde0, horizon: int, reference: str = "w_o") -> np.ndarray:
    """Mean error ``E w~(i)`` for ``i = 0..horizon`` (rows).

    With ``reference="w_star"`` the error ``w~'(i) = w^*_e - w_e(i)`` obeys
    ``E w~'(i+1) = B E w~'(i) - mu r'`` and ``w_tilde0`` is taken w.r.t. ``w^o_e``.
    """
    m = mean.model
    B = m.B
    x = np.asarray(w_tilde0, dtype=float).copy()
    drive = m.r
    if reference == "w_star":
        x = x - m.w_delta
        drive = -m.mu * m.r_prime
    elif reference != "w_o":
        raise ValueError(reference)
    out = np.empty((horizon + 1, x.size))
    out[0] = x
    for i in range(horizon):
        x = B @ x + drive
        out[i + 1] = x
    return out


def _driver(model, m):
    """``Y(i)`` for mean error ``m = E w~(i)`` (symmetrized)."""
    Bm = model.B @ m
    Y = model.mu ** 2 * model.G + np.outer(model.r, model.r) + np.outer(Bm, model.r) \
        + np.outer(model.r, Bm)
    return Y


def _zeta_moment(model, w_tilde0, horizon, metric, W=None):
    W = np.outer(w_tilde0, w_tilde0) if W is None else W
    m = w_tilde0.copy()
    zeta = np.empty(horizon + 1)
    means = np.empty((horizon + 1, m.size))
    zeta[0] = np.sum(metric * W)
    means[0] = m
    B, r = model.B, model.r
    for i in range(horizon):
        W = model.second_moment_step(W) + _driver(model, m)
        W = 0.5 * (W + W.T)
        m = B @ m + r
        zeta[i + 1] = np.sum(metric * W)
        means[i + 1] = m
    return zeta, means, W


def _zeta_direct(model, F, w_tilde0, horizon, metric):
    bd = model.layout.block_dims
    sigma = bvec(metric, bd)
    omega = bvec(np.outer(w_tilde0, w_tilde0), bd)
    m = w_tilde0.copy()
    zeta = np.empty(horizon + 1)
    zeta[0] = omega @ sigma
    Ft = F.T
    for i in range(horizon):
        omega = Ft @ omega + bvec(_driver(model, m), bd)
        m = model.B @ m + model.r
        zeta[i + 1] = omega @ sigma
    return zeta


def _zeta_gamma(model, F, w_tilde0, horizon, metric):
    bd = model.layout.block_dims
    sigma = bvec(metric, bd)
    w0b = bvec(np.outer(w_tilde0, w_tilde0), bd)
    m = w_tilde0.copy()
    zeta = np.empty(horizon + 1)
    zeta[0] = w0b @ sigma
    gamma = np.zeros_like(sigma)
    v = sigma.copy()  # F^i sigma
    for i in range(horizon):
        y = bvec(_driver(model, m), bd)
        Fv = F @ v
        zeta[i + 1] = zeta[i] + w0b @ (Fv - v) + y @ sigma + gamma @ sigma
        gamma = F.T @ gamma + (F.T @ y - y)  # row form: Gamma F + y^T (F - I)
        v = Fv
        m = model.B @ m + model.r
    return zeta


def transient_msd(model: LinearErrorModel, variance: VarianceModel | None = None, w_tilde0=None,
                  horizon: int = 1000, metric=None, method: str = "moment",
                  reference: str = "w_o", label: str | None = None) -> LearningCurve:
    """Weighted MSD ``E|w~(i)|^2_Sigma`` for ``i = 0..horizon``.

    Parameters
    ----------
    model : LinearErrorModel
    variance : VarianceModel, optional
        Supplies ``F`` for the ``gamma`` and ``direct`` methods.
    w_tilde0 : array, optional
        Initial error w.r.t. ``w^o_e``; defaults to zero initialization.
    metric : array, optional
        ``Sigma``; defaults to the network metric.
    method : {"moment", "gamma", "direct"}
    reference : {"w_o", "w_star"}
    """
    if w_tilde0 is None:
        w_tilde0 = initial_error(model)
    w_tilde0 = np.asarray(w_tilde0, dtype=float)
    Sigma = network_metric(model) if metric is None else np.asarray(metric, dtype=float)
    if method == "moment":
        zeta, means, _ = _zeta_moment(model, w_tilde0, horizon, Sigma)
    else:
        F = (variance or model.variance).F
        if method == "direct":
            zeta = _zeta_direct(model, F, w_tilde0, horizon, Sigma)
        elif method == "gamma":
            zeta = _zeta_gamma(model, F, w_tilde0, horizon, Sigma)
        else:
            raise ValueError(f"unknown method {method!r}")
        means = mean_curve(MeanModel(model), w_tilde0, horizon) if reference == "w_star" else None
    if reference == "w_star":
        zeta = shift_to_star(model, zeta, means, Sigma)
    elif reference != "w_o":
        raise ValueError(reference)
    if not np.all(np.isfinite(zeta)):
        warnings.warn("theoretical curve is not finite; the model may be unstable")
    return LearningCurve(label or model.variant, reference, np.arange(horizon + 1), zeta)


def transient_msd_schedule(models, starts, horizon: int, w_tilde0=None, metric=None,
                           reference: str = "w_o", label=None) -> LearningCurve:
    """Moment-route MSD when the truth switches between segments.

    ``models[s]`` is the error model of segment ``s``, active from
    ``starts[s]``. At a switch the error is re-referenced,
    ``w~ <- w~ + (w^o_new - w^o_old)``, and its first two moments are carried
    over; the estimator itself is not told about the change.
    """
    first = models[0]
    Sigma = network_metric(first) if metric is None else np.asarray(metric, dtype=float)
    m = initial_error(first) if w_tilde0 is None else np.asarray(w_tilde0, dtype=float)
    W = np.outer(m, m)
    out = np.empty(horizon + 1)
    edges = list(starts[1:]) + [horizon]
    for s, (model, a, b) in enumerate(zip(models, starts, edges)):
        if a > horizon:
            break
        b = min(b, horizon)
        if s > 0:
            shift = model.w_o_e - models[s - 1].w_o_e
            W = W + np.outer(m, shift) + np.outer(shift, m) + np.outer(shift, shift)
            m = m + shift
        z, means, W = _zeta_moment(model, m, b - a, Sigma, W)
        if reference == "w_star":
            z = shift_to_star(model, z, means, Sigma)
        # the value at a switch is overwritten with the new segment's reference
        out[a:b + 1] = z
        m = means[-1]
    return LearningCurve(label or first.variant, reference, np.arange(horizon + 1), out)


def shift_to_star(model: LinearErrorModel, zeta, means, Sigma) -> np.ndarray:
    """``E|w~'|^2 = E|w~|^2 - 2 E w~^T Sigma w^delta + |w^delta|^2_Sigma``."""
    wd = model.w_delta
    Sw = Sigma @ wd
    return np.asarray(zeta) - 2.0 * np.asarray(means) @ Sw + wd @ Sw


def star_relative_curves(model: LinearErrorModel, variance: VarianceModel | None = None,
                         w_tilde0=None, horizon: int = 1000, metric=None,
                         method: str = "moment"):
    """``(curve w.r.t. w^o_e, curve w.r.t. w^*_e, |bias_star|^2_Sigma)``."""
    if w_tilde0 is None:
        w_tilde0 = initial_error(model)
    Sigma = network_metric(model) if metric is None else metric
    c_o = transient_msd(model, variance, w_tilde0, horizon, Sigma, method)
    means = mean_curve(MeanModel(model), w_tilde0, horizon)
    c_s = LearningCurve(c_o.label, "w_star", c_o.iterations,
                        shift_to_star(model, c_o.values, means, Sigma))
    bs = MeanModel(model).bias_star
    return c_o, c_s, float(bs @ Sigma @ bs)


# -- steady state ---------------------------------------------------------------


def _steady_driver(model):
    m_inf = MeanModel(model).bias_o
    Bm = model.B @ m_inf
    return model.mu ** 2 * model.G + np.outer(model.r, model.r) + np.outer(Bm, model.r) \
        + np.outer(model.r, Bm), m_inf


def steady_second_moment(model: LinearErrorModel, method: str = "auto", variance=None):
    """``(W_inf, m_inf)``: limiting ``E w~ w~^T`` and ``E w~``.

    ``method`` is ``"lyapunov"`` (fixed regressors only: ``W = B W B^T + Q``),
    ``"F"`` (linear solve with ``I - F``), ``"krylov"`` (GMRES on the
    matrix-free moment operator) or ``"auto"``.
    """
    require_stable(model.rho_B, "mean recursion matrix B")
    Q, m_inf = _steady_driver(model)
    if method == "auto":
        if not model.gaussian:
            method = "lyapunov"
        elif model.size <= 64:
            method = "F"
        else:
            method = "krylov"
    if method == "lyapunov":
        if model.gaussian and model.mu != 0:
            raise ValueError("the Lyapunov route ignores fourth-order regressor moments")
        W = sla.solve_discrete_lyapunov(model.B, Q)
    elif method == "F":
        from .blockops import unbvec
        variance = variance or model.variance
        F = variance.F
        bd = model.layout.block_dims
        # omega = F^T omega + bvec(Q)
        omega = np.linalg.solve(np.eye(F.shape[0]) - F.T, bvec(Q, bd))
        W = unbvec(omega, bd)
    elif method == "krylov":
        n = model.size

        def apply(v):
            W = v.reshape(n, n)
            return (W - model.second_moment_step(W)).ravel()

        op = LinearOperator((n * n, n * n), matvec=apply, dtype=float)
        x, info = gmres(op, Q.ravel(), rtol=1e-13, atol=0.0, restart=200, maxiter=2000)
        if info != 0:
            raise UnstableModelError(f"moment fixed point did not converge (gmres info={info})")
        W = x.reshape(n, n)
    else:
        raise ValueError(method)
    return 0.5 * (W + W.T), m_inf


def steady_state_msd(model: LinearErrorModel, variance: VarianceModel | None = None,
                     metric=None, method: str = "auto") -> float:
    """``zeta* = lim E|w~(i)|^2_Sigma`` w.r.t. ``w^o_e``.

    The ``"F"`` route evaluates ``bvec(Y_inf)^T (I - F)^{-1} sigma`` with a
    single linear solve; ``rho(F) < 1`` is checked first.
    """
    Sigma = network_metric(model) if metric is None else np.asarray(metric, dtype=float)
    if method == "F" or (method == "auto" and model.gaussian and model.size <= 64):
        variance = variance or model.variance
        require_stable(model.rho_B, "mean recursion matrix B")
        require_stable(variance.rho_F, "variance recursion matrix F")
        Y, _ = _steady_driver(model)
        bd = model.layout.block_dims
        s = np.linalg.solve(np.eye(variance.F.shape[0]) - variance.F, bvec(Sigma, bd))
        return float(bvec(Y, bd) @ s)
    W, _ = steady_second_moment(model, method)
    return float(np.sum(Sigma * W))


def steady_state_star_msd(model: LinearErrorModel, variance=None, metric=None,
                          method: str = "auto") -> float:
    """Steady-state MSD w.r.t. ``w^*_e``."""
    Sigma = network_metric(model) if metric is None else np.asarray(metric, dtype=float)
    zeta = steady_state_msd(model, variance, Sigma, method)
    m_inf = MeanModel(model).bias_o
    return float(shift_to_star(model, zeta, m_inf, Sigma))


def grid_transient_msd(model: LinearErrorModel, iterations, w_tilde0=None, metric=None,
                       reference: str = "w_o", label=None) -> LearningCurve:
    """Transient MSD of a fixed-regressor model on an evenly spaced iteration grid.

    ``B(i) = B`` is deterministic, so ``w~(i)`` is its mean plus a zero-mean
    part with covariance ``S_inf - B^i S_inf B^{iT}``, ``S_inf`` solving
    ``S = B S B^T + mu^2 G``. Only ``O(len(iterations))`` products with
    ``B^s`` are needed, which keeps long horizons affordable at large ``M_e``.
    """
    if model.gaussian and model.mu != 0:
        raise ValueError("grid route needs fixed regressors")
    it = np.asarray(iterations, dtype=np.int64)
    step = int(it[1] - it[0]) if it.size > 1 else 1
    if it[0] != 0 or np.any(np.diff(it) != step):
        raise ValueError("iterations must be an even grid starting at 0")
    Sigma = network_metric(model) if metric is None else np.asarray(metric, dtype=float)
    w_tilde0 = initial_error(model) if w_tilde0 is None else np.asarray(w_tilde0, float)
    require_stable(model.rho_B, "mean recursion matrix B")
    B = model.B
    S_inf = sla.solve_discrete_lyapunov(B, model.mu ** 2 * model.G)
    S_inf = 0.5 * (S_inf + S_inf.T)
    evals, evecs = np.linalg.eigh(S_inf)
    U = evecs * np.sqrt(np.clip(evals, 0.0, None))
    m_inf = MeanModel(model).bias_o
    X = np.linalg.matrix_power(B, step)
    tr_inf = float(np.sum(Sigma * S_inf))
    dm = w_tilde0 - m_inf
    Z = U
    out = np.empty(it.size)
    shift = m_inf if reference == "w_o" else m_inf - model.w_delta
    for t in range(it.size):
        m = dm + shift
        out[t] = m @ Sigma @ m + tr_inf - np.sum(Z * (Sigma @ Z))
        Z = X @ Z
        dm = X @ dm
    return LearningCurve(label or model.variant, reference, it, out)


# -- ordering comparison ---------------------------------------------------------------


class OrderingComparison(NamedTuple):
    zeta: float       # adapt-project-combine
    zeta_1: float     # adapt-combine-project
    difference: float
    tail_bound: float


def _series(model, Sigma, terms, exact):
    Y = model.mu ** 2 * model.G
    S = Y.copy()
    total = 0.0
    last = 0.0
    for _ in range(terms):
        last = float(np.sum(Sigma * S))
        total += last
        if exact:
            S = model.second_moment_step(S)
        else:
            S = model.B @ S @ model.B.T
    if exact:
        rho2 = spectral_radius(matvec=lambda v: model.second_moment_step(
            v.reshape(model.size, model.size)).ravel(), n=model.size ** 2, fallback=False)
    else:
        rho2 = model.rho_B ** 2
    if rho2 >= 1:
        return total, float("inf")
    return total, last * rho2 / (1.0 - rho2)


def compare_orderings(truth, expanded, mu: float, metric=None, series_terms: int = 20000,
                      exact: bool = False, atol: float = 1e-12) -> OrderingComparison:
    """Steady-state MSD of both step orders by truncated series.

    Under the perfect model the steady-state MSD is
    ``sum_j tr(Sigma_ss B^j Y B^jT)`` with ``Y = mu^2 G`` (small-step ``F``;
    ``exact=True`` uses the full fourth-order moment instead). The default
    ``Sigma_ss = (1/N_e) I`` is the weighting under which the
    adapt-project-combine order never does worse.
    """
    if not expanded.uniform():
        raise ValueError("ordering comparison assumes uniform weights and combiners")
    apc = error_model("apc", truth, expanded, mu)
    cpc = error_model("cpc", truth, expanded, mu)
    if np.linalg.norm(apc.r) > 1e-9 * max(1.0, np.linalg.norm(apc.w_o_e)):
        raise ValueError("ordering comparison assumes the perfect model")
    if metric is None:
        metric = np.eye(apc.size) / expanded.num_subnodes
    z, t = _series(apc, metric, series_terms, exact)
    z1, t1 = _series(cpc, metric, series_terms, exact)
    return OrderingComparison(z, z1, z - z1, t + t1)
