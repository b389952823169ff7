"""Independent reference computations used by the tests.

Nothing here imports the package under test; every routine works from
plain arrays with the most direct formula available (pseudo-inverses,
null-space parametrizations, explicit block loops).
"""

import numpy as np


def dense_projector(D, b):
    """``P = I - D^+ D``, ``f = D^+ b`` through the Moore-Penrose inverse."""
    D = np.atleast_2d(np.asarray(D, float))
    Dp = np.linalg.pinv(D)
    return np.eye(D.shape[1]) - Dp @ D, Dp @ np.asarray(b, float)


def nullspace_qp(H, w_o, D, b):
    """``argmin (w - w_o)^T H (w - w_o)`` s.t. ``D w + b = 0`` by null-space elimination."""
    D = np.atleast_2d(np.asarray(D, float))
    w_p = -np.linalg.pinv(D) @ b
    _, s, Vt = np.linalg.svd(D)
    rank = int(np.sum(s > 1e-12 * s[0]))
    N = Vt[rank:].T
    z = np.linalg.solve(N.T @ H @ N, N.T @ H @ (w_o - w_p))
    return w_p + N @ z


def block_partition(dims):
    off = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    return [slice(off[i], off[i + 1]) for i in range(len(dims))]


def bvec_loop(S, dims):
    """Stack the column-major vec of every block, block columns outermost."""
    sl = block_partition(dims)
    return np.concatenate([S[r, c].reshape(-1, order="F") for c in sl for r in sl])


def block_kron_loop(A, B, dims):
    """``A kron_b B`` by its definition: block ``(ij, kl)`` is ``A_ik kron B_jl``."""
    sl = block_partition(dims)
    n = len(dims)
    rows = []
    for i in range(n):          # block column index of the bvec argument (outer)
        for j in range(n):      # block row index (inner)
            rows.append(np.hstack([np.kron(A[sl[i], sl[k]], B[sl[j], sl[l]])
                                   for k in range(n) for l in range(n)]))
    return np.vstack(rows)


def scalar_isserlis_F(c, agent, sigma2, mu, L):
    """``E{B^T kron B^T}`` for scalar tasks, ``B = L (I - mu diag(c_m x_{a(m)}^2))``.

    ``x_a ~ N(0, sigma2[a])`` independently, so ``E x_a^2 x_b^2`` is
    ``sigma2_a sigma2_b`` for ``a != b`` and ``3 sigma2_a^2`` for ``a = b``.
    The expectation of the diagonal ``X kron X`` is built entry by entry.
    """
    n = len(c)
    diag = np.empty(n * n)
    for p in range(n):          # kron index p * n + q
        for q in range(n):
            a, b = agent[p], agent[q]
            fourth = 3 * sigma2[a] ** 2 if a == b else sigma2[a] * sigma2[b]
            diag[p * n + q] = (1 - mu * (c[p] * sigma2[a] + c[q] * sigma2[b])
                               + mu ** 2 * c[p] * c[q] * fourth)
    # B^T kron B^T = (X kron X)(L^T kron L^T) because X is diagonal
    return diag[:, None] * np.kron(L.T, L.T)


def hand_apc_step(w1, w2, x1, x2, d1, d2, mu):
    """One adapt-project-combine step, two scalar agents, constraint ``w1 - w2 = 0``.

    Each agent has a single sub-node (``c = 1``, ``A = [1]``); the projector
    onto ``{w1 = w2}`` replaces both values by their mean.
    """
    psi1 = w1 + mu * x1 * (d1 - x1 * w1)
    psi2 = w2 + mu * x2 * (d2 - x2 * w2)
    avg = 0.5 * (psi1 + psi2)
    return avg, avg


def kkt_dense(Q, w_o, D, b):
    """Lagrangian stationarity solved as one dense system, for cross-checks."""
    n, m = Q.shape[0], D.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = Q
    K[:n, n:] = D.T
    K[n:, :n] = D
    rhs = np.concatenate([Q @ w_o, -b])
    return np.linalg.solve(K, rhs)[:n]
