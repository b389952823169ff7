"""Block vectorization, block Kronecker products and spectral radius.

Blocks follow a square partition given by ``block_dims``. ``bvec`` stacks
the column-major ``vec`` of every block, block columns outermost and block
rows next, so that ``bvec(U S W) = (W^T kron_b U) bvec(S)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..errors import UnstableModelError


@lru_cache(maxsize=32)
def _bvec_index(block_dims: tuple[int, ...]) -> np.ndarray:
    off = np.concatenate([[0], np.cumsum(block_dims)]).astype(int)
    n = int(off[-1])
    parts = []
    for j in range(len(block_dims)):
        cols = np.arange(off[j], off[j + 1])
        for i in range(len(block_dims)):
            rows = np.arange(off[i], off[i + 1])
            # column-major vec inside the block: rows vary fastest
            parts.append((cols[:, None] * n + rows[None, :]).ravel())
    idx = np.concatenate(parts) if parts else np.zeros(0, dtype=int)
    idx.setflags(write=False)
    return idx


def bvec_index(block_dims) -> np.ndarray:
    """Permutation ``pi`` with ``bvec(S) = vec(S)[pi]``."""
    return _bvec_index(tuple(int(b) for b in block_dims))


def vec(S) -> np.ndarray:
    return np.asarray(S).reshape(-1, order="F")


def unvec(v, n) -> np.ndarray:
    return np.asarray(v).reshape((n, n), order="F")


def bvec(S, block_dims) -> np.ndarray:
    """Block vectorization of a square matrix partitioned by ``block_dims``."""
    S = np.asarray(S)
    n = S.shape[0]
    if S.shape != (n, n) or sum(block_dims) != n:
        raise ValueError("bvec needs a square matrix matching the block partition")
    return vec(S)[bvec_index(block_dims)]


def unbvec(s, block_dims) -> np.ndarray:
    """Inverse of :func:`bvec`."""
    idx = bvec_index(block_dims)
    n = int(sum(block_dims))
    v = np.empty(n * n, dtype=np.result_type(s))
    v[idx] = s
    return unvec(v, n)


def block_kron(A, B, block_dims) -> np.ndarray:
    """Block Kronecker product ``A kron_b B`` for a common square partition."""
    idx = bvec_index(block_dims)
    K = np.kron(np.asarray(A), np.asarray(B))
    return K[np.ix_(idx, idx)]


def commutation_blocks(block_dims) -> np.ndarray:
    """Permutation ``q`` with ``bvec(T~)= bvec(T)[q]``, ``T~`` transposing every block in place."""
    q = []
    start = 0
    # blocks are enumerated by (block col j, block row i); block (i, j) has shape (m_i, m_j)
    dims = list(block_dims)
    for mj in dims:
        for mi in dims:
            if mi != mj:
                raise ValueError("in-place block transposition needs square blocks")
            m = mi
            local = np.arange(m * m).reshape((m, m), order="F")  # local[r, c] = position of (r, c)
            q.append(start + local.T.reshape(-1, order="F"))
            start += m * m
    return np.concatenate(q) if q else np.zeros(0, dtype=int)


def spectral_radius(A=None, matvec=None, n=None, rtol=1e-10, maxiter=10_000, seed=0,
                    fallback=True) -> float:
    """Spectral radius by power iteration, with a dense eigenvalue fallback.

    The power estimate is accepted only once the eigen-residual
    ``|A v - lambda v|`` drops below ``rtol * |lambda|``. Dominant complex
    pairs never satisfy that test; for those, and whenever ``maxiter`` is
    exhausted, a dense ``max |eig(A)|`` is returned if ``A`` was given.
    """
    if matvec is None:
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        matvec = A.__matmul__
    if n == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(maxiter):
        w = matvec(v)
        lam = float(v @ w)
        if np.linalg.norm(w - lam * v) <= rtol * abs(lam):
            return abs(lam)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        est = nrm
        v = w / nrm
    if fallback and A is not None:
        return float(np.max(np.abs(np.linalg.eigvals(A))))
    return float(est)


def require_stable(rho: float, what: str):
    if not rho < 1.0:
        raise UnstableModelError(f"{what} is not stable (spectral radius {rho:.6g} >= 1)")
