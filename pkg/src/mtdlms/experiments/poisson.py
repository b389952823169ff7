"""Reconstruction of a Poisson field from noisy source measurements on a sensor grid.

The grid has ``n x n`` points ``(k Delta, l Delta)``, ``Delta = 1/(n-1)``;
the ``(n-2)^2`` interior points carry sensors, the rest are boundary points
with known values. The five-point stencil

    (-4 f_{k,l} + f_{k-1,l} + f_{k,l-1} + f_{k,l+1} + f_{k+1,l}) / Delta^2 = g_{k,l}

links sensor ``(k, l)`` to its four neighbors. Its parameter vector holds the
unknown values the stencil touches (the point itself, then its interior
neighbors in the order ``(k-1,l), (k,l-1), (k,l+1), (k+1,l)``); boundary
neighbors move into the known offset ``v^o``. Neighboring sensors share two
unknowns, each pinned equal by a two-row constraint.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..datagen import RngPolicy
from ..network import (Constraint, ConstraintSet, GroundTruth, NetworkTopology, Scenario,
                       expand_network)

DEFAULT_MU = 7e-5
DEFAULT_N = 9
NOISE_RANGE = (0.1, 0.14)
OFFSETS = ((-1, 0), (0, -1), (0, 1), (1, 0))


def f_true(x, y):
    return (1 - x ** 2) * (2 * y ** 3 - 3 * y ** 2 + 1)


def g_true(x, y):
    return -2 * (2 * y ** 3 - 3 * y ** 2 + 1) + 6 * (1 - x ** 2) * (2 * y - 1)


def stencil_residual(n: int, f=f_true, g=g_true) -> float:
    """Largest ``|Laplacian_h f - g|`` over the interior of the ``n x n`` grid."""
    h = 1.0 / (n - 1)
    t = np.arange(n) * h
    X, Y = np.meshgrid(t, t, indexing="ij")
    F = f(X, Y)
    lap = (F[:-2, 1:-1] + F[2:, 1:-1] + F[1:-1, :-2] + F[1:-1, 2:] - 4 * F[1:-1, 1:-1]) / h ** 2
    return float(np.max(np.abs(lap - g(X[1:-1, 1:-1], Y[1:-1, 1:-1]))))


@dataclass(frozen=True, eq=False)
class PoissonScenario:
    """Sensor grid with per-sensor ``(w, x, v^o)`` and the estimation scenario."""

    n: int
    sensors: tuple[tuple[int, int], ...]
    entries: tuple[tuple[tuple[int, int], ...], ...]  # grid point of every entry of w_kl
    regressors: tuple[np.ndarray, ...]
    offsets: np.ndarray
    g: np.ndarray
    scenario: Scenario

    @property
    def delta(self) -> float:
        return 1.0 / (self.n - 1)

    @cached_property
    def sensor_index(self) -> dict:
        return {p: i for i, p in enumerate(self.sensors)}

    def field(self, w) -> np.ndarray:
        """``n x n`` field from stacked agent estimates; boundary from ``f``.

        Every interior value is averaged over all parameter entries that hold it.
        """
        n, h = self.n, self.delta
        t = np.arange(n) * h
        X, Y = np.meshgrid(t, t, indexing="ij")
        F = f_true(X, Y)
        acc = np.zeros((n, n))
        cnt = np.zeros((n, n))
        w = np.asarray(w, dtype=float)
        pos = 0
        for ent in self.entries:
            for (k, l) in ent:
                acc[k, l] += w[pos]
                cnt[k, l] += 1
                pos += 1
        inner = cnt > 0
        F[inner] = acc[inner] / cnt[inner]
        return F

    def true_field(self) -> np.ndarray:
        t = np.arange(self.n) * self.delta
        X, Y = np.meshgrid(t, t, indexing="ij")
        return f_true(X, Y)

    def discrete_solution(self) -> np.ndarray:
        """Field solving the discrete Poisson system exactly (boundary from ``f``)."""
        h = self.delta
        idx = self.sensor_index
        m = len(self.sensors)
        A = np.zeros((m, m))
        rhs = self.g.copy() * h ** 2
        F = self.true_field()
        for i, (k, l) in enumerate(self.sensors):
            A[i, i] = -4.0
            for dk, dl in OFFSETS:
                q = (k + dk, l + dl)
                if q in idx:
                    A[i, idx[q]] = 1.0
                else:
                    rhs[i] -= F[q]
        sol = np.linalg.solve(A, rhs)
        out = F.copy()
        for i, (k, l) in enumerate(self.sensors):
            out[k, l] = sol[i]
        return out


def build_poisson_scenario(n: int = DEFAULT_N, seed: int = 0, sigma_z2=None,
                           f=f_true, g=g_true) -> PoissonScenario:
    """Sensor grid of size ``n`` with ``sigma_z^2 ~ U(0.1, 0.14)`` per sensor.

    The observation of sensor ``(k, l)`` is ``g_kl(i) = x^T w + v^o + z``;
    the data model carries ``d = g_kl(i) - v^o`` so the generating vector only
    has to satisfy ``x^T w = g_kl - v^o`` (the minimum-norm one is used).
    """
    if n < 4:
        raise ValueError("grid needs n >= 4")
    h = 1.0 / (n - 1)
    t = np.arange(n) * h
    X, Y = np.meshgrid(t, t, indexing="ij")
    F = f(X, Y)
    sensors = tuple((k, l) for k in range(1, n - 1) for l in range(1, n - 1))
    interior = set(sensors)
    entries, regs, v, gs = [], [], [], []
    for (k, l) in sensors:
        ent = [(k, l)]
        x = [-4.0]
        off = 0.0
        for dk, dl in OFFSETS:
            q = (k + dk, l + dl)
            if q in interior:
                ent.append(q)
                x.append(1.0)
            else:
                off += F[q]
        entries.append(tuple(ent))
        regs.append(np.array(x) / h ** 2)
        v.append(off / h ** 2)
        gs.append(g(k * h, l * h))
    v = np.array(v)
    gs = np.array(gs)
    index = {p: i for i, p in enumerate(sensors)}
    dims = tuple(len(e) for e in entries)
    cons = []
    for i, (k, l) in enumerate(sensors):
        for dk, dl in ((0, 1), (1, 0)):  # each neighboring pair once
            q = (k + dk, l + dl)
            if q not in interior:
                continue
            j = index[q]
            # both hold f at (k,l) and at q
            Di = np.zeros((2, dims[i]))
            Dj = np.zeros((2, dims[j]))
            for r, p in enumerate(((k, l), q)):
                Di[r, entries[i].index(p)] = 1.0
                Dj[r, entries[j].index(p)] = -1.0
            cons.append(Constraint((i, j), (Di, Dj), np.zeros(2)))
    cs = ConstraintSet(dims, tuple(cons))
    ex = expand_network(NetworkTopology.from_constraints(cs), cs)
    rng = RngPolicy(seed).auxiliary(30)
    sz = rng.uniform(*NOISE_RANGE, size=len(sensors)) if sigma_z2 is None else \
        np.broadcast_to(np.asarray(sigma_z2, float), (len(sensors),)).copy()
    w_gen = tuple(x * (gv - vv) / (x @ x) for x, gv, vv in zip(regs, gs, v))
    truth = GroundTruth(w_gen, (), sz, regressors=tuple(regs))
    sc = Scenario(ex, truth, name=f"poisson-{n}")
    return PoissonScenario(n, sensors, tuple(entries), tuple(regs), v, gs, sc)
