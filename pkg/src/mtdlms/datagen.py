"""Streaming observations ``d_k(i) = x_k(i)^T w_k + z_k(i)`` with reproducible randomness.

Randomness is counter based. Iterations are grouped in chunks of
``chunk_size`` and every ``(seed, run, chunk)`` triple seeds its own
generator, which draws a ``(chunk_size, N, width)`` block of standard
normals. Agent ``k`` always reads column block ``k`` of that array, so the
numbers seen by an agent at an iteration depend only on the key, never on
which algorithm consumes them, on the ground truth, or on the order of
earlier requests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .network import ConstraintSet, GroundTruth

CHUNK_SIZE = 1024


@dataclass(frozen=True)
class RngPolicy:
    """Master seed plus the run index of one Monte Carlo realization."""

    seed: int
    run: int = 0
    chunk_size: int = CHUNK_SIZE

    def generator(self, chunk: int, run: int | None = None) -> np.random.Generator:
        run = self.run if run is None else run
        ss = np.random.SeedSequence([int(self.seed), int(run), int(chunk)])
        return np.random.Generator(np.random.Philox(ss))

    def for_run(self, run: int) -> "RngPolicy":
        return RngPolicy(self.seed, run, self.chunk_size)

    def auxiliary(self, *tag: int) -> np.random.Generator:
        """Generator for scenario-level draws; kept apart from the sample streams."""
        ss = np.random.SeedSequence([int(self.seed), 0xFFFF_FFFF, *map(int, tag)])
        return np.random.default_rng(ss)


class StreamSample(NamedTuple):
    """Regressors and observations of every agent at one iteration.

    ``x`` is laid out like the stacked agent vector ``w`` (length ``sum M_k``),
    ``d`` has one entry per agent.
    """

    x: np.ndarray
    d: np.ndarray


def _draw_width(truth: GroundTruth) -> int:
    return max(truth.dims) + 1 if truth.gaussian else 1


def _standard_block(policy: RngPolicy, chunk: int, n_agents: int, width: int,
                    run: int | None = None) -> np.ndarray:
    gen = policy.generator(chunk, run)
    return gen.standard_normal((policy.chunk_size, n_agents, width))


def _transform(truth: GroundTruth, z: np.ndarray):
    """Map a ``(..., N, width)`` block of standard normals to ``(x, d)``."""
    dims = truth.dims
    offsets = np.concatenate([[0], np.cumsum(dims)])
    lead = z.shape[:-2]
    x = np.empty(lead + (offsets[-1],))
    d = np.empty(lead + (len(dims),))
    noise_sd = np.sqrt(truth.sigma_z2)
    for k, m in enumerate(dims):
        if truth.gaussian:
            xk = z[..., k, :m] @ truth.chol[k].T
        else:
            xk = np.broadcast_to(truth.regressors[k], lead + (m,))
        x[..., offsets[k]:offsets[k + 1]] = xk
        d[..., k] = xk @ truth.w_o[k] + noise_sd[k] * z[..., k, -1]
    return x, d


def sample_step(truth: GroundTruth, rng: RngPolicy, i: int) -> StreamSample:
    """Sample of every agent at iteration ``i`` of run ``rng.run``."""
    chunk, row = divmod(int(i), rng.chunk_size)
    z = _standard_block(rng, chunk, truth.num_agents, _draw_width(truth))[row]
    x, d = _transform(truth, z)
    return StreamSample(x, d)


@dataclass(frozen=True, eq=False)
class TimeVaryingTruth:
    """Piecewise-constant ground truth: ``truths[s]`` holds from ``starts[s]`` on."""

    starts: tuple[int, ...]
    truths: tuple[GroundTruth, ...]

    def __post_init__(self):
        if not self.starts or self.starts[0] != 0:
            raise ValueError("the first segment must start at iteration 0")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise ValueError("change points must be strictly increasing")
        widths = {_draw_width(t) for t in self.truths}
        dims = {t.dims for t in self.truths}
        if len(widths) != 1 or len(dims) != 1:
            raise ValueError("all segments must share dimensions and regressor type")

    @classmethod
    def stationary(cls, truth: GroundTruth) -> "TimeVaryingTruth":
        return cls((0,), (truth,))

    @property
    def num_agents(self) -> int:
        return self.truths[0].num_agents

    def segment(self, i: int) -> int:
        return int(np.searchsorted(self.starts, i, side="right") - 1)

    def at(self, i: int) -> GroundTruth:
        return self.truths[self.segment(i)]

    def pieces(self, start: int, stop: int):
        """Yield ``(a, b, truth)`` covering ``[start, stop)`` on segment boundaries."""
        edges = list(self.starts[1:]) + [np.iinfo(np.int64).max]
        for s, t in enumerate(self.truths):
            a = max(start, self.starts[s])
            b = min(stop, edges[s])
            if a < b:
                yield a, b, t


def as_schedule(truth) -> TimeVaryingTruth:
    return truth if isinstance(truth, TimeVaryingTruth) else TimeVaryingTruth.stationary(truth)


class SampleStream:
    """Batched sample source for ``runs`` Monte Carlo realizations.

    ``block(i0, n)`` returns regressors of shape ``(runs, n, M)`` and
    observations of shape ``(runs, n, N)`` for iterations ``i0 .. i0+n-1``.
    Runs ``first_run .. first_run + runs - 1`` of the policy seed are used.
    """

    def __init__(self, truth, policy: RngPolicy, runs: int = 1, first_run: int = 0):
        self.schedule = as_schedule(truth)
        self.policy = policy
        self.runs = int(runs)
        self.first_run = int(first_run)
        self._width = _draw_width(self.schedule.truths[0])
        self._cache_chunk = None
        self._cache = None

    def _chunk(self, chunk: int) -> np.ndarray:
        if self._cache_chunk != chunk:
            N = self.schedule.num_agents
            self._cache = np.stack([
                _standard_block(self.policy, chunk, N, self._width, run=self.first_run + r)
                for r in range(self.runs)
            ])
            self._cache_chunk = chunk
        return self._cache

    def normals(self, i0: int, n: int) -> np.ndarray:
        cs = self.policy.chunk_size
        parts = []
        i = i0
        while i < i0 + n:
            c, row = divmod(i, cs)
            take = min(cs - row, i0 + n - i)
            parts.append(self._chunk(c)[:, row:row + take])
            i += take
        return parts[0] if len(parts) == 1 else np.concatenate(parts, axis=1)

    def block(self, i0: int, n: int):
        z = self.normals(i0, n)
        xs, ds = [], []
        for a, b, truth in self.schedule.pieces(i0, i0 + n):
            x, d = _transform(truth, z[:, a - i0:b - i0])
            xs.append(x)
            ds.append(d)
        if len(xs) == 1:
            return xs[0], ds[0]
        return np.concatenate(xs, axis=1), np.concatenate(ds, axis=1)


def perturb_truth(truth: GroundTruth, sigma: float, rng: np.random.Generator) -> GroundTruth:
    """Add i.i.d. ``N(0, sigma^2)`` entries to every ``w_k``.

    ``sigma = 0`` returns the same truth without consuming randomness.
    """
    if sigma == 0:
        return truth
    w = tuple(wk + sigma * rng.standard_normal(wk.shape) for wk in truth.w_o)
    return truth.replace(w_o=w)


def feasible_vector(constraints: ConstraintSet, rng: np.random.Generator, scale=1.0):
    """Random agent vectors satisfying every constraint (projection of a Gaussian draw)."""
    from .network import build_projector

    D, b = constraints.stacked()
    y = scale * rng.standard_normal(D.shape[1])
    P, f = build_projector(D, b)
    w = P @ y - f
    off = constraints.offsets
    return tuple(w[off[k]:off[k + 1]] for k in range(len(constraints.dims)))


Rule = Callable[[GroundTruth, np.random.Generator], GroundTruth]


def tracking_schedule(truth: GroundTruth, change_points: Sequence, seed: int = 0) -> TimeVaryingTruth:
    """Resolve change points into a piecewise-constant ground truth.

    Parameters
    ----------
    truth : GroundTruth
        Truth active from iteration 0.
    change_points : sequence of (iteration, rule)
        ``rule`` is either a GroundTruth or a callable ``rule(previous, rng)``
        returning the truth active from ``iteration`` on. Noise variances
        are whatever the rule returns; the built-in rules keep them.
    seed : int
        Seeds the generator handed to callable rules, one per change point.
    """
    starts, truths = [0], [truth]
    for idx, (it, rule) in enumerate(sorted(change_points, key=lambda c: c[0])):
        if it <= starts[-1]:
            raise ValueError("change points must be positive and distinct")
        if callable(rule):
            rng = RngPolicy(seed).auxiliary(1, idx)
            new = rule(truths[-1], rng)
        else:
            new = rule
        starts.append(int(it))
        truths.append(new)
    return TimeVaryingTruth(tuple(starts), tuple(truths))


def growing_perturbation_rule(base: GroundTruth, sigmas: Sequence[float]):
    """Rules re-perturbing ``base`` with increasing ``sigma`` at each change point."""
    rules = []
    for s in sigmas:
        rules.append(lambda prev, rng, s=s: perturb_truth(base, s, rng))
    return rules
