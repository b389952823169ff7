"""Monte Carlo driver: many independent runs of several estimators on shared data.

Runs are vectorized along a leading axis instead of being stepped one at a
time. Every run reads its own counter-keyed sample stream, so splitting
runs into batches (or running a batch in another process) changes nothing
in the results; batch results are reduced in run-index order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algorithms import Estimator, check_divergence
from .curves import LearningCurve
from .datagen import RngPolicy, SampleStream, as_schedule
from .network import ExpandedNetwork, constrained_optimum


@dataclass
class SimulationResult:
    """Ensemble averages of one estimator.

    ``msd_o[i]`` and ``msd_star[i]`` are network MSDs averaged over runs at
    iteration ``i`` (``i = 0..horizon``) w.r.t. ``w^o_e`` and ``w^*_e`` of
    the segment active at ``i``. ``mean_error_star`` is the run-averaged error
    ``w^*_e - w_e(i)`` at each iteration and ``se_error_star`` its standard error.
    """

    label: str
    variant: str
    runs: int
    msd_o: np.ndarray
    msd_star: np.ndarray
    mean_error_star: np.ndarray | None
    sq_error_star: np.ndarray | None
    final: np.ndarray                 # (runs, M_e)
    tail_mean: np.ndarray | None      # (runs, M_e), time average from ``average_from``
    average_from: int | None
    messages: int = 0

    @property
    def horizon(self) -> int:
        return self.msd_o.size - 1

    @property
    def se_error_star(self):
        if self.mean_error_star is None or self.runs < 2:
            return None
        var = (self.sq_error_star - self.runs * self.mean_error_star ** 2) / (self.runs - 1)
        return np.sqrt(np.maximum(var, 0.0) / self.runs)

    def curves(self) -> list[LearningCurve]:
        it = np.arange(self.horizon + 1)
        prov = f"simulation:{self.runs}"
        return [LearningCurve(self.label, "w_o", it, self.msd_o, prov),
                LearningCurve(self.label, "w_star", it, self.msd_star, prov)]


@dataclass
class _Track:
    est: Estimator
    msd_o: np.ndarray
    msd_star: np.ndarray
    mean_err: np.ndarray | None
    sq_err: np.ndarray | None
    finals: list = field(default_factory=list)
    tails: list = field(default_factory=list)
    messages: int = 0


def _metric_weights(ex: ExpandedNetwork) -> np.ndarray:
    """Per-coordinate weights of the network metric ``(1/N) diag{(1/j_k) I}``."""
    return np.repeat(1.0 / (ex.num_agents * ex.cluster_sizes[[s.agent for s in ex.subnodes]]),
                     ex.subnode_dims)


def simulate(expanded: ExpandedNetwork, truth, estimators, runs: int, horizon: int,
             seed: int, w0=None, average_from: int | None = None, first_run: int = 0,
             batch: int = 64, track_mean: bool = False) -> list[SimulationResult]:
    """Run every estimator on the same ``runs`` sample streams for ``horizon`` iterations.

    Parameters
    ----------
    expanded : ExpandedNetwork
    truth : GroundTruth or TimeVaryingTruth
    estimators : sequence of Estimator
    runs, horizon, seed : int
    w0 : array, optional
        Stacked initial agent estimates (default zero), replicated on sub-nodes.
    average_from : int, optional
        Also return the per-run time average of ``w_e(i)`` over
        ``i = average_from..horizon``.
    track_mean : bool
        Accumulate the run mean and second moment of ``w^*_e - w_e(i)``.
    """
    schedule = as_schedule(truth)
    M = int(sum(expanded.dims))
    w0 = np.zeros(M) if w0 is None else np.asarray(w0, dtype=float)
    weights = _metric_weights(expanded)
    segs = []
    for t in schedule.truths:
        w_star = constrained_optimum(t, expanded.constraints)
        segs.append((expanded.replicate(t.stacked_w()), expanded.replicate(w_star)))
    seg_of = np.array([schedule.segment(i) for i in range(horizon + 1)]) \
        if len(segs) > 1 else np.zeros(horizon + 1, dtype=int)
    Me = expanded.size
    tracks = [_Track(e, np.zeros(horizon + 1), np.zeros(horizon + 1),
                     np.zeros((horizon + 1, Me)) if track_mean else None,
                     np.zeros((horizon + 1, Me)) if track_mean else None)
              for e in estimators]
    # overflow on the way to a divergence is reported by check_divergence below
    with np.errstate(over="ignore", invalid="ignore"):
        for r0 in range(0, runs, batch):
            nr = min(batch, runs - r0)
            stream = SampleStream(schedule, RngPolicy(seed), nr, first_run + r0)
            states = [tr.est.init(w0, nr) for tr in tracks]

            def record(i, tr, st):
                we = tr.est.extended(st)
                wo, ws = segs[seg_of[i]]
                eo = wo - we
                es = ws - we
                tr.msd_o[i] += np.sum(eo * eo * weights)
                tr.msd_star[i] += np.sum(es * es * weights)
                if tr.mean_err is not None:
                    tr.mean_err[i] += es.sum(axis=0)
                    tr.sq_err[i] += (es * es).sum(axis=0)
                return we

            tail = [np.zeros((nr, Me)) for _ in tracks]
            for tr, st, acc in zip(tracks, states, tail):
                we = record(0, tr, st)
                if average_from is not None and average_from <= 0:
                    acc += we
            i = 0
            cs = stream.policy.chunk_size
            while i < horizon:
                n = min(cs - i % cs, horizon - i)
                x, d = stream.block(i, n)
                for tr, st, acc in zip(tracks, states, tail):
                    for t in range(n):
                        tr.est.step(st, x[:, t], d[:, t])
                        we = record(i + t + 1, tr, st)
                        if average_from is not None and i + t + 1 >= average_from:
                            acc += we
                    check_divergence(st)
                i += n
            for tr, st, acc in zip(tracks, states, tail):
                tr.finals.append(tr.est.extended(st).copy())
                if average_from is not None:
                    tr.tails.append(acc / (horizon - max(average_from, 0) + 1))
                tr.messages = st.messages
    out = []
    for tr in tracks:
        mean = sq = None
        if tr.mean_err is not None:
            mean, sq = tr.mean_err / runs, tr.sq_err
        out.append(SimulationResult(
            tr.est.label, tr.est.variant, runs, tr.msd_o / runs, tr.msd_star / runs, mean, sq,
            np.concatenate(tr.finals), np.concatenate(tr.tails) if tr.tails else None,
            average_from, tr.messages))
    return out
