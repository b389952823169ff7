"""Experiment orchestration: scenario, estimators, simulation and matching theory.

A run is described by a :class:`RunConfig`, usually read from a JSON file::

    {"experiment": "validate",
     "scenario": {"kind": "validation", "seed": 0, "sigma": 0.5},
     "algorithms": ["apc", "cpc", "clms", "nc"],
     "mu": 0.025, "runs": 200, "horizon": 3000, "seed": 1}

``scenario.kind`` is ``validation``, ``flow``, ``poisson`` or ``file`` (with
a ``path`` to a JSON scenario file).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .algorithms import VARIANTS, Estimator
from .curves import LearningCurve, max_gap_db, to_db
from .datagen import TimeVaryingTruth, growing_perturbation_rule, tracking_schedule
from .ensemble import simulate
from .errors import ScenarioError, UnstableModelError, UnsupportedConfiguration
from .experiments import flow as flowx
from .experiments import poisson as poissonx
from .experiments import validation as valx
from .experiments.metrics import constraint_violation, fit_slope, steady_state_estimate
from .scenario_io import load_scenario
from .theory import (F_MAX_SIZE, MeanModel, error_model, grid_transient_msd,
                     steady_state_msd, steady_state_star_msd, transient_msd,
                     transient_msd_schedule)

EXPERIMENTS = ("validate", "flow", "poisson", "sweep")

DEFAULTS = {
    "validate": dict(algorithms=["apc", "cpc", "clms", "nc"], mu=valx.DEFAULT_MU, runs=200,
                     horizon=3000, scenario={"kind": "validation", "seed": 0, "sigma": 0.0}),
    "flow": dict(algorithms=["apc"], mu=flowx.DEFAULT_MU, runs=50, horizon=90_000,
                 scenario={"kind": "flow", "seed": 0}),
    "poisson": dict(algorithms=["apc"], mu=poissonx.DEFAULT_MU, runs=100, horizon=30_000,
                    scenario={"kind": "poisson", "n": poissonx.DEFAULT_N, "seed": 0}),
    "sweep": dict(algorithms=["apc"], mu=2.5e-4, runs=0, horizon=0,
                  scenario={"kind": "validation", "seed": 0, "sigma": 0.1}),
}


@dataclass
class RunConfig:
    """Everything needed to reproduce one experiment."""

    experiment: str
    scenario: dict
    algorithms: list
    mu: float
    runs: int
    horizon: int
    seed: int = 0
    leak: float | None = None
    theory: bool = True
    metric: str = "network"
    options: dict = field(default_factory=dict)
    base_dir: Path | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ScenarioError(f"unknown experiment {self.experiment!r}")
        if self.experiment != "sweep" and (self.runs < 1 or self.horizon < 1):
            raise ScenarioError("runs and horizon must be >= 1")
        if self.runs < 0 or self.horizon < 0:
            raise ScenarioError("runs and horizon must be nonnegative")
        bad = [a for a in self.algorithms if a not in VARIANTS]
        if bad:
            raise ScenarioError(f"unsupported algorithm(s) {bad}; choose from {VARIANTS}")
        if self.metric != "network":
            raise ScenarioError("only the network metric is supported")
        if not self.mu > 0:
            raise ScenarioError("step size must be positive")

    @classmethod
    def from_dict(cls, data: dict, experiment: str | None = None, base_dir=None) -> "RunConfig":
        exp = experiment or data.get("experiment")
        if exp not in EXPERIMENTS:
            raise ScenarioError(f"unknown experiment {exp!r}")
        merged = dict(DEFAULTS[exp])
        merged.update({k: v for k, v in data.items() if k != "experiment"})
        known = {"scenario", "algorithms", "mu", "runs", "horizon", "seed", "leak", "theory",
                 "metric", "options"}
        extra = set(merged) - known
        if extra:
            raise ScenarioError(f"unknown config field(s) {sorted(extra)}")
        try:
            return cls(exp, dict(merged["scenario"]), list(merged["algorithms"]),
                       float(merged["mu"]), int(merged["runs"]), int(merged["horizon"]),
                       int(merged.get("seed", 0)),
                       None if merged.get("leak") is None else float(merged["leak"]),
                       bool(merged.get("theory", True)), str(merged.get("metric", "network")),
                       dict(merged.get("options", {})), base_dir)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"malformed config: {exc}") from None

    @classmethod
    def load(cls, path, experiment=None) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(data, experiment, base_dir=path.parent)


@dataclass
class EnsembleOutput:
    """Curves, summary rows ``(series, metric, value)`` and figure payloads."""

    curves: list
    summary: list
    figures: dict = field(default_factory=dict)
    notices: list = field(default_factory=list)


# -- helpers -----------------------------------------------------------------------


def _estimators(cfg, expanded, leak):
    return [Estimator(v, expanded, cfg.mu, leak) for v in cfg.algorithms]


def _theory_variant(v):
    return "apc" if v == "reduced" else v


def _summarize_sim(res, horizon, rows, sim_curves):
    ss = {}
    for c in res.curves():
        est, start, settled = steady_state_estimate(c.values, horizon)
        rows.append((c.series_label, "steady_state_db", float(to_db(est))))
        if not settled:
            rows.append((c.series_label, "steady_state_settled", 0.0))
        ss[c.reference] = est
        sim_curves.append(c)
    return ss


def _gap_rows(label, theory_curves, sim_curves, rows):
    for tc in theory_curves:
        for sc in sim_curves:
            if sc.label == label and sc.reference == tc.reference:
                rows.append((tc.series_label, "max_gap_db", max_gap_db(tc, sc)))


def _scenario_from_config(cfg: RunConfig):
    spec = dict(cfg.scenario)
    kind = spec.pop("kind", "validation")
    seed = int(spec.pop("seed", cfg.seed))
    try:
        if kind == "validation":
            return "validation", valx.build_validation_scenario(seed=seed, **spec)
        if kind == "flow":
            arcs_path = spec.pop("arcs", None)
            arcs = sink = None
            if arcs_path is not None:
                p = Path(arcs_path)
                if cfg.base_dir is not None and not p.is_absolute():
                    p = cfg.base_dir / p
                arcs, sink = flowx.load_arcs(p)
            return "flow", flowx.build_flow_scenario(arcs, seed=seed, sink=sink, **spec)
        if kind == "poisson":
            return "poisson", poissonx.build_poisson_scenario(seed=seed, **spec)
        if kind == "file":
            p = Path(spec["path"])
            if cfg.base_dir is not None and not p.is_absolute():
                p = cfg.base_dir / p
            return "file", load_scenario(p)
    except TypeError as exc:
        raise ScenarioError(f"bad scenario parameters: {exc}") from None
    raise ScenarioError(f"unknown scenario kind {kind!r}")


# -- experiments --------------------------------------------------------------------


def _run_generic(cfg, sc, out: EnsembleOutput, schedule=None, leak=None):
    """Simulate ``cfg.algorithms`` on ``sc`` and pair every curve with its theory."""
    ex, truth = sc.expanded, sc.truth
    leak = truth.leak if leak is None else leak
    schedule = schedule or TimeVaryingTruth.stationary(truth)
    tail = max(1000, cfg.horizon // 10)
    avg_from = max(cfg.horizon - tail, 0)
    results = simulate(ex, schedule, _estimators(cfg, ex, leak), cfg.runs, cfg.horizon,
                       cfg.seed, average_from=avg_from)
    sims = []
    for res in results:
        _summarize_sim(res, cfg.horizon, out.summary, sims)
        est = res.tail_mean.mean(axis=0)
        v = constraint_violation(est, ex)
        lbl = f"{res.label}|sim"
        out.summary += [(lbl, "violation_total", v.total), (lbl, "violation_original", v.original),
                        (lbl, "violation_agreement", v.agreement)]
        if res.variant in ("apc", "reduced"):
            out.summary.append((lbl, "messages_per_iteration", res.messages / cfg.horizon))
    out.curves += sims
    if cfg.theory:
        for res in results:
            try:
                tcs = _theory_curves(cfg, res.variant, res.label, schedule, ex, leak, out)
            except (UnsupportedConfiguration, UnstableModelError) as exc:
                out.notices.append(f"{res.label}: simulation only ({exc})")
                continue
            out.curves += tcs
            _gap_rows(res.label, tcs, sims, out.summary)
    return results


def _theory_curves(cfg, variant, label, schedule, ex, leak, out):
    models = [error_model(_theory_variant(variant), t, ex, cfg.mu, leak)
              for t in schedule.truths]
    m = models[0]
    curves = []
    if not m.gaussian and len(models) == 1 and m.size > F_MAX_SIZE:
        step = max(10, 10 * int(round(cfg.horizon / 3000)))
        grid = np.arange(0, cfg.horizon + 1, step)
        for ref in ("w_o", "w_star"):
            c = grid_transient_msd(m, grid, reference=ref, label=label)
            curves.append(c)
    else:
        if m.gaussian and m.size > F_MAX_SIZE:
            out.notices.append(f"{label}: M_e = {m.size} > {F_MAX_SIZE}; F is not formed, "
                               "theory from the matrix-free moment recursion")
        for ref in ("w_o", "w_star"):
            if len(models) == 1:
                c = transient_msd(m, horizon=cfg.horizon, reference=ref, label=label)
            else:
                c = transient_msd_schedule(models, schedule.starts, cfg.horizon,
                                           reference=ref, label=label)
            curves.append(c)
    last = models[-1]
    for c in curves:
        ss = steady_state_msd(last) if c.reference == "w_o" else steady_state_star_msd(last)
        out.summary.append((c.series_label, "steady_state_db", float(to_db(ss))))
    bs = MeanModel(last).bias_star
    out.summary.append((f"{label}|theory", "bias_star_sq", float(bs @ bs)))
    return curves


def _run_validate(cfg, out):
    kind, sc = _scenario_from_config(cfg)
    schedule = None
    opt = cfg.options
    if "tracking_sigmas" in opt:
        every = int(opt.get("tracking_every", 500))
        rules = growing_perturbation_rule(sc.truth, opt["tracking_sigmas"])
        schedule = tracking_schedule(sc.truth, [(every * (j + 1), r) for j, r in enumerate(rules)],
                                     seed=cfg.seed)
    _run_generic(cfg, sc, out, schedule, cfg.leak)
    out.figures["msd"] = True


def _run_flow(cfg, out):
    kind, fs = _scenario_from_config(cfg)
    if kind != "flow":
        raise ScenarioError("the flow experiment needs a flow scenario")
    change = int(cfg.options.get("change_at", flowx.CHANGE_POINT))
    second = fs
    if 0 < change < cfg.horizon:
        schedule, second = flowx.tracking_flow(fs, cfg.scenario.get("seed", cfg.seed), change)
    else:
        schedule = TimeVaryingTruth.stationary(fs.scenario.truth)
    leak = fs.eta if cfg.leak is None else cfg.leak
    results = _run_generic(cfg, fs.scenario, out, schedule, leak)
    res = results[0]
    flows_est = second.flows(fs.scenario.expanded.cluster_average(res.tail_mean.mean(axis=0)))
    oracle = flowx.flow_oracle(second)
    out.figures["flows"] = (fs.arcs, oracle, flows_est)
    out.summary.append((f"{res.label}|sim", "max_flow_error", float(np.max(np.abs(flows_est - oracle)))))
    D, b = fs.scenario.constraints.stacked()
    w_bar = fs.scenario.expanded.cluster_average(res.tail_mean.mean(axis=0))
    out.summary.append((f"{res.label}|sim", "max_antisymmetry_residual",
                        float(np.max(np.abs(D @ w_bar + b)))))
    out.figures["msd"] = True


def _run_poisson(cfg, out):
    kind, ps = _scenario_from_config(cfg)
    if kind != "poisson":
        raise ScenarioError("the poisson experiment needs a poisson scenario")
    results = _run_generic(cfg, ps.scenario, out)
    res = results[0]
    est = ps.field(ps.scenario.expanded.cluster_average(res.tail_mean.mean(axis=0)))
    ref = ps.discrete_solution()
    out.figures["fields"] = (ps.true_field(), est, ref)
    out.summary.append((f"{res.label}|sim", "max_field_error", float(np.max(np.abs(est - ref)))))
    out.figures["msd"] = True


def _run_sweep(cfg, out):
    kind, sc = _scenario_from_config(cfg)
    factors = cfg.options.get("factors", [1, 10, 100])
    mus = [cfg.mu * f for f in factors]
    variant = _theory_variant(cfg.algorithms[0])
    zs, bs = [], []
    label = Estimator(cfg.algorithms[0], sc.expanded, cfg.mu).label
    for mu in mus:
        m = error_model(variant, sc.truth, sc.expanded, mu, cfg.leak)
        z = steady_state_star_msd(m)
        b = MeanModel(m).bias_star
        zs.append(z)
        bs.append(float(b @ b))
        tag = f"{label}@mu={mu:.6g}|theory"
        out.summary += [(tag, "steady_state_star_db", float(to_db(z))),
                        (tag, "bias_star_sq_db", float(to_db(bs[-1])))]
        if cfg.runs > 0 and cfg.horizon > 0:
            sub = replace(cfg, mu=mu, algorithms=cfg.algorithms[:1], theory=False)
            res = simulate(sc.expanded, sc.truth, _estimators(sub, sc.expanded, sc.truth.leak),
                           cfg.runs, cfg.horizon, cfg.seed)[0]
            for c in res.curves():
                c = LearningCurve(f"{label}@mu={mu:.6g}", c.reference, c.iterations, c.values,
                                  c.provenance)
                est, _, _ = steady_state_estimate(c.values, cfg.horizon)
                out.summary.append((c.series_label, "steady_state_db", float(to_db(est))))
                out.curves.append(c)
    out.summary += [(f"{label}|theory", "slope_steady_state_star", fit_slope(mus, zs)),
                    (f"{label}|theory", "slope_bias_star_sq", fit_slope(mus, bs))]
    out.figures["sweep"] = (mus, zs, bs)
    if out.curves:
        out.figures["msd"] = True


def run_ensemble(cfg: RunConfig) -> EnsembleOutput:
    """Run ``cfg`` and return curves plus summary; raises on divergence."""
    out = EnsembleOutput([], [])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        {"validate": _run_validate, "flow": _run_flow, "poisson": _run_poisson,
         "sweep": _run_sweep}[cfg.experiment](cfg, out)
    for n in out.notices:
        out.summary.append(("notice", n, float("nan")))
    return out
