"""JSON scenario files.

Layout (agent indices are 0-based)::

    {
      "dims": [2, 2, ...],
      "constraints": [
        {"members": [0, 3], "blocks": [[[1, 0], [0, 1]], [[-1, 0], [0, -1]]],
         "offset": [0, 0]},
        ...
      ],
      "weights": [[0.5, 0.5], ...],          # optional, per agent c_k
      "combiners": [[[0.5, 0.5], [0.5, 0.5]], ...],   # optional, per agent A_k
      "extra_edges": [[0, 5]],               # optional
      "allow_unconstrained": false,          # optional
      "truth": {
        "w_o": [[...], ...], "R_x": [[[...]]...] or "sigma_x2": [...],
        "sigma_z2": [...], "regressors": [[...], ...] (optional), "leak": 0.0
      },
      "name": "..."
    }

Blocks are dense row-major nested lists. Loading validates every invariant
and reports the first violation, naming the constraint when one is at fault.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ScenarioError
from .network import (Constraint, ConstraintSet, GroundTruth, NetworkTopology, Scenario,
                      expand_network)


def _matrix(obj, what, constraint=None):
    try:
        a = np.array(obj, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{what} is not a numeric array", constraint) from None
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ScenarioError(f"{what} must be a matrix", constraint)
    return a


def scenario_from_dict(data: dict) -> Scenario:
    try:
        dims = tuple(int(m) for m in data["dims"])
        raw = data["constraints"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"missing or malformed field: {exc}") from None
    cons = []
    for p, c in enumerate(raw):
        try:
            members = tuple(int(k) for k in c["members"])
            blocks = tuple(_matrix(B, f"block {i}", p) for i, B in enumerate(c["blocks"]))
            offset = np.array(c.get("offset", np.zeros(blocks[0].shape[0])), dtype=float)
        except (KeyError, TypeError, IndexError) as exc:
            raise ScenarioError(f"malformed entry ({exc})", p) from None
        for k in members:
            if not 0 <= k < len(dims):
                raise ScenarioError(f"member {k} is not an agent", p)
        for k, B in zip(members, blocks):
            if B.shape[1] != dims[k]:
                raise ScenarioError(f"block of agent {k} has {B.shape[1]} columns, "
                                    f"expected {dims[k]}", p)
        cons.append(Constraint(members, blocks, offset))
    cs = _validated_set(dims, cons)
    topo = NetworkTopology.from_constraints(cs, [tuple(e) for e in data.get("extra_edges", [])])
    weights = data.get("weights")
    combiners = data.get("combiners")
    ex = expand_network(topo, cs, weights=None if weights is None else
                        [np.asarray(c, float) for c in weights],
                        combiners=None if combiners is None else
                        [np.asarray(a, float) for a in combiners],
                        allow_unconstrained=bool(data.get("allow_unconstrained", False)))
    truth = truth_from_dict(data["truth"], dims)
    return Scenario(ex, truth, name=str(data.get("name", "scenario")))


def _validated_set(dims, cons):
    # validate one constraint at a time so the first offender is the one reported
    for p in range(len(cons)):
        try:
            ConstraintSet(dims, tuple(cons[:p + 1])).validate()
        except ScenarioError as exc:
            if exc.constraint is None:
                raise ScenarioError(str(exc), p) from None
            raise
    return ConstraintSet(dims, tuple(cons))


def truth_from_dict(t: dict, dims) -> GroundTruth:
    try:
        w = tuple(np.asarray(x, float) for x in t["w_o"])
        sz = np.asarray(t["sigma_z2"], float)
    except KeyError as exc:
        raise ScenarioError(f"truth is missing {exc}") from None
    regs = t.get("regressors")
    if regs is not None:
        return GroundTruth(w, (), sz, regressors=tuple(np.asarray(x, float) for x in regs),
                           leak=float(t.get("leak", 0.0)))
    if "R_x" in t:
        R = tuple(np.atleast_2d(np.asarray(x, float)) for x in t["R_x"])
    elif "sigma_x2" in t:
        R = tuple(s * np.eye(m) for s, m in zip(t["sigma_x2"], dims))
    else:
        raise ScenarioError("truth needs R_x, sigma_x2 or regressors")
    return GroundTruth(w, R, sz, leak=float(t.get("leak", 0.0)))


def scenario_to_dict(sc: Scenario) -> dict:
    ex, tr = sc.expanded, sc.truth
    cons = [{"members": list(c.members), "blocks": [B.tolist() for B in c.blocks],
             "offset": np.asarray(c.offset).tolist()} for c in ex.constraints
            if c.rows > 0]
    truth = {"w_o": [w.tolist() for w in tr.w_o], "sigma_z2": tr.sigma_z2.tolist(),
             "leak": tr.leak}
    if tr.regressors is not None:
        truth["regressors"] = [x.tolist() for x in tr.regressors]
    else:
        truth["R_x"] = [R.tolist() for R in tr.R_x]
    return {"name": sc.name, "dims": list(ex.dims), "constraints": cons,
            "weights": [np.asarray(c).tolist() for c in ex.weights],
            "combiners": [np.asarray(a).tolist() for a in ex.combiners],
            "allow_unconstrained": any(c.rows == 0 for c in ex.constraints),
            "truth": truth}


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
    return scenario_from_dict(data)


def save_scenario(sc: Scenario, path):
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=1) + "\n")
