"""Scalar summaries of estimates and learning curves."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..curves import to_db
from ..network import ExpandedNetwork


class Violation(NamedTuple):
    total: float
    original: float   # |D_e w_e + b|^2
    agreement: float  # |H w_e|^2


def constraint_violation(w_e, expanded: ExpandedNetwork) -> Violation:
    """``|D'_e w_e + b'|^2`` split into its original-constraint and agreement parts.

    Leading axes of ``w_e`` (e.g. runs) are averaged over.
    """
    w_e = np.asarray(w_e, dtype=float)
    res = w_e @ expanded.D_e.T + expanded.b
    agr = w_e @ expanded.H.T
    orig = float(np.mean(np.sum(res ** 2, axis=-1)))
    agree = float(np.mean(np.sum(agr ** 2, axis=-1)))
    return Violation(orig + agree, orig, agree)


def burn_in(values, window: int = 500, max_slope_db: float = 1e-3) -> int:
    """First iteration after which the dB curve's fitted slope stays below ``max_slope_db``.

    The slope is the least-squares slope over a sliding ``window``. Returns
    ``len(values)`` when the curve never settles.
    """
    v = to_db(np.maximum(np.asarray(values, dtype=float), 1e-300))
    n = v.size
    if n < window:
        return n
    t = np.arange(window) - (window - 1) / 2.0
    denom = t @ t
    # sliding-window regression slopes via cumulative sums
    c = np.concatenate([[0.0], np.cumsum(v)])
    ci = np.concatenate([[0.0], np.cumsum(v * np.arange(n))])
    starts = np.arange(n - window + 1)
    s_y = c[starts + window] - c[starts]
    s_iy = ci[starts + window] - ci[starts] - starts * s_y
    slopes = (s_iy - (window - 1) / 2.0 * s_y) / denom
    bad = np.abs(slopes) >= max_slope_db
    if not bad.any():
        return 0
    last_bad = int(np.flatnonzero(bad)[-1])
    return min(last_bad + 1, n)


def steady_state_estimate(values, horizon: int | None = None, window: int = 500,
                          max_slope_db: float = 1e-3):
    """Average of the last ``max(1000, horizon/10)`` values after the burn-in.

    Returns ``(estimate, first iteration used, settled)``. When the curve
    never settles the tail average is still returned with ``settled=False``.
    """
    v = np.asarray(values, dtype=float)
    horizon = v.size if horizon is None else horizon
    tail = max(1000, horizon // 10)
    b = burn_in(v, window, max_slope_db)
    start = max(v.size - tail, 0)
    settled = b <= start
    start = max(start, min(b, v.size - 1)) if settled else start
    return float(np.mean(v[start:])), int(start), bool(settled)


def fit_slope(x, y) -> float:
    """Least-squares slope of ``log10 y`` against ``log10 x``."""
    lx, ly = np.log10(np.asarray(x, float)), np.log10(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])
