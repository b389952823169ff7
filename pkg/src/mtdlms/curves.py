"""Learning curves shared by the simulator and the performance models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REFERENCES = ("w_o", "w_star")


def to_db(values):
    """``10 log10`` of a power quantity; zero maps to ``-inf``."""
    v = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(v)


@dataclass(frozen=True, eq=False)
class LearningCurve:
    """MSD values indexed by iteration.

    Parameters
    ----------
    label : str
        Series name, e.g. ``"diffusion-apc"``.
    reference : {"w_o", "w_star"}
        Point the deviation is measured from.
    iterations : (T,) int array
    values : (T,) float array
        Linear MSD values.
    provenance : str
        ``"theory"`` or ``"simulation:<runs>"``.
    """

    label: str
    reference: str
    iterations: np.ndarray
    values: np.ndarray
    provenance: str = "theory"

    def __post_init__(self):
        it = np.asarray(self.iterations, dtype=np.int64)
        v = np.asarray(self.values, dtype=float)
        if it.shape != v.shape or it.ndim != 1:
            raise ValueError("iterations and values must be 1-D arrays of equal length")
        if self.reference not in REFERENCES:
            raise ValueError(f"reference must be one of {REFERENCES}")
        object.__setattr__(self, "iterations", it)
        object.__setattr__(self, "values", v)

    @property
    def db(self) -> np.ndarray:
        return to_db(self.values)

    @property
    def series_label(self) -> str:
        return f"{self.label}|{self.reference}|{self.provenance.split(':')[0]}"

    def at(self, iterations) -> np.ndarray:
        """Values at the requested iterations (must be present)."""
        pos = np.searchsorted(self.iterations, iterations)
        if np.any(pos >= self.iterations.size) or np.any(self.iterations[pos] != iterations):
            raise KeyError("iteration not on this curve")
        return self.values[pos]

    def decimated(self, dense_until=1000, stride=10) -> "LearningCurve":
        """Keep every iteration up to ``dense_until`` and every ``stride``-th afterwards."""
        it = self.iterations
        keep = (it <= dense_until) | (it % stride == 0)
        return LearningCurve(self.label, self.reference, it[keep], self.values[keep],
                             self.provenance)


def max_gap_db(a: LearningCurve, b: LearningCurve) -> float:
    """Largest ``|a - b|`` in dB over the iterations both curves share."""
    common, ia, ib = np.intersect1d(a.iterations, b.iterations, return_indices=True)
    if common.size == 0:
        return float("nan")
    return float(np.max(np.abs(a.db[ia] - b.db[ib])))
