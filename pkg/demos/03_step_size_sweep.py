"""
Steady state and bias against the step size
===========================================

Under an imperfect model the small-step analysis predicts a steady-state
MSD (w.r.t. ``w*``) growing linearly in the step size and a squared bias
growing quadratically: 10 and 20 dB per decade.
"""

import numpy as np

from mtdlms.experiments.metrics import fit_slope
from mtdlms.experiments import build_validation_scenario
from mtdlms.theory import MeanModel, error_model, steady_state_star_msd

sc = build_validation_scenario(seed=0, sigma=0.1)
mus = 2.5e-4 * np.array([1, 10, 100])
for variant in ("apc", "cpc"):
    zs, bs = [], []
    for mu in mus:
        m = error_model(variant, sc.truth, sc.expanded, mu)
        b = MeanModel(m).bias_star
        zs.append(steady_state_star_msd(m))
        bs.append(b @ b)
        print(f"{variant} mu={mu:.1e}: MSD {10 * np.log10(zs[-1]):7.2f} dB, "
              f"|bias|^2 {10 * np.log10(bs[-1]):7.2f} dB")
    print(f"{variant} slopes: {fit_slope(mus, zs):.3f} and {fit_slope(mus, bs):.3f}")
