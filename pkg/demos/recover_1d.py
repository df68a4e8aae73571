# # Recovering two point masses on the line
#
# Two spikes, one positive and one negative, are observed only through their
# Hermite moments of degree < n^2.  Thresholding |T_n| on a coarse lattice,
# clustering the surviving nodes and refining each cluster's maximum
# recovers both locations and their amplitudes.

import numpy as np

from hermpio.basis import Box
from hermpio.detect import DetectConfig, detect
from hermpio.moments import PointMass, Scenario, moments_from_masses

scene = Scenario(1, (PointMass((-1.0,), 1.0), PointMass((1.0,), -0.8)), Box.cube(-4, 4, 1))

for n in (4, 6, 8, 10):
    cfg = DetectConfig(n, Box.cube(-4, 4, 1), 0.1, refine_factor=8, threshold_rel=0.4, linkage_radius=0.5)
    result = detect(cfg, moments_from_masses(scene, n))
    err = np.abs(result.locations - scene.locations).max() if result.count == 2 else np.nan
    print(f"n={n:2d}: found {result.count}, location error {err:.4f}")
    for s in result.spikes:
        print(f"    x = {s.location[0]: .4f}  a = {s.amplitude.real: .4f}")

# the amplitude estimate T_n(x)/Phi_n(x, x) carries the cross-talk from the
# other spike, which shrinks as n grows
