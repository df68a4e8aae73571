# # Moments on the Fourier side
#
# Hermite functions are eigenfunctions of the Fourier transform, so Fourier
# moments differ from spatial ones by the factor (-i)^{|k|} (2 pi)^{q/2}.
# Detection converts them back and gives the same answer.

import numpy as np

from hermpio.basis import Box
from hermpio.detect import DetectConfig, detect
from hermpio.moments import MomentSet, PointMass, Scenario, convert_side, moments_from_masses

scene = Scenario(1, (PointMass((-1.0,), 1.0), PointMass((1.0,), -0.8)), Box.cube(-4, 4, 1))
spatial = moments_from_masses(scene, 8)
fourier = convert_side(spatial)
print("first spatial moments:", np.round(spatial.values[:4], 5))
print("first fourier moments:", np.round(fourier.values[:4], 5))

cfg = DetectConfig(8, Box.cube(-4, 4, 1), 0.1, threshold_rel=0.4, linkage_radius=0.5)
print("identical detections:", detect(cfg, spatial).dumps() == detect(cfg, fourier).dumps())

# after a trip through JSON the conversion back may move a value by one ulp
back = convert_side(MomentSet.from_json(fourier.to_json()))
diff = np.abs(back.values - spatial.values)
print("largest difference in ulps:", float((diff / np.spacing(np.abs(spatial.values))).max()))
print("same locations:", np.array_equal(detect(cfg, back).locations, detect(cfg, spatial).locations))
