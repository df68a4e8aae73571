# # A plane of grouped spikes
#
# A 2x2 pattern of groups, three spikes each, is recovered from its moments
# and the recovered spikes are partitioned into groups by single linkage.
# Each group's template lists its members' locations and amplitudes.

import json
import time

from hermpio.detect import DetectConfig, detect
from hermpio.group import group_report, group_spikes, grid_of_groups
from hermpio.moments import moments_from_masses

scene, labels = grid_of_groups(2, 2, 3, pitch=4.0, spread=0.9, min_separation=1.0, seed=0)
print("true spikes:", len(scene.masses), "in box", scene.box.to_json())

t = time.perf_counter()
cfg = DetectConfig(8, scene.box, 0.05, threshold_rel=0.4, linkage_radius=0.3)
result = detect(cfg, moments_from_masses(scene, 8))
print(f"recovered {result.count} spikes in {time.perf_counter() - t:.2f}s")

groups = group_spikes(result.spikes, 1.8)
report = group_report(groups)
print("groups:", report["group_count"], "sizes:", [g.size for g in groups])
print(json.dumps(report["groups"][0]))
