"""
A segmentation oracle with dial-a-failure error modes
=====================================================

The oracle segments a registered frame from ground truth, then corrupts
the answer the way learned models do: merging neighbors, splitting along
part seams, eroding boundaries, and dropping instances from the top-down
pass. Error rates are exact config knobs, so every downstream statistic
has a known truth to be checked against.
"""

import numpy as np

from uncseg.render import render
from uncseg.scene import GenConfig, generate_scene
from uncseg.segmenter import OracleConfig, OracleEventLog, OracleSegmenter

scene = generate_scene(GenConfig(), np.random.default_rng(3))
obs = render(scene, 0.005)
pixel = next(tuple(p) for p in np.argwhere(obs.labels == scene.bodies[0].id))
true_area = int((obs.labels == scene.bodies[0].id).sum())
print(f"{len(scene.bodies)} bodies; prompting body {scene.bodies[0].id} "
      f"(true area {true_area} px)")

# noise-free: every prompt returns the exact instance mask
clean = OracleSegmenter(OracleConfig())
handle = clean.register(scene, obs)
mask = clean.prompt_point(handle, pixel, np.random.default_rng(0))
print(f"noise-free prompt: {mask.area} px (exact: {mask.area == true_area})")

# noisy: merges with a neighbor 40% of the time, boundary jitter 1 px,
# top-down pass finds each instance with probability 0.8
cfg = OracleConfig(p_merge=0.4, boundary_noise=1, td_recall=0.8)
log = OracleEventLog()
noisy = OracleSegmenter(cfg, log=log)
handle = noisy.register(scene, obs)
areas = []
for trial in range(12):
    mask = noisy.prompt_point(handle, pixel, np.random.default_rng(100 + trial))
    areas.append(mask.area)
print("noisy prompt areas:", areas)
print(f"event log: {log.prompts} prompts, {log.merged_masks} merged, "
      f"{log.part_masks} part splits")

# the top-down pass proposes whole-frame instances but misses some
found = noisy.high_precision(handle, np.random.default_rng(44))
print(f"top-down pass with recall {cfg.td_recall}: "
      f"{len(found)} of {len(scene.bodies)} instances "
      f"({log.td_merged_masks} merged)")

# bottom-up seeds cover every body several times over
seeds = noisy.seed_all(handle, np.random.default_rng(45))
print(f"bottom-up seeding: {len(seeds)} masks for {len(scene.bodies)} bodies")
