"""
Similarity-ranked reference selection
=====================================

Scores candidate object images against masked object crops sampled from
rendered frames (mean cosine similarity of embeddings) and picks the
argmax.  The planted true crop beats noise and gradient distractors.
"""

import sys
from pathlib import Path

import numpy as np
from PIL import Image

from mask4d import (
    PlacementTrajectory,
    RigidPlacement,
    SyntheticSceneSpec,
    make_ball_cloud,
    render_sequence,
    synthesize_scene,
)
from mask4d.refselect import masked_object_crop, select_reference_from_dirs

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("./demo_output/refselect")

################################################################################
# Render preview frames with the object composited, plus its masks.

bundle, truth = synthesize_scene(SyntheticSceneSpec(kind="ground-plane"))
cloud = make_ball_cloud(radius=0.18, count=500)
trajectory = PlacementTrajectory.constant(
    RigidPlacement(1.0, np.eye(3), np.array([0.0, 0.2, 2.2])), bundle.frame_count
)
seq = render_sequence(cloud, trajectory, bundle)

frames_dir, masks_dir, cands_dir = root / "frames", root / "masks", root / "candidates"
for d in (frames_dir, masks_dir, cands_dir):
    d.mkdir(parents=True, exist_ok=True)
for t in range(4):
    Image.fromarray(seq.previews[t]).save(frames_dir / f"{t:05d}.png")
    Image.fromarray(seq.masks[t]).save(masks_dir / f"{t:05d}.png")

################################################################################
# Candidates: two distractors plus the true object crop taken from frame 0.

rng = np.random.default_rng(0)
noise = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
ramp = np.tile(np.linspace(0, 255, 24, dtype=np.uint8)[None, :, None], (24, 1, 3))
planted = masked_object_crop(seq.previews[0], seq.masks[0])
Image.fromarray(noise).save(cands_dir / "noise.png")
Image.fromarray(ramp).save(cands_dir / "ramp.png")
Image.fromarray(planted).save(cands_dir / "true_object.png")

################################################################################
# Score with the offline baseline embedder and select the argmax.

result = select_reference_from_dirs(frames_dir, masks_dir, cands_dir)
for name, score in zip(result["candidates"], result["scores"]):
    marker = "  <- selected" if name == result["candidates"][result["selected"]] else ""
    print(f"{name:20s} score {score:+.4f}{marker}")
print(f"\nprovider: {result['provider']}, frames used: {result['frames_used']}")
