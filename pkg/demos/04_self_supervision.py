"""
Self-supervision losses as measurements
=======================================

Warps a neighboring view into the front camera with ground-truth depth,
evaluates the photometric loss, sweeps the depth scale to show the loss
has its minimum at the true scale, and assembles the weighted total loss.
"""

from rigdepth import (
    LossWeights,
    make_ring_rig,
    photometric_loss,
    preset_scene,
    probe_depth_scale,
    render,
    smoothness_loss,
    total_loss,
    warp_spatial,
)
from rigdepth.metrics import adjacent_pairs

rig = make_ring_rig(6, 90.0, 0.4, 1.5)
scene = preset_scene("boxtown")
bundle = render(type(scene)(scene.primitives, rig, scene.seed))

# One spatial warp: camera 1's image into camera 0's frame.
i, j = 0, 1
warped, mask = warp_spatial(
    bundle.depths[i], bundle.images[j],
    rig.cameras[i].intrinsics, rig.cameras[j].intrinsics, rig.relative_pose(i, j),
)
loss_ij = photometric_loss(warped, bundle.images[i], mask)
print(f"spatial warp cam{j} -> cam{i}: {mask.mean():5.1%} of pixels valid, "
      f"photometric loss {loss_ij:.5f}")

# Depth-scale sweep: the photometric signal picks out the true scale.
print("\nscale   spatial loss")
for s, loss in probe_depth_scale(scene, rig, [0.5, 0.8, 0.9, 1.0, 1.1, 1.25, 2.0]):
    marker = "  <- minimum" if s == 1.0 else ""
    print(f"{s:5.2f}   {loss:.5f}{marker}")

# Total loss with the default weights; consistency terms are external
# plug-ins and default to zero.  Smoothness needs strictly positive depth,
# so evaluate it on the lower (ground) half of the raster where every ray hits.
rows = bundle.depths[0].shape[0]
smooth = smoothness_loss(bundle.depths[0].values[rows // 2:], bundle.images[0][rows // 2:])
parts = {"temporal": 0.0, "spatial": loss_ij, "smoothness": smooth}
print(f"\nsmoothness term: {smooth:.5f}")
print(f"total loss: {total_loss(parts, LossWeights()):.6f} "
      f"(spatial pairs span {len(adjacent_pairs(rig))} orderings)")
