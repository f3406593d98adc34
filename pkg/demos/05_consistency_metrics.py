"""
Depth metrics and multi-view consistency
========================================

Evaluates two synthetic "predictions" against ground truth: one globally
biased (consistent across views) and one with per-view biases (accurate on
average but inconsistent).  The standard metrics barely tell them apart;
the cross-view depth-consistency metric does.
"""

from rigdepth import DepthMap, evaluate, make_ring_rig, preset_scene, render

rig = make_ring_rig(6, 90.0, 0.4, 1.5)
scene = preset_scene("boxtown")
bundle = render(type(scene)(scene.primitives, rig, scene.seed))
gt = bundle.depths


def show(tag, report):
    o = report.overall
    print(f"{tag:12s} abs_rel {o.abs_rel:.4f}  rmse {o.rmse:6.3f} m  "
          f"delta1 {o.delta1:5.1f}%  depth_cons {report.depth_cons:8.4f} m  "
          f"({report.n_correspondences} pairs)")


# (a) one shared 8 percent bias: wrong scale, but views agree with each other
biased = [DepthMap(d.values * 1.08, d.valid) for d in gt]
show("shared bias", evaluate(biased, gt, rig, d_max=250.0))

# (b) alternating per-view biases of the same size: similar per-pixel error,
# far worse agreement between views
factors = [1.08 if k % 2 == 0 else 0.92 for k in range(6)]
skewed = [DepthMap(d.values * f, d.valid) for d, f in zip(gt, factors)]
show("per-view", evaluate(skewed, gt, rig, d_max=250.0))

# (c) perfect predictions for reference
show("perfect", evaluate(gt, gt, rig, d_max=250.0))

print("\nthe per-view variant matches the shared-bias variant on the standard"
      "\nmetrics but is an order of magnitude worse on depth consistency")
