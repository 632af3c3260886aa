"""
Perturbation gallery
====================

Apply each observation-side perturbation family to the same simulator
frame and look at what the policy would actually receive.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from loopbench import (
    ObservationPipeline, PerturbationSpec, SeedTree, load_route_suite,
)
from loopbench.core import Action
from loopbench.world import World

# Drive straight for a few seconds on a crossing route so that an actor
# is inside the camera frustum when we grab the frame.

routes = load_route_suite()
route = next(r for r in routes if r.route_id == "cross_01")
world = World(route)
for _ in range(170):
    world.step(Action(throttle=0.6, brake=0.0, steer=0.0))
obs = world.observe()
print("frame stamp:", obs.stamp, " ego speed: %.2f m/s" % obs.speed)

# Each pipeline owns its own derived random streams, all hanging off the
# same per-route seed tree, so families never share random state.

tree = SeedTree(0, (route.route_id,))


def perturbed(spec):
    pipe = ObservationPipeline(spec, SeedTree(0, (route.route_id,)))
    out, info = pipe.apply(obs)
    return out, info


# Occlusion masks an exact pixel count: ceil(ratio * W * H). A fill of
# 0.9 sits outside the raster's intensity codes, so counting pixels at
# that value recovers the mask size exactly.

occ, _ = perturbed(PerturbationSpec(family="occlusion", mask_ratio=0.5,
                                    mask_fill=0.9))
h, w = obs.camera.shape
masked = int(np.sum(occ.camera == 0.9))
print("occlusion 0.5 masked %d of %d pixels (target %d)"
      % (masked, h * w, -(-5 * h * w // 10)))

occ8, _ = perturbed(PerturbationSpec(family="occlusion", mask_ratio=0.8,
                                     mask_fill=0.9))

# GPS noise leaves the raster untouched and jitters only the position fix.

gps, _ = perturbed(PerturbationSpec(family="gps", gps_std=15.0))
dx = gps.gps[0] - obs.gps[0]
dy = gps.gps[1] - obs.gps[1]
print("gps offset this tick: (%+.2f, %+.2f) m" % (dx, dy))

# Speed noise scales the speedometer multiplicatively; the raster and the
# fix stay intact.

spd, info = perturbed(PerturbationSpec(family="speed", speed_mu=0.5))
print("speedometer: true %.2f -> reported %.2f (eta %.3f)"
      % (obs.speed, spd.speed, info["speed_eta"]))

# A camera burst replays the last frame delivered before onset. Forcing
# an onset at this stamp makes the effect visible in one call: the frame
# the policy sees is the cached one, not the live render.

burst_spec = PerturbationSpec(family="burst", burst_len_ticks=20,
                              forced_starts=(obs.stamp,))
pipe = ObservationPipeline(burst_spec, tree)
prev = world.observe().copy_with(stamp=obs.stamp - 1)
pipe.apply(prev)  # deliver one frame so the cache is warm
stale, info = pipe.apply(obs)
print("burst active:", bool(info.get("burst_active")),
      " cached from tick:", info.get("burst_t_star"))

# Side-by-side gallery.

fig, axes = plt.subplots(1, 4, figsize=(12, 3.2))
panels = [
    ("clean", obs.camera),
    ("occlusion r=0.5", occ.camera),
    ("occlusion r=0.8", occ8.camera),
    ("burst (stale frame)", stale.camera),
]
for ax, (title, img) in zip(axes, panels):
    ax.imshow(img, cmap="gray", vmin=0.0, vmax=1.0)
    ax.set_title(title, fontsize=9)
    ax.set_axis_off()
fig.tight_layout()
fig.savefig("perturbation_gallery.png", dpi=120)
print("wrote perturbation_gallery.png")
