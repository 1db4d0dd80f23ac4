"""The navigation ball: isointensity circles as a control signal.

Renders the unit sphere under a reference and several offset lightings, draws
both circles (reference blue, current red), and tabulates how the cap area
tracks strength and the center tracks direction.
"""

import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from PIL import Image

from lightrec import LightingVector, SphericalPose, compose_ball, nav_direction
from lightrec.navigation import draw_ball_png

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)


def light(r, theta_deg, phi_deg, power=49.0):
    pose = SphericalPose(r, math.radians(theta_deg), math.radians(phi_deg))
    return LightingVector.from_pose(pose, power / r**2)


def main():
    reference = light(7.0, -70.0, 45.0)
    cases = [
        ("coincident", light(7.0, -70.0, 45.0)),
        ("too far (weaker)", light(8.5, -70.0, 45.0)),
        ("too close (stronger)", light(6.0, -70.0, 45.0)),
        ("azimuth off by +25 deg", light(7.0, -45.0, 45.0)),
        ("polar off by -15 deg", light(7.0, -70.0, 30.0)),
        ("everything off", light(8.0, -30.0, 60.0)),
    ]
    fig, axes = plt.subplots(2, 3, figsize=(12, 8))
    print(f"{'case':>24} | goodness |  dA/pi  | m (area, azim, polar)")
    for ax, (name, current) in zip(axes.ravel(), cases):
        ball = compose_ball(current, reference, 384)
        tmp = os.path.join(OUT, "_ball_tmp.png")
        draw_ball_png(ball, tmp)
        ax.imshow(np.asarray(Image.open(tmp)))
        ax.set_title(f"{name}\ngoodness {ball.goodness:.3f}", fontsize=9)
        ax.axis("off")
        m = nav_direction(ball)
        d_area = (ball.reference.area - (ball.current.area if ball.current else 0.0)) / math.pi
        print(f"{name:>24} |  {ball.goodness:.4f}  | {d_area:+.4f} | {m}")
    os.remove(os.path.join(OUT, "_ball_tmp.png"))
    fig.tight_layout()
    path = os.path.join(OUT, "navigation_balls.png")
    fig.savefig(path, dpi=130)
    print(f"wrote {path}")

    # the radial relation behind the area axis: iso = |l| sqrt(1 - A/pi)
    from lightrec import extract_sic_analytic

    sic = extract_sic_analytic(reference, 0.5)
    back = reference.magnitude * math.sqrt(1.0 - sic.area / math.pi)
    print(f"radial relation check: iso 0.5 -> area {sic.area:.6f} -> iso {back:.12f}")


if __name__ == "__main__":
    main()
