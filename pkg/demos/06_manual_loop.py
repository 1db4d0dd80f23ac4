"""Manual mode: a scripted operator follows the advisory arrows.

The controller computes the per-axis direction as advice only; the "human"
(a script here) applies fixed-size nudges along it.  Magnitude scheduling is
deliberately absent, exactly like holding the lamp by hand.
"""

import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lightrec import SceneSpec, SessionConfig, SphericalPose, start_session, step_manual

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)


def main():
    ref = SphericalPose(7.0, math.radians(-70.0), math.radians(45.0))
    init = SphericalPose(9.0, math.radians(40.0), math.radians(20.0))
    cfg = SessionConfig(scene=SceneSpec("bumpy", 96, 7), seed=2)
    session = start_session(cfg.scene, "npl", ref, init, cfg)

    steps = np.array([0.3, math.radians(2.0), math.radians(2.0)])
    series = [session.last_ball.goodness]
    while session.status.value == "running" and session.last_ball.goodness <= 0.95 and session.t < 200:
        step_manual(session, session.advisory_direction() * steps)
        series.append(session.last_ball.goodness)

    print(f"reached goodness {series[-1]:.4f} in {session.t} nudges")
    print(f"final pose: r={session.source.pose.r:.2f}, "
          f"theta={math.degrees(session.source.pose.theta):.1f} deg, "
          f"phi={math.degrees(session.source.pose.phi):.1f} deg "
          f"(reference r={ref.r}, theta={math.degrees(ref.theta):.0f}, phi={math.degrees(ref.phi):.0f})")

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(series, marker=".")
    ax.set_xlabel("nudge")
    ax.set_ylabel("goodness")
    ax.set_title("scripted operator following the advisory direction")
    fig.tight_layout()
    path = os.path.join(OUT, "manual_loop.png")
    fig.savefig(path, dpi=130)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
