"""A full automatic relocation run, iteration by iteration.

A near-point source starts far from the reference pose; the controller sees
only rendered frames, estimates the lighting, reads the ball, and bisects its
way back.  Plots goodness, per-axis magnitudes and the pose trace.
"""

import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lightrec import SceneSpec, SessionConfig, SphericalPose, run_to_termination, start_session

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)


def main():
    ref = SphericalPose(7.0, math.radians(-70.0), math.radians(45.0))
    init = SphericalPose(9.5, math.radians(55.0), math.radians(20.0))
    cfg = SessionConfig(scene=SceneSpec("relief", 128), seed=1)
    session = start_session(cfg.scene, "npl", ref, init, cfg)
    report = run_to_termination(session)

    rows = report.trajectory
    print(f"status {report.status.value} after {report.iterations} iterations, "
          f"best goodness {report.best_goodness:.4f}")
    print(f"final image vs reference: {report.final_metrics.to_json()}")
    for e in report.events:
        print("event:", e)

    t = [r.t for r in rows]
    fig, axes = plt.subplots(1, 3, figsize=(14, 4))
    axes[0].plot(t, [r.goodness for r in rows], marker=".")
    axes[0].axhline(cfg.eta, color="gray", ls="--", lw=0.8)
    axes[0].set_title("goodness (cap IoU)")
    axes[0].set_xlabel("iteration")

    axes[1].semilogy(t, [r.lambda_r for r in rows], label="radial")
    axes[1].semilogy(t, [r.lambda_theta for r in rows], label="azimuth (deg)")
    axes[1].semilogy(t, [r.lambda_phi for r in rows], label="polar (deg)")
    axes[1].set_title("bisection magnitudes")
    axes[1].set_xlabel("iteration")
    axes[1].legend(fontsize=8)

    axes[2].plot(t, [r.r for r in rows], label="r")
    axes[2].plot(t, [r.theta_deg for r in rows], label="theta (deg)")
    axes[2].plot(t, [r.phi_deg for r in rows], label="phi (deg)")
    for v, name in ((ref.r, "r*"), (math.degrees(ref.theta), "theta*"), (math.degrees(ref.phi), "phi*")):
        axes[2].axhline(v, color="gray", lw=0.6, ls=":")
    axes[2].set_title("true source pose (simulator log)")
    axes[2].set_xlabel("iteration")
    axes[2].legend(fontsize=8)
    fig.tight_layout()
    path = os.path.join(OUT, "auto_relocation.png")
    fig.savefig(path, dpi=130)
    print(f"wrote {path}")

    # side-by-side frames
    fig2, axes2 = plt.subplots(1, 3, figsize=(10.5, 3.6))
    peak = session.ref_image.data.max()
    for ax, (img, title) in zip(
        axes2,
        [
            (session.ref_image.data, "reference"),
            (session.best_image.data, "best recurrence"),
            (np.abs(session.best_image.data - session.ref_image.data) * 10, "abs diff x10"),
        ],
    ):
        ax.imshow(img, cmap="gray", vmin=0, vmax=peak)
        ax.set_title(title, fontsize=9)
        ax.axis("off")
    fig2.tight_layout()
    path2 = os.path.join(OUT, "auto_relocation_frames.png")
    fig2.savefig(path2, dpi=130)
    print(f"wrote {path2}")


if __name__ == "__main__":
    main()
