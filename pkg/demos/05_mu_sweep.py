"""Speed-up rate sweep of the bisection scheduler, pose space only.

Target [60, -70, 80], start [0, 0, 0], initial magnitudes [5, 5, 5]; the step
norm |diag(lambda) m| decays for mu < 2 and never settles for mu >= 2.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from lightrec import simulate_bisection

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)


def main():
    target = np.array([60.0, -70.0, 80.0])
    init = np.zeros(3)
    lam0 = np.array([5.0, 5.0, 5.0])

    fig, ax = plt.subplots(figsize=(7.5, 4.5))
    for mu in (1.0, 1.2, 1.5, 2.0, 2.5):
        trace = simulate_bisection(target, init, lam0, mu, max_iter=500)
        label = f"mu={mu}" + ("" if trace.converged else " (no convergence)")
        ax.semilogy(np.arange(1, len(trace.step_norms) + 1), trace.step_norms, label=label)
        print(
            f"mu={mu}: {'converged in ' + str(trace.iterations) + ' iterations' if trace.converged else 'still moving after 500'}"
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("|diag(lambda) m|")
    ax.set_xlim(0, 160)
    ax.legend(fontsize=8)
    ax.set_title("bisection scheduler: halve on flip, grow by mu otherwise")
    fig.tight_layout()
    path = os.path.join(OUT, "mu_sweep.png")
    fig.savefig(path, dpi=130)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
