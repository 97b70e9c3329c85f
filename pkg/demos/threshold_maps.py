"""Threshold surfaces of the fig10 recipe and how they respond to the error cost.

Prints b_th,1 as a table over (b2, g2) at the worst and best g1, first for
the bundled parameters and then with eta_err raised, followed by the long-run
metrics of each policy. A larger error cost makes transmitting through a poor
channel dearer, so thresholds rise where the opposite channel is bad.
"""
import dataclasses

import numpy as np

from nctwrc import build_model, extract_thresholds, stationary_metrics, value_iteration
from nctwrc.experiments import load_spec


def show(surface, L):
    th1 = surface.th1  # (b2, g1, g2), g 0-based
    K1 = th1.shape[1]
    for g1 in (0, K1 - 1):
        print(f"  b_th,1 at g1={g1 + 1} (rows b2=0..{L + 1}, columns g2=1..{th1.shape[2]}; {L + 2} = never)")
        for b2 in range(th1.shape[0]):
            print("    " + " ".join(f"{int(v):2d}" for v in th1[b2, g1]))


def main():
    base = load_spec("fig10").params
    for eta in (base.eta_err, 3.0, 6.0):
        params = dataclasses.replace(base, eta_err=eta)
        model = build_model(params)
        res = value_iteration(model)
        surf = extract_thresholds(res.policy)
        print(f"eta_err = {eta}: {res.iterations} sweeps, "
              f"nonincreasing in (b2,g2): {surf.check_nonincreasing(1, ('b2', 'g2')).passed}")
        show(surf, params.L1)
        m = stationary_metrics(model, res.policy)
        print(f"  mean held {m.held_total:.3f}  transmissions/epoch {m.transmissions:.3f}  "
              f"coded broadcasts/epoch {m.coded_broadcasts:.3f}  errors {np.sum(m.errors):.4f}\n")


if __name__ == "__main__":
    main()
