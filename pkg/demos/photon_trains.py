"""Photon trains: how many photons in a row can the interface deliver?

Builds a synthetic run of 30,000 sequences of 15 generation attempts with a
realistic per-attempt detection probability, reduces it to per-slot and
consecutive-detection statistics, and fits the geometric law p^n.  The fit
diagnostics distinguish truly independent attempts from drifting ones: a
second data set whose slot probability decays one percent per slot is
flagged.

Produces photon_trains.png.
"""

import math
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ioncavity.analysis import TimeTagSet, fit_geometric, train_statistics

OUT = pathlib.Path(__file__).with_name("output")

N_SLOTS = 15
PULSE_US = 200.0
GAP_US = 60.0


def synthetic_run(rng, attempts, p_slots):
    windows = [(i * (PULSE_US + GAP_US), i * (PULSE_US + GAP_US) + PULSE_US)
               for i in range(N_SLOTS)]
    times, idx = [], []
    for a in range(attempts):
        for (lo, hi), p in zip(windows, p_slots):
            if rng.random() < p:
                times.append(rng.uniform(lo, hi))
                idx.append(a)
    tags = TimeTagSet(attempts=attempts, times=np.array(times),
                      attempt_index=np.array(idx),
                      span=(0.0, N_SLOTS * (PULSE_US + GAP_US)))
    return tags, windows


def main():
    OUT.mkdir(exist_ok=True)
    rng = np.random.default_rng(55)

    tags, windows = synthetic_run(rng, 30_000, [0.474] * N_SLOTS)
    stats = train_statistics(tags, windows)
    fit = fit_geometric(stats)
    print(f"mean per-slot detection probability: {stats.p_slot.mean():.4f}")
    print(f"geometric fit: p = {fit.p:.4f} +- {fit.stderr:.4f}  "
          f"(chi2/dof = {fit.reduced_chi2:.2f}, "
          f"slot chi2 = {fit.slot_chi2:.2f}, ok = {fit.geometric_ok})")
    n15 = stats.p_consecutive[-1] * stats.attempts
    print(f"full trains of 15 in this run: {n15:.0f}")

    drift_tags, _ = synthetic_run(np.random.default_rng(7), 30_000,
                                  [0.474 * 0.99**i for i in range(N_SLOTS)])
    drift_fit = fit_geometric(train_statistics(drift_tags, windows))
    print(f"drifting data set: slot chi2 = {drift_fit.slot_chi2:.1f}, "
          f"flagged non-geometric = {not drift_fit.geometric_ok}")

    n = np.arange(1, N_SLOTS + 1)
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    ax.semilogy(n, stats.p_consecutive, "o", label="consecutive detections")
    ax.semilogy(n, fit.p**n, "-", label=f"fit $p^n$, p = {fit.p:.3f}")
    ax.set_xlabel("n (photons in a row, from slot 1)")
    ax.set_ylabel("probability")
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(OUT / "photon_trains.png", dpi=160)
    print(f"figure written to {OUT/'photon_trains.png'}")


if __name__ == "__main__":
    main()
