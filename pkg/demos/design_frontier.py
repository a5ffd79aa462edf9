"""What would it take to push collection and purity above 0.9?

Compares the coupling-scheme ladder available on the present cavity (better
polarization projection, superradiant two- and three-ion states) with three
future-system parameter combinations (ten times lower mirror loss, a three
times smaller waist, ten superradiantly coupled ions).  The ladder mostly
buys reexcitation-free purity; moving past the escape-probability ceiling
requires changing the cavity itself.

Produces design_frontier.png.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ioncavity import (CavityModel, EmitterModel, evaluate_future, p_escape,
                       scheme_ladder, scheme_rates)

OUT = pathlib.Path(__file__).with_name("output")


def main():
    OUT.mkdir(exist_ok=True)
    emitter = EmitterModel.default()
    cavity = CavityModel.from_parameters(19.906e-3, 9.984e-3, 854e-9,
                                         2.9e-6, 90e-6, 23e-6)
    scheme = scheme_rates(emitter, (-1.5, -2.5))

    ladder = scheme_ladder(scheme, cavity)
    futures = [evaluate_future(name, scheme, cavity)
               for name in ("low-loss", "small-waist", "ten-ion")]
    esc = p_escape(cavity.mirrors.t2, cavity.mirrors.alpha_loss)

    print("scheme       P_bound   pure fraction")
    for p in ladder + futures:
        print(f"  {p.label:<11} {p.p_bound:.3f}     {p.pure_fraction:.3f}")
    print(f"escape-probability ceiling of the present cavity: {esc:.3f}")

    points = ladder + futures
    labels = [p.label for p in points]
    x = np.arange(len(points))
    width = 0.38
    fig, ax = plt.subplots(figsize=(7.2, 4.0))
    ax.bar(x - width / 2, [p.p_bound for p in points], width,
           label=r"$P_S$ bound")
    ax.bar(x + width / 2, [p.pure_fraction for p in points], width,
           label="reexcitation-free fraction")
    ax.axhline(esc, color="grey", ls="--", lw=1)
    ax.annotate("present-cavity escape ceiling", (0.02, esc + 0.01),
                fontsize=8, color="grey")
    ax.set_xticks(x, labels, fontsize=9)
    ax.set_ylim(0, 1)
    ax.legend(fontsize=9, loc="lower right")
    fig.tight_layout()
    fig.savefig(OUT / "design_frontier.png", dpi=160)
    print(f"figure written to {OUT/'design_frontier.png'}")


if __name__ == "__main__":
    main()
