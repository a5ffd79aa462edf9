"""How good can photon collection from the ion-cavity system get?

Walks the closed-form collection bound end to end: derive every cavity
quantity from five measured primitives, split the decay rate of the excited
state over the Raman scheme, then trade emission probability against escape
probability as a function of the output-mirror transmission T2.

Produces bounds_vs_t2.png: the bound, its reexcitation-free part and the
escape probability over T2, with the installed mirror and both optima marked.
"""

import math
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ioncavity import (CavityModel, EmitterModel, beta_parameter,
                       bound_for_scheme, p_opt, scheme_rates, sweep_t2,
                       t2_optimal)

OUT = pathlib.Path(__file__).with_name("output")
TWO_PI = 2 * math.pi


def main():
    OUT.mkdir(exist_ok=True)

    emitter = EmitterModel.default()
    cavity = CavityModel.from_parameters(
        length=19.906e-3, mirror_roc=9.984e-3, wavelength=854e-9,
        t1=2.9e-6, t2=90e-6, scatter_absorb=23e-6)
    scheme = scheme_rates(emitter, (-1.5, -2.5))   # V-photon configuration
    ctx = cavity.coupling(scheme)

    print("Derived cavity and coupling quantities")
    print(f"  waist w0             = {cavity.w0*1e6:.2f} um")
    print(f"  free spectral range  = {cavity.fsr/1e6:.1f} MHz")
    print(f"  finesse              = {cavity.finesse/1e3:.1f} x 10^3")
    print(f"  kappa/2pi            = {cavity.kappa/TWO_PI/1e3:.1f} kHz")
    print(f"  g/2pi                = {ctx.g/TWO_PI/1e6:.3f} MHz")
    print(f"  cooperativity C      = {ctx.cooperativity:.3f}")

    full = bound_for_scheme(scheme, cavity)
    pure = bound_for_scheme(scheme, cavity, variant="pure")
    print("\nAt the installed T2 = 90 ppm")
    print(f"  P_in  = {full.p_in:.3f}   (emission into the cavity)")
    print(f"  P_esc = {full.p_esc:.3f}   (escape through the output mirror)")
    print(f"  P_S   = {full.p_s:.3f}   (collection bound)")
    print(f"  reexcitation-free fraction = {pure.p_s/full.p_s:.2f}")

    alpha = cavity.mirrors.alpha_loss
    t_opt = t2_optimal(beta_parameter(scheme), alpha, cavity.a_tilde)
    t_opt_pure = t2_optimal(beta_parameter(scheme, "pure"), alpha,
                            cavity.a_tilde)
    print("\nOptimal output transmissions")
    print(f"  T2_opt       = {t_opt*1e6:.0f} ppm "
          f"-> P_S = {p_opt(beta_parameter(scheme), alpha, cavity.a_tilde):.3f}")
    print(f"  T2_opt(pure) = {t_opt_pure*1e6:.0f} ppm "
          f"-> P_pure = {p_opt(beta_parameter(scheme, 'pure'), alpha, cavity.a_tilde):.3f}")

    curve = sweep_t2(scheme, cavity, 5e-6, 2000e-6, 400)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    x_ppm = curve.x * 1e6
    ax.semilogx(x_ppm, curve.p_bound, label=r"$P_S$ bound")
    ax.semilogx(x_ppm, curve.p_pure, label=r"$P_S$ without reexcitation")
    ax.semilogx(x_ppm, curve.p_esc, "--", color="grey",
                label=r"$P_{esc}$")
    ax.semilogx(x_ppm, curve.p_in, ":", color="grey", label=r"$P_{in}$")
    ax.axvline(90, color="k", lw=0.8, alpha=0.6)
    ax.annotate("installed", (90, 0.05), rotation=90, fontsize=8)
    for t, lbl in ((t_opt * 1e6, "opt"), (t_opt_pure * 1e6, "opt pure")):
        ax.axvline(t, color="tab:red", lw=0.8, alpha=0.5)
        ax.annotate(lbl, (t, 0.05), rotation=90, fontsize=8)
    ax.set_xlabel(r"output mirror transmission $T_2$ (ppm)")
    ax.set_ylabel("probability")
    ax.set_ylim(0, 1)
    ax.legend(loc="upper right", fontsize=9)
    fig.tight_layout()
    fig.savefig(OUT / "bounds_vs_t2.png", dpi=160)
    print(f"\nfigure written to {OUT/'bounds_vs_t2.png'}")


if __name__ == "__main__":
    main()
