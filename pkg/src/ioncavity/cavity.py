"""Cavity geometry, decay rates, coupling strength and cooperativity.

Everything derives from five measured primitives: length l, mirror radius of
curvature R_C, wavelength, output transmission T2 and unwanted round-trip
loss alpha_loss = L + T1.  kappa is a half width (photon number decays at
2 kappa); all losses are dimensionless fractions.
"""

import math
from dataclasses import dataclass

from .constants import C_LIGHT, TWO_PI


class ModelIntegrityError(RuntimeError):
    """Two redundant derivations of the same quantity disagree."""


@dataclass(frozen=True)
class CavityGeometry:
    """Near-concentric two-mirror resonator geometry."""

    length: float        # m
    mirror_roc: float    # m, identical mirrors assumed
    wavelength: float    # m

    def __post_init__(self):
        if not 0 < self.length < 2 * self.mirror_roc:
            raise ValueError(
                f"unstable geometry: need 0 < l < 2 R_C, got l={self.length}, "
                f"R_C={self.mirror_roc}")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")


@dataclass(frozen=True)
class MirrorSet:
    """Mirror transmissions and other round-trip losses (fractions)."""

    t1: float
    t2: float
    scatter_absorb: float

    def __post_init__(self):
        for name in ("t1", "t2", "scatter_absorb"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ValueError(f"{name}={v} outside [0, 1)")
        if self.t2 + self.alpha_loss <= 0:
            raise ValueError("total round-trip loss is zero (infinite finesse)")

    @property
    def alpha_loss(self):
        return self.scatter_absorb + self.t1


def mode_cross_section(wavelength):
    """Atomic absorption cross-section sigma = 3 lambda^2 / (2 pi), m^2."""
    return 3.0 * wavelength**2 / TWO_PI


def a_tilde_from_waist(w0, wavelength):
    """Normalized mode area: (pi w0^2 / 4) / sigma."""
    return (math.pi * w0**2 / 4.0) / mode_cross_section(wavelength)


def derive_geometry(length, mirror_roc, wavelength):
    """Waist, FSR, stability parameter and mode areas from the geometry.

    w0 = sqrt(lambda sqrt(l (2 R_C - l)) / (2 pi)), FSR = c / (2 l).  The
    signed stability parameter 1 - l/R_C is negative for a near-concentric
    cavity; its magnitude is reported alongside.
    """
    geo = CavityGeometry(length, mirror_roc, wavelength)
    w0 = math.sqrt(wavelength * math.sqrt(length * (2 * mirror_roc - length))
                   / TWO_PI)
    a_eff = math.pi * w0**2 / 4.0
    g_param = 1.0 - length / mirror_roc
    return {
        "w0": w0,
        "fsr": C_LIGHT / (2 * length),
        "stability_g_parameter": g_param,
        "stability_g_magnitude": abs(g_param),
        "a_eff": a_eff,
        "a_tilde": a_eff / mode_cross_section(wavelength),
        "geometry": geo,
    }


def derive_rates(geometry, mirrors):
    """Cavity decay rates, finesse and ringdown time.

    kappa = (c / 4l)(alpha_loss + T2) splits into kappa_ext = (c/4l) T2 and
    kappa_in = (c/4l) alpha_loss; finesse = 2 pi / (T2 + alpha_loss) and the
    ringdown time is (F / pi)(l / c) = 1 / (2 kappa).
    """
    total_loss = mirrors.t2 + mirrors.alpha_loss
    per_round = C_LIGHT / (4.0 * geometry.length)
    finesse = TWO_PI / total_loss
    return {
        "kappa": per_round * total_loss,
        "kappa_ext": per_round * mirrors.t2,
        "kappa_in": per_round * mirrors.alpha_loss,
        "finesse": finesse,
        "total_loss": total_loss,
        "ringdown": finesse * geometry.length / (math.pi * C_LIGHT),
    }


def coupling_strength(gamma_g, length, a_tilde, zeta=1.0, n_ions=1):
    """Vacuum Rabi coupling g = zeta sqrt(N) sqrt(c gamma_g / (2 l A~)).

    gamma_g is the half-width decay rate of the cavity-coupled transition;
    N ions in a symmetric superradiant state raise g by sqrt(N).
    """
    if min(gamma_g, length, a_tilde) <= 0:
        raise ValueError("gamma_g, length and a_tilde must be positive")
    if not 0 < zeta <= 1:
        raise ValueError("zeta must lie in (0, 1]")
    if n_ions < 1:
        raise ValueError("n_ions must be a positive integer")
    return zeta * math.sqrt(n_ions) * math.sqrt(
        C_LIGHT * gamma_g / (2.0 * length * a_tilde))


def cooperativity(g, kappa, gamma):
    """Cooperativity C = g^2 / (2 kappa gamma)."""
    if min(g, kappa, gamma) <= 0:
        raise ValueError("rates must be positive")
    return g * g / (2.0 * kappa * gamma)


def cooperativity_mode_area(gamma_g, gamma, a_tilde, t2, alpha_loss,
                            zeta=1.0, n_ions=1):
    """Algebraic form C = zeta^2 N gamma_g / (gamma A~ (alpha_loss + T2))."""
    return (zeta * zeta * n_ions / (a_tilde * (alpha_loss + t2))
            * gamma_g / gamma)


@dataclass(frozen=True)
class CouplingContext:
    """Coupling strength and cooperativity of one emitter/cavity pairing."""

    g: float
    zeta: float
    n_ions: int
    cooperativity: float
    cooperativity_internal: float


@dataclass(frozen=True)
class CavityModel:
    """Cavity primitives plus every derived quantity used downstream."""

    geometry: CavityGeometry
    mirrors: MirrorSet
    w0: float
    a_eff: float
    a_tilde: float
    fsr: float
    stability_g_parameter: float
    kappa: float
    kappa_ext: float
    kappa_in: float
    finesse: float
    total_loss: float
    ringdown: float

    @classmethod
    def from_parameters(cls, length, mirror_roc, wavelength, t1, t2,
                        scatter_absorb):
        geo = derive_geometry(length, mirror_roc, wavelength)
        mirrors = MirrorSet(t1=t1, t2=t2, scatter_absorb=scatter_absorb)
        rates = derive_rates(geo["geometry"], mirrors)
        return cls(geometry=geo["geometry"], mirrors=mirrors, w0=geo["w0"],
                   a_eff=geo["a_eff"], a_tilde=geo["a_tilde"], fsr=geo["fsr"],
                   stability_g_parameter=geo["stability_g_parameter"],
                   **rates)

    def coupling(self, scheme, n_ions=1, check_tol=1e-9):
        """CouplingContext for a SchemeRates, cross-checking both C formulas.

        The rate form g^2/(2 kappa gamma) and the mode-area form must agree;
        disagreement beyond `check_tol` (relative) raises ModelIntegrityError
        because it means the model was assembled from inconsistent pieces.
        """
        g = coupling_strength(scheme.gamma_g, self.geometry.length,
                              self.a_tilde, scheme.zeta, n_ions)
        c_rate = cooperativity(g, self.kappa, scheme.gamma_total)
        c_area = cooperativity_mode_area(
            scheme.gamma_g, scheme.gamma_total, self.a_tilde,
            self.mirrors.t2, self.mirrors.alpha_loss, scheme.zeta, n_ions)
        if abs(c_rate - c_area) > check_tol * abs(c_area):
            raise ModelIntegrityError(
                f"cooperativity forms disagree: {c_rate} vs {c_area}")
        c_internal = c_area * (self.mirrors.alpha_loss + self.mirrors.t2) \
            / self.mirrors.alpha_loss
        return CouplingContext(g=g, zeta=scheme.zeta, n_ions=n_ions,
                               cooperativity=c_area,
                               cooperativity_internal=c_internal)
