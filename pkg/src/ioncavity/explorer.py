"""Design-space exploration built on the closed-form bounds.

Covers output-transmission sweeps, the coupling-scheme ladder A-D (larger
polarization projection, then superradiant two- and three-ion states) and
the future-system parameter combinations (lower loss, smaller waist, ten
ions).
"""

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bounds import beta_parameter, p_bound, p_escape, t2_optimal, BoundInput
from .cavity import a_tilde_from_waist


@dataclass(frozen=True)
class DesignPoint:
    """One evaluated operating point of the design space."""

    label: str
    zeta: float
    n_ions: int
    t2: float
    alpha_loss: float
    a_tilde: float
    cooperativity: float
    p_in: float
    p_esc: float
    p_bound: float
    p_pure: float

    @property
    def pure_fraction(self):
        return self.p_pure / self.p_bound


@dataclass(frozen=True)
class SweepCurve:
    """Bound probabilities along one sweep axis (x strictly increasing)."""

    axis: str
    x: np.ndarray
    p_bound: np.ndarray
    p_pure: np.ndarray
    p_in: np.ndarray
    p_esc: np.ndarray
    annotations: dict

    def __post_init__(self):
        if not np.all(np.diff(self.x) > 0):
            raise ValueError("sweep axis must be strictly increasing")

    @property
    def pure_fraction(self):
        return self.p_pure / self.p_bound


def evaluate_point(scheme, cavity, label="", zeta=None, n_ions=1, t2=None,
                   alpha_loss=None, a_tilde=None, w0=None):
    """Bound, pure bound and factors for a scheme/cavity with overrides.

    The waist override and the mode-area override are two entries to the same
    quantity: passing w0 sets a_tilde = (pi w0^2 / 4) / sigma.
    """
    if w0 is not None and a_tilde is not None:
        raise ValueError("pass either w0 or a_tilde, not both")
    if w0 is not None:
        a_tilde = a_tilde_from_waist(w0, cavity.geometry.wavelength)
    if a_tilde is None:
        a_tilde = cavity.a_tilde
    if zeta is not None:
        scheme = dataclasses.replace(scheme, zeta=zeta)
    t2 = cavity.mirrors.t2 if t2 is None else t2
    alpha = cavity.mirrors.alpha_loss if alpha_loss is None else alpha_loss
    c = (scheme.zeta**2 * n_ions / (a_tilde * (alpha + t2))
         * scheme.gamma_g / scheme.gamma_total)
    full = p_bound(BoundInput(cooperativity=c, r_u=scheme.r_u, t2=t2,
                              alpha_loss=alpha, variant="full"))
    pure = p_bound(BoundInput(cooperativity=c, r_u=scheme.r_u, t2=t2,
                              alpha_loss=alpha, variant="pure"))
    return DesignPoint(label=label, zeta=scheme.zeta, n_ions=n_ions, t2=t2,
                       alpha_loss=alpha, a_tilde=a_tilde, cooperativity=c,
                       p_in=full.p_in, p_esc=full.p_esc, p_bound=full.p_s,
                       p_pure=pure.p_s)


def sweep_t2(scheme, cavity, t2_min, t2_max, n_points, grid="log"):
    """Bound probabilities as a function of the output mirror transmission.

    The interesting structure spans 10-1000 ppm, so the grid is logarithmic
    by default.  Annotations carry the closed-form T2 optima of the full and
    pure variants.
    """
    if not (0 < t2_min < t2_max < 1):
        raise ValueError("need 0 < t2_min < t2_max < 1")
    if n_points < 2:
        raise ValueError("need at least 2 sweep points")
    if grid == "log":
        xs = np.geomspace(t2_min, t2_max, n_points)
    elif grid == "linear":
        xs = np.linspace(t2_min, t2_max, n_points)
    else:
        raise ValueError(f"unknown grid {grid!r}")
    pts = [evaluate_point(scheme, cavity, t2=float(t)) for t in xs]
    alpha = cavity.mirrors.alpha_loss
    ann = {
        "t2_opt": t2_optimal(beta_parameter(scheme, "full"), alpha,
                             cavity.a_tilde),
        "t2_opt_pure": t2_optimal(beta_parameter(scheme, "pure"), alpha,
                                  cavity.a_tilde),
    }
    return SweepCurve(axis="t2", x=xs,
                      p_bound=np.array([p.p_bound for p in pts]),
                      p_pure=np.array([p.p_pure for p in pts]),
                      p_in=np.array([p.p_in for p in pts]),
                      p_esc=np.array([p.p_esc for p in pts]),
                      annotations=ann)


SCHEME_LADDER = (
    # (label, zeta^2, N): A is the benchmark V-photon configuration; B turns
    # the drive/field geometry parallel to the cavity axis; C and D add
    # superradiantly coupled ions.
    ("A", 0.5, 1),
    ("B", 1.0, 1),
    ("C", 1.0, 2),
    ("D", 1.0, 3),
)


def scheme_ladder(scheme, cavity):
    """Evaluate coupling schemes A-D on the present cavity."""
    points = []
    for label, z2, n in SCHEME_LADDER:
        points.append(evaluate_point(scheme, cavity, label=label,
                                     zeta=math.sqrt(z2), n_ions=n))
    return points


FUTURE_SYSTEMS = {
    # label -> overrides relative to the present system with zeta = 1
    "low-loss": dict(alpha_loss=2.7e-6, t2=25e-6),
    "small-waist": dict(w0=3.9e-6, t2=252e-6),
    "ten-ion": dict(n_ions=10, t2=252e-6),
}


def evaluate_future(config_id, scheme, cavity):
    """One of the future-system parameter combinations, all with zeta = 1."""
    try:
        overrides = FUTURE_SYSTEMS[config_id]
    except KeyError:
        raise ValueError(f"unknown future system {config_id!r}; "
                         f"choose from {sorted(FUTURE_SYSTEMS)}") from None
    return evaluate_point(scheme, cavity, label=config_id, zeta=1.0,
                          **overrides)
