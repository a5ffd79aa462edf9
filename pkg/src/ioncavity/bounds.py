"""Closed-form limits on the photon collection probability.

The bound factorizes as P_S = P_in * P_esc.  P_esc = T2/(T2 + alpha_loss) is
the escape probability through the output mirror; P_in sums a geometric
series over reexcitation orders j,

    P_in = (2C / (1 + 2C)) * sum_j (r_u / (1 + 2C))^j = 2C / (1 + 2C - r_u),

where r_u is the branching ratio back to the initial state.  The pure
variant keeps only j = 0 (photons without any prior reexcitation).  The
closed form is the production path; the truncated series is retained for
testing.
"""

import math
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class BoundInput:
    """Inputs of the collection bound for one operating point."""

    cooperativity: float
    r_u: float
    t2: float
    alpha_loss: float
    variant: str = "full"        # "full" or "pure"
    beta: Optional[float] = None
    a_tilde: Optional[float] = None

    def __post_init__(self):
        if self.cooperativity <= 0:
            raise ValueError("cooperativity must be positive")
        if not 0 <= self.r_u < 1:
            raise ValueError("r_u must lie in [0, 1)")
        for name in ("t2", "alpha_loss"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.variant not in ("full", "pure"):
            raise ValueError(f"unknown variant {self.variant!r}")


@dataclass(frozen=True)
class BoundResult:
    """Collection bound split into its emission and escape factors."""

    p_in: float
    p_esc: float
    p_s: float
    per_j_terms: Optional[tuple] = None


def p_escape(t2, alpha_loss):
    """Escape probability T2 / (T2 + alpha_loss)."""
    if t2 + alpha_loss <= 0:
        raise ValueError("T2 + alpha_loss must be positive")
    return t2 / (t2 + alpha_loss)


def p_bound(inp, n_terms=None):
    """Collection bound for a BoundInput.

    With `n_terms` set, the reexcitation series is also evaluated term by
    term (after the pure/full selection) and returned in per_j_terms; the
    closed form is always the reported value.
    """
    two_c = 2.0 * inp.cooperativity
    r = inp.r_u if inp.variant == "full" else 0.0
    ratio = r / (1.0 + two_c)
    if ratio >= 1.0:
        raise ValueError("reexcitation series diverges (r_u >= 1 + 2C)")
    p_in = two_c / (1.0 + two_c - r)
    esc = p_escape(inp.t2, inp.alpha_loss)
    terms = None
    if n_terms is not None:
        first = two_c / (1.0 + two_c)
        terms = tuple(first * ratio**j for j in range(n_terms))
    return BoundResult(p_in=p_in, p_esc=esc, p_s=p_in * esc, per_j_terms=terms)


def beta_parameter(scheme, variant="full"):
    """Emitter figure of merit beta for the optimal-transmission formulas.

    full: zeta^2 gamma_g / (gamma_g + gamma_o), which equals
    zeta^2 gamma_g / (gamma - gamma_u); pure: zeta^2 gamma_g / gamma.  For a
    three-level emitter (gamma_o = 0) with zeta = 1 the full variant is 1.
    """
    z2 = scheme.zeta * scheme.zeta
    if variant == "full":
        return z2 * scheme.gamma_g / (scheme.gamma_g + scheme.gamma_o)
    if variant == "pure":
        return z2 * scheme.gamma_g / scheme.gamma_total
    raise ValueError(f"unknown variant {variant!r}")


def t2_optimal(beta, alpha_loss, a_tilde):
    """Output transmission maximizing the bound:

    T2_opt = alpha_loss sqrt(1 + beta (1/alpha_loss)(2/A~)).
    """
    if min(alpha_loss, a_tilde) <= 0 or beta < 0:
        raise ValueError("alpha_loss and a_tilde must be positive, beta >= 0")
    return alpha_loss * math.sqrt(1.0 + beta * 2.0 / (alpha_loss * a_tilde))


def p_opt(beta, alpha_loss, a_tilde):
    """Bound at the optimal T2: 1 - 2 / (1 + sqrt(1 + 2 beta / (alpha A~)))."""
    if min(alpha_loss, a_tilde) <= 0 or beta < 0:
        raise ValueError("alpha_loss and a_tilde must be positive, beta >= 0")
    return 1.0 - 2.0 / (1.0 + math.sqrt(1.0 + beta * 2.0 / (alpha_loss * a_tilde)))


def bound_for_scheme(scheme, cavity, n_ions=1, variant="full", t2=None,
                     n_terms=None):
    """Evaluate the bound for a SchemeRates/CavityModel pair.

    beta and the cooperativity are always derived from the scheme rates here,
    never taken as free numbers, so high-level results cannot drift away from
    the emitter model.  `t2` overrides the cavity's output transmission while
    keeping alpha_loss fixed (used by the T2 sweeps).
    """
    t2 = cavity.mirrors.t2 if t2 is None else t2
    alpha = cavity.mirrors.alpha_loss
    c = (scheme.zeta**2 * n_ions / (cavity.a_tilde * (alpha + t2))
         * scheme.gamma_g / scheme.gamma_total)
    inp = BoundInput(cooperativity=c, r_u=scheme.r_u, t2=t2, alpha_loss=alpha,
                     variant=variant)
    return p_bound(inp, n_terms=n_terms)
