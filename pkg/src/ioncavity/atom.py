"""Level structure and atomic rates of the 40Ca+ emitter.

The five relevant fine-structure manifolds (S1/2, P1/2, P3/2, D3/2, D5/2)
hold 18 Zeeman sublevels in total.  Decay rates out of P3/2 are distributed
over dipole-allowed channels by squared Clebsch-Gordan weights; Zeeman
splittings follow the Lande g-factors of each manifold.

Rates follow the half-width convention of `constants` (populations decay at
twice the tabulated rate); the simulator applies the factor two when it
builds jump operators.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial, sqrt

from . import constants

LS_BY_TERM = {
    "S1/2": (0, 1),  # (L, 2J)
    "P1/2": (1, 1),
    "P3/2": (1, 3),
    "D3/2": (2, 3),
    "D5/2": (2, 5),
}


def _as_twice(x, name="value"):
    """Convert a (half-)integer to its doubled integer representation."""
    t = round(2 * x)
    if abs(2 * x - t) > 1e-9:
        raise ValueError(f"{name}={x} is not a half-integer")
    return int(t)


def lande_g(L, S, J):
    """Lande g-factor 1 + [J(J+1)+S(S+1)-L(L+1)] / [2J(J+1)]."""
    jj = J * (J + 1.0)
    return 1.0 + (jj + S * (S + 1.0) - L * (L + 1.0)) / (2.0 * jj)


def _cg_exact(a1, b1, a2, b2, A, B):
    """Racah evaluation of <j1 m1; j2 m2 | J M> on doubled integers.

    Returns (squared value as exact Fraction, sign).
    """
    if b1 + b2 != B or not (abs(a1 - a2) <= A <= a1 + a2):
        return Fraction(0), 1
    if abs(b1) > a1 or abs(b2) > a2 or abs(B) > A:
        return Fraction(0), 1
    if any(x % 2 for x in (a1 + b1, a2 + b2, A + B, a1 + a2 + A)):
        return Fraction(0), 1

    def f(twice):
        return factorial(twice // 2)

    pref = Fraction(A + 1) * Fraction(
        f(A + a1 - a2) * f(A - a1 + a2) * f(a1 + a2 - A), f(a1 + a2 + A + 2)
    )
    pref *= f(A + B) * f(A - B) * f(a1 - b1) * f(a1 + b1) * f(a2 - b2) * f(a2 + b2)
    total = Fraction(0)
    k = 0
    while True:
        k2 = 2 * k
        num = (a1 + a2 - A - k2, a1 - b1 - k2, a2 + b2 - k2)
        if min(num) < 0:
            break
        den = (A - a2 + b1 + k2, A - a1 - b2 + k2)
        if min(den) >= 0:
            total += Fraction(
                (-1) ** k,
                f(k2) * f(num[0]) * f(num[1]) * f(num[2]) * f(den[0]) * f(den[1]),
            )
        k += 1
    return pref * total * total, (1 if total >= 0 else -1)


def clebsch_gordan(j1, m1, j2, m2, J, M):
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M>, signed float."""
    sq, sign = _cg_exact(_as_twice(j1, "j1"), _as_twice(m1, "m1"),
                         _as_twice(j2, "j2"), _as_twice(m2, "m2"),
                         _as_twice(J, "J"), _as_twice(M, "M"))
    return sign * sqrt(float(sq))


def cg_squared(j1, m1, j2, m2, J, M):
    """Exact squared Clebsch-Gordan coefficient as a Fraction."""
    sq, _ = _cg_exact(_as_twice(j1, "j1"), _as_twice(m1, "m1"),
                      _as_twice(j2, "j2"), _as_twice(m2, "m2"),
                      _as_twice(J, "J"), _as_twice(M, "M"))
    return sq


@dataclass(frozen=True)
class LevelManifold:
    """One fine-structure manifold with its Zeeman sublevels."""

    term: str            # S1/2, P1/2, P3/2, D3/2 or D5/2
    J: float             # half-integer angular momentum
    lande_g: float
    sublevels: tuple     # m_j values, -J .. J

    @classmethod
    def from_term(cls, term):
        L, twoJ = LS_BY_TERM[term]
        J = twoJ / 2.0
        ms = tuple((m2 / 2.0) for m2 in range(-twoJ, twoJ + 1, 2))
        return cls(term=term, J=J, lande_g=lande_g(L, 0.5, J), sublevels=ms)

    def __post_init__(self):
        if len(self.sublevels) != round(2 * self.J + 1):
            raise ValueError(f"{self.term}: expected {round(2*self.J+1)} sublevels")


@dataclass(frozen=True)
class DecayChannel:
    """A single dipole decay channel out of P3/2.

    `rate` is an angular frequency in the half-width convention; the rates of
    all channels out of one P3/2 sublevel sum to gamma_total.
    """

    upper: tuple         # (term, m_j) in P3/2
    lower: tuple         # (term, m_j)
    q: int               # polarization, m_upper - m_lower in {-1, 0, +1}
    rate: float          # rad/s
    amplitude: float = 0.0   # signed CG coefficient of the channel

    def __post_init__(self):
        if round(self.upper[1] - self.lower[1]) != self.q:
            raise ValueError("polarization label inconsistent with Delta m")


@dataclass(frozen=True)
class EmitterModel:
    """40Ca+ level structure with decay and field parameters."""

    manifolds: tuple
    gamma_total: float           # rad/s, total P3/2 decay rate (half width)
    branching: tuple             # (r_S1/2, r_D3/2, r_D5/2)
    b_field: float               # gauss
    channels: tuple = field(default=())

    @classmethod
    def default(cls, gamma_total=constants.GAMMA_P32,
                branching=(constants.BRANCHING_S12, constants.BRANCHING_D32,
                           constants.BRANCHING_D52),
                b_field=constants.B_FIELD_GAUSS):
        manifolds = tuple(LevelManifold.from_term(t)
                          for t in ("S1/2", "P1/2", "P3/2", "D3/2", "D5/2"))
        model = cls(manifolds=manifolds, gamma_total=gamma_total,
                    branching=tuple(branching), b_field=b_field)
        object.__setattr__(model, "channels", tuple(decay_channel_table(model)))
        return model

    def __post_init__(self):
        if abs(sum(self.branching) - 1.0) > 1e-3:
            raise ValueError(f"branching ratios sum to {sum(self.branching)}, not 1")
        if self.gamma_total <= 0:
            raise ValueError("gamma_total must be positive")
        n_states = sum(len(m.sublevels) for m in self.manifolds)
        if n_states != 18:
            raise ValueError(f"expected 18 electronic states, got {n_states}")

    def manifold(self, term):
        for m in self.manifolds:
            if m.term == term:
                return m
        raise KeyError(term)

    @property
    def branching_by_term(self):
        return {"S1/2": self.branching[0], "D3/2": self.branching[1],
                "D5/2": self.branching[2]}


@dataclass(frozen=True)
class SchemeRates:
    """Decay-rate partition for one photon-generation scheme.

    gamma_g feeds the cavity-coupled transition, gamma_u returns the emitter
    to the initial state (reexcitation channel), gamma_o collects everything
    else.  zeta is the projection of the cavity polarization onto the atomic
    dipole of the cavity-coupled transition.
    """

    gamma_g: float
    gamma_u: float
    gamma_o: float
    zeta: float
    gamma_total: float

    def __post_init__(self):
        if not (0 < self.zeta <= 1):
            raise ValueError("zeta must lie in (0, 1]")
        resid = abs(self.gamma_g + self.gamma_u + self.gamma_o - self.gamma_total)
        if resid > 1e-9 * self.gamma_total:
            raise ValueError("gamma_g + gamma_u + gamma_o != gamma_total")

    @property
    def r_u(self):
        return self.gamma_u / self.gamma_total


def decay_channel_table(emitter):
    """All dipole-allowed P3/2 -> {S1/2, D3/2, D5/2} decay channels.

    Channel rate = gamma_total * r_manifold * CG^2, where the squared CG
    weights of one upper sublevel into one lower manifold sum to one.
    """
    channels = []
    twoJ_up = 3
    for m2_up in range(-twoJ_up, twoJ_up + 1, 2):
        m_up = m2_up / 2.0
        for term, r_man in (("S1/2", emitter.branching[0]),
                            ("D3/2", emitter.branching[1]),
                            ("D5/2", emitter.branching[2])):
            twoJ_lo = LS_BY_TERM[term][1]
            for q in (-1, 0, 1):
                m_lo = m_up - q
                if abs(round(2 * m_lo)) > twoJ_lo:
                    continue
                amp = clebsch_gordan(twoJ_lo / 2.0, m_lo, 1, q, 1.5, m_up)
                if amp == 0.0:
                    continue
                channels.append(DecayChannel(
                    upper=("P3/2", m_up), lower=(term, m_lo), q=q,
                    rate=emitter.gamma_total * r_man * amp * amp,
                    amplitude=amp))
    return channels


def scheme_rates(emitter, cavity_transition, initial_state=("S1/2", -0.5),
                 zeta=sqrt(0.5)):
    """Partition gamma_total into (gamma_g, gamma_u, gamma_o) for a scheme.

    Parameters
    ----------
    cavity_transition : (m_upper, m_lower)
        P3/2 and D5/2 magnetic quantum numbers of the cavity-coupled channel.
    initial_state : (term, m_j)
        Ground sublevel the drive starts from; decay back into it is gamma_u.
    zeta : float
        Polarization projection of the cavity mode on the transition dipole.
    """
    m_up, m_lo = cavity_transition
    if abs(round(m_up - m_lo)) > 1:
        raise ValueError(f"cavity transition Delta m = {m_up - m_lo} is dipole-forbidden")
    if initial_state[0] != "S1/2":
        raise ValueError("initial state must be an S1/2 sublevel")
    table = emitter.channels or decay_channel_table(emitter)
    gamma_g = gamma_u = 0.0
    for ch in table:
        if ch.upper[1] != m_up:
            continue
        if ch.lower == ("D5/2", m_lo):
            gamma_g += ch.rate
        elif ch.lower == initial_state:
            gamma_u += ch.rate
    if gamma_g == 0.0:
        raise ValueError(f"no P3/2({m_up}) -> D5/2({m_lo}) decay channel exists")
    gamma_o = emitter.gamma_total - gamma_g - gamma_u
    return SchemeRates(gamma_g=gamma_g, gamma_u=gamma_u, gamma_o=gamma_o,
                       zeta=zeta, gamma_total=emitter.gamma_total)


def zeeman_splitting(manifold, m_j_a, m_j_b, b_field):
    """Zeeman splitting |m_a - m_b| * g_J * mu_B * B / hbar as rad/s.

    `manifold` may be a LevelManifold or a term label such as "D5/2".
    """
    if isinstance(manifold, str):
        manifold = LevelManifold.from_term(manifold)
    for m in (m_j_a, m_j_b):
        if abs(m) > manifold.J + 1e-9:
            raise ValueError(f"m_j={m} outside -J..J of {manifold.term}")
    return (abs(m_j_a - m_j_b) * manifold.lande_g
            * constants.TWO_PI * constants.MU_B_OVER_H * b_field)


@dataclass(frozen=True)
class ScaledRabi:
    """Motional Rabi frequency with a Lamb-Dicke validity flag."""

    omega_n: float
    in_regime: bool


def motional_rabi_scaling(omega, eta, n):
    """Rabi frequency reduction Omega_n = Omega (1 - eta^2 n) for phonon number n.

    Valid in the Lamb-Dicke regime; the result is flagged out-of-regime when
    eta^2 (2n + 1) > 0.3.
    """
    if n < 0:
        raise ValueError("phonon number must be non-negative")
    return ScaledRabi(omega_n=omega * (1.0 - eta * eta * n),
                      in_regime=eta * eta * (2 * n + 1) <= 0.3)
