"""Two-qubit ion-photon state tomography.

Qubit one is the ion {g1, g2}, qubit two the photon polarization {V, H};
basis order per setting is (g1 V, g1 H, g2 V, g2 H).  Nine joint settings
(photon basis x ion basis, each in {Z, X, Y}) with four outcomes each give
the 36-entry count table.  Reconstruction runs linear inversion, projects
onto the physical cone, then refines with a diluted iterative
maximum-likelihood ascent whose likelihood never decreases.  Error bars come
from Poissonian Monte-Carlo resampling of the count table.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

BASES = ("Z", "X", "Y")

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class InsufficientDataError(ValueError):
    """A basis setting has no events, so probabilities are undefined."""


def _eigenprojectors(basis):
    """(P_plus, P_minus) of a single-qubit Pauli operator."""
    vals, vecs = np.linalg.eigh(_PAULI[basis])
    order = np.argsort(vals)[::-1]  # +1 first
    return tuple(np.outer(vecs[:, k], vecs[:, k].conj()) for k in order)


@dataclass(frozen=True)
class Projector:
    """One of the 36 joint measurement projectors."""

    photon_basis: str
    ion_basis: str
    outcome: int          # 2*ion_bit + photon_bit; bit 0 is the +1 eigenstate
    matrix: np.ndarray


def measurement_set():
    """All 36 projectors, grouped per basis in outcome order 0..3."""
    out = []
    for ph in BASES:
        for ion in BASES:
            p_ph = _eigenprojectors(ph)
            p_ion = _eigenprojectors(ion)
            for outcome in range(4):
                ion_bit, ph_bit = divmod(outcome, 2)
                out.append(Projector(
                    photon_basis=ph, ion_basis=ion, outcome=outcome,
                    matrix=np.kron(p_ion[ion_bit], p_ph[ph_bit])))
    return out


_PROJECTORS = measurement_set()
_PROJ_STACK = np.stack([p.matrix for p in _PROJECTORS])         # (36, 4, 4)
_BASIS_LABELS = [(p.photon_basis, p.ion_basis) for p in _PROJECTORS[::4]]


@dataclass
class CountTable:
    """9 x 4 non-negative event counts plus acquisition metadata."""

    counts: np.ndarray                   # shape (9, 4), basis order of BASES^2
    attempts: Optional[int] = None
    window: Optional[float] = None       # s
    background_rate: Optional[float] = None   # 1/s

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (9, 4):
            raise ValueError("counts must have shape (9, 4)")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @staticmethod
    def basis_index(photon_basis, ion_basis):
        return _BASIS_LABELS.index((photon_basis, ion_basis))

    @property
    def basis_labels(self):
        return tuple(_BASIS_LABELS)

    def frequencies(self):
        totals = self.counts.sum(axis=1, keepdims=True)
        if np.any(totals == 0):
            empty = [_BASIS_LABELS[i] for i in
                     np.nonzero(totals[:, 0] == 0)[0]]
            raise InsufficientDataError(f"no events in bases {empty}")
        return self.counts / totals


def born_probabilities(rho):
    """Outcome probabilities of `rho` for all 36 projectors, shape (9, 4)."""
    p = np.einsum("kij,ji->k", _PROJ_STACK, rho).real
    return p.reshape(9, 4)


def simulate_counts(rho, shots_per_basis, rng=None):
    """Synthetic count table for a state.

    With `rng` set, outcomes are multinomially sampled; otherwise the exact
    expected counts are used (deterministic oracle data).
    """
    p = np.clip(born_probabilities(rho), 0.0, None)
    p /= p.sum(axis=1, keepdims=True)
    if rng is None:
        counts = p * shots_per_basis
    else:
        counts = np.stack([rng.multinomial(shots_per_basis, row)
                           for row in p]).astype(float)
    return CountTable(counts=counts)


def validate_state(rho, tol=1e-10):
    """Assert Hermiticity, unit trace and positivity of a density matrix."""
    if not np.allclose(rho, rho.T.conj(), atol=tol):
        raise ValueError("state is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError("state trace differs from one")
    if np.linalg.eigvalsh((rho + rho.T.conj()) / 2)[0] < -tol:
        raise ValueError("state has a negative eigenvalue")


def _project_to_physical(rho):
    """Nearest PSD unit-trace matrix by eigenvalue clipping."""
    rho = (rho + rho.T.conj()) / 2
    vals, vecs = np.linalg.eigh(rho)
    vals = np.clip(vals, 0.0, None)
    if vals.sum() == 0:
        return np.eye(4, dtype=complex) / 4
    vals /= vals.sum()
    return (vecs * vals) @ vecs.T.conj()


def linear_inversion(freqs):
    """Pauli-expectation estimate of the state from per-basis frequencies.

    Two-qubit correlators come from their own basis; single-qubit marginals
    average over the partner's three settings.
    """
    sign = np.array([1.0, -1.0])
    s = {}
    ion_marg = {a: [] for a in BASES}
    ph_marg = {b: [] for b in BASES}
    for bi, (ph, ion) in enumerate(_BASIS_LABELS):
        f = freqs[bi].reshape(2, 2)     # [ion_bit, photon_bit]
        s[(ion, ph)] = float(np.einsum("i,j,ij->", sign, sign, f))
        ion_marg[ion].append(float(sign @ f.sum(axis=1)))
        ph_marg[ph].append(float(f.sum(axis=0) @ sign))
    rho = np.eye(4, dtype=complex)
    for a in BASES:
        rho += np.mean(ion_marg[a]) * np.kron(_PAULI[a], _PAULI["I"])
        rho += np.mean(ph_marg[a]) * np.kron(_PAULI["I"], _PAULI[a])
    for (ion, ph), val in s.items():
        if ion in BASES and ph in BASES:
            rho += val * np.kron(_PAULI[ion], _PAULI[ph])
    return rho / 4.0


@dataclass
class ReconstructionResult:
    """Physical state estimate with MLE convergence diagnostics."""

    rho: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float


def _log_likelihood(counts, probs):
    mask = counts > 0
    return float(np.sum(counts[mask] * np.log(probs[mask])))


def reconstruct(table, tol=1e-10, max_iterations=10_000):
    """Maximum-likelihood state from a count table.

    Linear inversion seeds a diluted R-rho-R iteration: the full step is
    taken whenever it raises the multinomial log-likelihood and is otherwise
    damped until it does, so the likelihood ascends monotonically.  Stops
    when the improvement drops below `tol`.
    """
    freqs = table.frequencies()
    rho = _project_to_physical(linear_inversion(freqs))
    # keep the seed full rank so every outcome has nonzero probability
    rho = 0.999 * rho + 0.001 * np.eye(4) / 4
    counts = table.counts
    eye = np.eye(4, dtype=complex)

    probs = np.clip(born_probabilities(rho), 1e-300, None)
    ll = _log_likelihood(counts, probs)
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        coef = (freqs / probs).reshape(-1)
        r_op = np.einsum("k,kij->ij", coef, _PROJ_STACK)
        candidate = r_op @ rho @ r_op
        candidate /= np.trace(candidate).real
        cand_probs = np.clip(born_probabilities(candidate), 1e-300, None)
        cand_ll = _log_likelihood(counts, cand_probs)
        if cand_ll < ll:
            # dilute the step until the likelihood no longer drops
            eps = 1.0
            for _ in range(60):
                eps *= 0.5
                damped = (eye + eps * r_op) @ rho @ (eye + eps * r_op)
                damped /= np.trace(damped).real
                cand_probs = np.clip(born_probabilities(damped), 1e-300, None)
                cand_ll = _log_likelihood(counts, cand_probs)
                if cand_ll >= ll:
                    candidate = damped
                    break
            else:
                converged = True
                break
        gain = cand_ll - ll
        rho, probs, ll = candidate, cand_probs, cand_ll
        if gain < tol:
            converged = True
            break
    rho = _project_to_physical(rho)
    return ReconstructionResult(rho=rho, converged=converged,
                                iterations=iterations, log_likelihood=ll)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def target_state(theta):
    """|Psi(theta)> = (|g1 V> + e^{i theta} |g2 H>) / sqrt(2)."""
    psi = np.zeros(4, dtype=complex)
    psi[0] = 1 / math.sqrt(2)
    psi[3] = np.exp(1j * theta) / math.sqrt(2)
    return psi


def fidelity_at(rho, theta):
    psi = target_state(theta)
    return float((psi.conj() @ rho @ psi).real)


def _golden_section_max(f, lo, hi, tol):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def fit_theta(rho, tol=1e-6):
    """Phase maximizing the fidelity, by golden-section search.

    F(theta) is sinusoidal in theta, so a coarse scan brackets the single
    maximum and golden-section refines it to `tol` radians.
    """
    grid = np.linspace(0.0, 2 * math.pi, 64, endpoint=False)
    vals = [fidelity_at(rho, t) for t in grid]
    k = int(np.argmax(vals))
    span = grid[1] - grid[0]
    return _golden_section_max(lambda t: fidelity_at(rho, t),
                               grid[k] - span, grid[k] + span, tol) \
        % (2 * math.pi)


@dataclass
class StateMetrics:
    """Fidelity and purity of a reconstructed state."""

    fidelity: float
    purity: float
    bound_gap: float      # sqrt(purity) - fidelity >= 0 up to numerics
    theta: float
    fidelity_err: Optional[float] = None
    purity_err: Optional[float] = None


def metrics(rho, theta=None):
    """Fidelity against |Psi(theta)| (theta fitted when omitted) and purity."""
    validate_state(rho, tol=1e-8)
    if theta is None:
        theta = fit_theta(rho)
    f = fidelity_at(rho, theta)
    purity = float(np.trace(rho @ rho).real)
    return StateMetrics(fidelity=f, purity=purity,
                        bound_gap=math.sqrt(purity) - f, theta=theta)


@dataclass
class BootstrapMetrics:
    """Monte-Carlo averaged metrics with one-standard-deviation errors."""

    fidelity: float
    fidelity_err: float
    purity: float
    purity_err: float
    theta: float
    n_resamples: int
    n_failed: int
    low_confidence: bool = False


def _bootstrap_one(resampled, theta):
    rec = reconstruct(CountTable(counts=resampled))
    return metrics(rec.rho, theta=theta)


def bootstrap(table, m=200, seed=0, theta=None, n_workers=1):
    """Poissonian Monte-Carlo error bars on fidelity and purity.

    Each of the `m` resamples draws all 36 counts from Poisson distributions
    with the observed means, reconstructs, and evaluates the metrics;
    resamples whose reconstruction fails are skipped and counted.  All
    resamples are drawn up front from one seeded generator, so the result is
    identical for any worker count.
    """
    if m < 2:
        raise ValueError("need at least 2 resamples")
    rng = np.random.default_rng(seed)
    draws = [rng.poisson(table.counts).astype(float) for _ in range(m)]
    results = []
    if n_workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        def safe(draw):
            try:
                return _bootstrap_one(draw, theta)
            except (InsufficientDataError, ValueError):
                return None
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(safe, draws))
    else:
        for draw in draws:
            try:
                results.append(_bootstrap_one(draw, theta))
            except (InsufficientDataError, ValueError):
                results.append(None)
    fids = [r.fidelity for r in results if r is not None]
    purs = [r.purity for r in results if r is not None]
    thetas = [r.theta for r in results if r is not None]
    failed = sum(1 for r in results if r is None)
    if len(fids) < 2:
        raise InsufficientDataError(
            f"only {len(fids)} of {m} resamples reconstructed")
    return BootstrapMetrics(
        fidelity=float(np.mean(fids)), fidelity_err=float(np.std(fids, ddof=1)),
        purity=float(np.mean(purs)), purity_err=float(np.std(purs, ddof=1)),
        theta=float(np.mean(thetas)), n_resamples=len(fids), n_failed=failed,
        low_confidence=m < 20)


def background_fidelity_limit(signal_per_attempt, background_rate, window):
    """Fidelity ceiling from unpolarised background in the count window.

    Ideal Bell-state outcome statistics are mixed with a uniform background
    of weight w = (rate * window) / (signal + rate * window); the fidelity of
    the mixed state with the Bell state is returned.
    """
    if min(signal_per_attempt, background_rate, window) < 0:
        raise ValueError("inputs must be non-negative")
    bg = background_rate * window
    denom = signal_per_attempt + bg
    w = 0.0 if denom == 0 else bg / denom
    bell = np.outer(target_state(0.0), target_state(0.0).conj())
    mixed = (1.0 - w) * bell + w * np.eye(4) / 4.0
    return fidelity_at(mixed, 0.0)
