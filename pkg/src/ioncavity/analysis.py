"""Detection-data analysis: wavepackets, efficiencies, photon trains.

Works on time-tagged detection events.  Times are microseconds relative to
the pulse (or sequence) start throughout this module, matching the on-disk
time-tag format.  Wavepackets are probability densities p_d(t) = N_d/(k dt)
per attempt; efficiencies are corrected by the independently calibrated
detection-path efficiency.  Photon-train analysis reduces 15-slot sequences
to consecutive-detection probabilities and a weighted geometric fit.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class CalibrationError(ValueError):
    """Corrected probability left the physical range."""


@dataclass
class TimeTagSet:
    """Detection events of one experimental run.

    attempt_index pairs each event with its generation attempt; times are
    microseconds from the attempt (or train) start.  `span` declares the
    acquisition window; events outside it are rejected at construction.
    """

    attempts: int
    times: np.ndarray                     # us
    attempt_index: np.ndarray
    detector: Optional[np.ndarray] = None
    polarization: Optional[np.ndarray] = None
    span: tuple = (0.0, None)             # us

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.attempt_index = np.asarray(self.attempt_index, dtype=int)
        if self.times.shape != self.attempt_index.shape:
            raise ValueError("times and attempt_index must align")
        if self.attempts <= 0:
            raise ValueError("attempts must be positive")
        lo, hi = self.span
        if hi is None:
            hi = float(self.times.max()) if self.times.size else 0.0
            self.span = (lo, hi)
        if self.times.size and (self.times.min() < lo - 1e-12
                                or self.times.max() > hi + 1e-12):
            raise ValueError("detection time outside declared span")
        if self.times.size and (self.attempt_index.min() < 0
                                or self.attempt_index.max() >= self.attempts):
            raise ValueError("attempt_index out of range")


@dataclass
class Wavepacket:
    """Detection probability density per attempt on a uniform bin grid."""

    edges: np.ndarray       # us, len = nbins + 1
    p_d: np.ndarray         # 1/us
    p_d_err: np.ndarray     # 1/us, Poissonian
    attempts: int
    bin_width: float        # us
    counts: np.ndarray

    @property
    def centers(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def integral(self):
        """Total detection probability per attempt; equals sum(N)/k exactly."""
        return float(np.sum(self.p_d) * self.bin_width)


@dataclass(frozen=True)
class PathEfficiency:
    """Detection-path efficiency: optics x fiber coupling x detector."""

    p_el: float
    p_fc: float
    p_det: float
    p_path_err: float = 0.0

    def __post_init__(self):
        for name in ("p_el", "p_fc", "p_det"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name}={v} outside (0, 1]")

    @property
    def p_path(self):
        return self.p_el * self.p_fc * self.p_det


def bin_timetags(tags, bin_width, t_start=None, t_end=None):
    """Histogram detections into p_d(t) = N_d / (k * bin_width).

    An empty input returns an all-zero wavepacket (with a single bin) rather
    than failing, since a run with no detections is valid data.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    t_start = tags.span[0] if t_start is None else t_start
    t_end = tags.span[1] if t_end is None else t_end
    if tags.times.size == 0 or t_end <= t_start:
        edges = np.array([t_start, t_start + bin_width])
        zero = np.zeros(1)
        return Wavepacket(edges=edges, p_d=zero.copy(), p_d_err=zero.copy(),
                          attempts=tags.attempts, bin_width=bin_width,
                          counts=zero.copy())
    nbins = max(1, int(math.ceil((t_end - t_start) / bin_width - 1e-9)))
    edges = t_start + np.arange(nbins + 1) * bin_width
    counts, _ = np.histogram(tags.times, bins=edges)
    counts = counts.astype(float)
    norm = tags.attempts * bin_width
    return Wavepacket(edges=edges, p_d=counts / norm,
                      p_d_err=np.sqrt(counts) / norm,
                      attempts=tags.attempts, bin_width=bin_width,
                      counts=counts)


@dataclass(frozen=True)
class EfficiencyResult:
    """Detected and path-corrected collection probabilities."""

    p_tot: float
    p_tot_err: float
    p_s: float
    p_s_err: float


def integrate_efficiency(wavepacket, path):
    """P_tot from the wavepacket integral and P_S = P_tot / P_path.

    Poissonian counting error and the path-calibration error are added in
    quadrature.  A corrected probability above one means the calibration is
    inconsistent with the data.
    """
    n_total = float(np.sum(wavepacket.counts))
    k = wavepacket.attempts
    p_tot = n_total / k
    p_tot_err = math.sqrt(n_total) / k
    p_s = p_tot / path.p_path
    rel_sq = 0.0
    if n_total > 0:
        rel_sq += (p_tot_err / p_tot) ** 2
    if path.p_path_err:
        rel_sq += (path.p_path_err / path.p_path) ** 2
    p_s_err = p_s * math.sqrt(rel_sq)
    if p_s > 1.0 + 3 * p_s_err:
        raise CalibrationError(
            f"corrected probability {p_s:.3f} exceeds one; path efficiency "
            "and data are inconsistent")
    return EfficiencyResult(p_tot=p_tot, p_tot_err=p_tot_err,
                            p_s=p_s, p_s_err=p_s_err)


# ---------------------------------------------------------------------------
# photon trains
# ---------------------------------------------------------------------------

@dataclass
class TrainStats:
    """Per-slot and consecutive detection statistics of photon trains."""

    n_slots: int
    attempts: int
    p_slot: np.ndarray           # detection probability per slot
    p_consecutive: np.ndarray    # P(n): all of slots 1..n fired
    slot_counts: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.p_consecutive) > 1e-12):
            raise ValueError("P(n) must be non-increasing")


def train_statistics(tags, windows):
    """Slot-resolved statistics for sequences of photon-generation attempts.

    `windows` are disjoint, ordered (start, end) intervals in us.  An attempt
    scores slot i when at least one event falls inside window i; when several
    events land in one window only the earliest matters (and any event marks
    the slot, so the result is identical).
    """
    windows = [(float(a), float(b)) for a, b in windows]
    for (a, b) in windows:
        if b <= a:
            raise ValueError(f"window ({a}, {b}) is empty")
    for (a0, b0), (a1, b1) in zip(windows, windows[1:]):
        if a1 < b0:
            raise ValueError("slot windows must be disjoint and ordered")
    n_slots = len(windows)
    hit = np.zeros((tags.attempts, n_slots), dtype=bool)
    for t, a in zip(tags.times, tags.attempt_index):
        for s, (lo, hi) in enumerate(windows):
            if lo <= t < hi:
                hit[a, s] = True
                break
    p_slot = hit.mean(axis=0)
    consec = np.cumprod(hit, axis=1, dtype=bool)
    p_consec = consec.mean(axis=0)
    return TrainStats(n_slots=n_slots, attempts=tags.attempts,
                      p_slot=p_slot, p_consecutive=p_consec,
                      slot_counts=hit.sum(axis=0).astype(float))


@dataclass(frozen=True)
class GeometricFit:
    """Weighted fit of P(n) = p^n with residual diagnostics.

    reduced_chi2 tests the consecutive-detection residuals (whitened over
    the independent increments of log P); slot_chi2 tests the geometric
    model's premise that every slot fires with the same probability.
    """

    p: float
    stderr: float
    reduced_chi2: float
    slot_chi2: float
    n_points: int

    @property
    def geometric_ok(self):
        # either statistic near one for independent constant-p slots;
        # drifting or correlated slot probabilities inflate them
        return self.reduced_chi2 < 3.0 and self.slot_chi2 < 3.0


def fit_geometric(stats):
    """Weighted least squares of log P(n) = n log p.

    The point estimate weights each log P(n) by its binomial variance; zero
    entries carry no information for the log model and are dropped.  The
    consecutive probabilities are nested indicators, so P(m) and P(n) are
    correlated with Cov = P(max)(1 - P(min))/k; the standard error and the
    residual chi-square use that full covariance (sandwich variance of the
    weighted estimator, whitened residuals), which keeps the quoted error
    honest where a diagonal treatment undercovers.
    """
    n = np.arange(1, stats.n_slots + 1, dtype=float)
    pn = np.asarray(stats.p_consecutive, dtype=float)
    keep = pn > 0
    n, pn = n[keep], pn[keep]
    if n.size < 2:
        raise ValueError("need at least two nonzero P(n) points")
    k = stats.attempts
    var_log = (1 - pn) / (k * pn)
    # a noiseless P(n)=p^n input has zero variance; fall back to uniform
    if np.all(var_log == 0):
        slope = float(np.sum(n * np.log(pn)) / np.sum(n * n))
        return GeometricFit(p=float(math.exp(slope)), stderr=0.0,
                            reduced_chi2=0.0, slot_chi2=0.0,
                            n_points=int(n.size))
    var_log = np.where(var_log == 0, np.min(var_log[var_log > 0]), var_log)
    w = 1.0 / var_log
    y = np.log(pn)
    denom = float(np.sum(w * n * n))
    slope = float(np.sum(w * n * y) / denom)
    # Cov(log P(m), log P(n)) = (1 - P(min(m,n))) / (k P(min(m,n)))
    idx_min = np.minimum.outer(np.arange(n.size), np.arange(n.size))
    cov = ((1 - pn) / (k * pn))[idx_min]
    a = w * n / denom                      # slope = a . y
    var_slope = float(a @ cov @ a)
    # chi-square over the increments of log P, which are independent
    # conditional binomials: exactly calibrated, no matrix inversion
    p_prev = np.concatenate(([1.0], pn[:-1]))
    dn = n - np.concatenate(([0.0], n[:-1]))
    incr = y - np.concatenate(([0.0], y[:-1]))
    cond = pn / p_prev
    v_incr = (1 - cond) / (k * pn)
    v_incr = np.where(v_incr <= 0, np.max(v_incr) + 1e-300, v_incr)
    chi2 = float(np.sum((incr - dn * slope) ** 2 / v_incr))
    dof = max(1, n.size - 1)
    p = math.exp(slope)
    # slot homogeneity: under the geometric model every slot fires with
    # probability p, so per-slot rates scatter only binomially around it
    ps = np.asarray(stats.p_slot, dtype=float)
    var_slot = np.maximum(ps * (1 - ps), 1e-300) / k
    slot_chi2 = float(np.sum((ps - p) ** 2 / var_slot)) / max(1, ps.size - 1)
    return GeometricFit(p=p, stderr=p * math.sqrt(var_slope),
                        reduced_chi2=chi2 / dof, slot_chi2=slot_chi2,
                        n_points=int(n.size))


def background_rate_estimate(tags, windows):
    """Events per second outside all slot windows (diagnostic only).

    Efficiencies are reported without background subtraction; this estimate
    just makes an anomalous background visible.
    """
    lo, hi = tags.span
    inside = np.zeros(tags.times.shape, dtype=bool)
    covered = 0.0
    for (a, b) in windows:
        inside |= (tags.times >= a) & (tags.times < b)
        covered += min(b, hi) - max(a, lo)
    outside_time_us = max((hi - lo) - covered, 0.0) * tags.attempts
    if outside_time_us == 0:
        return 0.0
    n_out = int(np.sum(~inside))
    return n_out / (outside_time_us * 1e-6)
